#include "commands.hpp"

#include "emg2artic/log.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <exception>

int main(int argc, char** argv) {
  namespace cli = emg2artic::cli;
  cli::Globals g;
  for (int i = 0; i < argc; ++i) g.command_line += (i ? " " : "") + std::string(argv[i]);

  CLI::App app{"Synthetic EMG to articulatory feature decoding"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Global seed (overrides every seeded config section)");
  app.add_option("--config", g.config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output directory");
  app.add_flag("--force", g.force, "Overwrite existing outputs");
  app.add_option("--workers", g.workers, "Parallel training runs (ablate)")->check(CLI::PositiveNumber);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus into --out");

  std::filesystem::path corpus, run_dir, dir;
  auto* prep = app.add_subcommand("preprocess", "Validate and preprocess every utterance of a corpus");
  prep->add_option("corpus", corpus)->required();

  std::optional<int> epochs;
  auto* train = app.add_subcommand("train", "Train an encoder; writes runs/<run_id>/ unless --out is given");
  train->add_option("corpus", corpus)->required();
  train->add_option("--epochs", epochs, "Override the configured epoch count")->check(CLI::NonNegativeNumber);

  bool oracle = false;
  std::string which = "best", split = "test";
  auto* eval = app.add_subcommand("eval", "Score a trained run on a corpus split");
  eval->add_option("run_dir", run_dir)->required();
  eval->add_option("corpus", corpus)->required();
  eval->add_flag("--oracle", oracle, "Score the ground-truth targets instead of a model");
  eval->add_option("--checkpoint", which)->check(CLI::IsMember({"best", "final"}));
  eval->add_option("--split", split)->check(CLI::IsMember({"train", "val", "test"}));

  std::optional<std::string> family;
  std::vector<std::string> subsets;
  int select_k = 0;
  auto* ablate = app.add_subcommand("ablate", "Electrode ablation sweep");
  ablate->add_option("corpus", corpus)->required();
  ablate->add_option("--family", family, "remove, useonly or both")->check(CLI::IsMember({"remove", "useonly", "both"}));
  ablate->add_option("--subset", subsets, "Electrode subset such as 2,4,6 (repeatable)");
  ablate->add_option("--select", select_k, "Choose a k-electrode subset from the use-only results")
      ->check(CLI::PositiveNumber);

  auto* report = app.add_subcommand("report", "Render figures and tables from a run, eval or ablation directory");
  report->add_option("dir", dir)->required();

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (seed_opt->count() > 0) g.seed = seed;

  try {
    if (synth->parsed()) return cli::cmd_synth(g);
    if (prep->parsed()) return cli::cmd_preprocess(g, corpus);
    if (train->parsed()) return cli::cmd_train(g, corpus, epochs);
    if (eval->parsed()) return cli::cmd_eval(g, run_dir, corpus, oracle, which, split);
    if (ablate->parsed()) return cli::cmd_ablate(g, corpus, family, subsets, select_k);
    if (report->parsed()) return cli::cmd_report(g, dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
