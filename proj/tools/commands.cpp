#include "commands.hpp"

#include "emg2artic/ablation.hpp"
#include "emg2artic/config.hpp"
#include "emg2artic/io.hpp"
#include "emg2artic/log.hpp"
#include "emg2artic/rng.hpp"
#include "emg2artic/svg.hpp"
#include "emg2artic/synth_data.hpp"
#include "emg2artic/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <tuple>
#include <stdexcept>

#ifndef EMG2ARTIC_VERSION
#define EMG2ARTIC_VERSION "unknown"
#endif

namespace emg2artic::cli {

using nlohmann::json;

namespace {

config::PipelineConfig load_config(const Globals& g) {
  config::PipelineConfig c = g.config.empty() ? config::PipelineConfig{} : config::load(g.config);
  if (g.seed) c.set_seed(*g.seed);
  return c;
}

std::string hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Stage timer plus the manifest body. The run id hashes everything that
/// determines the outputs, so identical invocations share an id.
class Manifest {
 public:
  Manifest(const Globals& g, std::string command, const config::PipelineConfig& cfg, const fs::path& corpus)
      : command_(std::move(command)) {
    doc_ = {{"command", command_},
            {"command_line", g.command_line},
            {"config_path", g.config.empty() ? json(nullptr) : json(fs::absolute(g.config).string())},
            {"corpus", corpus.empty() ? json(nullptr) : json(fs::absolute(corpus).string())},
            {"seeds", {{"synth", cfg.synth.seed}, {"train", cfg.train.seed}}},
            {"config", config::to_json(cfg)},
            {"tool_version", EMG2ARTIC_VERSION},
            {"timings_s", json::object()}};
    doc_["run_id"] = command_ + "-" + hex(fnv1a(doc_["config"].dump() + doc_["corpus"].dump() + command_)).substr(0, 10);
    t_ = std::chrono::steady_clock::now();
  }

  std::string run_id() const { return doc_["run_id"]; }
  void set(const std::string& key, json value) { doc_[key] = std::move(value); }

  void stage(const std::string& name) {
    const auto now = std::chrono::steady_clock::now();
    doc_["timings_s"][name] = std::chrono::duration<double>(now - t_).count();
    t_ = now;
  }

  /// One manifest per directory: earlier commands on the same directory are
  /// kept under "history".
  void write(const fs::path& dir) const {
    fs::create_directories(dir);
    const fs::path p = dir / kManifestName;
    json out = doc_;
    json history = json::array();
    if (fs::exists(p)) {
      json old = io::read_json(p);
      if (old.contains("history")) history = old["history"];
      old.erase("history");
      history.push_back(old);
    }
    out["history"] = history;
    io::write_json(p, out);
  }

 private:
  std::string command_;
  json doc_;
  std::chrono::steady_clock::time_point t_;
};

void require_dir(const fs::path& p, const char* what) {
  if (!fs::is_directory(p)) throw std::runtime_error(std::string(what) + " not found: " + p.string());
}

void print_report(std::FILE* o, const CorrelationReport& rep) {
  std::fprintf(o, "%-10s %8s %8s %8s %5s\n", "feature", "r", "ci_low", "ci_high", "n");
  for (const auto& e : rep.entries)
    std::fprintf(o, "%-10s %8.3f %8.3f %8.3f %5d\n", e.name.c_str(), e.r, e.ci_low, e.ci_high, e.n);
}

std::string report_svg(const CorrelationReport& rep, const std::string& title) {
  std::vector<std::string> labels;
  std::vector<double> r, lo, hi;
  double ymin = 0.0;
  for (const auto& e : rep.entries) {
    labels.push_back(e.name);
    r.push_back(e.r);
    lo.push_back(e.ci_low);
    hi.push_back(e.ci_high);
    if (std::isfinite(e.ci_low)) ymin = std::min(ymin, std::floor(e.ci_low * 10.0) / 10.0);
  }
  return svg::bar_chart(labels, r, lo, hi, title, std::max(ymin, -1.0), 1.0);
}

}  // namespace

int cmd_synth(const Globals& g) {
  if (g.out.empty()) throw std::invalid_argument("synth needs --out");
  const config::PipelineConfig cfg = load_config(g);
  if (fs::exists(g.out) && !fs::is_empty(g.out)) {
    if (!g.force) throw std::runtime_error(g.out.string() + " is not empty (use --force to regenerate)");
    fs::remove_all(g.out);
  }
  Manifest m(g, "synth", cfg, {});
  const synth::CorpusSummary s = synth::gen_corpus(cfg.synth, g.out);
  m.stage("generate");
  m.set("corpus", fs::absolute(g.out).string());
  m.set("summary", {{"utterances", s.n_utterances}, {"total_duration_s", s.total_duration_s}});
  m.write(g.out);
  std::fprintf(g.console, "%d utterances (train %d, val %d, test %d), %.1f s of EMG written to %s\n", s.n_utterances,
              cfg.synth.n_train, cfg.synth.n_val, cfg.synth.n_test, s.total_duration_s, g.out.string().c_str());
  return 0;
}

int cmd_preprocess(const Globals& g, const fs::path& corpus) {
  require_dir(corpus, "corpus");
  const config::PipelineConfig cfg = load_config(g);
  Manifest m(g, "preprocess", cfg, corpus);
  int done = 0, skipped = 0;
  std::vector<std::pair<std::string, std::string>> failures;
  bool any_split = false;
  for (auto split : kSplitNames) {
    const fs::path split_dir = corpus / std::string(split);
    if (!fs::is_directory(split_dir)) continue;
    any_split = true;
    for (const auto& dir : list_utterances(split_dir)) {
      try {
        if (has_preprocessed(dir) && !g.force) {
          ++skipped;
          continue;
        }
        validate_utterance(dir);
        write_preprocessed(dir, signal::preprocess_recording(read_raw_emg(dir), cfg.preprocess), cfg.preprocess);
        ++done;
      } catch (const std::exception& e) {
        failures.emplace_back(dir.string(), e.what());
      }
    }
  }
  if (!any_split) throw std::runtime_error(corpus.string() + " has no train, val or test split");
  m.stage("preprocess");
  json failed = json::array();
  for (const auto& [dir, why] : failures) failed.push_back({{"utterance", dir}, {"error", why}});
  m.set("summary", {{"processed", done}, {"skipped", skipped}, {"failed", failed}});
  m.write(corpus);
  std::fprintf(g.console, "preprocessed %d, skipped %d (already done), failed %zu\n", done, skipped, failures.size());
  for (const auto& [dir, why] : failures) std::fprintf(g.console, "  FAILED %s: %s\n", dir.c_str(), why.c_str());
  return failures.empty() ? 0 : 1;
}

int cmd_train(const Globals& g, const fs::path& corpus, std::optional<int> epochs) {
  require_dir(corpus, "corpus");
  config::PipelineConfig cfg = load_config(g);
  if (epochs) cfg.train.n_epochs = *epochs;
  cfg.train.validate();
  Manifest m(g, "train", cfg, corpus);
  const fs::path out = g.out.empty() ? fs::path("runs") / m.run_id() : g.out;
  if (fs::exists(out / "history.csv") && !g.force)
    throw std::runtime_error(out.string() + " already holds a run (use --force to overwrite)");

  const CorpusSplits splits = load_corpus(corpus, cfg.preprocess);
  m.stage("load");
  EncoderConfig model = cfg.model;
  model.n_emg_channels = splits.train.n_channels();
  fs::create_directories(out);
  io::write_json(out / "train_config.json", config::to_json(cfg));
  const TrainResult r = train(splits.train, splits.val, model, cfg.loss, cfg.train);
  m.stage("train");
  save_checkpoint(out / "checkpoint_final", r.final_params, model, cfg.loss);
  save_checkpoint(out / "checkpoint_best", r.best_params, model, cfg.loss);
  io::write_text(out / "history.csv", r.history.to_csv());
  m.stage("write");
  m.set("summary", {{"epochs", cfg.train.n_epochs}, {"best_epoch", r.best_epoch}, {"best_val_loss", r.best_val_loss}});
  m.write(out);
  std::fprintf(g.console, "trained %d epochs, best epoch %d (val loss %.4f); run written to %s\n", cfg.train.n_epochs, r.best_epoch,
              r.best_val_loss, out.string().c_str());
  return 0;
}

int cmd_eval(const Globals& g, const fs::path& run_dir, const fs::path& corpus, bool oracle, const std::string& which,
             const std::string& split) {
  require_dir(corpus, "corpus");
  if (which != "best" && which != "final") throw std::invalid_argument("--checkpoint must be best or final");
  const config::PipelineConfig cfg = load_config(g);
  Manifest m(g, "eval", cfg, corpus);
  const fs::path out = g.out.empty() ? run_dir : g.out;
  const Corpus data = load_split(corpus, split, cfg.preprocess);
  m.stage("load");
  CorrelationReport rep;
  if (oracle) {
    std::vector<MatD> preds;
    for (const auto& u : data.utterances) preds.push_back(target_matrix(u.targets));
    rep = evaluate_predictions(preds, data, cfg.train.seed);
  } else {
    const fs::path ck = run_dir / ("checkpoint_" + which);
    if (!fs::exists(ck / "weights.bin")) throw std::runtime_error("missing checkpoint " + ck.string());
    Checkpoint c = load_checkpoint(ck);
    if (c.model.n_emg_channels != data.n_channels())
      throw std::runtime_error("checkpoint expects " + std::to_string(c.model.n_emg_channels) + " channels, corpus has " +
                               std::to_string(data.n_channels()));
    rep = evaluate(c.params, c.model, data, cfg.train.seed);
    m.set("checkpoint", fs::absolute(ck).string());
  }
  m.stage("evaluate");
  fs::create_directories(out);
  io::write_json(out / "correlation_report.json", to_json(rep));
  io::write_text(out / "correlation_report.csv", to_csv(rep));
  m.set("summary", {{"split", split}, {"oracle", oracle}, {"ema_mean", rep.ema_mean()}, {"loudness", rep.loudness()},
                    {"pitch", rep.pitch()}});
  m.write(out);
  print_report(g.console, rep);
  return 0;
}

int cmd_ablate(const Globals& g, const fs::path& corpus, std::optional<std::string> family,
               const std::vector<std::string>& subsets, int select_k) {
  require_dir(corpus, "corpus");
  const config::PipelineConfig cfg = load_config(g);
  const fs::path out = g.out.empty() ? fs::path("ablation") : g.out;
  if (fs::exists(out / "ablation_report.json") && !g.force)
    throw std::runtime_error(out.string() + " already holds a sweep (use --force to overwrite)");

  std::vector<ablation::Condition> conditions;
  if (family || subsets.empty()) conditions = ablation::sweep_conditions(ablation::parse_family(family.value_or("both")));
  else conditions.push_back(ablation::Condition::full());
  for (const auto& s : subsets) conditions.push_back(ablation::Condition::subset_of(ablation::parse_electrodes(s)));

  Manifest m(g, "ablate", cfg, corpus);
  const CorpusSplits splits = load_corpus(corpus, cfg.preprocess);
  for (const auto& c : conditions) c.electrodes(splits.train.n_channels());
  m.stage("load");
  log::info("ablation: %zu runs on %d worker(s)", conditions.size(), g.workers);
  const ablation::RunSpec spec{cfg.model, cfg.loss, cfg.train};
  const ablation::SweepResult sweep = ablation::run_sweep(splits, conditions, spec, g.workers, out);
  m.stage("sweep");

  std::fprintf(g.console, "%-16s %8s %8s %8s\n", "condition", "ema_r", "loud_r", "pitch_r");
  for (const auto& r : sweep.runs)
    std::fprintf(g.console, "%-16s %8.3f %8.3f %8.3f\n", r.condition.name().c_str(), r.report.ema_mean(), r.report.loudness(),
                r.report.pitch());
  json timings = json::object();
  for (const auto& r : sweep.runs) timings[r.condition.name()] = r.seconds;
  json summary = {{"runs", sweep.runs.size()}, {"run_seconds", timings}};
  if (select_k > 0) {
    if (!sweep.has_useonly) throw std::runtime_error("--select needs the use-only family");
    const ablation::SubsetSelection sel = ablation::select_subset(sweep.runs, select_k);
    json picks = json::array();
    for (const auto& p : sel.picks) picks.push_back({{"electrode", p.electrode}, {"group", p.group}, {"score", p.score}});
    io::write_json(out / "subset_selection.json", {{"k", select_k}, {"electrodes", sel.set.ids}, {"picks", picks}});
    summary["subset"] = sel.set.ids;
    std::fprintf(g.console, "selected electrodes {%s}\n", sel.set.label().c_str());
    for (const auto& p : sel.picks) std::fprintf(g.console, "  %d covers %s (use-only r %.3f)\n", p.electrode, p.group.c_str(), p.score);
  }
  m.set("summary", summary);
  m.write(out);
  return 0;
}

namespace {

void print_heatmap(std::FILE* o, const ablation::Heatmap& h, const char* title) {
  std::fprintf(o, "\n%s (drop rate)\n%-10s", title, "electrode");
  for (auto n : kFeatureGroupNames) std::fprintf(o, " %8s", std::string(n).c_str());
  std::fprintf(o, "\n");
  for (Eigen::Index e = 0; e < h.drop.rows(); ++e) {
    std::fprintf(o, "%-10lld", static_cast<long long>(e + 1));
    for (int gi = 0; gi < kNumFeatureGroups; ++gi) std::fprintf(o, " %8.3f", h.drop(e, gi));
    std::fprintf(o, "\n");
  }
  std::fprintf(o, "%-10s", "strongest");
  for (int gi = 0; gi < kNumFeatureGroups; ++gi) std::fprintf(o, " %8d", h.strongest(gi));
  std::fprintf(o, "\n");
}

}  // namespace

int cmd_report(const Globals& g, const fs::path& dir) {
  require_dir(dir, "directory");
  const fs::path out = g.out.empty() ? dir : g.out;
  fs::create_directories(out);
  int figures = 0;
  bool recognised = false;
  try {
    if (fs::exists(dir / "correlation_report.json")) {
      recognised = true;
      const CorrelationReport rep = report_from_json(io::read_json(dir / "correlation_report.json"));
      print_report(g.console, rep);
      io::write_text(out / "correlation_bars.svg", report_svg(rep, "Pearson r per feature (95% CI)"));
      ++figures;
    }
    if (fs::exists(dir / "history.csv")) {
      recognised = true;
      std::ifstream in(dir / "history.csv");
      std::string line;
      int lines = 0;
      while (std::getline(in, line)) ++lines;
      std::fprintf(g.console, "history: %d epoch(s) recorded\n", std::max(lines - 1, 0));
    }
    if (fs::exists(dir / "ablation_report.json")) {
      recognised = true;
      const json doc = io::read_json(dir / "ablation_report.json");
      std::fprintf(g.console, "%-16s %8s %8s %8s\n", "condition", "ema_r", "loud_r", "pitch_r");
      for (const auto& r : doc.at("runs")) {
        const CorrelationReport rep = report_from_json(r.at("report"));
        std::fprintf(g.console, "%-16s %8.3f %8.3f %8.3f\n", r.at("condition").get<std::string>().c_str(), rep.ema_mean(),
                    rep.loudness(), rep.pitch());
        if (r.at("condition") == "full") {
          io::write_text(out / "correlation_bars_full.svg", report_svg(rep, "Full electrode set: Pearson r (95% CI)"));
          ++figures;
        }
      }
      for (const auto& [key, kind, title] :
           {std::tuple{"heatmap_remove", ablation::Kind::RemoveOne, "one electrode removed"},
            std::tuple{"heatmap_useonly", ablation::Kind::UseOnlyOne, "one electrode used alone"}}) {
        if (!doc.contains(key)) continue;
        const ablation::Heatmap h = ablation::heatmap_from_json(doc.at(key), kind);
        print_heatmap(g.console, h, title);
        io::write_text(out / (std::string(key) + ".svg"), ablation::heatmap_svg(h, std::string("Drop rate, ") + title));
        ++figures;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed report in ") + dir.string() + ": " + e.what());
  }
  if (!recognised)
    throw std::runtime_error("unrecognized directory layout: " + dir.string() +
                             " has no correlation_report.json, history.csv or ablation_report.json");
  std::fprintf(g.console, "%d figure(s) written to %s\n", figures, out.string().c_str());
  return 0;
}

}  // namespace emg2artic::cli
