#pragma once

// Subcommands of the emg2artic tool. Each returns the process exit code and
// throws on unusable input; main() turns exceptions into messages.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace emg2artic::cli {

namespace fs = std::filesystem;

struct Globals {
  std::optional<std::uint64_t> seed;
  fs::path config;  // empty: built-in defaults
  fs::path out;     // empty: command default
  bool force = false;
  int workers = 1;
  std::string command_line;
  std::FILE* console = stdout;  // summaries and tables
};

int cmd_synth(const Globals& g);
int cmd_preprocess(const Globals& g, const fs::path& corpus);
int cmd_train(const Globals& g, const fs::path& corpus, std::optional<int> epochs);
/// which: "best" or "final"; split: train, val or test.
int cmd_eval(const Globals& g, const fs::path& run_dir, const fs::path& corpus, bool oracle, const std::string& which,
             const std::string& split);
/// family empty with subsets given: subsets only (plus the full reference).
int cmd_ablate(const Globals& g, const fs::path& corpus, std::optional<std::string> family,
               const std::vector<std::string>& subsets, int select_k);
int cmd_report(const Globals& g, const fs::path& dir);

/// Name of the per-directory manifest.
inline constexpr const char* kManifestName = "run_manifest.json";

}  // namespace emg2artic::cli
