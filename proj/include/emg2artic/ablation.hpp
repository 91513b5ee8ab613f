#pragma once

// Electrode ablation: remove-one and use-only-one sweeps, drop-rate heatmaps
// and coverage-driven electrode subset selection. Electrode ids are 1-based.

#include "emg2artic/corpus.hpp"
#include "emg2artic/eval_metrics.hpp"
#include "emg2artic/trainer.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace emg2artic::ablation {

inline constexpr int kElectrodes = 8;

struct ElectrodeSet {
  std::vector<int> ids;  // ascending, unique, 1-based

  /// Sorts and checks ids against n_channels; throws std::invalid_argument.
  static ElectrodeSet of(std::vector<int> ids, int n_channels = kElectrodes);
  static ElectrodeSet all(int n_channels = kElectrodes);
  /// "2,4,6"
  std::string label() const;
  std::size_t size() const { return ids.size(); }
  bool contains(int id) const;
};

/// Parses "2,4,6".
ElectrodeSet parse_electrodes(const std::string& text, int n_channels = kElectrodes);

enum class Kind { Full, RemoveOne, UseOnlyOne, Subset };

struct Condition {
  Kind kind = Kind::Full;
  int electrode = 0;    // RemoveOne / UseOnlyOne
  ElectrodeSet subset;  // Subset

  static Condition full() { return {}; }
  static Condition remove_one(int id) { return {Kind::RemoveOne, id, {}}; }
  static Condition use_only(int id) { return {Kind::UseOnlyOne, id, {}}; }
  static Condition subset_of(ElectrodeSet s) { return {Kind::Subset, 0, std::move(s)}; }

  ElectrodeSet electrodes(int n_channels = kElectrodes) const;
  /// "full", "remove_3", "useonly_3", "subset_2-4-6"
  std::string name() const;
  /// "full", "remove", "useonly", "subset"
  std::string family() const;
};

/// Member channels only, in ascending id order.
Corpus mask_electrodes(const Corpus& corpus, const ElectrodeSet& set);

struct RunSpec {
  EncoderConfig model = EncoderConfig::tiny();
  LossWeights loss;
  TrainConfig train;
};

/// Seed of a condition's training run: derive_seed(base, fnv1a(name)).
std::uint64_t condition_seed(std::uint64_t base, const Condition& c);

struct ConditionResult {
  Condition condition;
  CorrelationReport report;
  int best_epoch = 0;
  double seconds = 0.0;
};

/// Retrains from scratch on the masked splits and evaluates the
/// best-validation parameters on the masked test split. With a non-empty
/// out_dir the run's checkpoint, history and report are written there.
ConditionResult run_condition(const CorpusSplits& splits, const Condition& condition, const RunSpec& spec,
                              const std::filesystem::path& out_dir = {});

enum class Family { Remove, UseOnly, Both };

Family parse_family(const std::string& text);
/// Full first, then the requested families in electrode order.
std::vector<Condition> sweep_conditions(Family family, int n_channels = kElectrodes);

/// Drop rates, rows = electrodes 1..8, columns = feature groups
/// (UL, LL, LI, TT, TB, TD, pitch, loudness).
struct Heatmap {
  Kind family = Kind::RemoveOne;
  MatD drop;

  MatD ema() const { return drop.leftCols(kNumEmaSensors); }
  VecD pitch() const { return drop.col(kNumEmaSensors); }
  VecD loudness() const { return drop.col(kNumEmaSensors + 1); }
  /// Electrode most associated with a group: the largest drop when it is
  /// removed, the smallest drop when it is used alone. Lower id wins ties.
  int strongest(int group) const;
};

/// Needs the Full result and every condition of `family` (RemoveOne or UseOnlyOne).
Heatmap build_heatmap(const std::vector<ConditionResult>& results, Kind family);

struct SubsetPick {
  int electrode = 0;
  std::string group;  // feature group this electrode covers
  double score = 0.0; // its use-only correlation on that group
};

struct SubsetSelection {
  ElectrodeSet set;
  std::vector<SubsetPick> picks;
};

/// Greedy coverage over use-only-one reports (see the ledger entry on the
/// fill rule once every group is covered).
SubsetSelection select_subset(const std::vector<ConditionResult>& results, int k);

struct SweepResult {
  std::vector<ConditionResult> runs;
  bool has_remove = false, has_useonly = false;
  Heatmap remove, useonly;
};

/// Runs conditions on up to `workers` threads; results come back in
/// condition order regardless of scheduling.
SweepResult run_sweep(const CorpusSplits& splits, const std::vector<Condition>& conditions, const RunSpec& spec,
                      int workers, const std::filesystem::path& out_dir = {});

/// Header UL,LL,LI,TT,TB,TD, then one row per electrode (row i is electrode i + 1).
std::string heatmap_csv(const Heatmap& h);
/// {"drop_rate": [{"electrode": 1, "UL": ...}, ...], "strongest_electrode": {...}}
nlohmann::json heatmap_json(const Heatmap& h);
Heatmap heatmap_from_json(const nlohmann::json& doc, Kind family);
std::string heatmap_svg(const Heatmap& h, const std::string& title);
nlohmann::json to_json(const SweepResult& sweep, const RunSpec& spec);
/// ablation_report.json, heatmap_{remove,useonly}.{csv,svg}.
void write_sweep_outputs(const SweepResult& sweep, const RunSpec& spec, const std::filesystem::path& out_dir);

}  // namespace emg2artic::ablation
