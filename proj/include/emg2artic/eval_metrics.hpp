#pragma once

// Correlation evaluation: per-utterance Pearson r per target dimension,
// aggregated as the mean over utterances with a percentile-bootstrap CI.

#include "emg2artic/corpus.hpp"
#include "emg2artic/model.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace emg2artic {

/// Raised for constant inputs, where r is undefined.
class UndefinedCorrelation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Product-moment correlation in binary64 (two-pass).
double pearson(std::span<const double> x, std::span<const double> y);

/// Percentile bootstrap of the mean. Deterministic given seed.
std::pair<double, double> bootstrap_ci(std::span<const double> values, double level = 0.95, int n_resamples = 1000,
                                       std::uint64_t seed = 0);

/// (r_full - r_cond) / r_full, unclamped.
double drop_rate(double r_full, double r_cond);

/// Mean that returns v exactly when every value equals v.
double stable_mean(std::span<const double> values);

/// r per target column for one utterance; NaN where undefined.
using DimCorrelations = std::array<double, kTargetDims>;

/// pred is [T, 14] in target column order; compared over align_lengths frames.
DimCorrelations correlate_utterance(const MatD& pred, const FrameTargets& target);

struct CorrelationEntry {
  std::string name;
  double r = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int n = 0;          // utterances contributing
  int n_skipped = 0;  // utterances where r was undefined
};

/// 12 EMA dims, 6 sensor means, EMA grand mean, loudness, pitch.
struct CorrelationReport {
  std::vector<CorrelationEntry> entries;
  int n_utterances = 0;

  const CorrelationEntry& at(std::string_view name) const;
  double r(std::string_view name) const { return at(name).r; }
  double ema_mean() const { return r("ema_mean"); }
  double loudness() const { return r("loudness"); }
  double pitch() const { return r("pitch"); }
  /// Per-sensor mean r, sensor in UL..TD order.
  double sensor(int s) const;
  /// Group value used by the ablation heatmaps: sensor means, then pitch and loudness.
  double group(int g) const;
};

inline constexpr int kReportRows = kEmaDims + kNumEmaSensors + 3;

CorrelationReport build_report(std::span<const DimCorrelations> per_utterance, std::uint64_t seed = 0);

/// [T_f, 14] predictions for one recording.
MatD infer(const MatD& emg, nn::ParamStore& params, const EncoderConfig& cfg);

CorrelationReport evaluate(nn::ParamStore& params, const EncoderConfig& cfg, const Corpus& corpus,
                           std::uint64_t seed = 0);
/// Scores externally supplied predictions (one [T, 14] matrix per utterance).
CorrelationReport evaluate_predictions(std::span<const MatD> predictions, const Corpus& corpus,
                                       std::uint64_t seed = 0);

/// The targets themselves as [N, 14] predictions.
MatD target_matrix(const FrameTargets& t);

nlohmann::json to_json(const CorrelationReport& report);
CorrelationReport report_from_json(const nlohmann::json& doc);
/// Header: name,r,ci_low,ci_high,n
std::string to_csv(const CorrelationReport& report);

}  // namespace emg2artic
