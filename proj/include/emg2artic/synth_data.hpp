#pragma once

// Synthetic EMG/articulatory corpus with a known channel -> feature structure.
//
// Every EMG channel c carries a slow motor drive d_c(t) (a standardized sum
// of sinusoids) as the log-envelope of band-limited noise:
//   emg_c = exp(kEnvelopeGain * d_c) * carrier_c + noise_std * white.
// Target dimension f mixes the drives of the channels that the dependency
// matrix assigns to it, each with a fixed sign and a short lag, plus a small
// private latent nobody can predict:
//   u_f = rho * sum_c dep[c,f] s_cf d_c(t - lag_cf) / |dep[:,f]| + sqrt(1 - rho^2) z_f(t)
// EMA dims are u_f, pitch is squashed into the normalised range and loudness
// is softplus(u_f).

#include "emg2artic/feature_targets.hpp"
#include "emg2artic/rng.hpp"
#include "emg2artic/signal_prep.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace emg2artic::synth {

inline constexpr int kChannels = 8;
inline constexpr int kComponents = 6;
inline constexpr double kEnvelopeGain = 0.7;
inline constexpr double kMinFreqHz = 0.5;
inline constexpr double kMaxFreqHz = 8.0;
inline constexpr double kPitchLow = -1.0;
inline constexpr double kPitchHigh = 1.5;
/// Delay from a channel drive to the targets it moves.
inline constexpr double kMinLagS = 0.005;
inline constexpr double kMaxLagS = 0.020;

/// [8, 14] non-negative weights; row c is electrode c + 1.
using DependencyMatrix = MatD;

DependencyMatrix default_dependency();
void validate_dependency(const DependencyMatrix& dep);

/// A zero-mean sum of sinusoids scaled to unit variance.
struct Sinusoids {
  std::array<double, kComponents> freq_hz{}, amp{}, phase{};

  static Sinusoids draw(Rng& rng);
  double operator()(double t) const;
};

/// Fixed per corpus: signs and lags of every (channel, target) route.
struct Mixing {
  DependencyMatrix dependency;
  MatD sign;    // [8, 14], +-1
  MatD lag_s;   // [8, 14]
  double coupling = 0.97;

  static Mixing draw(const DependencyMatrix& dep, double coupling, std::uint64_t seed);
};

/// Per-utterance randomness: channel drives and private target latents.
struct Sources {
  std::array<Sinusoids, kChannels> drives;
  std::array<Sinusoids, kTargetDims> latents;

  static Sources draw(std::uint64_t seed);
};

/// Maps a standardized stream into (kPitchLow, kPitchHigh).
double shape_pitch(double u);
double softplus(double u);

/// 14 x round(duration * rate) standardized latent streams with the target
/// shaping applied (pitch squashed, loudness softplus).
MatD gen_latent_trajectories(double duration_s, double rate_hz, std::uint64_t seed);

/// [8, n] drive values at t = k / rate.
MatD drive_streams(const Sources& src, Eigen::Index n, double rate_hz);

/// Pre-shaping mixtures u, [14, n] at t = k / rate.
MatD mixed_streams(const Sources& src, const Mixing& mix, Eigen::Index n, double rate_hz);

/// [8, n] EMG. Carriers are unit-variance 20-450 Hz noise; rng supplies the
/// carrier and additive noise draws.
MatF gen_emg(const Sources& src, Eigen::Index n, double rate_hz, double noise_std, Rng& rng);

struct SynthConfig {
  int n_train = 200;
  int n_val = 20;
  int n_test = 20;
  double min_duration_s = 2.0;
  double max_duration_s = 4.0;
  double emg_rate_hz = 1000.0;
  double target_rate_hz = kSourceTargetRateHz;
  DependencyMatrix dependency = default_dependency();
  double noise_std = 0.05;
  double coupling = 0.97;
  int phoneme_vocab = kDefaultPhonemeVocab;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Utterance {
  signal::RawEmgRecording emg;
  ArticulatoryTrack targets;
  PhonemeTrack phonemes;
};

/// Utterance `index` (global over train, val, test) of the corpus.
Utterance gen_utterance(const SynthConfig& cfg, const Mixing& mix, int index, const std::string& id);

struct CorpusSummary {
  int n_utterances = 0;
  double total_duration_s = 0.0;
};

/// Writes <out>/{train,val,test}/<id>/ and <out>/ground_truth.json.
CorpusSummary gen_corpus(const SynthConfig& cfg, const std::filesystem::path& out_dir);

/// For each target group (UL..TD, pitch, loudness) the 1-based electrode
/// with the largest dependency weight summed over the group's dims.
struct GroundTruth {
  DependencyMatrix dependency;
  std::uint64_t seed = 0;
  std::vector<std::string> groups;
  std::vector<int> driving_channel;

  int driver(const std::string& group) const;
  static GroundTruth from_dependency(const DependencyMatrix& dep, std::uint64_t seed);
  static GroundTruth load(const std::filesystem::path& corpus_dir);
};

nlohmann::json ground_truth_json(const SynthConfig& cfg, const Mixing& mix);

}  // namespace emg2artic::synth
