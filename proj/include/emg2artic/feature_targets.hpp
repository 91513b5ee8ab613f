#pragma once

// Articulatory targets: 12-dim EMA, normalised pitch, loudness and frame-level
// phoneme ids, plus their resampling to the encoder frame rate.

#include "emg2artic/types.hpp"

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace emg2artic {

enum class EmaSensor : int { UL = 0, LL, LI, TT, TB, TD };
enum class Axis : int { X = 0, Y = 1 };

inline constexpr int kNumEmaSensors = 6;
inline constexpr int kEmaDims = 12;
/// 12 EMA + pitch + loudness, the row layout of targets.f32.
inline constexpr int kTargetDims = 14;
inline constexpr int kPitchColumn = 12;
inline constexpr int kLoudnessColumn = 13;
inline constexpr int kDefaultPhonemeVocab = 41;
inline constexpr double kTargetFrameRateHz = 86.16;
inline constexpr double kSourceTargetRateHz = 50.0;

inline constexpr std::array<std::string_view, kNumEmaSensors> kEmaSensorNames = {"UL", "LL", "LI",
                                                                                 "TT", "TB", "TD"};

constexpr int ema_dim(EmaSensor sensor, Axis axis) {
  return 2 * static_cast<int>(sensor) + static_cast<int>(axis);
}

/// "UL_x", "UL_y", ... in dimension order.
std::string ema_dim_name(int dim);
/// Column name in the 14-wide target layout (EMA names, "pitch", "loudness").
std::string target_dim_name(int dim);

/// Feature groups used for electrode attribution: the six EMA sensors, then
/// pitch and loudness.
inline constexpr int kNumFeatureGroups = 8;
inline constexpr std::array<std::string_view, kNumFeatureGroups> kFeatureGroupNames = {
    "UL", "LL", "LI", "TT", "TB", "TD", "pitch", "loudness"};
/// Target columns of group g.
std::vector<int> feature_group_dims(int group);
int feature_group_index(std::string_view name);

constexpr double normalize_pitch(double f0_hz) { return (f0_hz - 130.0) / 70.0; }
constexpr double denormalize_pitch(double v) { return v * 70.0 + 130.0; }

struct ArticulatoryTrack {
  MatF ema;          // [N, 12]
  VecF pitch;        // [N], normalised
  VecF loudness;     // [N]
  double frame_rate_hz = kTargetFrameRateHz;
  std::string utterance_id;

  Eigen::Index n_frames() const { return ema.rows(); }
  void validate() const;

  /// Frame-major [N, 14] view used by the file format and the loss.
  MatF as_rows() const;
  static ArticulatoryTrack from_rows(const MatF& rows, double frame_rate_hz, std::string id);
};

struct PhonemeTrack {
  std::vector<int> ids;
  int vocab_size = kDefaultPhonemeVocab;
  double frame_rate_hz = kTargetFrameRateHz;

  void validate() const;
};

/// Linear interpolation at k / to_rate for k < round(N * to / from).
ArticulatoryTrack resample_track(const ArticulatoryTrack& track, double to_rate_hz);
/// Nearest-neighbour variant for discrete labels.
PhonemeTrack resample_track(const PhonemeTrack& track, double to_rate_hz);

/// Largest usable common length of a prediction and a target stream.
/// Throws std::invalid_argument when the lengths differ by more than
/// kMaxAlignGap frames.
inline constexpr std::size_t kMaxAlignGap = 4;
std::size_t align_lengths(std::size_t pred_len, std::size_t target_len);

}  // namespace emg2artic
