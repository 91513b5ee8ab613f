#include "emg2artic/feature_targets.hpp"

#include "emg2artic/signal_prep.hpp"

#include <cmath>
#include <stdexcept>

namespace emg2artic {

namespace {

struct Interp {
  Eigen::Index lo;
  Eigen::Index hi;
  double w;  // weight of hi
};

std::vector<Interp> linear_positions(Eigen::Index n_in, std::size_t n_out, double from, double to) {
  std::vector<Interp> pos(n_out);
  for (std::size_t k = 0; k < n_out; ++k) {
    const double p = static_cast<double>(k) * from / to;
    auto lo = static_cast<Eigen::Index>(std::floor(p));
    if (lo >= n_in - 1) {
      pos[k] = {n_in - 1, n_in - 1, 0.0};
    } else {
      pos[k] = {lo, lo + 1, p - static_cast<double>(lo)};
    }
  }
  return pos;
}

}  // namespace

std::string ema_dim_name(int dim) {
  if (dim < 0 || dim >= kEmaDims) throw std::out_of_range("ema dimension out of range");
  return std::string(kEmaSensorNames[static_cast<std::size_t>(dim / 2)]) + (dim % 2 == 0 ? "_x" : "_y");
}

std::string target_dim_name(int dim) {
  if (dim == kPitchColumn) return "pitch";
  if (dim == kLoudnessColumn) return "loudness";
  return ema_dim_name(dim);
}

std::vector<int> feature_group_dims(int group) {
  if (group < 0 || group >= kNumFeatureGroups) throw std::out_of_range("feature group out of range");
  if (group < kNumEmaSensors) return {2 * group, 2 * group + 1};
  return {group == kNumEmaSensors ? kPitchColumn : kLoudnessColumn};
}

int feature_group_index(std::string_view name) {
  for (int g = 0; g < kNumFeatureGroups; ++g)
    if (kFeatureGroupNames[static_cast<std::size_t>(g)] == name) return g;
  throw std::invalid_argument("unknown feature group: " + std::string(name));
}

void ArticulatoryTrack::validate() const {
  if (ema.cols() != kEmaDims) throw std::invalid_argument("EMA track must have 12 columns");
  if (ema.rows() < 1) throw std::invalid_argument("articulatory track is empty");
  if (pitch.size() != ema.rows() || loudness.size() != ema.rows())
    throw std::invalid_argument("articulatory streams differ in length");
  if (!(frame_rate_hz > 0.0)) throw std::invalid_argument("frame rate must be > 0");
}

MatF ArticulatoryTrack::as_rows() const {
  MatF rows(ema.rows(), kTargetDims);
  rows.leftCols(kEmaDims) = ema;
  rows.col(kPitchColumn) = pitch;
  rows.col(kLoudnessColumn) = loudness;
  return rows;
}

ArticulatoryTrack ArticulatoryTrack::from_rows(const MatF& rows, double frame_rate_hz, std::string id) {
  if (rows.cols() != kTargetDims) throw std::invalid_argument("target rows must have 14 columns");
  ArticulatoryTrack t;
  t.ema = rows.leftCols(kEmaDims);
  t.pitch = rows.col(kPitchColumn);
  t.loudness = rows.col(kLoudnessColumn);
  t.frame_rate_hz = frame_rate_hz;
  t.utterance_id = std::move(id);
  return t;
}

void PhonemeTrack::validate() const {
  if (vocab_size < 1) throw std::invalid_argument("phoneme vocabulary must be nonempty");
  for (int id : ids)
    if (id < 0 || id >= vocab_size) throw std::invalid_argument("phoneme id out of range");
}

ArticulatoryTrack resample_track(const ArticulatoryTrack& track, double to_rate_hz) {
  track.validate();
  if (!(to_rate_hz > 0.0)) throw std::invalid_argument("resample_track: rate must be > 0");
  if (to_rate_hz == track.frame_rate_hz) return track;
  const Eigen::Index n = track.n_frames();
  if (n < 2) throw std::invalid_argument("resample_track: need at least 2 frames to interpolate");
  const std::size_t n_out = signal::resampled_length(static_cast<std::size_t>(n), track.frame_rate_hz, to_rate_hz);
  const auto pos = linear_positions(n, n_out, track.frame_rate_hz, to_rate_hz);

  const MatF rows = track.as_rows();
  MatF out(static_cast<Eigen::Index>(n_out), kTargetDims);
  for (std::size_t k = 0; k < n_out; ++k) {
    const auto& p = pos[k];
    for (int d = 0; d < kTargetDims; ++d) {
      const double a = rows(p.lo, d);
      const double b = rows(p.hi, d);
      out(static_cast<Eigen::Index>(k), d) = static_cast<float>(a + p.w * (b - a));
    }
  }
  return ArticulatoryTrack::from_rows(out, to_rate_hz, track.utterance_id);
}

PhonemeTrack resample_track(const PhonemeTrack& track, double to_rate_hz) {
  track.validate();
  if (!(to_rate_hz > 0.0)) throw std::invalid_argument("resample_track: rate must be > 0");
  if (track.ids.empty()) throw std::invalid_argument("resample_track: empty phoneme track");
  if (to_rate_hz == track.frame_rate_hz) return track;
  const std::size_t n = track.ids.size();
  const std::size_t n_out = signal::resampled_length(n, track.frame_rate_hz, to_rate_hz);
  PhonemeTrack out;
  out.vocab_size = track.vocab_size;
  out.frame_rate_hz = to_rate_hz;
  out.ids.resize(n_out);
  for (std::size_t k = 0; k < n_out; ++k) {
    const double p = static_cast<double>(k) * track.frame_rate_hz / to_rate_hz;
    const auto idx = std::min<std::size_t>(n - 1, static_cast<std::size_t>(std::llround(p)));
    out.ids[k] = track.ids[idx];
  }
  return out;
}

std::size_t align_lengths(std::size_t pred_len, std::size_t target_len) {
  if (pred_len == 0 || target_len == 0) throw std::invalid_argument("align_lengths: empty stream");
  const std::size_t gap = pred_len > target_len ? pred_len - target_len : target_len - pred_len;
  if (gap > kMaxAlignGap)
    throw std::invalid_argument("align_lengths: prediction has " + std::to_string(pred_len) +
                                " frames but target has " + std::to_string(target_len));
  return std::min(pred_len, target_len);
}

}  // namespace emg2artic
