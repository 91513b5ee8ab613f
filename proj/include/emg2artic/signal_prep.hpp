#pragma once

// EMG preprocessing chain: powerline notch, drift high-pass, soft de-spiking
// and rational-rate resampling. All stages run in double precision and are
// pure functions of their arguments.

#include "emg2artic/types.hpp"

#include <span>
#include <string>
#include <vector>

namespace emg2artic::signal {

/// Second-order section in transposed direct form II, a0 normalised to 1.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  /// DC gain H(z=1).
  double dc_gain() const { return (b0 + b1 + b2) / (1.0 + a1 + a2); }
};

using SosCascade = std::vector<Biquad>;

SosCascade notch_sections(double rate_hz, double freq_hz, double q, int n_harmonics);
SosCascade butterworth_highpass(double rate_hz, double cutoff_hz, int order);
SosCascade butterworth_lowpass(double rate_hz, double cutoff_hz, int order);

/// Magnitude response |H(e^{jw})| of a cascade at `freq_hz`.
double magnitude_response(const SosCascade& sos, double rate_hz, double freq_hz);

/// Single causal pass. The section states start at the steady-state
/// response to a constant equal to the first input sample.
std::vector<double> sos_filter(const SosCascade& sos, std::span<const double> x);

/// Forward-backward (zero-phase) application of a cascade.
std::vector<double> sos_filtfilt(const SosCascade& sos, std::span<const double> x);

// ---- operations on sample sequences ----

std::vector<double> notch_filter(std::span<const double> x, double rate_hz, double freq_hz,
                                 double q, int n_harmonics);
std::vector<double> highpass_filter(std::span<const double> x, double rate_hz, double cutoff_hz,
                                    int order);
std::vector<double> soft_despike(std::span<const double> x, int window, double z_threshold);
std::vector<double> resample(std::span<const double> x, double from_rate_hz, double to_rate_hz);

/// Output length rule shared by the resamplers: round(n * to / from).
std::size_t resampled_length(std::size_t n, double from_rate_hz, double to_rate_hz);

// ---- recordings ----

struct RawEmgRecording {
  MatF samples;  // [n_channels, n_samples], channel-major
  double sample_rate_hz = 1000.0;
  std::string utterance_id;

  Eigen::Index n_channels() const { return samples.rows(); }
  Eigen::Index n_samples() const { return samples.cols(); }

  /// Throws std::invalid_argument on an empty recording or bad rate.
  void validate() const;
};

struct PreprocessConfig {
  double notch_freq_hz = 60.0;
  int notch_harmonics = 5;
  double notch_q = 30.0;
  double hp_cutoff_hz = 2.0;
  int hp_order = 4;
  int despike_window = 101;
  double despike_z_threshold = 5.0;
  double target_rate_hz = 689.0;

  void validate(double sample_rate_hz) const;
};

struct PreprocessedEmg {
  MatF samples;  // [n_channels, n_samples] at sample_rate_hz
  double sample_rate_hz = 0.0;
  std::string source_id;
};

/// notch -> high-pass -> de-spike -> resample, per channel. Errors from a
/// stage are rethrown with the channel index prefixed.
PreprocessedEmg preprocess_recording(const RawEmgRecording& rec, const PreprocessConfig& cfg);

}  // namespace emg2artic::signal
