#include "emg2artic/signal_prep.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <optional>
#include <stdexcept>

namespace emg2artic::signal {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMadScale = 1.4826;
constexpr double kMadFloor = 1e-8;
constexpr double kKaiserBeta = 8.6;
constexpr int kZeroCrossings = 64;

void require_nonempty(std::span<const double> x, const char* what) {
  if (x.empty()) throw std::invalid_argument(std::string(what) + ": empty signal");
}

// RBJ cookbook sections; with prewarped w0 these are exact bilinear transforms
// of the analogue prototypes.
Biquad rbj_highpass(double w0, double q) {
  const double c = std::cos(w0);
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  return {(1.0 + c) / 2.0 / a0, -(1.0 + c) / a0, (1.0 + c) / 2.0 / a0, -2.0 * c / a0,
          (1.0 - alpha) / a0};
}

Biquad rbj_lowpass(double w0, double q) {
  const double c = std::cos(w0);
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  return {(1.0 - c) / 2.0 / a0, (1.0 - c) / a0, (1.0 - c) / 2.0 / a0, -2.0 * c / a0,
          (1.0 - alpha) / a0};
}

void check_butterworth_args(double rate_hz, double cutoff_hz, int order) {
  if (!(rate_hz > 0.0)) throw std::invalid_argument("butterworth: rate must be positive");
  if (!(cutoff_hz > 0.0) || !(cutoff_hz < rate_hz / 2.0))
    throw std::invalid_argument("butterworth: cutoff must lie in (0, nyquist)");
  if (order < 1) throw std::invalid_argument("butterworth: order must be >= 1");
}

SosCascade butterworth(double rate_hz, double cutoff_hz, int order, bool highpass) {
  check_butterworth_args(rate_hz, cutoff_hz, order);
  const double w0 = 2.0 * kPi * cutoff_hz / rate_hz;
  SosCascade sos;
  for (int k = 0; k < order / 2; ++k) {
    const double q = 1.0 / (2.0 * std::sin(kPi * (2 * k + 1) / (2.0 * order)));
    sos.push_back(highpass ? rbj_highpass(w0, q) : rbj_lowpass(w0, q));
  }
  if (order % 2 == 1) {
    const double k = std::tan(w0 / 2.0);
    const double a1 = (k - 1.0) / (k + 1.0);
    Biquad first;
    if (highpass) {
      first = {1.0 / (1.0 + k), -1.0 / (1.0 + k), 0.0, a1, 0.0};
    } else {
      first = {k / (1.0 + k), k / (1.0 + k), 0.0, a1, 0.0};
    }
    sos.push_back(first);
  }
  return sos;
}

double median_inplace(std::vector<double>& v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double hi = v[mid];
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

double bessel_i0(double x) { return std::cyl_bessel_i(0.0, x); }

/// Windowed-sinc kernel in input-sample units.
double kernel(double tau, double fc, double half_width) {
  if (std::abs(tau) > half_width) return 0.0;
  const double arg = fc * tau;
  const double sinc = arg == 0.0 ? 1.0 : std::sin(kPi * arg) / (kPi * arg);
  const double r = tau / half_width;
  const double window = bessel_i0(kKaiserBeta * std::sqrt(std::max(0.0, 1.0 - r * r))) /
                        bessel_i0(kKaiserBeta);
  return fc * sinc * window;
}

bool is_integral(double v) { return std::floor(v) == v && v < 1e9; }

}  // namespace

// ---------------------------------------------------------------------------
// Filter design

SosCascade notch_sections(double rate_hz, double freq_hz, double q, int n_harmonics) {
  if (!(rate_hz > 0.0)) throw std::invalid_argument("notch: rate must be positive");
  if (!(freq_hz > 0.0) || !(freq_hz < rate_hz / 2.0))
    throw std::invalid_argument("notch: frequency must lie in (0, nyquist)");
  if (!(q > 0.0)) throw std::invalid_argument("notch: q must be positive");
  if (n_harmonics < 1) throw std::invalid_argument("notch: need at least one harmonic");
  SosCascade sos;
  for (int k = 1; k <= n_harmonics; ++k) {
    const double f = freq_hz * k;
    if (f >= rate_hz / 2.0) break;
    const double w0 = 2.0 * kPi * f / rate_hz;
    const double c = std::cos(w0);
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    sos.push_back({1.0 / a0, -2.0 * c / a0, 1.0 / a0, -2.0 * c / a0, (1.0 - alpha) / a0});
  }
  return sos;
}

SosCascade butterworth_highpass(double rate_hz, double cutoff_hz, int order) {
  return butterworth(rate_hz, cutoff_hz, order, true);
}

SosCascade butterworth_lowpass(double rate_hz, double cutoff_hz, int order) {
  return butterworth(rate_hz, cutoff_hz, order, false);
}

double magnitude_response(const SosCascade& sos, double rate_hz, double freq_hz) {
  const std::complex<double> z1 = std::polar(1.0, -2.0 * kPi * freq_hz / rate_hz);
  const std::complex<double> z2 = z1 * z1;
  std::complex<double> h = 1.0;
  for (const auto& s : sos) h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  return std::abs(h);
}

// ---------------------------------------------------------------------------
// Filtering

std::vector<double> sos_filter(const SosCascade& sos, std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  if (y.empty()) return y;
  double level = y.front();
  for (const auto& s : sos) {
    // Steady state for constant input `level`.
    const double out = level * s.dc_gain();
    double z2 = s.b2 * level - s.a2 * out;
    double z1 = s.b1 * level - s.a1 * out + z2;
    for (double& v : y) {
      const double in = v;
      const double o = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * o + z2;
      z2 = s.b2 * in - s.a2 * o;
      v = o;
    }
    level = out;
  }
  return y;
}

std::vector<double> sos_filtfilt(const SosCascade& sos, std::span<const double> x) {
  std::vector<double> forward = sos_filter(sos, x);
  std::reverse(forward.begin(), forward.end());
  std::vector<double> backward = sos_filter(sos, forward);
  std::reverse(backward.begin(), backward.end());
  return backward;
}

std::vector<double> notch_filter(std::span<const double> x, double rate_hz, double freq_hz,
                                 double q, int n_harmonics) {
  require_nonempty(x, "notch_filter");
  return sos_filtfilt(notch_sections(rate_hz, freq_hz, q, n_harmonics), x);
}

std::vector<double> highpass_filter(std::span<const double> x, double rate_hz, double cutoff_hz,
                                    int order) {
  require_nonempty(x, "highpass_filter");
  return sos_filtfilt(butterworth_highpass(rate_hz, cutoff_hz, order), x);
}

// ---------------------------------------------------------------------------
// De-spiking

std::vector<double> soft_despike(std::span<const double> x, int window, double z_threshold) {
  if (window < 3 || window % 2 == 0)
    throw std::invalid_argument("soft_despike: window must be odd and >= 3");
  if (!(z_threshold > 0.0)) throw std::invalid_argument("soft_despike: threshold must be > 0");
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const std::ptrdiff_t half = window / 2;
  std::vector<double> y(x.begin(), x.end());
  std::vector<double> buf;
  buf.reserve(static_cast<std::size_t>(window));
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - half);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n, i + half + 1);
    buf.assign(x.begin() + lo, x.begin() + hi);
    const double m = median_inplace(buf);
    for (double& v : buf) v = std::abs(v - m);
    const double s = std::max(median_inplace(buf), kMadFloor);
    const double scale = kMadScale * s;
    const double dev = x[static_cast<std::size_t>(i)] - m;
    const double z = std::abs(dev) / scale;
    if (z > z_threshold) {
      const double mag = scale * (z_threshold + std::tanh(z - z_threshold));
      y[static_cast<std::size_t>(i)] = m + std::copysign(mag, dev);
    }
  }
  return y;
}

// ---------------------------------------------------------------------------
// Resampling

std::size_t resampled_length(std::size_t n, double from_rate_hz, double to_rate_hz) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) * to_rate_hz / from_rate_hz));
}

namespace {

// Polyphase table for rational rate pairs; generic rates fall back to direct
// kernel evaluation per output sample.
class Resampler {
 public:
  Resampler(double from, double to) : from_(from), to_(to) {
    fc_ = std::min(from, to) / from;
    half_width_ = kZeroCrossings / fc_;
    taps_half_ = static_cast<std::ptrdiff_t>(std::ceil(half_width_));
    if (is_integral(from) && is_integral(to)) {
      const auto f = static_cast<long long>(from);
      const auto t = static_cast<long long>(to);
      const long long g = std::gcd(f, t);
      up_ = t / g;
      down_ = f / g;
      const std::size_t width = 2 * static_cast<std::size_t>(taps_half_);
      table_.resize(static_cast<std::size_t>(up_) * width);
      for (long long phase = 0; phase < up_; ++phase) {
        fill_taps(static_cast<double>(phase) / static_cast<double>(up_),
                  &table_[static_cast<std::size_t>(phase) * width]);
      }
    }
  }

  std::vector<double> operator()(std::span<const double> x) const {
    const std::size_t n_out = resampled_length(x.size(), from_, to_);
    const std::size_t width = 2 * static_cast<std::size_t>(taps_half_);
    std::vector<double> y(n_out, 0.0);
    std::vector<double> scratch(width);
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    for (std::size_t k = 0; k < n_out; ++k) {
      std::ptrdiff_t base;
      const double* taps;
      if (up_ > 0) {
        const long long num = static_cast<long long>(k) * down_;
        base = static_cast<std::ptrdiff_t>(num / up_);
        taps = &table_[static_cast<std::size_t>(num % up_) * width];
      } else {
        const double p = static_cast<double>(k) * from_ / to_;
        base = static_cast<std::ptrdiff_t>(std::floor(p));
        fill_taps(p - static_cast<double>(base), scratch.data());
        taps = scratch.data();
      }
      // taps[m] multiplies x[base - taps_half_ + 1 + m]
      const std::ptrdiff_t first = base - taps_half_ + 1;
      double acc = 0.0;
      const std::ptrdiff_t m0 = std::max<std::ptrdiff_t>(0, -first);
      const std::ptrdiff_t m1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(width), n - first);
      for (std::ptrdiff_t m = m0; m < m1; ++m) acc += taps[m] * x[static_cast<std::size_t>(first + m)];
      y[k] = acc;
    }
    return y;
  }

 private:
  void fill_taps(double frac, double* out) const {
    const std::size_t width = 2 * static_cast<std::size_t>(taps_half_);
    double sum = 0.0;
    for (std::size_t m = 0; m < width; ++m) {
      // input index j = base - taps_half + 1 + m; tau = p - j
      const double tau = frac + static_cast<double>(taps_half_ - 1 - static_cast<std::ptrdiff_t>(m));
      out[m] = kernel(tau, fc_, half_width_);
      sum += out[m];
    }
    for (std::size_t m = 0; m < width; ++m) out[m] /= sum;
  }

  double from_, to_;
  double fc_ = 1.0;
  double half_width_ = 0.0;
  std::ptrdiff_t taps_half_ = 0;
  long long up_ = 0, down_ = 0;
  std::vector<double> table_;
};

}  // namespace

std::vector<double> resample(std::span<const double> x, double from_rate_hz, double to_rate_hz) {
  require_nonempty(x, "resample");
  if (!(from_rate_hz > 0.0) || !(to_rate_hz > 0.0))
    throw std::invalid_argument("resample: rates must be positive");
  if (from_rate_hz == to_rate_hz) return {x.begin(), x.end()};
  return Resampler(from_rate_hz, to_rate_hz)(x);
}

// ---------------------------------------------------------------------------
// Recordings

void RawEmgRecording::validate() const {
  if (samples.rows() < 1) throw std::invalid_argument("recording has no channels");
  if (samples.cols() < 1) throw std::invalid_argument("recording has no samples");
  if (!(sample_rate_hz > 0.0)) throw std::invalid_argument("recording sample rate must be > 0");
}

void PreprocessConfig::validate(double sample_rate_hz) const {
  if (!(notch_freq_hz > 0.0) || !(notch_freq_hz < sample_rate_hz / 2.0))
    throw std::invalid_argument("notch_freq_hz must lie in (0, nyquist)");
  if (notch_harmonics < 1) throw std::invalid_argument("notch_harmonics must be >= 1");
  if (!(notch_q > 0.0)) throw std::invalid_argument("notch_q must be > 0");
  if (!(hp_cutoff_hz > 0.0) || !(hp_cutoff_hz < sample_rate_hz / 2.0))
    throw std::invalid_argument("hp_cutoff_hz must lie in (0, nyquist)");
  if (hp_order < 1) throw std::invalid_argument("hp_order must be >= 1");
  if (despike_window < 3 || despike_window % 2 == 0)
    throw std::invalid_argument("despike_window must be odd and >= 3");
  if (!(despike_z_threshold > 0.0)) throw std::invalid_argument("despike_z_threshold must be > 0");
  if (!(target_rate_hz > 0.0) || target_rate_hz > sample_rate_hz)
    throw std::invalid_argument("target_rate_hz must lie in (0, sample_rate_hz]");
}

PreprocessedEmg preprocess_recording(const RawEmgRecording& rec, const PreprocessConfig& cfg) {
  rec.validate();
  cfg.validate(rec.sample_rate_hz);
  const double fs = rec.sample_rate_hz;
  const auto notch = notch_sections(fs, cfg.notch_freq_hz, cfg.notch_q, cfg.notch_harmonics);
  const auto hp = butterworth_highpass(fs, cfg.hp_cutoff_hz, cfg.hp_order);
  std::optional<Resampler> resampler;
  if (cfg.target_rate_hz != fs) resampler.emplace(fs, cfg.target_rate_hz);

  const auto n_in = static_cast<std::size_t>(rec.n_samples());
  const std::size_t n_out = resampled_length(n_in, fs, cfg.target_rate_hz);
  PreprocessedEmg out;
  out.samples.resize(rec.n_channels(), static_cast<Eigen::Index>(n_out));
  out.sample_rate_hz = cfg.target_rate_hz;
  out.source_id = rec.utterance_id;

  std::vector<double> x(n_in);
  for (Eigen::Index c = 0; c < rec.n_channels(); ++c) {
    try {
      for (std::size_t i = 0; i < n_in; ++i) x[i] = rec.samples(c, static_cast<Eigen::Index>(i));
      auto y = sos_filtfilt(notch, x);
      y = sos_filtfilt(hp, y);
      y = soft_despike(y, cfg.despike_window, cfg.despike_z_threshold);
      if (resampler) y = (*resampler)(y);
      for (std::size_t i = 0; i < n_out; ++i)
        out.samples(c, static_cast<Eigen::Index>(i)) = static_cast<float>(y[i]);
    } catch (const std::exception& e) {
      throw std::runtime_error("channel " + std::to_string(c) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace emg2artic::signal
