#include "emg2artic/synth_data.hpp"

#include "emg2artic/corpus.hpp"
#include "emg2artic/io.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

namespace emg2artic::synth {

namespace fs = std::filesystem;
using nlohmann::json;

DependencyMatrix default_dependency() {
  DependencyMatrix d = DependencyMatrix::Zero(kChannels, kTargetDims);
  auto set_sensor = [&](int electrode, EmaSensor s, double w) {
    d(electrode - 1, ema_dim(s, Axis::X)) = w;
    d(electrode - 1, ema_dim(s, Axis::Y)) = w;
  };
  for (EmaSensor s : {EmaSensor::TT, EmaSensor::TB, EmaSensor::TD}) {
    set_sensor(2, s, 1.0);
    set_sensor(3, s, 0.5);
  }
  for (EmaSensor s : {EmaSensor::LL, EmaSensor::LI}) {
    set_sensor(2, s, 0.7);
    set_sensor(6, s, 1.0);
  }
  set_sensor(7, EmaSensor::UL, 1.0);
  d(3, kPitchColumn) = 1.0;
  d(3, kLoudnessColumn) = 1.0;
  for (int background : {1, 5, 8}) d.row(background - 1).setConstant(0.05);
  return d;
}

void validate_dependency(const DependencyMatrix& dep) {
  if (dep.rows() != kChannels || dep.cols() != kTargetDims)
    throw std::invalid_argument("dependency matrix must be 8 x 14");
  if (!dep.allFinite() || (dep.array() < 0.0).any())
    throw std::invalid_argument("dependency weights must be finite and non-negative");
  for (int f = 0; f < kTargetDims; ++f)
    if (dep.col(f).maxCoeff() <= 0.0)
      throw std::invalid_argument("target " + target_dim_name(f) + " has no driving channel");
}

Sinusoids Sinusoids::draw(Rng& rng) {
  Sinusoids s;
  double power = 0.0;
  for (int k = 0; k < kComponents; ++k) {
    s.freq_hz[k] = rng.uniform(kMinFreqHz, kMaxFreqHz);
    s.amp[k] = rng.uniform(0.5, 1.5);
    s.phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    power += 0.5 * s.amp[k] * s.amp[k];
  }
  for (double& a : s.amp) a /= std::sqrt(power);
  return s;
}

double Sinusoids::operator()(double t) const {
  double v = 0.0;
  for (int k = 0; k < kComponents; ++k) v += amp[k] * std::sin(2.0 * std::numbers::pi * freq_hz[k] * t + phase[k]);
  return v;
}

Mixing Mixing::draw(const DependencyMatrix& dep, double coupling, std::uint64_t seed) {
  validate_dependency(dep);
  if (!(coupling > 0.0 && coupling <= 1.0)) throw std::invalid_argument("coupling must be in (0, 1]");
  Rng rng(seed);
  Mixing m{dep, MatD(kChannels, kTargetDims), MatD(kChannels, kTargetDims), coupling};
  for (int c = 0; c < kChannels; ++c)
    for (int f = 0; f < kTargetDims; ++f) {
      m.sign(c, f) = rng.below(2) == 0 ? 1.0 : -1.0;
      m.lag_s(c, f) = rng.uniform(kMinLagS, kMaxLagS);
    }
  return m;
}

Sources Sources::draw(std::uint64_t seed) {
  Rng rng(seed);
  Sources s;
  for (auto& d : s.drives) d = Sinusoids::draw(rng);
  for (auto& z : s.latents) z = Sinusoids::draw(rng);
  return s;
}

double shape_pitch(double u) {
  const double mid = 0.5 * (kPitchLow + kPitchHigh), half = 0.5 * (kPitchHigh - kPitchLow);
  return mid + half * std::tanh(0.5 * u);
}

double softplus(double u) { return u > 30.0 ? u : std::log1p(std::exp(u)); }

namespace {

void shape_targets(MatD& u) {
  for (Eigen::Index k = 0; k < u.cols(); ++k) {
    u(kPitchColumn, k) = shape_pitch(u(kPitchColumn, k));
    u(kLoudnessColumn, k) = softplus(u(kLoudnessColumn, k));
  }
}

Eigen::Index n_samples(double duration_s, double rate_hz) {
  if (!(duration_s > 0.0) || !(rate_hz > 0.0)) throw std::invalid_argument("duration and rate must be > 0");
  return std::max<Eigen::Index>(1, std::llround(duration_s * rate_hz));
}

/// Standard normal CDF.
double phi(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace

MatD gen_latent_trajectories(double duration_s, double rate_hz, std::uint64_t seed) {
  const Eigen::Index n = n_samples(duration_s, rate_hz);
  const Sources src = Sources::draw(seed);
  MatD out(kTargetDims, n);
  for (int f = 0; f < kTargetDims; ++f)
    for (Eigen::Index k = 0; k < n; ++k) out(f, k) = src.latents[f](static_cast<double>(k) / rate_hz);
  shape_targets(out);
  return out;
}

MatD drive_streams(const Sources& src, Eigen::Index n, double rate_hz) {
  MatD d(kChannels, n);
  for (int c = 0; c < kChannels; ++c)
    for (Eigen::Index k = 0; k < n; ++k) d(c, k) = src.drives[c](static_cast<double>(k) / rate_hz);
  return d;
}

MatD mixed_streams(const Sources& src, const Mixing& mix, Eigen::Index n, double rate_hz) {
  const double rho = mix.coupling, private_w = std::sqrt(1.0 - rho * rho);
  MatD u(kTargetDims, n);
  for (int f = 0; f < kTargetDims; ++f) {
    const double norm = mix.dependency.col(f).norm();
    for (Eigen::Index k = 0; k < n; ++k) {
      const double t = static_cast<double>(k) / rate_hz;
      double shared = 0.0;
      for (int c = 0; c < kChannels; ++c) {
        const double w = mix.dependency(c, f);
        if (w != 0.0) shared += w * mix.sign(c, f) * src.drives[c](t - mix.lag_s(c, f));
      }
      u(f, k) = rho * shared / norm + private_w * src.latents[f](t);
    }
  }
  return u;
}

MatF gen_emg(const Sources& src, Eigen::Index n, double rate_hz, double noise_std, Rng& rng) {
  if (n < 1 || !(rate_hz > 0.0) || !(noise_std >= 0.0)) throw std::invalid_argument("gen_emg: bad arguments");
  const double hi = std::min(450.0, 0.45 * rate_hz);
  signal::SosCascade band = signal::butterworth_highpass(rate_hz, 20.0, 4);
  const signal::SosCascade lp = signal::butterworth_lowpass(rate_hz, hi, 4);
  band.insert(band.end(), lp.begin(), lp.end());
  const MatD drive = drive_streams(src, n, rate_hz);
  MatF out(kChannels, n);
  std::vector<double> white(static_cast<std::size_t>(n));
  for (int c = 0; c < kChannels; ++c) {
    for (auto& w : white) w = rng.normal();
    std::vector<double> carrier = signal::sos_filtfilt(band, white);
    double ss = 0.0;
    for (double v : carrier) ss += v * v;
    const double scale = ss > 0.0 ? std::sqrt(static_cast<double>(n) / ss) : 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      const double env = std::exp(kEnvelopeGain * drive(c, k));
      const double v = env * carrier[static_cast<std::size_t>(k)] * scale + noise_std * rng.normal();
      out(c, k) = static_cast<float>(v);
    }
  }
  return out;
}

void SynthConfig::validate() const {
  if (n_train < 1 || n_val < 1 || n_test < 1) throw std::invalid_argument("synth: split counts must be >= 1");
  if (!(min_duration_s > 0.0) || !(max_duration_s >= min_duration_s))
    throw std::invalid_argument("synth: durations must satisfy 0 < min <= max");
  if (!(emg_rate_hz > 0.0) || !(target_rate_hz > 0.0)) throw std::invalid_argument("synth: rates must be > 0");
  if (!(noise_std >= 0.0)) throw std::invalid_argument("synth: noise_std must be >= 0");
  if (!(coupling > 0.0 && coupling <= 1.0)) throw std::invalid_argument("synth: coupling must be in (0, 1]");
  if (phoneme_vocab < 2) throw std::invalid_argument("synth: phoneme_vocab must be >= 2");
  validate_dependency(dependency);
}

Utterance gen_utterance(const SynthConfig& cfg, const Mixing& mix, int index, const std::string& id) {
  const std::uint64_t useed = derive_seed(cfg.seed, static_cast<std::uint64_t>(index));
  Rng len_rng(derive_seed(useed, 0));
  const auto lo = std::llround(cfg.min_duration_s * cfg.target_rate_hz);
  const auto hi = std::llround(cfg.max_duration_s * cfg.target_rate_hz);
  const Eigen::Index n_frames = lo + static_cast<Eigen::Index>(len_rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
  const Eigen::Index n_emg =
      std::llround(static_cast<double>(n_frames) * cfg.emg_rate_hz / cfg.target_rate_hz);

  const Sources src = Sources::draw(derive_seed(useed, 1));
  Rng emg_rng(derive_seed(useed, 2));

  Utterance u;
  u.emg.samples = gen_emg(src, n_emg, cfg.emg_rate_hz, cfg.noise_std, emg_rng);
  u.emg.sample_rate_hz = cfg.emg_rate_hz;
  u.emg.utterance_id = id;

  MatD t = mixed_streams(src, mix, n_frames, cfg.target_rate_hz);
  u.phonemes.vocab_size = cfg.phoneme_vocab;
  u.phonemes.frame_rate_hz = cfg.target_rate_hz;
  u.phonemes.ids.resize(static_cast<std::size_t>(n_frames));
  const int tongue = ema_dim(EmaSensor::TT, Axis::Y);
  for (Eigen::Index k = 0; k < n_frames; ++k) {
    int label = 0;  // silence when the loudness drive is low
    if (t(kLoudnessColumn, k) >= -1.0) {
      const int bins = cfg.phoneme_vocab - 1;
      label = 1 + std::min(bins - 1, static_cast<int>(phi(t(tongue, k)) * bins));
    }
    u.phonemes.ids[static_cast<std::size_t>(k)] = label;
  }
  shape_targets(t);
  u.targets.ema = t.topRows(kEmaDims).transpose().cast<float>();
  u.targets.pitch = t.row(kPitchColumn).transpose().cast<float>();
  u.targets.loudness = t.row(kLoudnessColumn).transpose().cast<float>();
  u.targets.frame_rate_hz = cfg.target_rate_hz;
  u.targets.utterance_id = id;
  return u;
}

namespace {

json matrix_json(const MatD& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

std::string utterance_id(std::string_view split, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%04d", std::string(split).c_str(), i);
  return buf;
}

}  // namespace

json ground_truth_json(const SynthConfig& cfg, const Mixing& mix) {
  const GroundTruth gt = GroundTruth::from_dependency(cfg.dependency, cfg.seed);
  json groups = json::object();
  for (int g = 0; g < kNumFeatureGroups; ++g)
    groups[std::string(kFeatureGroupNames[g])] = {{"dims", feature_group_dims(g)},
                                                  {"driving_channel", gt.driving_channel[static_cast<std::size_t>(g)]}};
  json dims = json::array();
  for (int f = 0; f < kTargetDims; ++f) dims.push_back(target_dim_name(f));
  return json{{"format", "emg2artic-ground-truth"},
              {"version", 1},
              {"seed", cfg.seed},
              {"channels", {1, 2, 3, 4, 5, 6, 7, 8}},
              {"target_dims", dims},
              {"dependency", matrix_json(cfg.dependency)},
              {"groups", groups},
              {"mixing",
               {{"coupling", mix.coupling},
                {"sign", matrix_json(mix.sign)},
                {"lag_s", matrix_json(mix.lag_s)},
                {"seed", derive_seed(cfg.seed, fnv1a("mixing"))}}},
              {"generator",
               {{"envelope_gain", kEnvelopeGain},
                {"components_per_stream", kComponents},
                {"freq_range_hz", {kMinFreqHz, kMaxFreqHz}},
                {"carrier_band_hz", {20.0, 450.0}},
                {"lag_range_s", {kMinLagS, kMaxLagS}},
                {"noise_std", cfg.noise_std},
                {"emg_rate_hz", cfg.emg_rate_hz},
                {"target_rate_hz", cfg.target_rate_hz},
                {"duration_range_s", {cfg.min_duration_s, cfg.max_duration_s}},
                {"phoneme_vocab", cfg.phoneme_vocab},
                {"utterance_seed", "derive_seed(seed, global_index)"}}},
              {"splits", {{"train", cfg.n_train}, {"val", cfg.n_val}, {"test", cfg.n_test}}}};
}

CorpusSummary gen_corpus(const SynthConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  const fs::path parent = out_dir.has_parent_path() ? out_dir.parent_path() : fs::path(".");
  if (!fs::is_directory(parent)) throw std::runtime_error("parent directory does not exist: " + parent.string());
  fs::create_directories(out_dir);
  const Mixing mix = Mixing::draw(cfg.dependency, cfg.coupling, derive_seed(cfg.seed, fnv1a("mixing")));

  CorpusSummary summary;
  const std::array<int, 3> counts = {cfg.n_train, cfg.n_val, cfg.n_test};
  int global = 0;
  for (std::size_t s = 0; s < kSplitNames.size(); ++s) {
    const fs::path split_dir = out_dir / kSplitNames[s];
    fs::create_directories(split_dir);
    for (int i = 0; i < counts[s]; ++i, ++global) {
      const std::string id = utterance_id(kSplitNames[s], i);
      const Utterance u = gen_utterance(cfg, mix, global, id);
      write_utterance(split_dir / id, u.emg, u.targets, u.phonemes);
      ++summary.n_utterances;
      summary.total_duration_s += static_cast<double>(u.emg.n_samples()) / cfg.emg_rate_hz;
    }
  }
  io::write_json(out_dir / "ground_truth.json", ground_truth_json(cfg, mix));
  return summary;
}

int GroundTruth::driver(const std::string& group) const {
  return driving_channel.at(static_cast<std::size_t>(feature_group_index(group)));
}

GroundTruth GroundTruth::from_dependency(const DependencyMatrix& dep, std::uint64_t seed) {
  validate_dependency(dep);
  GroundTruth gt{dep, seed, {}, {}};
  for (int g = 0; g < kNumFeatureGroups; ++g) {
    gt.groups.emplace_back(kFeatureGroupNames[g]);
    int best = 0;
    double best_w = -1.0;
    for (int c = 0; c < kChannels; ++c) {
      double w = 0.0;
      for (int f : feature_group_dims(g)) w += dep(c, f);
      if (w > best_w) {
        best_w = w;
        best = c;
      }
    }
    gt.driving_channel.push_back(best + 1);
  }
  return gt;
}

GroundTruth GroundTruth::load(const fs::path& corpus_dir) {
  const fs::path p = corpus_dir / "ground_truth.json";
  const json j = io::read_json(p);
  const auto rows = io::field<std::vector<std::vector<double>>>(j, "dependency", p);
  if (rows.size() != kChannels) throw FormatError(p.string() + ": dependency must have 8 rows");
  DependencyMatrix dep(kChannels, kTargetDims);
  for (int c = 0; c < kChannels; ++c) {
    if (rows[static_cast<std::size_t>(c)].size() != kTargetDims)
      throw FormatError(p.string() + ": dependency rows must have 14 entries");
    for (int f = 0; f < kTargetDims; ++f) dep(c, f) = rows[static_cast<std::size_t>(c)][static_cast<std::size_t>(f)];
  }
  try {
    return from_dependency(dep, io::field<std::uint64_t>(j, "seed", p));
  } catch (const std::invalid_argument& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

}  // namespace emg2artic::synth
