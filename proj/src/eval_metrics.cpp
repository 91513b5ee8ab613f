#include "emg2artic/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace emg2artic {

using nlohmann::json;

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: lengths differ");
  if (x.size() < 2) throw std::invalid_argument("pearson: need at least 2 samples");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw UndefinedCorrelation("pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double stable_mean(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean of an empty sequence");
  const double v0 = values.front();
  double acc = 0.0;
  for (double v : values) acc += v - v0;
  return v0 + acc / static_cast<double>(values.size());
}

std::pair<double, double> bootstrap_ci(std::span<const double> values, double level, int n_resamples,
                                       std::uint64_t seed) {
  if (values.size() < 2) throw std::invalid_argument("bootstrap_ci: need at least 2 values");
  if (!(level > 0.0 && level < 1.0) || n_resamples < 1) throw std::invalid_argument("bootstrap_ci: bad level or count");
  Rng rng(seed);
  std::vector<double> means(static_cast<std::size_t>(n_resamples));
  std::vector<double> sample(values.size());
  for (auto& m : means) {
    for (auto& s : sample) s = values[rng.below(values.size())];
    m = stable_mean(sample);
  }
  std::sort(means.begin(), means.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(means.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, means.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return w == 0.0 ? means[lo] : means[lo] + w * (means[hi] - means[lo]);
  };
  return {quantile(0.5 * (1.0 - level)), quantile(0.5 * (1.0 + level))};
}

double drop_rate(double r_full, double r_cond) {
  if (r_full == 0.0) throw std::invalid_argument("drop_rate: full-set correlation is zero");
  return (r_full - r_cond) / r_full;
}

DimCorrelations correlate_utterance(const MatD& pred, const FrameTargets& target) {
  if (pred.cols() != kTargetDims) throw std::invalid_argument("predictions must have 14 columns");
  const auto n = static_cast<Eigen::Index>(
      align_lengths(static_cast<std::size_t>(pred.rows()), static_cast<std::size_t>(target.frames())));
  const MatD truth = target_matrix(target);
  DimCorrelations out;
  std::vector<double> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
  for (int d = 0; d < kTargetDims; ++d) {
    for (Eigen::Index t = 0; t < n; ++t) {
      a[static_cast<std::size_t>(t)] = pred(t, d);
      b[static_cast<std::size_t>(t)] = truth(t, d);
    }
    try {
      out[static_cast<std::size_t>(d)] = pearson(a, b);
    } catch (const UndefinedCorrelation&) {
      out[static_cast<std::size_t>(d)] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return out;
}

const CorrelationEntry& CorrelationReport::at(std::string_view name) const {
  for (const auto& e : entries)
    if (e.name == name) return e;
  throw std::out_of_range("no report entry named " + std::string(name));
}

double CorrelationReport::sensor(int s) const {
  return r(kEmaSensorNames.at(static_cast<std::size_t>(s)));
}

double CorrelationReport::group(int g) const {
  if (g < kNumEmaSensors) return sensor(g);
  return r(kFeatureGroupNames.at(static_cast<std::size_t>(g)));
}

namespace {

/// Mean of the defined entries of `dims` for one utterance; NaN if none.
double mean_defined(const DimCorrelations& r, std::span<const int> dims) {
  double acc = 0.0;
  int n = 0;
  for (int d : dims)
    if (!std::isnan(r[static_cast<std::size_t>(d)])) {
      acc += r[static_cast<std::size_t>(d)];
      ++n;
    }
  return n ? acc / n : std::numeric_limits<double>::quiet_NaN();
}

CorrelationEntry aggregate(std::string name, const std::vector<double>& per_utt, std::uint64_t seed) {
  CorrelationEntry e;
  e.name = std::move(name);
  std::vector<double> vals;
  for (double v : per_utt) {
    if (std::isnan(v))
      ++e.n_skipped;
    else
      vals.push_back(v);
  }
  e.n = static_cast<int>(vals.size());
  if (vals.empty()) {
    e.r = e.ci_low = e.ci_high = std::numeric_limits<double>::quiet_NaN();
    return e;
  }
  e.r = stable_mean(vals);
  if (vals.size() >= 2) {
    std::tie(e.ci_low, e.ci_high) = bootstrap_ci(vals, 0.95, 1000, derive_seed(seed, fnv1a(e.name)));
  } else {
    e.ci_low = e.ci_high = e.r;
  }
  return e;
}

}  // namespace

CorrelationReport build_report(std::span<const DimCorrelations> per_utterance, std::uint64_t seed) {
  if (per_utterance.empty()) throw std::invalid_argument("build_report: no utterances");
  CorrelationReport rep;
  rep.n_utterances = static_cast<int>(per_utterance.size());
  auto column = [&](auto&& value_of) {
    std::vector<double> v;
    v.reserve(per_utterance.size());
    for (const auto& u : per_utterance) v.push_back(value_of(u));
    return v;
  };
  for (int d = 0; d < kEmaDims; ++d)
    rep.entries.push_back(
        aggregate(ema_dim_name(d), column([d](const DimCorrelations& u) { return u[static_cast<std::size_t>(d)]; }), seed));
  for (int s = 0; s < kNumEmaSensors; ++s) {
    const std::array<int, 2> dims = {2 * s, 2 * s + 1};
    rep.entries.push_back(aggregate(std::string(kEmaSensorNames[static_cast<std::size_t>(s)]),
                                    column([&](const DimCorrelations& u) { return mean_defined(u, dims); }), seed));
  }
  std::array<int, kEmaDims> ema{};
  for (int d = 0; d < kEmaDims; ++d) ema[static_cast<std::size_t>(d)] = d;
  rep.entries.push_back(aggregate("ema_mean", column([&](const DimCorrelations& u) { return mean_defined(u, ema); }), seed));
  rep.entries.push_back(aggregate("loudness", column([](const DimCorrelations& u) { return u[kLoudnessColumn]; }), seed));
  rep.entries.push_back(aggregate("pitch", column([](const DimCorrelations& u) { return u[kPitchColumn]; }), seed));
  return rep;
}

MatD target_matrix(const FrameTargets& t) {
  MatD m(t.frames(), kTargetDims);
  m.leftCols(kEmaDims) = t.ema;
  m.col(kPitchColumn) = t.pitch.col(0);
  m.col(kLoudnessColumn) = t.loudness.col(0);
  return m;
}

MatD infer(const MatD& emg, nn::ParamStore& params, const EncoderConfig& cfg) {
  const ModelOutput out = predict(encode(emg, params, cfg), params, cfg);
  MatD m(out.frames(), kTargetDims);
  m.leftCols(kEmaDims) = out.ema.value();
  m.col(kPitchColumn) = out.pitch.value().col(0);
  m.col(kLoudnessColumn) = out.loudness.value().col(0);
  return m;
}

CorrelationReport evaluate(nn::ParamStore& params, const EncoderConfig& cfg, const Corpus& corpus, std::uint64_t seed) {
  if (corpus.empty()) throw std::invalid_argument("evaluate: empty corpus");
  std::vector<DimCorrelations> per;
  per.reserve(corpus.size());
  for (const auto& u : corpus.utterances) per.push_back(correlate_utterance(infer(u.emg, params, cfg), u.targets));
  return build_report(per, seed);
}

CorrelationReport evaluate_predictions(std::span<const MatD> predictions, const Corpus& corpus, std::uint64_t seed) {
  if (corpus.empty()) throw std::invalid_argument("evaluate: empty corpus");
  if (predictions.size() != corpus.size()) throw std::invalid_argument("evaluate: one prediction per utterance required");
  std::vector<DimCorrelations> per;
  per.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i)
    per.push_back(correlate_utterance(predictions[i], corpus.utterances[i].targets));
  return build_report(per, seed);
}

namespace {

json number_or_null(double v) { return std::isnan(v) ? json(nullptr) : json(v); }
double number_from(const json& v) { return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>(); }

}  // namespace

json to_json(const CorrelationReport& report) {
  json rows = json::array();
  for (const auto& e : report.entries)
    rows.push_back({{"name", e.name},
                    {"r", number_or_null(e.r)},
                    {"ci_low", number_or_null(e.ci_low)},
                    {"ci_high", number_or_null(e.ci_high)},
                    {"n", e.n},
                    {"n_skipped", e.n_skipped}});
  return {{"format", "emg2artic-correlation-report"},
          {"version", 1},
          {"aggregation", "mean of per-utterance pearson r"},
          {"ci", {{"method", "percentile bootstrap"}, {"level", 0.95}, {"resamples", 1000}}},
          {"n_utterances", report.n_utterances},
          {"entries", rows}};
}

CorrelationReport report_from_json(const json& doc) {
  try {
    CorrelationReport rep;
    rep.n_utterances = doc.at("n_utterances").get<int>();
    for (const auto& row : doc.at("entries")) {
      CorrelationEntry e;
      e.name = row.at("name").get<std::string>();
      e.r = number_from(row.at("r"));
      e.ci_low = number_from(row.at("ci_low"));
      e.ci_high = number_from(row.at("ci_high"));
      e.n = row.at("n").get<int>();
      e.n_skipped = row.value("n_skipped", 0);
      rep.entries.push_back(std::move(e));
    }
    if (rep.entries.size() != kReportRows) throw FormatError("correlation report must have 21 entries");
    return rep;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed correlation report: ") + e.what());
  }
}

std::string to_csv(const CorrelationReport& report) {
  std::string out = "name,r,ci_low,ci_high,n\n";
  char buf[160];
  for (const auto& e : report.entries) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%d\n", e.name.c_str(), e.r, e.ci_low, e.ci_high, e.n);
    out += buf;
  }
  return out;
}

}  // namespace emg2artic
