#include "emg2artic/eval_metrics.hpp"
#include "emg2artic/synth_data.hpp"
#include "oracles.hpp"
#include "tmpdir.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

using namespace emg2artic;

namespace {

std::vector<double> normal_vector(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

/// Corpus shared by the corpus-level cases, generated once.
const Corpus& small_test_split() {
  static TempDir dir;
  static const Corpus corpus = [] {
    synth::SynthConfig cfg;
    cfg.n_train = 1;
    cfg.n_val = 1;
    cfg.n_test = 12;
    cfg.seed = 77;
    synth::gen_corpus(cfg, dir / "corpus");
    return load_split(dir / "corpus", "test");
  }();
  return corpus;
}

}  // namespace

TEST_CASE("pearson worked examples") {
  const std::vector<double> x = {1, 2, 3}, y = {1, 2, 4};
  CHECK(pearson(x, y) == doctest::Approx(9.0 / std::sqrt(84.0)).epsilon(1e-14));
  CHECK(pearson(x, x) == 1.0);
  const std::vector<double> neg = {-1, -2, -3};
  CHECK(pearson(x, neg) == -1.0);
}

TEST_CASE("pearson errors") {
  const std::vector<double> c = {2, 2, 2}, x = {1, 2, 3};
  CHECK_THROWS_AS(pearson(c, x), UndefinedCorrelation);
  CHECK_THROWS_AS(pearson(x, c), UndefinedCorrelation);
  const std::vector<double> one = {1}, two = {1, 2};
  CHECK_THROWS_AS(pearson(one, one), std::invalid_argument);
  CHECK_THROWS_AS(pearson(x, two), std::invalid_argument);
}

TEST_CASE("pearson agrees with a direct formula on random pairs") {
  Rng rng(123);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 2 + rng.below(200);
    auto x = normal_vector(n, rng), y = normal_vector(n, rng);
    const double mix = rng.uniform(-1.0, 1.0);
    for (std::size_t k = 0; k < n; ++k) y[k] += mix * x[k];
    worst = std::max(worst, std::abs(pearson(x, y) - oracle::pearson(x, y)));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("pearson symmetry and affine invariance") {
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 3 + rng.below(100);
    auto x = normal_vector(n, rng), y = normal_vector(n, rng);
    for (std::size_t k = 0; k < n; ++k) y[k] += 0.5 * x[k];
    const double r = pearson(x, y);
    CHECK(std::abs(pearson(y, x) - r) < 1e-12);
    const double a = rng.uniform(0.01, 100.0), b = rng.uniform(-50.0, 50.0);
    std::vector<double> ax(n), nx(n);
    for (std::size_t k = 0; k < n; ++k) {
      ax[k] = a * x[k] + b;
      nx[k] = -a * x[k] + b;
    }
    CHECK(std::abs(pearson(ax, y) - r) < 1e-9);
    CHECK(std::abs(pearson(y, ax) - r) < 1e-9);
    CHECK(std::abs(pearson(nx, y) + r) < 1e-9);
  }
}

TEST_CASE("drop rate") {
  CHECK(drop_rate(0.9, 0.81) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(drop_rate(0.7, 0.7) == 0.0);
  CHECK(drop_rate(0.5, 0.6) == doctest::Approx(-0.2).epsilon(1e-12));  // not clamped
  CHECK(drop_rate(0.9, 0.73) == doctest::Approx(0.19).epsilon(0.01));
  CHECK_THROWS_AS(drop_rate(0.0, 0.5), std::invalid_argument);

  // identity exact whenever r * (1 - d) is representable
  for (double r : {1.0, 0.5, 0.75, 0.875, 0.625})
    for (double d : {0.0, 0.25, 0.5, -0.5, 0.125, 1.0, -1.0}) CHECK(drop_rate(r, r * (1.0 - d)) == d);
  // and within a few ulp when it is not
  Rng rng(4);
  for (int i = 0; i < 10000; ++i) {
    const double r = rng.uniform(0.01, 1.0), d = rng.uniform(-1.0, 1.0);
    CHECK(std::abs(drop_rate(r, r * (1.0 - d)) - d) <= 4.0 * std::numeric_limits<double>::epsilon() / r);
  }
}

TEST_CASE("bootstrap interval") {
  const std::vector<double> same(30, 0.42);
  const auto [lo, hi] = bootstrap_ci(same, 0.95, 1000, 5);
  CHECK(lo == 0.42);
  CHECK(hi == 0.42);

  Rng rng(17);
  const auto v = normal_vector(50, rng);
  const double m = oracle::mean(v);
  const auto ci = bootstrap_ci(v, 0.95, 1000, 3);
  CHECK(ci.first <= m);
  CHECK(m <= ci.second);
  CHECK(ci.first < ci.second);
  CHECK(bootstrap_ci(v, 0.95, 1000, 3) == ci);
  CHECK(bootstrap_ci(v, 0.95, 1000, 4) != ci);
  // width near 2 * 1.96 * s / sqrt(n)
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double se = std::sqrt(ss / 49.0) / std::sqrt(50.0);
  CHECK((ci.second - ci.first) == doctest::Approx(2 * 1.96 * se).epsilon(0.25));
  const auto wide = bootstrap_ci(v, 0.99, 1000, 3);
  CHECK(wide.second - wide.first > ci.second - ci.first);

  const std::vector<double> one = {1.0};
  CHECK_THROWS_AS(bootstrap_ci(one), std::invalid_argument);
  CHECK_THROWS_AS(bootstrap_ci(v, 1.0), std::invalid_argument);
}

TEST_CASE("report layout and undefined dims") {
  Rng rng(2);
  std::vector<DimCorrelations> per(6);
  for (auto& u : per)
    for (auto& r : u) r = rng.uniform(-0.5, 1.0);
  per[0][0] = std::numeric_limits<double>::quiet_NaN();
  const CorrelationReport rep = build_report(per, 1);
  REQUIRE(rep.entries.size() == static_cast<std::size_t>(kReportRows));
  CHECK(rep.entries.front().name == "UL_x");
  CHECK(rep.entries[12].name == "UL");
  CHECK(rep.entries[18].name == "ema_mean");
  CHECK(rep.entries[19].name == "loudness");
  CHECK(rep.entries[20].name == "pitch");
  CHECK(rep.at("UL_x").n == 5);
  CHECK(rep.at("UL_x").n_skipped == 1);
  CHECK(rep.at("UL_y").n == 6);

  double acc = 0.0;
  for (int i = 1; i < 6; ++i) acc += per[static_cast<std::size_t>(i)][0];
  CHECK(rep.r("UL_x") == doctest::Approx(acc / 5.0).epsilon(1e-12));
  // sensor mean uses the defined dim alone for utterance 0
  double s = per[0][1];
  for (int i = 1; i < 6; ++i) s += 0.5 * (per[static_cast<std::size_t>(i)][0] + per[static_cast<std::size_t>(i)][1]);
  CHECK(rep.r("UL") == doctest::Approx(s / 6.0).epsilon(1e-12));
  CHECK(rep.group(kNumEmaSensors) == rep.pitch());
  CHECK(rep.group(kNumEmaSensors + 1) == rep.loudness());
  for (const auto& e : rep.entries) {
    CHECK(e.ci_low <= e.r);
    CHECK(e.r <= e.ci_high);
  }
}

TEST_CASE("report serialization round trip") {
  Rng rng(8);
  std::vector<DimCorrelations> per(4);
  for (auto& u : per)
    for (auto& r : u) r = rng.uniform(-1.0, 1.0);
  const CorrelationReport rep = build_report(per, 3);
  const CorrelationReport back = report_from_json(to_json(rep));
  REQUIRE(back.entries.size() == rep.entries.size());
  for (std::size_t i = 0; i < rep.entries.size(); ++i) {
    CHECK(back.entries[i].name == rep.entries[i].name);
    CHECK(back.entries[i].r == rep.entries[i].r);
    CHECK(back.entries[i].ci_high == rep.entries[i].ci_high);
  }
  const std::string csv = to_csv(rep);
  CHECK(csv.rfind("name,r,ci_low,ci_high,n\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == kReportRows + 1);
  CHECK_THROWS_AS(report_from_json(nlohmann::json::object()), FormatError);
}

TEST_CASE("identity oracle scores one everywhere") {
  const Corpus& c = small_test_split();
  std::vector<MatD> preds;
  for (const auto& u : c.utterances) preds.push_back(target_matrix(u.targets));
  const CorrelationReport rep = evaluate_predictions(preds, c, 0);
  for (const auto& e : rep.entries) {
    CAPTURE(e.name);
    CHECK(e.r == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(e.n == static_cast<int>(c.size()));
  }
}

TEST_CASE("frame-shuffled predictions score near zero") {
  const Corpus& c = small_test_split();
  Rng rng(31);
  std::vector<MatD> preds;
  for (const auto& u : c.utterances) {
    const MatD t = target_matrix(u.targets);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(t.rows()));
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<Eigen::Index>(i);
    shuffle(perm.begin(), perm.end(), rng);
    MatD p(t.rows(), t.cols());
    for (Eigen::Index i = 0; i < t.rows(); ++i) p.row(i) = t.row(perm[static_cast<std::size_t>(i)]);
    preds.push_back(p);
  }
  const CorrelationReport rep = evaluate_predictions(preds, c, 0);
  CHECK(std::abs(rep.ema_mean()) < 0.1);
  for (const auto& e : rep.entries) {
    CHECK(e.r >= -1.0);
    CHECK(e.r <= 1.0);
  }
}
