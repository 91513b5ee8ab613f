#include "emg2artic/ablation.hpp"

#include "emg2artic/config.hpp"
#include "emg2artic/io.hpp"
#include "emg2artic/log.hpp"
#include "emg2artic/rng.hpp"
#include "emg2artic/svg.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace emg2artic::ablation {

using nlohmann::json;

ElectrodeSet ElectrodeSet::of(std::vector<int> ids, int n_channels) {
  if (ids.empty()) throw std::invalid_argument("electrode set is empty");
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw std::invalid_argument("electrode set has duplicate ids");
  for (int id : ids)
    if (id < 1 || id > n_channels)
      throw std::invalid_argument("electrode id " + std::to_string(id) + " out of range 1.." + std::to_string(n_channels));
  return ElectrodeSet{std::move(ids)};
}

ElectrodeSet ElectrodeSet::all(int n_channels) {
  std::vector<int> ids;
  for (int i = 1; i <= n_channels; ++i) ids.push_back(i);
  return of(std::move(ids), n_channels);
}

std::string ElectrodeSet::label() const {
  std::string s;
  for (int id : ids) s += (s.empty() ? "" : ",") + std::to_string(id);
  return s;
}

bool ElectrodeSet::contains(int id) const { return std::binary_search(ids.begin(), ids.end(), id); }

ElectrodeSet parse_electrodes(const std::string& text, int n_channels) {
  std::vector<int> ids;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(tok, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad electrode id '" + tok + "'");
    }
    if (used != tok.size()) throw std::invalid_argument("bad electrode id '" + tok + "'");
    ids.push_back(v);
  }
  return ElectrodeSet::of(std::move(ids), n_channels);
}

ElectrodeSet Condition::electrodes(int n_channels) const {
  switch (kind) {
    case Kind::Full: return ElectrodeSet::all(n_channels);
    case Kind::UseOnlyOne: return ElectrodeSet::of({electrode}, n_channels);
    case Kind::RemoveOne: {
      ElectrodeSet::of({electrode}, n_channels);
      if (n_channels < 2) throw std::invalid_argument("cannot remove the only electrode");
      std::vector<int> ids;
      for (int i = 1; i <= n_channels; ++i)
        if (i != electrode) ids.push_back(i);
      return ElectrodeSet::of(std::move(ids), n_channels);
    }
    case Kind::Subset: return ElectrodeSet::of(subset.ids, n_channels);
  }
  throw std::logic_error("unknown condition kind");
}

std::string Condition::name() const {
  switch (kind) {
    case Kind::Full: return "full";
    case Kind::RemoveOne: return "remove_" + std::to_string(electrode);
    case Kind::UseOnlyOne: return "useonly_" + std::to_string(electrode);
    case Kind::Subset: {
      std::string s = subset.label();
      std::replace(s.begin(), s.end(), ',', '-');
      return "subset_" + s;
    }
  }
  throw std::logic_error("unknown condition kind");
}

std::string Condition::family() const {
  switch (kind) {
    case Kind::Full: return "full";
    case Kind::RemoveOne: return "remove";
    case Kind::UseOnlyOne: return "useonly";
    case Kind::Subset: return "subset";
  }
  throw std::logic_error("unknown condition kind");
}

Corpus mask_electrodes(const Corpus& corpus, const ElectrodeSet& set) {
  const int n = corpus.n_channels();
  ElectrodeSet::of(set.ids, n);
  std::vector<int> zero_based;
  for (int id : set.ids) zero_based.push_back(id - 1);
  return select_channels(corpus, zero_based);
}

std::uint64_t condition_seed(std::uint64_t base, const Condition& c) { return derive_seed(base, fnv1a(c.name())); }

ConditionResult run_condition(const CorpusSplits& splits, const Condition& condition, const RunSpec& spec,
                              const std::filesystem::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const ElectrodeSet set = condition.electrodes(splits.train.n_channels());
  const Corpus train_set = mask_electrodes(splits.train, set);
  const Corpus val_set = mask_electrodes(splits.val, set);
  const Corpus test_set = mask_electrodes(splits.test, set);

  EncoderConfig model = spec.model;
  model.n_emg_channels = static_cast<int>(set.size());
  TrainConfig tc = spec.train;
  tc.seed = condition_seed(spec.train.seed, condition);

  log::info("[%s] training on electrodes %s", condition.name().c_str(), set.label().c_str());
  TrainResult tr = train(train_set, val_set, model, spec.loss, tc);

  ConditionResult res;
  res.condition = condition;
  res.best_epoch = tr.best_epoch;
  res.report = evaluate(tr.best_params, model, test_set, tc.seed);
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  log::info("[%s] done in %.1fs  ema_r %.3f  loud_r %.3f  pitch_r %.3f", condition.name().c_str(), res.seconds,
            res.report.ema_mean(), res.report.loudness(), res.report.pitch());

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    save_checkpoint(out_dir / "checkpoint", tr.best_params, model, spec.loss);
    io::write_text(out_dir / "history.csv", tr.history.to_csv());
    io::write_json(out_dir / "report.json", to_json(res.report));
    io::write_text(out_dir / "report.csv", to_csv(res.report));
  }
  return res;
}

Family parse_family(const std::string& text) {
  if (text == "remove") return Family::Remove;
  if (text == "useonly") return Family::UseOnly;
  if (text == "both") return Family::Both;
  throw std::invalid_argument("unknown ablation family '" + text + "' (remove, useonly, both)");
}

std::vector<Condition> sweep_conditions(Family family, int n_channels) {
  std::vector<Condition> out{Condition::full()};
  if (family != Family::UseOnly)
    for (int i = 1; i <= n_channels; ++i) out.push_back(Condition::remove_one(i));
  if (family != Family::Remove)
    for (int i = 1; i <= n_channels; ++i) out.push_back(Condition::use_only(i));
  return out;
}

int Heatmap::strongest(int group) const {
  if (group < 0 || group >= drop.cols()) throw std::out_of_range("heatmap group out of range");
  int best = 0;
  for (Eigen::Index e = 1; e < drop.rows(); ++e) {
    const double v = drop(e, group), b = drop(best, group);
    if (family == Kind::UseOnlyOne ? v < b : v > b) best = static_cast<int>(e);
  }
  return best + 1;
}

namespace {

const ConditionResult* find(const std::vector<ConditionResult>& results, Kind kind, int electrode) {
  for (const auto& r : results)
    if (r.condition.kind == kind && (kind == Kind::Full || r.condition.electrode == electrode)) return &r;
  return nullptr;
}

int count_electrodes(const std::vector<ConditionResult>& results, Kind kind) {
  int n = 0;
  for (const auto& r : results)
    if (r.condition.kind == kind) n = std::max(n, r.condition.electrode);
  return n;
}

}  // namespace

Heatmap build_heatmap(const std::vector<ConditionResult>& results, Kind family) {
  if (family != Kind::RemoveOne && family != Kind::UseOnlyOne)
    throw std::invalid_argument("build_heatmap: family must be remove-one or use-only-one");
  const ConditionResult* full = find(results, Kind::Full, 0);
  if (!full) throw std::invalid_argument("build_heatmap: missing full condition");
  const int n = std::max(kElectrodes, count_electrodes(results, family));
  Heatmap h;
  h.family = family;
  h.drop.resize(n, kNumFeatureGroups);
  for (int e = 1; e <= n; ++e) {
    const ConditionResult* c = find(results, family, e);
    if (!c) throw std::invalid_argument("build_heatmap: missing condition for electrode " + std::to_string(e));
    for (int g = 0; g < kNumFeatureGroups; ++g) h.drop(e - 1, g) = drop_rate(full->report.group(g), c->report.group(g));
  }
  return h;
}

SubsetSelection select_subset(const std::vector<ConditionResult>& results, int k) {
  const int n = std::max(kElectrodes, count_electrodes(results, Kind::UseOnlyOne));
  if (k < 1 || k > n) throw std::invalid_argument("select_subset: k must be in 1.." + std::to_string(n));
  MatD score(n, kNumFeatureGroups);
  for (int e = 1; e <= n; ++e) {
    const ConditionResult* c = find(results, Kind::UseOnlyOne, e);
    if (!c) throw std::invalid_argument("select_subset: missing use-only condition for electrode " + std::to_string(e));
    for (int g = 0; g < kNumFeatureGroups; ++g) {
      score(e - 1, g) = c->report.group(g);
      if (!std::isfinite(score(e - 1, g))) throw std::invalid_argument("select_subset: non-finite correlation");
    }
  }
  const VecD mean = score.rowwise().mean();

  // a outranks b on group g
  auto better = [&](int a, int b, int g) {
    if (score(a, g) != score(b, g)) return score(a, g) > score(b, g);
    if (mean(a) != mean(b)) return mean(a) > mean(b);
    return a < b;
  };

  std::vector<bool> chosen(static_cast<std::size_t>(n), false), covered(kNumFeatureGroups, false);
  SubsetSelection sel;
  std::vector<int> ids;
  for (int pick = 0; pick < k; ++pick) {
    if (std::all_of(covered.begin(), covered.end(), [](bool c) { return c; }))
      std::fill(covered.begin(), covered.end(), false);
    std::vector<int> top(kNumFeatureGroups, -1);
    for (int g = 0; g < kNumFeatureGroups; ++g) {
      if (covered[static_cast<std::size_t>(g)]) continue;
      for (int e = 0; e < n; ++e)
        if (!chosen[static_cast<std::size_t>(e)] && (top[static_cast<std::size_t>(g)] < 0 || better(e, top[static_cast<std::size_t>(g)], g)))
          top[static_cast<std::size_t>(g)] = e;
    }
    int best_g = -1;
    for (int g = 0; g < kNumFeatureGroups; ++g) {
      const int e = top[static_cast<std::size_t>(g)];
      if (e < 0) continue;
      if (best_g < 0) {
        best_g = g;
        continue;
      }
      const int b = top[static_cast<std::size_t>(best_g)];
      const double se = score(e, g), sb = score(b, best_g);
      if (se != sb ? se > sb : (mean(e) != mean(b) ? mean(e) > mean(b) : e < b)) best_g = g;
    }
    const int e = top[static_cast<std::size_t>(best_g)];
    chosen[static_cast<std::size_t>(e)] = true;
    // the pick covers every open group it tops
    for (int g = 0; g < kNumFeatureGroups; ++g)
      if (top[static_cast<std::size_t>(g)] == e) covered[static_cast<std::size_t>(g)] = true;
    ids.push_back(e + 1);
    sel.picks.push_back({e + 1, std::string(kFeatureGroupNames[static_cast<std::size_t>(best_g)]), score(e, best_g)});
  }
  sel.set = ElectrodeSet::of(ids, n);
  return sel;
}

SweepResult run_sweep(const CorpusSplits& splits, const std::vector<Condition>& conditions, const RunSpec& spec,
                      int workers, const std::filesystem::path& out_dir) {
  if (conditions.empty()) throw std::invalid_argument("run_sweep: no conditions");
  const int n_ch = splits.train.n_channels();
  for (const auto& c : conditions) c.electrodes(n_ch);

  SweepResult sweep;
  sweep.runs.resize(conditions.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < conditions.size(); i = next++) {
      {
        std::lock_guard lock(failure_mutex);
        if (failure) return;
      }
      try {
        const auto& c = conditions[i];
        sweep.runs[i] = run_condition(splits, c, spec, out_dir.empty() ? out_dir : out_dir / c.family() / c.name());
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n_threads = std::clamp(workers, 1, static_cast<int>(conditions.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  const bool has_full = find(sweep.runs, Kind::Full, 0) != nullptr;
  auto complete = [&](Kind kind) {
    for (int e = 1; e <= n_ch; ++e)
      if (!find(sweep.runs, kind, e)) return false;
    return has_full;
  };
  if ((sweep.has_remove = complete(Kind::RemoveOne))) sweep.remove = build_heatmap(sweep.runs, Kind::RemoveOne);
  if ((sweep.has_useonly = complete(Kind::UseOnlyOne))) sweep.useonly = build_heatmap(sweep.runs, Kind::UseOnlyOne);
  if (!out_dir.empty()) write_sweep_outputs(sweep, spec, out_dir);
  return sweep;
}

std::string heatmap_csv(const Heatmap& h) {
  std::string out;
  for (int s = 0; s < kNumEmaSensors; ++s) out += (s ? "," : "") + std::string(kEmaSensorNames[static_cast<std::size_t>(s)]);
  out += "\n";
  char buf[32];
  for (Eigen::Index e = 0; e < h.drop.rows(); ++e) {
    for (int s = 0; s < kNumEmaSensors; ++s) {
      std::snprintf(buf, sizeof buf, "%s%.17g", s ? "," : "", h.drop(e, s));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

json heatmap_json(const Heatmap& h) {
  json rows = json::array();
  for (Eigen::Index e = 0; e < h.drop.rows(); ++e) {
    json row = {{"electrode", e + 1}};
    for (int g = 0; g < kNumFeatureGroups; ++g) row[std::string(kFeatureGroupNames[static_cast<std::size_t>(g)])] = h.drop(e, g);
    rows.push_back(row);
  }
  json strongest = json::object();
  for (int g = 0; g < kNumFeatureGroups; ++g)
    strongest[std::string(kFeatureGroupNames[static_cast<std::size_t>(g)])] = h.strongest(g);
  return {{"drop_rate", rows}, {"strongest_electrode", strongest}};
}

std::string heatmap_svg(const Heatmap& h, const std::string& title) {
  std::vector<std::string> rows, cols;
  for (Eigen::Index e = 0; e < h.drop.rows(); ++e) rows.push_back("electrode " + std::to_string(e + 1));
  for (auto n : kFeatureGroupNames) cols.emplace_back(n);
  // display range only; the data keep their sign
  double lo = std::min(0.0, h.drop.minCoeff()), hi = std::max(h.drop.maxCoeff(), lo + 1e-9);
  lo = std::max(lo, -1.0);
  hi = std::min(hi, 1.0);
  if (!(hi > lo)) hi = lo + 1.0;
  return svg::heatmap(h.drop, rows, cols, title, lo, hi);
}

Heatmap heatmap_from_json(const json& doc, Kind family) {
  Heatmap h;
  h.family = family;
  try {
    const json& rows = doc.at("drop_rate");
    h.drop.resize(static_cast<Eigen::Index>(rows.size()), kNumFeatureGroups);
    for (std::size_t e = 0; e < rows.size(); ++e) {
      if (rows[e].at("electrode").get<int>() != static_cast<int>(e) + 1) throw FormatError("heatmap rows out of order");
      for (int g = 0; g < kNumFeatureGroups; ++g)
        h.drop(static_cast<Eigen::Index>(e), g) = rows[e].at(std::string(kFeatureGroupNames[static_cast<std::size_t>(g)])).get<double>();
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad heatmap: ") + e.what());
  }
  if (h.drop.rows() == 0) throw FormatError("bad heatmap: no rows");
  return h;
}

json to_json(const SweepResult& sweep, const RunSpec& spec) {
  json runs = json::array();
  for (const auto& r : sweep.runs)
    runs.push_back({{"condition", r.condition.name()},
                    {"family", r.condition.family()},
                    {"electrodes", r.condition.electrodes(std::max(kElectrodes, r.condition.electrode)).ids},
                    {"seed", condition_seed(spec.train.seed, r.condition)},
                    {"best_epoch", r.best_epoch},
                    {"report", to_json(r.report)}});
  json doc = {{"format", "emg2artic-ablation-report"},
              {"version", 1},
              {"seed", spec.train.seed},
              {"model", config::to_json(spec.model)},
              {"loss", config::to_json(spec.loss)},
              {"train", config::to_json(spec.train)},
              {"drop_rate_definition", "(r_full - r_condition) / r_full"},
              {"runs", runs}};
  if (sweep.has_remove) doc["heatmap_remove"] = heatmap_json(sweep.remove);
  if (sweep.has_useonly) doc["heatmap_useonly"] = heatmap_json(sweep.useonly);
  return doc;
}

void write_sweep_outputs(const SweepResult& sweep, const RunSpec& spec, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  io::write_json(out_dir / "ablation_report.json", to_json(sweep, spec));
  if (sweep.has_remove) {
    io::write_text(out_dir / "heatmap_remove.csv", heatmap_csv(sweep.remove));
    io::write_text(out_dir / "heatmap_remove.svg", heatmap_svg(sweep.remove, "Drop rate, one electrode removed"));
  }
  if (sweep.has_useonly) {
    io::write_text(out_dir / "heatmap_useonly.csv", heatmap_csv(sweep.useonly));
    io::write_text(out_dir / "heatmap_useonly.svg", heatmap_svg(sweep.useonly, "Drop rate, one electrode used alone"));
  }
}

}  // namespace emg2artic::ablation
