#include "emg2artic/synth_data.hpp"
#include "emg2artic/trainer.hpp"
#include "tmpdir.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace emg2artic;

namespace {

const CorpusSplits& corpus() {
  static TempDir dir;
  static const CorpusSplits splits = [] {
    synth::SynthConfig cfg;
    cfg.n_train = 10;
    cfg.n_val = 3;
    cfg.n_test = 3;
    cfg.min_duration_s = 0.4;
    cfg.max_duration_s = 1.0;
    cfg.seed = 5;
    synth::gen_corpus(cfg, dir / "c");
    return load_corpus(dir / "c");
  }();
  return splits;
}

TrainConfig quick(int epochs, std::uint64_t seed = 1) {
  TrainConfig t;
  t.batch_size = 4;
  t.learning_rate = 2e-3;
  t.n_epochs = epochs;
  t.eval_every = 2;
  t.seed = seed;
  return t;
}

}  // namespace

TEST_CASE("batches cover every utterance once") {
  const Corpus& c = corpus().train;
  for (int bs : {1, 3, 4, 32}) {
    const auto batches = make_batches(c, bs, 7, 1);
    std::multiset<std::size_t> seen;
    for (const auto& b : batches) {
      CHECK(b.items.size() >= 1);
      CHECK(b.items.size() <= static_cast<std::size_t>(bs));
      REQUIRE(b.lengths.size() == b.items.size());
      for (std::size_t i = 0; i < b.items.size(); ++i) {
        seen.insert(b.items[i]);
        CHECK(b.lengths[i] == c.utterances[b.items[i]].emg.rows());
      }
      CHECK(b.padded_length == *std::max_element(b.lengths.begin(), b.lengths.end()));
      const auto m = b.mask();
      for (std::size_t i = 0; i < b.items.size(); ++i)
        CHECK(m.row(static_cast<Eigen::Index>(i)).cast<int>().sum() == b.lengths[i]);
    }
    CHECK(seen.size() == c.size());
    CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == c.size());
  }
}

TEST_CASE("batch order depends on seed and epoch only") {
  const Corpus& c = corpus().train;
  auto items = [](const std::vector<Batch>& bs) {
    std::vector<std::size_t> v;
    for (const auto& b : bs) v.insert(v.end(), b.items.begin(), b.items.end());
    return v;
  };
  CHECK(items(make_batches(c, 3, 7, 1)) == items(make_batches(c, 3, 7, 1)));
  CHECK(items(make_batches(c, 3, 7, 1)) != items(make_batches(c, 3, 7, 2)));
  CHECK(items(make_batches(c, 3, 7, 1)) != items(make_batches(c, 3, 8, 1)));
  CHECK_THROWS_AS(make_batches(c, 0, 7, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_batches(Corpus{}, 4, 7, 1), std::invalid_argument);
}

TEST_CASE("padding does not leak into shorter sequences") {
  const Corpus& c = corpus().train;
  const EncoderConfig cfg = EncoderConfig::tiny();
  nn::ParamStore p = init_params(cfg, 3);
  std::size_t shortest = 0, longest = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c.utterances[i].emg.rows() < c.utterances[shortest].emg.rows()) shortest = i;
    if (c.utterances[i].emg.rows() > c.utterances[longest].emg.rows()) longest = i;
  }
  REQUIRE(c.utterances[shortest].emg.rows() < c.utterances[longest].emg.rows());
  const MatD& a = c.utterances[shortest].emg;
  const MatD& b = c.utterances[longest].emg;
  const MatD alone = encode(std::vector<MatD>{a}, p, cfg, false)[0].value();
  const MatD batched = encode(std::vector<MatD>{a, b}, p, cfg, false)[0].value();
  CHECK(alone == batched);
  CHECK(alone.rows() == cfg.output_length(a.rows()));
}

TEST_CASE("zero learning rate leaves trainable weights untouched") {
  TrainConfig t = quick(2);
  t.learning_rate = 0.0;
  const EncoderConfig cfg = EncoderConfig::tiny();
  const nn::ParamStore before = init_params(cfg, derive_seed(t.seed, 0));
  const TrainResult r = train(corpus().train, corpus().val, cfg, LossWeights{}, t);
  REQUIRE(r.final_params.entries().size() == before.entries().size());
  for (std::size_t i = 0; i < before.entries().size(); ++i) {
    const auto& e = before.entries()[i];
    if (!e.trainable) continue;
    CAPTURE(e.name);
    CHECK(r.final_params.entries()[i].var.value() == e.var.value());
  }
}

TEST_CASE("training reduces the loss and records history") {
  const TrainResult r = train(corpus().train, corpus().val, EncoderConfig::tiny(), LossWeights{}, quick(6));
  const auto& h = r.history.epochs;
  REQUIRE(h.size() == 6);
  CHECK(h.back().train.total < h.front().train.total);
  CHECK(r.best_epoch >= 1);
  CHECK(r.best_val_loss == h[static_cast<std::size_t>(r.best_epoch - 1)].val.total);
  for (const auto& e : h) CHECK(e.val.total >= r.best_val_loss);
  CHECK(std::isnan(h[0].val_ema_r));
  CHECK_FALSE(std::isnan(h[1].val_ema_r));
  CHECK_FALSE(std::isnan(h[5].val_ema_r));

  const std::string csv = r.history.to_csv();
  CHECK(csv.rfind("epoch,l_total,l_ema,l_pitch,l_loud,l_phon,val_total", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
}

TEST_CASE("identical seeds give byte-identical runs") {
  TempDir tmp;
  const EncoderConfig cfg = EncoderConfig::tiny();
  const TrainResult a = train(corpus().train, corpus().val, cfg, LossWeights{}, quick(2, 9));
  const TrainResult b = train(corpus().train, corpus().val, cfg, LossWeights{}, quick(2, 9));
  CHECK(a.history.to_csv() == b.history.to_csv());
  save_checkpoint(tmp / "a", a.final_params, cfg, LossWeights{});
  save_checkpoint(tmp / "b", b.final_params, cfg, LossWeights{});
  CHECK(same_tree(tmp / "a", tmp / "b"));

  const TrainResult c = train(corpus().train, corpus().val, cfg, LossWeights{}, quick(2, 10));
  CHECK(c.history.to_csv() != a.history.to_csv());
}

TEST_CASE("checkpoint round trip") {
  TempDir tmp;
  EncoderConfig cfg = EncoderConfig::tiny();
  LossWeights w;
  w.alpha_pitch = 0.25;
  nn::ParamStore p = init_params(cfg, 12);
  save_checkpoint(tmp / "ck", p, cfg, w);
  Checkpoint ck = load_checkpoint(tmp / "ck");
  CHECK(ck.model.hidden_dim == cfg.hidden_dim);
  CHECK(ck.weights.alpha_pitch == 0.25);
  // stored as binary32
  for (std::size_t i = 0; i < p.entries().size(); ++i) {
    const MatD rounded = p.entries()[i].var.value().cast<float>().cast<double>();
    CHECK(ck.params.entries()[i].var.value() == rounded);
    p.entries()[i].var.mutable_value() = rounded;
  }
  save_checkpoint(tmp / "again", ck.params, ck.model, ck.weights);
  CHECK(same_tree(tmp / "ck", tmp / "again"));

  const MatD& x = corpus().test.utterances[0].emg;
  CHECK(infer(x, ck.params, ck.model) == infer(x, p, cfg));
  CHECK_THROWS(load_checkpoint(tmp / "missing"));
}

TEST_CASE("non-finite input is reported with its batch") {
  Corpus bad = corpus().train;
  for (auto& u : bad.utterances) u.emg(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    train(bad, corpus().val, EncoderConfig::tiny(), LossWeights{}, quick(1));
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("epoch 1, batch 0") != std::string::npos);
  }
}

TEST_CASE("train config validation") {
  TrainConfig t;
  CHECK_NOTHROW(t.validate());
  t.batch_size = 0;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  t = {};
  t.learning_rate = -1.0;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  t = {};
  t.eval_every = 0;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  EncoderConfig wrong = EncoderConfig::tiny();
  wrong.n_emg_channels = 3;
  CHECK_THROWS_AS(train(corpus().train, corpus().val, wrong, LossWeights{}, quick(1)), std::invalid_argument);
}
