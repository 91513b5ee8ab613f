#include "emg2artic/trainer.hpp"

#include "emg2artic/config.hpp"
#include "emg2artic/io.hpp"
#include "emg2artic/log.hpp"
#include "emg2artic/nn/optim.hpp"
#include "emg2artic/nn/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace emg2artic {

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be >= 0");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be >= 0");
  if (n_epochs < 0) throw std::invalid_argument("n_epochs must be >= 0");
  if (eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
}

Mat<std::uint8_t> Batch::mask() const {
  Mat<std::uint8_t> m = Mat<std::uint8_t>::Zero(static_cast<Eigen::Index>(items.size()), padded_length);
  for (std::size_t i = 0; i < lengths.size(); ++i) m.row(static_cast<Eigen::Index>(i)).head(lengths[i]).setOnes();
  return m;
}

std::vector<Batch> make_batches(const Corpus& corpus, int batch_size, std::uint64_t seed, int epoch) {
  if (batch_size < 1) throw std::invalid_argument("make_batches: batch_size must be >= 1");
  if (corpus.empty()) throw std::invalid_argument("make_batches: empty corpus");
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(epoch)));
  shuffle(order.begin(), order.end(), rng);

  auto len = [&](std::size_t i) { return corpus.utterances[i].emg.rows(); };
  const std::size_t bucket = static_cast<std::size_t>(batch_size) * 4;
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += bucket) {
    const auto first = order.begin() + static_cast<std::ptrdiff_t>(start);
    const auto last = order.begin() + static_cast<std::ptrdiff_t>(std::min(start + bucket, order.size()));
    std::stable_sort(first, last, [&](std::size_t a, std::size_t b) { return len(a) < len(b); });
    for (auto it = first; it < last; it += std::min<std::ptrdiff_t>(batch_size, last - it)) {
      Batch b;
      b.items.assign(it, it + std::min<std::ptrdiff_t>(batch_size, last - it));
      for (std::size_t i : b.items) {
        b.lengths.push_back(len(i));
        b.padded_length = std::max(b.padded_length, len(i));
      }
      batches.push_back(std::move(b));
    }
  }
  shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

std::string TrainHistory::to_csv() const {
  std::string out =
      "epoch,l_total,l_ema,l_pitch,l_loud,l_phon,val_total,val_ema,val_pitch,val_loud,val_phon,val_ema_r,"
      "val_loudness_r,val_pitch_r\n";
  char buf[64];
  auto num = [&](double v) {
    if (std::isnan(v)) return std::string();
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch);
    for (double v : {e.train.total, e.train.ema, e.train.pitch, e.train.loud, e.train.phon, e.val.total, e.val.ema,
                     e.val.pitch, e.val.loud, e.val.phon, e.val_ema_r, e.val_loudness_r, e.val_pitch_r})
      out += "," + num(v);
    out += "\n";
  }
  return out;
}

namespace {

struct BatchData {
  std::vector<MatD> emg;
  std::vector<const FrameTargets*> targets;
};

BatchData gather(const Corpus& corpus, const std::vector<std::size_t>& items) {
  BatchData d;
  for (std::size_t i : items) {
    d.emg.push_back(corpus.utterances[i].emg);
    d.targets.push_back(&corpus.utterances[i].targets);
  }
  return d;
}

void accumulate(LossBreakdown& acc, const LossBreakdown& b, double w) {
  acc.total += w * b.total;
  acc.ema += w * b.ema;
  acc.pitch += w * b.pitch;
  acc.loud += w * b.loud;
  acc.phon += w * b.phon;
}

/// Item-weighted mean validation loss in inference mode.
LossBreakdown validation_loss(const Corpus& val, nn::ParamStore& params, const EncoderConfig& cfg,
                              const LossWeights& w, int batch_size) {
  LossBreakdown acc;
  for (std::size_t start = 0; start < val.size(); start += static_cast<std::size_t>(batch_size)) {
    std::vector<std::size_t> items;
    for (std::size_t i = start; i < std::min(val.size(), start + static_cast<std::size_t>(batch_size)); ++i)
      items.push_back(i);
    const BatchData d = gather(val, items);
    accumulate(acc, evaluate_loss(d.emg, d.targets, params, cfg, w),
               static_cast<double>(items.size()) / static_cast<double>(val.size()));
  }
  return acc;
}

}  // namespace

TrainResult train_from(nn::ParamStore params, const Corpus& train_set, const Corpus& val_set,
                       const EncoderConfig& model_cfg, const LossWeights& weights, const TrainConfig& tc,
                       const EpochCallback& on_epoch) {
  model_cfg.validate();
  weights.validate();
  tc.validate();
  if (train_set.empty() || val_set.empty()) throw std::invalid_argument("train: empty train or validation set");
  if (train_set.n_channels() != model_cfg.n_emg_channels || val_set.n_channels() != model_cfg.n_emg_channels)
    throw std::invalid_argument("train: corpus channel count does not match the model");

  nn::AdamWConfig opt_cfg;
  opt_cfg.lr = tc.learning_rate;
  opt_cfg.weight_decay = tc.weight_decay;
  nn::AdamW opt(opt_cfg);

  TrainResult res;
  res.best_params = params.clone();
  res.best_epoch = 0;
  res.best_val_loss = std::numeric_limits<double>::infinity();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  for (int epoch = 1; epoch <= tc.n_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    const auto batches = make_batches(train_set, tc.batch_size, tc.seed, epoch);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const BatchData d = gather(train_set, batches[b].items);
      LossBreakdown lb;
      try {
        lb = forward_backward(d.emg, d.targets, params, model_cfg, weights);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) + ": " + e.what());
      }
      if (tc.clip_norm > 0.0) nn::clip_grad_norm(params, tc.clip_norm);
      opt.step(params);
      accumulate(rec.train, lb, static_cast<double>(batches[b].items.size()) / static_cast<double>(train_set.size()));
    }
    rec.val = validation_loss(val_set, params, model_cfg, weights, tc.batch_size);
    rec.val_ema_r = rec.val_loudness_r = rec.val_pitch_r = nan;
    if (epoch % tc.eval_every == 0 || epoch == tc.n_epochs) {
      const CorrelationReport r = evaluate(params, model_cfg, val_set, tc.seed);
      rec.val_ema_r = r.ema_mean();
      rec.val_loudness_r = r.loudness();
      rec.val_pitch_r = r.pitch();
    }
    if (rec.val.total < res.best_val_loss) {
      res.best_val_loss = rec.val.total;
      res.best_epoch = epoch;
      res.best_params = params.clone();
    }
    log::info("epoch %d  train %.4f  val %.4f  val_ema_r %.3f  val_loud_r %.3f", epoch, rec.train.total, rec.val.total,
              rec.val_ema_r, rec.val_loudness_r);
    res.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  if (tc.n_epochs == 0) res.best_val_loss = validation_loss(val_set, params, model_cfg, weights, tc.batch_size).total;
  res.final_params = std::move(params);
  return res;
}

TrainResult train(const Corpus& train_set, const Corpus& val_set, const EncoderConfig& model_cfg,
                  const LossWeights& weights, const TrainConfig& tc, const EpochCallback& on_epoch) {
  return train_from(init_params(model_cfg, derive_seed(tc.seed, 0)), train_set, val_set, model_cfg, weights, tc,
                    on_epoch);
}

void save_checkpoint(const std::filesystem::path& dir, const nn::ParamStore& params, const EncoderConfig& model,
                     const LossWeights& weights) {
  std::filesystem::create_directories(dir);
  nn::save_weights(params, dir);
  io::write_json(dir / "model_config.json", config::model_config_json(model, weights));
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto [model, weights] = config::model_config_from_json(io::read_json(dir / "model_config.json"));
  Checkpoint c{init_params(model, 0), model, weights};
  nn::load_weights(c.params, dir);
  return c;
}

}  // namespace emg2artic
