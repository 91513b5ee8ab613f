#pragma once

// Deterministic mini-batch AdamW training with best-validation tracking.

#include "emg2artic/corpus.hpp"
#include "emg2artic/eval_metrics.hpp"
#include "emg2artic/model.hpp"
#include "emg2artic/nn/params.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace emg2artic {

struct TrainConfig {
  int batch_size = 32;
  double learning_rate = 5e-4;
  double weight_decay = 1e-7;
  int n_epochs = 80;
  std::uint64_t seed = 0;
  /// Validation correlations are computed every eval_every epochs and after
  /// the last one; validation loss is computed every epoch.
  int eval_every = 5;
  /// Global gradient-norm clip; <= 0 disables clipping.
  double clip_norm = 10.0;

  void validate() const;
};

/// Utterance indices of one mini-batch. Every sequence is padded to
/// padded_length; lengths[i] is item i's true length and frames past it are
/// masked out. The encoder consumes each item at its true length, so padding
/// never reaches batch-norm statistics, attention or the losses.
struct Batch {
  std::vector<std::size_t> items;
  std::vector<Eigen::Index> lengths;
  Eigen::Index padded_length = 0;

  /// [size, padded_length] 1/0 validity mask over EMG samples.
  Mat<std::uint8_t> mask() const;
};

/// Shuffles by (seed, epoch), sorts into length buckets of a few batches
/// each, splits into batches and shuffles the batch order.
std::vector<Batch> make_batches(const Corpus& corpus, int batch_size, std::uint64_t seed, int epoch);

struct EpochRecord {
  int epoch = 0;
  LossBreakdown train;
  LossBreakdown val;
  /// NaN on epochs without a correlation evaluation.
  double val_ema_r = 0.0;
  double val_loudness_r = 0.0;
  double val_pitch_r = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  /// epoch,l_total,l_ema,l_pitch,l_loud,l_phon,val_total,...,val_ema_r,...
  std::string to_csv() const;
};

struct TrainResult {
  nn::ParamStore final_params;
  nn::ParamStore best_params;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains a fresh model initialised from derive_seed(train_cfg.seed, 0).
/// Throws std::runtime_error naming the batch on a non-finite loss.
TrainResult train(const Corpus& train_set, const Corpus& val_set, const EncoderConfig& model_cfg,
                  const LossWeights& weights, const TrainConfig& train_cfg, const EpochCallback& on_epoch = {});

/// Continues from given parameters (used by tests and resumable runs).
TrainResult train_from(nn::ParamStore params, const Corpus& train_set, const Corpus& val_set,
                       const EncoderConfig& model_cfg, const LossWeights& weights, const TrainConfig& train_cfg,
                       const EpochCallback& on_epoch = {});

struct Checkpoint {
  nn::ParamStore params;
  EncoderConfig model;
  LossWeights weights;
};

/// weights.bin + manifest.json + model_config.json.
void save_checkpoint(const std::filesystem::path& dir, const nn::ParamStore& params, const EncoderConfig& model,
                     const LossWeights& weights);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace emg2artic
