#pragma once

// EMG encoder: strided 1-D ResNet front end, sinusoidal positions, a pre-norm
// Transformer stack and four per-frame linear heads (EMA, pitch, loudness,
// phoneme logits). Parameters live in an nn::ParamStore; the functions here
// only read from it, except that training-mode batch norm updates the
// running statistics stored alongside the weights.

#include "emg2artic/feature_targets.hpp"
#include "emg2artic/nn/ops.hpp"
#include "emg2artic/nn/params.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace emg2artic {

struct EncoderConfig {
  int n_emg_channels = 8;
  int hidden_dim = 64;
  int n_resnet_blocks = 3;
  int conv_kernel = 3;
  int conv_stride = 2;
  int n_transformer_layers = 2;
  int n_heads = 4;
  int phoneme_vocab = kDefaultPhonemeVocab;
  int ff_multiplier = 4;

  /// Hidden 768, 6 layers, 8 heads.
  static EncoderConfig full_scale();
  static EncoderConfig desk();
  /// Small enough for finite-difference checks and the ablation sweep.
  static EncoderConfig tiny();

  void validate() const;
  int downsample_factor() const;
  /// Frame count for T input samples: ceil-divide by the stride once per block.
  Eigen::Index output_length(Eigen::Index t) const;
  /// Shortest accepted input.
  Eigen::Index min_input_length() const { return downsample_factor(); }
};

struct LossWeights {
  double alpha_pitch = 0.5;
  double alpha_loud = 1.0;
  double alpha_phon = 0.5;

  void validate() const;
};

struct ModelOutput {
  nn::Var ema;             // [T_f, 12]
  nn::Var pitch;           // [T_f, 1]
  nn::Var loudness;        // [T_f, 1]
  nn::Var phoneme_logits;  // [T_f, V]

  Eigen::Index frames() const { return ema.rows(); }
};

/// Frame-level supervision at the encoder frame rate, in training precision.
struct FrameTargets {
  MatD ema;       // [N, 12]
  MatD pitch;     // [N, 1]
  MatD loudness;  // [N, 1]
  std::vector<int> phonemes;

  Eigen::Index frames() const { return ema.rows(); }
  static FrameTargets from_tracks(const ArticulatoryTrack& track, const PhonemeTrack& phonemes);
};

struct LossTerms {
  nn::Var ema, pitch, loud, phon;
};

struct LossBreakdown {
  double total = 0.0;
  double ema = 0.0;
  double pitch = 0.0;
  double loud = 0.0;
  double phon = 0.0;
};

/// Fresh parameters: Kaiming-uniform weights, zero biases, unit/zero norm
/// affine parameters, batch-norm running statistics at (0, 1).
nn::ParamStore init_params(const EncoderConfig& cfg, std::uint64_t seed);

/// Encodes a batch of [T_i, C] recordings to [T_f_i, hidden] sequences.
/// Batch norm pools statistics over every frame of every sequence.
std::vector<nn::Var> encode(const std::vector<MatD>& emg, nn::ParamStore& params, const EncoderConfig& cfg,
                            bool training);
/// Inference on one recording.
nn::Var encode(const MatD& emg, nn::ParamStore& params, const EncoderConfig& cfg);

ModelOutput predict(const nn::Var& hidden, const nn::ParamStore& params, const EncoderConfig& cfg);

/// Unweighted per-head losses over the batch. Each prediction/target pair is
/// truncated to align_lengths(); frames past that are never scored.
LossTerms component_losses(std::span<const ModelOutput> outputs, std::span<const FrameTargets* const> targets);

/// L_ema + alpha_pitch L_pitch + alpha_loud L_loud + alpha_phon L_phon.
nn::Var combine_losses(const LossTerms& terms, const LossWeights& w);

LossBreakdown summarize(const LossTerms& terms, const nn::Var& total);

/// Full training-mode pass: clears gradients, runs forward, backpropagates
/// the combined loss. Throws std::runtime_error on a non-finite loss.
LossBreakdown forward_backward(const std::vector<MatD>& emg, std::span<const FrameTargets* const> targets,
                               nn::ParamStore& params, const EncoderConfig& cfg, const LossWeights& w);

/// Inference-mode loss without gradients (validation).
LossBreakdown evaluate_loss(const std::vector<MatD>& emg, std::span<const FrameTargets* const> targets,
                            nn::ParamStore& params, const EncoderConfig& cfg, const LossWeights& w);

}  // namespace emg2artic
