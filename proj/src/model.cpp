#include "emg2artic/model.hpp"

#include "emg2artic/nn/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace emg2artic {

using nn::ParamStore;
using nn::Var;

EncoderConfig EncoderConfig::full_scale() {
  EncoderConfig c;
  c.hidden_dim = 768;
  c.n_transformer_layers = 6;
  c.n_heads = 8;
  return c;
}

EncoderConfig EncoderConfig::desk() { return EncoderConfig{}; }

EncoderConfig EncoderConfig::tiny() {
  EncoderConfig c;
  c.hidden_dim = 16;
  c.n_transformer_layers = 1;
  c.n_heads = 2;
  return c;
}

void EncoderConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("encoder config: " + m); };
  if (n_emg_channels < 1) fail("n_emg_channels must be >= 1");
  if (hidden_dim < 2 || hidden_dim % 2 != 0) fail("hidden_dim must be even and >= 2");
  if (n_heads < 1 || hidden_dim % n_heads != 0) fail("hidden_dim must be divisible by n_heads");
  if (n_resnet_blocks < 1) fail("n_resnet_blocks must be >= 1");
  if (conv_kernel < 1 || conv_kernel % 2 == 0) fail("conv_kernel must be odd");
  if (conv_stride < 1) fail("conv_stride must be >= 1");
  if (n_transformer_layers < 0) fail("n_transformer_layers must be >= 0");
  if (phoneme_vocab < 1) fail("phoneme_vocab must be >= 1");
  if (ff_multiplier < 1) fail("ff_multiplier must be >= 1");
}

int EncoderConfig::downsample_factor() const {
  int f = 1;
  for (int i = 0; i < n_resnet_blocks; ++i) f *= conv_stride;
  return f;
}

Eigen::Index EncoderConfig::output_length(Eigen::Index t) const {
  for (int i = 0; i < n_resnet_blocks; ++i) t = (t + conv_stride - 1) / conv_stride;
  return t;
}

void LossWeights::validate() const {
  if (!(alpha_pitch >= 0.0 && alpha_loud >= 0.0 && alpha_phon >= 0.0))
    throw std::invalid_argument("loss weights must be non-negative");
}

FrameTargets FrameTargets::from_tracks(const ArticulatoryTrack& track, const PhonemeTrack& phonemes) {
  track.validate();
  phonemes.validate();
  FrameTargets t;
  t.ema = track.ema.cast<double>();
  t.pitch = track.pitch.cast<double>();
  t.loudness = track.loudness.cast<double>();
  t.phonemes = phonemes.ids;
  // The two streams come from the same source frames; a one-frame rounding
  // difference is trimmed here rather than in the loss.
  const auto n = std::min<Eigen::Index>(t.ema.rows(), static_cast<Eigen::Index>(t.phonemes.size()));
  if (std::abs(t.ema.rows() - static_cast<Eigen::Index>(t.phonemes.size())) > static_cast<Eigen::Index>(kMaxAlignGap))
    throw std::invalid_argument("phoneme and articulatory tracks differ in length");
  t.ema.conservativeResize(n, Eigen::NoChange);
  t.pitch.conservativeResize(n, Eigen::NoChange);
  t.loudness.conservativeResize(n, Eigen::NoChange);
  t.phonemes.resize(static_cast<std::size_t>(n));
  return t;
}

namespace {

std::string block(int i) { return "resnet." + std::to_string(i) + "."; }
std::string layer(int l) { return "transformer." + std::to_string(l) + "."; }

void add_norm(ParamStore& p, const std::string& prefix, Eigen::Index c, bool running) {
  p.add(prefix + "gamma", {c}, MatD::Ones(1, c));
  p.add(prefix + "beta", {c}, MatD::Zero(1, c));
  if (running) {
    p.add(prefix + "running_mean", {c}, MatD::Zero(1, c), false);
    p.add(prefix + "running_var", {c}, MatD::Ones(1, c), false);
  }
}

void add_linear(ParamStore& p, const std::string& prefix, Eigen::Index in, Eigen::Index out, double gain, bool bias,
                Rng& rng) {
  p.add(prefix + "w", {in, out}, nn::kaiming_uniform(in, out, in, gain, rng));
  if (bias) p.add(prefix + "b", {out}, MatD::Zero(1, out));
}

void add_conv(ParamStore& p, const std::string& prefix, int k, Eigen::Index in, Eigen::Index out, double gain, bool bias,
              Rng& rng) {
  p.add(prefix + "w", {k, in, out}, nn::kaiming_uniform(k * in, out, k * in, gain, rng));
  if (bias) p.add(prefix + "b", {out}, MatD::Zero(1, out));
}

std::vector<Var> batch_norm(const std::vector<Var>& xs, ParamStore& p, const std::string& prefix, bool training) {
  nn::BatchNormStats stats{p.get(prefix + "running_mean").mutable_value(),
                           p.get(prefix + "running_var").mutable_value()};
  return nn::batch_norm(xs, p.get(prefix + "gamma"), p.get(prefix + "beta"), stats, training);
}

Var layer_norm(const Var& x, const ParamStore& p, const std::string& prefix) {
  return nn::layer_norm(x, p.get(prefix + "gamma"), p.get(prefix + "beta"));
}

Var linear(const Var& x, const ParamStore& p, const std::string& prefix) {
  return nn::linear(x, p.get(prefix + "w"), p.get(prefix + "b"));
}

}  // namespace

ParamStore init_params(const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ParamStore p;
  const double relu_gain = std::sqrt(2.0);
  const Eigen::Index h = cfg.hidden_dim;
  Eigen::Index c_in = cfg.n_emg_channels;
  for (int i = 0; i < cfg.n_resnet_blocks; ++i) {
    // Convolutions feeding batch norm carry no bias; the norm's shift covers it.
    add_conv(p, block(i) + "conv1.", cfg.conv_kernel, c_in, h, relu_gain, false, rng);
    add_norm(p, block(i) + "bn1.", h, true);
    add_conv(p, block(i) + "conv2.", cfg.conv_kernel, h, h, relu_gain, false, rng);
    add_norm(p, block(i) + "bn2.", h, true);
    add_conv(p, block(i) + "shortcut.", 1, c_in, h, 1.0, true, rng);
    c_in = h;
  }
  for (int l = 0; l < cfg.n_transformer_layers; ++l) {
    add_norm(p, layer(l) + "ln1.", h, false);
    for (const char* w : {"wq", "wk", "wv", "wo"}) p.add(layer(l) + "attn." + w, {h, h}, nn::kaiming_uniform(h, h, h, 1.0, rng));
    add_norm(p, layer(l) + "ln2.", h, false);
    add_linear(p, layer(l) + "ff1.", h, h * cfg.ff_multiplier, relu_gain, true, rng);
    add_linear(p, layer(l) + "ff2.", h * cfg.ff_multiplier, h, 1.0, true, rng);
  }
  add_norm(p, "final_ln.", h, false);
  add_linear(p, "head.ema.", h, kEmaDims, 1.0, true, rng);
  add_linear(p, "head.pitch.", h, 1, 1.0, true, rng);
  add_linear(p, "head.loudness.", h, 1, 1.0, true, rng);
  add_linear(p, "head.phoneme.", h, cfg.phoneme_vocab, 1.0, true, rng);
  return p;
}

std::vector<Var> encode(const std::vector<MatD>& emg, ParamStore& p, const EncoderConfig& cfg, bool training) {
  cfg.validate();
  if (emg.empty()) throw std::invalid_argument("encode: empty batch");
  std::vector<Var> xs;
  xs.reserve(emg.size());
  for (const auto& x : emg) {
    if (x.cols() != cfg.n_emg_channels)
      throw std::invalid_argument("encode: expected " + std::to_string(cfg.n_emg_channels) + " channels, got " +
                                  std::to_string(x.cols()));
    if (x.rows() < cfg.min_input_length())
      throw std::invalid_argument("encode: input of " + std::to_string(x.rows()) + " samples is shorter than " +
                                  std::to_string(cfg.min_input_length()));
    xs.emplace_back(x, false);
  }

  const int k = cfg.conv_kernel, s = cfg.conv_stride, pad = cfg.conv_kernel / 2;
  const Var no_bias = nn::constant(MatD::Zero(1, cfg.hidden_dim));
  for (int i = 0; i < cfg.n_resnet_blocks; ++i) {
    const std::string b = block(i);
    std::vector<Var> main, skip;
    for (const auto& x : xs) {
      main.push_back(nn::conv1d(x, p.get(b + "conv1.w"), no_bias, k, s, pad));
      skip.push_back(nn::conv1d(x, p.get(b + "shortcut.w"), p.get(b + "shortcut.b"), 1, s, 0));
    }
    main = batch_norm(main, p, b + "bn1.", training);
    for (auto& m : main) m = nn::conv1d(nn::relu(m), p.get(b + "conv2.w"), no_bias, k, 1, pad);
    main = batch_norm(main, p, b + "bn2.", training);
    for (std::size_t j = 0; j < xs.size(); ++j) xs[j] = nn::relu(nn::add(main[j], skip[j]));
  }

  for (auto& x : xs) {
    x = nn::add_constant(x, nn::positional_encoding<double>(x.rows(), cfg.hidden_dim));
    for (int l = 0; l < cfg.n_transformer_layers; ++l) {
      const std::string L = layer(l);
      const Var a = layer_norm(x, p, L + "ln1.");
      x = nn::add(x, nn::multi_head_attention(a, p.get(L + "attn.wq"), p.get(L + "attn.wk"), p.get(L + "attn.wv"),
                                              p.get(L + "attn.wo"), cfg.n_heads));
      const Var f = nn::relu(linear(layer_norm(x, p, L + "ln2."), p, L + "ff1."));
      x = nn::add(x, linear(f, p, L + "ff2."));
    }
    x = layer_norm(x, p, "final_ln.");
  }
  return xs;
}

Var encode(const MatD& emg, ParamStore& params, const EncoderConfig& cfg) {
  return encode(std::vector<MatD>{emg}, params, cfg, false).front();
}

ModelOutput predict(const Var& hidden, const ParamStore& p, const EncoderConfig& cfg) {
  if (hidden.cols() != cfg.hidden_dim) throw std::invalid_argument("predict: hidden width mismatch");
  return {linear(hidden, p, "head.ema."), linear(hidden, p, "head.pitch."), linear(hidden, p, "head.loudness."),
          linear(hidden, p, "head.phoneme.")};
}

LossTerms component_losses(std::span<const ModelOutput> outputs, std::span<const FrameTargets* const> targets) {
  if (outputs.empty() || outputs.size() != targets.size())
    throw std::invalid_argument("component_losses: outputs and targets must pair up");
  std::vector<Var> ema, pitch, loud, phon;
  MatD t_ema, t_pitch, t_loud;
  std::vector<int> t_phon;
  Eigen::Index total = 0;
  std::vector<Eigen::Index> lens;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const auto n = static_cast<Eigen::Index>(align_lengths(static_cast<std::size_t>(outputs[i].frames()),
                                                           static_cast<std::size_t>(targets[i]->frames())));
    lens.push_back(n);
    total += n;
    ema.push_back(nn::slice_rows(outputs[i].ema, 0, n));
    pitch.push_back(nn::slice_rows(outputs[i].pitch, 0, n));
    loud.push_back(nn::slice_rows(outputs[i].loudness, 0, n));
    phon.push_back(nn::slice_rows(outputs[i].phoneme_logits, 0, n));
  }
  t_ema.resize(total, kEmaDims);
  t_pitch.resize(total, 1);
  t_loud.resize(total, 1);
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const FrameTargets& t = *targets[i];
    const Eigen::Index n = lens[i];
    t_ema.middleRows(row, n) = t.ema.topRows(n);
    t_pitch.middleRows(row, n) = t.pitch.topRows(n);
    t_loud.middleRows(row, n) = t.loudness.topRows(n);
    t_phon.insert(t_phon.end(), t.phonemes.begin(), t.phonemes.begin() + n);
    row += n;
  }
  auto joined = [](const std::vector<Var>& parts) { return parts.size() == 1 ? parts.front() : nn::concat_rows(parts); };
  return {nn::mse_loss(joined(ema), t_ema), nn::mse_loss(joined(pitch), t_pitch), nn::mse_loss(joined(loud), t_loud),
          nn::cross_entropy_loss(joined(phon), t_phon)};
}

Var combine_losses(const LossTerms& t, const LossWeights& w) {
  w.validate();
  return nn::weighted_sum({t.ema, t.pitch, t.loud, t.phon}, {1.0, w.alpha_pitch, w.alpha_loud, w.alpha_phon});
}

LossBreakdown summarize(const LossTerms& t, const Var& total) {
  return {total.item(), t.ema.item(), t.pitch.item(), t.loud.item(), t.phon.item()};
}

namespace {

LossBreakdown run(const std::vector<MatD>& emg, std::span<const FrameTargets* const> targets, ParamStore& p,
                  const EncoderConfig& cfg, const LossWeights& w, bool training) {
  if (emg.size() != targets.size()) throw std::invalid_argument("batch: recordings and targets must pair up");
  const auto hidden = encode(emg, p, cfg, training);
  std::vector<ModelOutput> outs;
  outs.reserve(hidden.size());
  for (const auto& h : hidden) outs.push_back(predict(h, p, cfg));
  const LossTerms terms = component_losses(outs, targets);
  const Var total = combine_losses(terms, w);
  const LossBreakdown b = summarize(terms, total);
  if (!std::isfinite(b.total)) throw std::runtime_error("non-finite loss");
  if (training) {
    p.zero_grad();
    total.backward();
  }
  return b;
}

}  // namespace

LossBreakdown forward_backward(const std::vector<MatD>& emg, std::span<const FrameTargets* const> targets,
                               ParamStore& params, const EncoderConfig& cfg, const LossWeights& w) {
  return run(emg, targets, params, cfg, w, true);
}

LossBreakdown evaluate_loss(const std::vector<MatD>& emg, std::span<const FrameTargets* const> targets,
                            ParamStore& params, const EncoderConfig& cfg, const LossWeights& w) {
  return run(emg, targets, params, cfg, w, false);
}

}  // namespace emg2artic
