#include "emg2artic/config.hpp"

#include "emg2artic/io.hpp"

#include <set>

namespace emg2artic::config {

namespace {

/// Reads known keys from an object and rejects the rest.
class Reader {
 public:
  Reader(const json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j_.is_object()) throw FormatError("config section '" + section_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw FormatError("config " + section_ + "." + key + " has the wrong type");
    }
  }

  bool has(const char* key) {
    if (!j_.contains(key)) return false;
    seen_.insert(key);
    return true;
  }
  const json& raw(const char* key) const { return j_.at(key); }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw FormatError("unknown config key '" + section_ + "." + k + "'");
  }

 private:
  const json& j_;
  std::string section_;
  std::set<std::string> seen_;
};

template <typename Fn>
auto checked(const char* section, Fn&& validate) {
  try {
    validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("config section '") + section + "': " + e.what());
  }
}

}  // namespace

json to_json(const EncoderConfig& c) {
  return {{"n_emg_channels", c.n_emg_channels}, {"hidden_dim", c.hidden_dim},
          {"n_resnet_blocks", c.n_resnet_blocks}, {"conv_kernel", c.conv_kernel},
          {"conv_stride", c.conv_stride},       {"n_transformer_layers", c.n_transformer_layers},
          {"n_heads", c.n_heads},               {"phoneme_vocab", c.phoneme_vocab},
          {"ff_multiplier", c.ff_multiplier}};
}

json to_json(const LossWeights& w) {
  return {{"alpha_pitch", w.alpha_pitch}, {"alpha_loud", w.alpha_loud}, {"alpha_phon", w.alpha_phon}};
}

json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size}, {"learning_rate", c.learning_rate}, {"weight_decay", c.weight_decay},
          {"n_epochs", c.n_epochs},     {"seed", c.seed},                   {"eval_every", c.eval_every},
          {"clip_norm", c.clip_norm}};
}

json to_json(const signal::PreprocessConfig& c) {
  return {{"notch_freq_hz", c.notch_freq_hz},   {"notch_harmonics", c.notch_harmonics},
          {"notch_q", c.notch_q},               {"hp_cutoff_hz", c.hp_cutoff_hz},
          {"hp_order", c.hp_order},             {"despike_window", c.despike_window},
          {"despike_z_threshold", c.despike_z_threshold}, {"target_rate_hz", c.target_rate_hz}};
}

json to_json(const synth::SynthConfig& c) {
  json dep = json::array();
  for (Eigen::Index r = 0; r < c.dependency.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index k = 0; k < c.dependency.cols(); ++k) row.push_back(c.dependency(r, k));
    dep.push_back(row);
  }
  return {{"n_train", c.n_train},
          {"n_val", c.n_val},
          {"n_test", c.n_test},
          {"min_duration_s", c.min_duration_s},
          {"max_duration_s", c.max_duration_s},
          {"emg_rate_hz", c.emg_rate_hz},
          {"target_rate_hz", c.target_rate_hz},
          {"dependency", dep},
          {"noise_std", c.noise_std},
          {"coupling", c.coupling},
          {"phoneme_vocab", c.phoneme_vocab},
          {"seed", c.seed}};
}

EncoderConfig encoder_from_json(const json& j, EncoderConfig c) {
  Reader r(j, "model");
  if (r.has("preset")) {
    const json& p = r.raw("preset");
    const std::string name = p.is_string() ? p.get<std::string>() : "";
    if (name == "full")
      c = EncoderConfig::full_scale();
    else if (name == "desk")
      c = EncoderConfig::desk();
    else if (name == "tiny")
      c = EncoderConfig::tiny();
    else
      throw FormatError("config model.preset must be one of full, desk, tiny");
  }
  r.get("n_emg_channels", c.n_emg_channels);
  r.get("hidden_dim", c.hidden_dim);
  r.get("n_resnet_blocks", c.n_resnet_blocks);
  r.get("conv_kernel", c.conv_kernel);
  r.get("conv_stride", c.conv_stride);
  r.get("n_transformer_layers", c.n_transformer_layers);
  r.get("n_heads", c.n_heads);
  r.get("phoneme_vocab", c.phoneme_vocab);
  r.get("ff_multiplier", c.ff_multiplier);
  r.finish();
  checked("model", [&] { c.validate(); });
  return c;
}

LossWeights loss_from_json(const json& j, LossWeights w) {
  Reader r(j, "loss");
  r.get("alpha_pitch", w.alpha_pitch);
  r.get("alpha_loud", w.alpha_loud);
  r.get("alpha_phon", w.alpha_phon);
  r.finish();
  checked("loss", [&] { w.validate(); });
  return w;
}

TrainConfig train_from_json(const json& j, TrainConfig c) {
  Reader r(j, "train");
  r.get("batch_size", c.batch_size);
  r.get("learning_rate", c.learning_rate);
  r.get("weight_decay", c.weight_decay);
  r.get("n_epochs", c.n_epochs);
  r.get("seed", c.seed);
  r.get("eval_every", c.eval_every);
  r.get("clip_norm", c.clip_norm);
  r.finish();
  checked("train", [&] { c.validate(); });
  return c;
}

signal::PreprocessConfig preprocess_from_json(const json& j, signal::PreprocessConfig c) {
  Reader r(j, "preprocess");
  r.get("notch_freq_hz", c.notch_freq_hz);
  r.get("notch_harmonics", c.notch_harmonics);
  r.get("notch_q", c.notch_q);
  r.get("hp_cutoff_hz", c.hp_cutoff_hz);
  r.get("hp_order", c.hp_order);
  r.get("despike_window", c.despike_window);
  r.get("despike_z_threshold", c.despike_z_threshold);
  r.get("target_rate_hz", c.target_rate_hz);
  r.finish();
  return c;
}

synth::SynthConfig synth_from_json(const json& j, synth::SynthConfig c) {
  Reader r(j, "synth");
  r.get("n_train", c.n_train);
  r.get("n_val", c.n_val);
  r.get("n_test", c.n_test);
  r.get("min_duration_s", c.min_duration_s);
  r.get("max_duration_s", c.max_duration_s);
  r.get("emg_rate_hz", c.emg_rate_hz);
  r.get("target_rate_hz", c.target_rate_hz);
  r.get("noise_std", c.noise_std);
  r.get("coupling", c.coupling);
  r.get("phoneme_vocab", c.phoneme_vocab);
  r.get("seed", c.seed);
  std::vector<std::vector<double>> rows;
  r.get("dependency", rows);
  if (!rows.empty()) {
    if (rows.size() != synth::kChannels) throw FormatError("config synth.dependency must have 8 rows");
    c.dependency.resize(synth::kChannels, kTargetDims);
    for (int ch = 0; ch < synth::kChannels; ++ch) {
      const auto& row = rows[static_cast<std::size_t>(ch)];
      if (row.size() != kTargetDims) throw FormatError("config synth.dependency rows must have 14 entries");
      for (int f = 0; f < kTargetDims; ++f) c.dependency(ch, f) = row[static_cast<std::size_t>(f)];
    }
  }
  r.finish();
  checked("synth", [&] { c.validate(); });
  return c;
}

void PipelineConfig::set_seed(std::uint64_t seed) {
  synth.seed = seed;
  train.seed = seed;
}

PipelineConfig pipeline_from_json(const json& j) {
  Reader r(j, "root");
  int version = 0;
  r.get("config_version", version);
  if (version != kConfigVersion)
    throw FormatError("config_version must be " + std::to_string(kConfigVersion) + " (got " + std::to_string(version) + ")");
  PipelineConfig c;
  if (r.has("synth")) c.synth = synth_from_json(r.raw("synth"));
  if (r.has("preprocess")) c.preprocess = preprocess_from_json(r.raw("preprocess"));
  if (r.has("model")) c.model = encoder_from_json(r.raw("model"));
  if (r.has("loss")) c.loss = loss_from_json(r.raw("loss"));
  if (r.has("train")) c.train = train_from_json(r.raw("train"));
  r.finish();
  return c;
}

json to_json(const PipelineConfig& c) {
  return {{"config_version", kConfigVersion}, {"synth", to_json(c.synth)}, {"preprocess", to_json(c.preprocess)},
          {"model", to_json(c.model)},       {"loss", to_json(c.loss)},   {"train", to_json(c.train)}};
}

PipelineConfig load(const std::filesystem::path& path) {
  try {
    return pipeline_from_json(io::read_json(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

json model_config_json(const EncoderConfig& model, const LossWeights& weights) {
  return {{"config_version", kConfigVersion}, {"model", to_json(model)}, {"loss", to_json(weights)}};
}

std::pair<EncoderConfig, LossWeights> model_config_from_json(const json& j) {
  Reader r(j, "model_config");
  int version = 0;
  r.get("config_version", version);
  if (version != kConfigVersion) throw FormatError("model_config: unsupported config_version");
  if (!r.has("model") || !r.has("loss")) throw FormatError("model_config: needs 'model' and 'loss'");
  auto out = std::make_pair(encoder_from_json(r.raw("model")), loss_from_json(r.raw("loss")));
  r.finish();
  return out;
}

}  // namespace emg2artic::config
