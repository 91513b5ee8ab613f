#pragma once

// Versioned JSON configuration. Every section is optional and falls back to
// the defaults; unknown keys are rejected.
//
//   {"config_version": 1,
//    "synth": {...}, "preprocess": {...},
//    "model": {"preset": "desk", ...}, "loss": {...}, "train": {...}}

#include "emg2artic/model.hpp"
#include "emg2artic/signal_prep.hpp"
#include "emg2artic/synth_data.hpp"
#include "emg2artic/trainer.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>

namespace emg2artic::config {

using json = nlohmann::json;

inline constexpr int kConfigVersion = 1;

json to_json(const EncoderConfig& c);
json to_json(const LossWeights& w);
json to_json(const TrainConfig& c);
json to_json(const signal::PreprocessConfig& c);
json to_json(const synth::SynthConfig& c);

/// Each parser starts from `base` and overrides the keys present.
EncoderConfig encoder_from_json(const json& j, EncoderConfig base = EncoderConfig::desk());
LossWeights loss_from_json(const json& j, LossWeights base = {});
TrainConfig train_from_json(const json& j, TrainConfig base = {});
signal::PreprocessConfig preprocess_from_json(const json& j, signal::PreprocessConfig base = {});
synth::SynthConfig synth_from_json(const json& j, synth::SynthConfig base = {});

struct PipelineConfig {
  synth::SynthConfig synth;
  signal::PreprocessConfig preprocess;
  EncoderConfig model = EncoderConfig::desk();
  LossWeights loss;
  TrainConfig train;

  /// Applies a global seed to every seeded section.
  void set_seed(std::uint64_t seed);
};

PipelineConfig pipeline_from_json(const json& j);
json to_json(const PipelineConfig& c);
/// Throws FormatError on unreadable files, version mismatches or unknown keys.
PipelineConfig load(const std::filesystem::path& path);

/// model_config.json body: the encoder config and loss weights.
json model_config_json(const EncoderConfig& model, const LossWeights& weights);
std::pair<EncoderConfig, LossWeights> model_config_from_json(const json& j);

}  // namespace emg2artic::config
