#pragma once

// On-disk corpus layout and the in-memory training view.
//
//   <corpus>/<split>/<utterance_id>/
//     emg.f32         channel-major binary32, n_channels * n_samples
//     meta.json       utterance_id, n_channels, sample_rate_hz, n_samples,
//                     target_frame_rate_hz
//     targets.f32     frame-major rows of 14 binary32 (12 EMA, pitch, loudness)
//     phonemes.json   {"vocab_size": V, "ids": [...]}
//     emg_prep.f32    written by preprocessing, same layout as emg.f32
//     meta_prep.json

#include "emg2artic/feature_targets.hpp"
#include "emg2artic/model.hpp"
#include "emg2artic/signal_prep.hpp"

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace emg2artic {

namespace fs = std::filesystem;

inline constexpr std::array<std::string_view, 3> kSplitNames = {"train", "val", "test"};

struct UtteranceMeta {
  std::string utterance_id;
  int n_channels = 0;
  double sample_rate_hz = 0.0;
  long long n_samples = 0;
  double target_frame_rate_hz = kSourceTargetRateHz;
};

UtteranceMeta read_meta(const fs::path& utt_dir);

/// Writes emg.f32, meta.json, targets.f32 and phonemes.json.
void write_utterance(const fs::path& utt_dir, const signal::RawEmgRecording& emg, const ArticulatoryTrack& targets,
                     const PhonemeTrack& phonemes);

signal::RawEmgRecording read_raw_emg(const fs::path& utt_dir);
ArticulatoryTrack read_targets(const fs::path& utt_dir);
PhonemeTrack read_phonemes(const fs::path& utt_dir);

bool has_preprocessed(const fs::path& utt_dir);
void write_preprocessed(const fs::path& utt_dir, const signal::PreprocessedEmg& prep,
                        const signal::PreprocessConfig& cfg);
signal::PreprocessedEmg read_preprocessed(const fs::path& utt_dir);

/// Checks that every file of an utterance parses and that sizes agree with
/// meta.json. Throws FormatError.
void validate_utterance(const fs::path& utt_dir);

/// Utterance directories of one split, sorted by name.
std::vector<fs::path> list_utterances(const fs::path& split_dir);

/// One utterance ready for the model: preprocessed EMG as [T, C] and targets
/// resampled to the encoder frame rate.
struct Utterance {
  std::string id;
  MatD emg;
  FrameTargets targets;
};

struct Corpus {
  std::vector<Utterance> utterances;

  bool empty() const { return utterances.empty(); }
  std::size_t size() const { return utterances.size(); }
  int n_channels() const;
};

struct CorpusSplits {
  Corpus train, val, test;
};

/// Loads an utterance, using emg_prep.f32 when present and otherwise running
/// the preprocessing chain in memory.
Utterance load_utterance(const fs::path& utt_dir, const signal::PreprocessConfig& cfg = {});
Corpus load_split(const fs::path& corpus_dir, std::string_view split, const signal::PreprocessConfig& cfg = {});
CorpusSplits load_corpus(const fs::path& corpus_dir, const signal::PreprocessConfig& cfg = {});

/// Copy keeping only the given zero-based channel columns, in the given order.
Corpus select_channels(const Corpus& corpus, const std::vector<int>& channels);

}  // namespace emg2artic
