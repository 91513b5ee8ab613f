#include "emg2artic/corpus.hpp"

#include "emg2artic/io.hpp"

#include <algorithm>

namespace emg2artic {

using io::field;
using io::json;

namespace {

fs::path emg_path(const fs::path& d) { return d / "emg.f32"; }
fs::path meta_path(const fs::path& d) { return d / "meta.json"; }
fs::path targets_path(const fs::path& d) { return d / "targets.f32"; }
fs::path phonemes_path(const fs::path& d) { return d / "phonemes.json"; }
fs::path prep_path(const fs::path& d) { return d / "emg_prep.f32"; }
fs::path prep_meta_path(const fs::path& d) { return d / "meta_prep.json"; }

void write_matrix(const fs::path& path, const MatF& m) {
  io::write_f32(path, std::span<const float>(m.data(), static_cast<std::size_t>(m.size())));
}

MatF read_matrix(const fs::path& path, Eigen::Index rows, Eigen::Index cols) {
  const auto v = io::read_f32(path, static_cast<long long>(rows) * cols);
  return Eigen::Map<const MatF>(v.data(), rows, cols);
}

}  // namespace

UtteranceMeta read_meta(const fs::path& utt_dir) {
  const fs::path p = meta_path(utt_dir);
  const json j = io::read_json(p);
  UtteranceMeta m;
  m.utterance_id = field<std::string>(j, "utterance_id", p);
  m.n_channels = field<int>(j, "n_channels", p);
  m.sample_rate_hz = field<double>(j, "sample_rate_hz", p);
  m.n_samples = field<long long>(j, "n_samples", p);
  if (j.contains("target_frame_rate_hz")) m.target_frame_rate_hz = field<double>(j, "target_frame_rate_hz", p);
  if (m.n_channels < 1 || m.n_samples < 1 || !(m.sample_rate_hz > 0.0) || !(m.target_frame_rate_hz > 0.0))
    throw FormatError(p.string() + ": non-positive size or rate");
  return m;
}

void write_utterance(const fs::path& utt_dir, const signal::RawEmgRecording& emg, const ArticulatoryTrack& targets,
                     const PhonemeTrack& phonemes) {
  emg.validate();
  targets.validate();
  phonemes.validate();
  fs::create_directories(utt_dir);
  write_matrix(emg_path(utt_dir), emg.samples);
  io::write_json(meta_path(utt_dir), json{{"utterance_id", emg.utterance_id},
                                          {"n_channels", emg.n_channels()},
                                          {"sample_rate_hz", emg.sample_rate_hz},
                                          {"n_samples", emg.n_samples()},
                                          {"target_frame_rate_hz", targets.frame_rate_hz}});
  write_matrix(targets_path(utt_dir), targets.as_rows());
  io::write_json(phonemes_path(utt_dir), json{{"vocab_size", phonemes.vocab_size}, {"ids", phonemes.ids}});
}

signal::RawEmgRecording read_raw_emg(const fs::path& utt_dir) {
  const UtteranceMeta m = read_meta(utt_dir);
  signal::RawEmgRecording rec;
  rec.samples = read_matrix(emg_path(utt_dir), m.n_channels, m.n_samples);
  rec.sample_rate_hz = m.sample_rate_hz;
  rec.utterance_id = m.utterance_id;
  return rec;
}

ArticulatoryTrack read_targets(const fs::path& utt_dir) {
  const UtteranceMeta m = read_meta(utt_dir);
  const auto v = io::read_f32(targets_path(utt_dir));
  if (v.empty() || v.size() % kTargetDims != 0)
    throw FormatError(targets_path(utt_dir).string() + ": not a whole number of 14-value frames");
  const auto n = static_cast<Eigen::Index>(v.size() / kTargetDims);
  const MatF rows = Eigen::Map<const MatF>(v.data(), n, kTargetDims);
  ArticulatoryTrack t = ArticulatoryTrack::from_rows(rows, m.target_frame_rate_hz, m.utterance_id);
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(targets_path(utt_dir).string() + ": " + e.what());
  }
  return t;
}

PhonemeTrack read_phonemes(const fs::path& utt_dir) {
  const UtteranceMeta m = read_meta(utt_dir);
  const fs::path p = phonemes_path(utt_dir);
  const json j = io::read_json(p);
  PhonemeTrack t;
  t.vocab_size = field<int>(j, "vocab_size", p);
  t.ids = field<std::vector<int>>(j, "ids", p);
  t.frame_rate_hz = m.target_frame_rate_hz;
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
  return t;
}

bool has_preprocessed(const fs::path& utt_dir) {
  return fs::exists(prep_path(utt_dir)) && fs::exists(prep_meta_path(utt_dir));
}

void write_preprocessed(const fs::path& utt_dir, const signal::PreprocessedEmg& prep,
                        const signal::PreprocessConfig& cfg) {
  write_matrix(prep_path(utt_dir), prep.samples);
  io::write_json(prep_meta_path(utt_dir),
                 json{{"utterance_id", prep.source_id},
                      {"n_channels", prep.samples.rows()},
                      {"sample_rate_hz", prep.sample_rate_hz},
                      {"n_samples", prep.samples.cols()},
                      {"preprocess",
                       {{"notch_freq_hz", cfg.notch_freq_hz},
                        {"notch_harmonics", cfg.notch_harmonics},
                        {"notch_q", cfg.notch_q},
                        {"hp_cutoff_hz", cfg.hp_cutoff_hz},
                        {"hp_order", cfg.hp_order},
                        {"despike_window", cfg.despike_window},
                        {"despike_z_threshold", cfg.despike_z_threshold},
                        {"target_rate_hz", cfg.target_rate_hz}}}});
}

signal::PreprocessedEmg read_preprocessed(const fs::path& utt_dir) {
  const fs::path p = prep_meta_path(utt_dir);
  const json j = io::read_json(p);
  signal::PreprocessedEmg prep;
  prep.source_id = field<std::string>(j, "utterance_id", p);
  prep.sample_rate_hz = field<double>(j, "sample_rate_hz", p);
  const auto c = field<long long>(j, "n_channels", p);
  const auto n = field<long long>(j, "n_samples", p);
  if (c < 1 || n < 1 || !(prep.sample_rate_hz > 0.0)) throw FormatError(p.string() + ": non-positive size or rate");
  prep.samples = read_matrix(prep_path(utt_dir), c, n);
  return prep;
}

void validate_utterance(const fs::path& utt_dir) {
  const UtteranceMeta m = read_meta(utt_dir);
  if (m.utterance_id != utt_dir.filename().string())
    throw FormatError(meta_path(utt_dir).string() + ": utterance_id does not match directory name");
  const auto rec = read_raw_emg(utt_dir);
  if (!rec.samples.allFinite()) throw FormatError(emg_path(utt_dir).string() + ": non-finite samples");
  const auto t = read_targets(utt_dir);
  const auto ph = read_phonemes(utt_dir);
  if (static_cast<Eigen::Index>(ph.ids.size()) != t.n_frames())
    throw FormatError(phonemes_path(utt_dir).string() + ": frame count differs from targets.f32");
  const double emg_s = static_cast<double>(m.n_samples) / m.sample_rate_hz;
  const double tgt_s = static_cast<double>(t.n_frames()) / m.target_frame_rate_hz;
  if (std::abs(emg_s - tgt_s) > 2.0 / m.target_frame_rate_hz)
    throw FormatError(utt_dir.string() + ": EMG and target durations disagree");
}

std::vector<fs::path> list_utterances(const fs::path& split_dir) {
  if (!fs::is_directory(split_dir)) throw FormatError("missing split directory " + split_dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(split_dir))
    if (e.is_directory()) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

int Corpus::n_channels() const { return utterances.empty() ? 0 : static_cast<int>(utterances.front().emg.cols()); }

Utterance load_utterance(const fs::path& utt_dir, const signal::PreprocessConfig& cfg) {
  signal::PreprocessedEmg prep =
      has_preprocessed(utt_dir) ? read_preprocessed(utt_dir) : signal::preprocess_recording(read_raw_emg(utt_dir), cfg);
  if (std::abs(prep.sample_rate_hz - cfg.target_rate_hz) > 1e-9)
    throw FormatError(utt_dir.string() + ": preprocessed rate " + std::to_string(prep.sample_rate_hz) +
                      " Hz differs from the configured " + std::to_string(cfg.target_rate_hz) + " Hz");
  Utterance u;
  u.id = read_meta(utt_dir).utterance_id;
  u.emg = prep.samples.transpose().cast<double>();
  u.targets = FrameTargets::from_tracks(resample_track(read_targets(utt_dir), kTargetFrameRateHz),
                                        resample_track(read_phonemes(utt_dir), kTargetFrameRateHz));
  return u;
}

Corpus load_split(const fs::path& corpus_dir, std::string_view split, const signal::PreprocessConfig& cfg) {
  Corpus c;
  for (const auto& d : list_utterances(corpus_dir / split)) c.utterances.push_back(load_utterance(d, cfg));
  if (c.empty()) throw FormatError("split '" + std::string(split) + "' of " + corpus_dir.string() + " is empty");
  for (const auto& u : c.utterances)
    if (u.emg.cols() != c.n_channels()) throw FormatError(u.id + ": channel count differs from the rest of the split");
  return c;
}

CorpusSplits load_corpus(const fs::path& corpus_dir, const signal::PreprocessConfig& cfg) {
  return {load_split(corpus_dir, kSplitNames[0], cfg), load_split(corpus_dir, kSplitNames[1], cfg),
          load_split(corpus_dir, kSplitNames[2], cfg)};
}

Corpus select_channels(const Corpus& corpus, const std::vector<int>& channels) {
  if (channels.empty()) throw std::invalid_argument("select_channels: empty channel list");
  for (int c : channels)
    if (c < 0 || c >= corpus.n_channels()) throw std::invalid_argument("select_channels: channel out of range");
  Corpus out;
  out.utterances.reserve(corpus.size());
  for (const auto& u : corpus.utterances) {
    Utterance v{u.id, MatD(u.emg.rows(), static_cast<Eigen::Index>(channels.size())), u.targets};
    for (std::size_t j = 0; j < channels.size(); ++j) v.emg.col(static_cast<Eigen::Index>(j)) = u.emg.col(channels[j]);
    out.utterances.push_back(std::move(v));
  }
  return out;
}

}  // namespace emg2artic
