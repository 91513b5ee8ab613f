#include "emg2artic/corpus.hpp"
#include "emg2artic/io.hpp"
#include "emg2artic/synth_data.hpp"
#include "tmpdir.hpp"

#include <doctest.h>

#include <fstream>

using namespace emg2artic;

namespace {

struct Sample {
  signal::RawEmgRecording emg;
  ArticulatoryTrack targets;
  PhonemeTrack phonemes;
};

Sample make_sample(const std::string& id, Eigen::Index frames = 60) {
  Rng rng(fnv1a(id));
  Sample s;
  s.emg.samples = MatF(8, 20 * frames);
  for (Eigen::Index i = 0; i < s.emg.samples.size(); ++i) s.emg.samples.data()[i] = static_cast<float>(rng.normal());
  s.emg.utterance_id = id;
  s.targets.ema = MatF(frames, kEmaDims);
  for (Eigen::Index i = 0; i < s.targets.ema.size(); ++i) s.targets.ema.data()[i] = static_cast<float>(rng.normal());
  s.targets.pitch = VecF::Constant(frames, 0.25f);
  s.targets.loudness = VecF::Constant(frames, 1.0f);
  s.targets.frame_rate_hz = 50.0;
  s.targets.utterance_id = id;
  s.phonemes.ids.assign(static_cast<std::size_t>(frames), 3);
  s.phonemes.frame_rate_hz = 50.0;
  return s;
}

void write_sample(const fs::path& dir, const Sample& s) { write_utterance(dir, s.emg, s.targets, s.phonemes); }

}  // namespace

TEST_CASE("utterance files round trip") {
  TempDir tmp;
  const Sample s = make_sample("utt_a");
  const fs::path dir = tmp / "utt_a";
  write_sample(dir, s);
  for (const char* f : {"emg.f32", "meta.json", "targets.f32", "phonemes.json"}) CHECK(fs::exists(dir / f));
  CHECK(fs::file_size(dir / "emg.f32") == static_cast<std::uintmax_t>(4 * s.emg.samples.size()));

  const auto emg = read_raw_emg(dir);
  CHECK(emg.samples == s.emg.samples);
  CHECK(emg.sample_rate_hz == 1000.0);
  const auto t = read_targets(dir);
  CHECK(t.ema == s.targets.ema);
  CHECK(t.pitch == s.targets.pitch);
  CHECK(t.frame_rate_hz == 50.0);
  CHECK(read_phonemes(dir).ids == s.phonemes.ids);
  const UtteranceMeta m = read_meta(dir);
  CHECK(m.utterance_id == "utt_a");
  CHECK(m.n_channels == 8);
  CHECK(m.n_samples == 1200);
  CHECK_NOTHROW(validate_utterance(dir));
}

TEST_CASE("f32 reader rejects malformed files") {
  TempDir tmp;
  const std::vector<float> v = {1.0f, -2.5f, 3.25f};
  io::write_f32(tmp / "x.f32", v);
  CHECK(io::read_f32(tmp / "x.f32") == v);
  CHECK_THROWS_AS(io::read_f32(tmp / "x.f32", 4), FormatError);
  {
    std::ofstream out(tmp / "odd.f32", std::ios::binary);
    out.write("abcde", 5);
  }
  CHECK_THROWS_AS(io::read_f32(tmp / "odd.f32"), FormatError);
  CHECK_THROWS_AS(io::read_f32(tmp / "absent.f32"), FormatError);
  // little-endian on disk
  const std::string bytes = slurp(tmp / "x.f32");
  CHECK(static_cast<unsigned char>(bytes[3]) == 0x3f);  // 1.0f = 0x3f800000
}

TEST_CASE("validation catches inconsistent utterances") {
  TempDir tmp;
  SUBCASE("directory name") {
    write_sample(tmp / "other", make_sample("utt_b"));
    CHECK_THROWS_AS(validate_utterance(tmp / "other"), FormatError);
  }
  SUBCASE("truncated emg") {
    write_sample(tmp / "utt_b", make_sample("utt_b"));
    fs::resize_file(tmp / "utt_b" / "emg.f32", 400);
    CHECK_THROWS_AS(validate_utterance(tmp / "utt_b"), FormatError);
  }
  SUBCASE("phoneme count") {
    Sample s = make_sample("utt_b");
    s.phonemes.ids.pop_back();
    write_sample(tmp / "utt_b", s);
    CHECK_THROWS_AS(validate_utterance(tmp / "utt_b"), FormatError);
  }
  SUBCASE("duration mismatch") {
    Sample s = make_sample("utt_b", 60);
    s.emg.samples.conservativeResize(8, 600);
    write_sample(tmp / "utt_b", s);
    CHECK_THROWS_AS(validate_utterance(tmp / "utt_b"), FormatError);
  }
  SUBCASE("non-finite sample") {
    Sample s = make_sample("utt_b");
    s.emg.samples(2, 5) = std::nanf("");
    write_sample(tmp / "utt_b", s);
    CHECK_THROWS_AS(validate_utterance(tmp / "utt_b"), FormatError);
  }
  SUBCASE("broken json") {
    write_sample(tmp / "utt_b", make_sample("utt_b"));
    io::write_text(tmp / "utt_b" / "meta.json", "{ not json");
    CHECK_THROWS_AS(validate_utterance(tmp / "utt_b"), FormatError);
  }
  SUBCASE("missing file") {
    write_sample(tmp / "utt_b", make_sample("utt_b"));
    fs::remove(tmp / "utt_b" / "targets.f32");
    CHECK_THROWS_AS(validate_utterance(tmp / "utt_b"), FormatError);
  }
}

TEST_CASE("loading uses preprocessed samples when present") {
  TempDir tmp;
  const fs::path dir = tmp / "utt_c";
  write_sample(dir, make_sample("utt_c", 50));
  CHECK_FALSE(has_preprocessed(dir));
  const Utterance fresh = load_utterance(dir);
  CHECK(fresh.emg.cols() == 8);
  CHECK(fresh.emg.rows() == 689);  // 1 s at 689 Hz
  CHECK(fresh.targets.frames() == 86);

  const signal::PreprocessConfig cfg;
  write_preprocessed(dir, signal::preprocess_recording(read_raw_emg(dir), cfg), cfg);
  CHECK(has_preprocessed(dir));
  const Utterance cached = load_utterance(dir);
  CHECK(cached.emg == fresh.emg);

  signal::PreprocessConfig other = cfg;
  other.target_rate_hz = 500.0;
  CHECK_THROWS_AS(load_utterance(dir, other), FormatError);
}

TEST_CASE("split loading and channel selection") {
  TempDir tmp;
  synth::SynthConfig cfg;
  cfg.n_train = 3;
  cfg.n_val = 1;
  cfg.n_test = 1;
  cfg.min_duration_s = 0.5;
  cfg.max_duration_s = 0.8;
  synth::gen_corpus(cfg, tmp / "c");
  const CorpusSplits s = load_corpus(tmp / "c");
  CHECK(s.train.size() == 3);
  CHECK(s.train.utterances[0].id == "train_0000");
  CHECK(s.train.utterances[2].id == "train_0002");
  CHECK(s.train.n_channels() == 8);

  const Corpus two = select_channels(s.train, {1, 3});
  CHECK(two.n_channels() == 2);
  CHECK(two.utterances[1].emg.col(0) == s.train.utterances[1].emg.col(1));
  CHECK(two.utterances[1].emg.col(1) == s.train.utterances[1].emg.col(3));
  CHECK(two.utterances[1].targets.ema == s.train.utterances[1].targets.ema);
  CHECK_THROWS_AS(select_channels(s.train, {}), std::invalid_argument);
  CHECK_THROWS_AS(select_channels(s.train, {8}), std::invalid_argument);

  CHECK_THROWS_AS(load_split(tmp / "c", "nonexistent"), FormatError);
  fs::create_directories(tmp / "c" / "empty");
  CHECK_THROWS_AS(load_split(tmp / "c", "empty"), FormatError);
}
