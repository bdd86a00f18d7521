#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "dncshap/audio.hpp"
#include "dncshap/rng.hpp"

using namespace dncshap;

namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "dncshap_audio_test";
  fs::create_directories(dir);
  return dir;
}

Waveform sine(double freq, int sr, double seconds, double amplitude = 0.5) {
  Waveform w;
  w.sample_rate = sr;
  const int n = static_cast<int>(seconds * sr);
  w.samples.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    w.samples[static_cast<std::size_t>(i)] = amplitude * std::sin(2.0 * M_PI * freq * i / sr);
  }
  return w;
}

void put_u16(std::ofstream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(b, 2);
}

void put_u32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

// Hand-rolled stereo PCM16 writer, independent of the library's mono writer.
void write_stereo_wav(const std::string& path, const std::vector<std::pair<std::int16_t, std::int16_t>>& frames,
                      int sr) {
  std::ofstream out(path, std::ios::binary);
  const std::uint32_t data_size = static_cast<std::uint32_t>(frames.size() * 4);
  out.write("RIFF", 4);
  put_u32(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 2);
  put_u32(out, static_cast<std::uint32_t>(sr));
  put_u32(out, static_cast<std::uint32_t>(sr * 4));
  put_u16(out, 4);
  put_u16(out, 16);
  out.write("data", 4);
  put_u32(out, data_size);
  for (const auto& [l, r] : frames) {
    put_u16(out, static_cast<std::uint16_t>(l));
    put_u16(out, static_cast<std::uint16_t>(r));
  }
}

}  // namespace

TEST_CASE("WAV write/read round trip within quantization error") {
  const fs::path dir = scratch_dir();
  const Waveform w = sine(440.0, 8000, 0.2);
  const std::string path = (dir / "tone.wav").string();
  write_wav(path, w);
  const Waveform r = read_wav(path);
  CHECK(r.sample_rate == 8000);
  REQUIRE(r.samples.size() == w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    CHECK(std::abs(r.samples[i] - w.samples[i]) <= 1.0 / 32767.0 + 1e-9);
  }
}

TEST_CASE("stereo WAV is downmixed by averaging") {
  const fs::path dir = scratch_dir();
  const std::string path = (dir / "stereo.wav").string();
  write_stereo_wav(path, {{16384, -16384}, {8192, 8192}, {0, 16384}}, 16000);
  const Waveform r = read_wav(path);
  REQUIRE(r.samples.size() == 3);
  CHECK(r.samples[0] == Catch::Approx(0.0).margin(1e-9));
  CHECK(r.samples[1] == Catch::Approx(8192.0 / 32768.0).margin(1e-9));
  CHECK(r.samples[2] == Catch::Approx(8192.0 / 32768.0).margin(1e-9));
}

TEST_CASE("malformed WAV files are rejected") {
  const fs::path dir = scratch_dir();
  const std::string path = (dir / "bad.wav").string();
  {
    std::ofstream out(path, std::ios::binary);
    out << "RIFFxxxxNOPE";
  }
  CHECK_THROWS_AS(read_wav(path), FormatError);
  CHECK_THROWS_AS(read_wav((dir / "missing.wav").string()), FormatError);
}

TEST_CASE("digital silence maps to the all-zero spectrogram") {
  Waveform w;
  w.sample_rate = 16000;
  w.samples.assign(16000, 0.0);
  const Tensor spec = logmel(w);
  CHECK(spec.shape == std::vector<int>{128, 128, 1});
  for (double v : spec.data) CHECK(v == 0.0);
}

TEST_CASE("any valid input gives a (128,128,1) spectrogram in [0,1]") {
  Rng rng(5);
  Waveform w;
  w.sample_rate = 16000;
  w.samples.resize(4000);
  for (double& v : w.samples) v = rng.uniform(-0.8, 0.8);
  const Tensor spec = logmel(w);
  REQUIRE(spec.shape == std::vector<int>{128, 128, 1});
  for (double v : spec.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("a waveform shorter than one frame still yields the padded raster") {
  Waveform w = sine(500.0, 16000, 0.01);  // 160 samples < fft_size
  const Tensor spec = logmel(w);
  CHECK(spec.shape == std::vector<int>{128, 128, 1});
}

TEST_CASE("empty waveform is rejected") {
  Waveform w;
  w.sample_rate = 16000;
  CHECK_THROWS_AS(logmel(w), UserError);
}

TEST_CASE("pure 1 kHz tone concentrates in the filterbank's expected mel band") {
  const Waveform w = sine(1000.0, 16000, 1.0);
  LogmelConfig cfg;
  const Tensor spec = logmel(w, cfg);

  // oracle from the filterbank layout: the band with the largest response at
  // the tone's FFT bin (1000 Hz = bin 64 of a 1024-point FFT at 16 kHz)
  const Tensor fb = mel_filterbank(cfg.n_mels, cfg.fft_size, w.sample_rate, 0.0, 0.0);
  int expected = 0;
  for (int m = 1; m < cfg.n_mels; ++m) {
    if (fb.at2(m, 64) > fb.at2(expected, 64)) expected = m;
  }
  REQUIRE(fb.at2(expected, 64) > 0.0);

  for (int t = 0; t < cfg.n_frames; ++t) {
    int arg = 0;
    for (int m = 1; m < cfg.n_mels; ++m) {
      if (spec.at3(m, t, 0) > spec.at3(arg, t, 0)) arg = m;
    }
    CHECK(arg == expected);
  }
}

TEST_CASE("pre-log mel energies never decrease when the waveform doubles") {
  Rng rng(6);
  Waveform w;
  w.sample_rate = 16000;
  w.samples.resize(3000);
  for (double& v : w.samples) v = rng.uniform(-0.4, 0.4);
  Waveform w2 = w;
  for (double& v : w2.samples) v *= 2.0;
  LogmelConfig cfg;
  cfg.n_mels = 32;
  cfg.n_frames = 16;
  cfg.fft_size = 512;
  const Tensor e1 = mel_energies(w, cfg);
  const Tensor e2 = mel_energies(w2, cfg);
  for (std::size_t i = 0; i < e1.data.size(); ++i) CHECK(e2.data[i] >= e1.data[i] - 1e-12);
}

TEST_CASE("time importance is the per-frame mean over mel bins") {
  SECTION("constant matrix") {
    const std::vector<double> v = time_importance(Tensor({4, 6}, 0.37));
    REQUIRE(v.size() == 6);
    for (double x : v) CHECK(x == Catch::Approx(0.37).margin(1e-15));
  }
  SECTION("one-hot matrix") {
    Tensor m({4, 6});
    m.at2(2, 3) = 0.8;
    const std::vector<double> v = time_importance(m);
    for (int t = 0; t < 6; ++t) {
      CHECK(v[static_cast<std::size_t>(t)] == Catch::Approx(t == 3 ? 0.2 : 0.0).margin(1e-15));
    }
  }
  SECTION("random matrix against a naive second summation") {
    Rng rng(7);
    Tensor m({16, 9});
    for (double& x : m.data) x = rng.uniform(-1.0, 1.0);
    const std::vector<double> v = time_importance(m);
    for (int t = 0; t < 9; ++t) {
      double acc = 0.0;
      for (int r = 0; r < 16; ++r) acc += m.at2(r, t);
      CHECK(v[static_cast<std::size_t>(t)] == Catch::Approx(acc / 16.0).margin(1e-12));
    }
  }
  SECTION("mean times bin count equals the map total") {
    Rng rng(8);
    Tensor m({8, 8});
    for (double& x : m.data) x = rng.uniform(-1.0, 1.0);
    const std::vector<double> v = time_importance(m);
    double acc = 0.0;
    for (double x : v) acc += x;
    CHECK(acc * 8.0 == Catch::Approx(m.sum()).margin(1e-9));
  }
}

TEST_CASE("threshold segments match hand-computed percentile fixtures") {
  using Intervals = std::vector<std::pair<int, int>>;
  struct Fixture {
    std::vector<double> values;
    double p;
    Intervals expected;
  };
  // thresholds worked out by hand with the linear-interpolation rule
  const std::vector<Fixture> fixtures = {
      {{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 30.0, {{3, 10}}},           // thr 3.7
      {{5, 5, 5, 5}, 50.0, {{0, 4}}},                               // thr 5, ties kept
      {{3, 1, 2}, 0.0, {{0, 3}}},                                   // thr = min
      {{3, 1, 2}, 100.0, {{0, 1}}},                                 // thr = max, only max survives
      {{1, 3, 1, 3, 1}, 50.0, {{0, 5}}},                            // thr 1
      {{1, 3, 1, 3, 1}, 75.0, {{1, 2}, {3, 4}}},                    // thr 3
      {{10, 9, 8, 7, 6, 5, 4, 3, 2, 1}, 30.0, {{0, 7}}},            // thr 3.7
      {{0.5}, 30.0, {{0, 1}}},                                      // single element
      {{2, 4, 6, 8}, 25.0, {{1, 4}}},                               // thr 3.5
      {{-1, -2, -3, -4}, 50.0, {{0, 2}}},                           // thr -2.5
      {{5, 0, 5, 0, 5}, 60.0, {{0, 1}, {2, 3}, {4, 5}}},            // thr 5
  };
  for (std::size_t i = 0; i < fixtures.size(); ++i) {
    INFO("fixture " << i);
    CHECK(threshold_segments(fixtures[i].values, fixtures[i].p) == fixtures[i].expected);
  }
}

TEST_CASE("threshold segment invariants on random vectors") {
  Rng rng(9);
  for (int it = 0; it < 50; ++it) {
    std::vector<double> v(64);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    const double p = rng.uniform(0.0, 100.0);
    const auto intervals = threshold_segments(v, p);
    int prev_end = -1;
    for (const auto& [s, e] : intervals) {
      CHECK(s >= 0);
      CHECK(s < e);
      CHECK(e <= 64);
      CHECK(s > prev_end);  // disjoint and sorted, no touching runs
      prev_end = e;
    }
  }
  CHECK_THROWS_AS(threshold_segments({1.0, 2.0}, -5.0), UserError);
  CHECK_THROWS_AS(threshold_segments({}, 30.0), UserError);
}

TEST_CASE("word highlighting by overlap fraction") {
  const std::vector<WordToken> words = {
      {"alpha", 0.0, 0.4}, {"beta", 0.8, 1.3}, {"gamma", 0.7, 1.2}, {"delta", 0.9, 1.1}};
  const double fd = 0.1;  // frames of 100 ms

  SECTION("all frames retained keeps every word") {
    const auto out = highlight_words({{0, 20}}, words, fd);
    CHECK(out == std::vector<std::string>{"alpha", "beta", "gamma", "delta"});
  }
  SECTION("no frames retained keeps nothing") {
    CHECK(highlight_words({}, words, fd).empty());
  }
  SECTION("40% overlap excluded, 60% included, 50% included") {
    // retained seconds: [0.0, 1.0)
    const auto out = highlight_words({{0, 10}}, words, fd);
    // beta: 0.2/0.5 = 40% -> out; gamma: 0.3/0.5 = 60% -> in; delta: 0.1/0.2 = 50% -> in
    CHECK(out == std::vector<std::string>{"alpha", "gamma", "delta"});
  }
  SECTION("zero-length word counts when its instant is retained") {
    const std::vector<WordToken> instants = {{"ping", 0.5, 0.5}, {"pong", 1.5, 1.5}};
    const auto out = highlight_words({{0, 10}}, instants, fd);
    CHECK(out == std::vector<std::string>{"ping"});
  }
  SECTION("empty alignment is fine") {
    CHECK(highlight_words({{0, 10}}, {}, fd).empty());
  }
  SECTION("bad frame duration is rejected") {
    CHECK_THROWS_AS(highlight_words({{0, 10}}, words, 0.0), UserError);
  }
}

TEST_CASE("alignment JSON loading and validation") {
  const fs::path dir = scratch_dir();
  const std::string good = (dir / "align.json").string();
  {
    std::ofstream out(good);
    out << R"([{"word":"hello","start":0.0,"end":0.5},{"word":"world","start":0.6,"end":1.0}])";
  }
  const auto tokens = load_alignment(good);
  REQUIRE(tokens.size() == 2);
  CHECK(tokens[0].word == "hello");
  CHECK(tokens[1].start == 0.6);

  const std::string overlapping = (dir / "bad1.json").string();
  {
    std::ofstream out(overlapping);
    out << R"([{"word":"a","start":0.0,"end":0.7},{"word":"b","start":0.5,"end":1.0}])";
  }
  CHECK_THROWS_AS(load_alignment(overlapping), FormatError);

  CHECK_THROWS_AS(load_alignment(good, 0.8), FormatError);  // beyond waveform duration
  CHECK_NOTHROW(load_alignment(good, 1.0));

  const std::string garbage = (dir / "bad2.json").string();
  {
    std::ofstream out(garbage);
    out << "{not json";
  }
  CHECK_THROWS_AS(load_alignment(garbage), FormatError);
}

TEST_CASE("mel filterbank shape and coverage") {
  const Tensor fb = mel_filterbank(40, 512, 16000, 0.0, 0.0);
  REQUIRE(fb.shape == std::vector<int>{40, 257});
  // every band has some mass, and every band is nonnegative
  for (int m = 0; m < 40; ++m) {
    double mass = 0.0;
    for (int k = 0; k < 257; ++k) {
      CHECK(fb.at2(m, k) >= 0.0);
      mass += fb.at2(m, k);
    }
    CHECK(mass > 0.0);
  }
  CHECK_THROWS_AS(mel_filterbank(8, 500, 16000, 0.0, 0.0), UserError);       // not a power of two
  CHECK_THROWS_AS(mel_filterbank(8, 512, 16000, 9000.0, 100.0), UserError);  // fmin >= fmax
}
