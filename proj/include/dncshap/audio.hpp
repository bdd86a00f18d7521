#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dncshap/error.hpp"
#include "dncshap/tensor.hpp"

namespace dncshap {

struct Waveform {
  std::vector<double> samples;  // in [-1, 1]
  int sample_rate = 16000;

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

// ---------------------------------------------------------------------------
// WAV (RIFF PCM 16-bit little-endian; stereo is downmixed by averaging)
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

inline void write_u16(std::ostream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(b, 2);
}

}  // namespace detail

inline Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open");
  char tag[5] = {0};
  in.read(tag, 4);
  if (std::string(tag, 4) != "RIFF") throw FormatError(path + ": not a RIFF file");
  detail::read_u32(in);
  in.read(tag, 4);
  if (std::string(tag, 4) != "WAVE") throw FormatError(path + ": not a WAVE file");

  int channels = 0, sample_rate = 0, bits = 0;
  bool got_fmt = false;
  std::vector<std::int16_t> pcm;
  while (in.read(tag, 4)) {
    const std::uint32_t size = detail::read_u32(in);
    const std::string chunk(tag, 4);
    if (chunk == "fmt ") {
      const std::uint16_t format = detail::read_u16(in);
      channels = detail::read_u16(in);
      sample_rate = static_cast<int>(detail::read_u32(in));
      detail::read_u32(in);  // byte rate
      detail::read_u16(in);  // block align
      bits = detail::read_u16(in);
      if (format != 1) throw FormatError(path + ": only PCM WAV is supported");
      if (bits != 16) throw FormatError(path + ": only 16-bit samples are supported");
      if (channels < 1 || channels > 2) throw FormatError(path + ": only mono/stereo WAV is supported");
      if (size > 16) in.ignore(size - 16);
      got_fmt = true;
    } else if (chunk == "data") {
      if (!got_fmt) throw FormatError(path + ": data chunk before fmt chunk");
      pcm.resize(size / 2);
      in.read(reinterpret_cast<char*>(pcm.data()), static_cast<std::streamsize>(pcm.size() * 2));
      if (static_cast<std::uint32_t>(in.gcount()) != pcm.size() * 2) throw FormatError(path + ": truncated data chunk");
      break;
    } else {
      in.ignore(size + (size & 1));  // chunks are word-aligned
    }
  }
  if (!got_fmt || pcm.empty()) throw FormatError(path + ": missing fmt/data chunk or empty audio");

  Waveform w;
  w.sample_rate = sample_rate;
  if (channels == 1) {
    w.samples.reserve(pcm.size());
    for (std::int16_t s : pcm) w.samples.push_back(s / 32768.0);
  } else {
    w.samples.reserve(pcm.size() / 2);
    for (std::size_t i = 0; i + 1 < pcm.size(); i += 2) {
      w.samples.push_back((pcm[i] / 32768.0 + pcm[i + 1] / 32768.0) * 0.5);
    }
  }
  return w;
}

inline void write_wav(const std::string& path, const Waveform& w) {
  if (w.samples.empty() || w.sample_rate <= 0) throw UserError("write_wav: empty waveform or bad sample rate");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path + ": cannot open for writing");
  const std::uint32_t data_size = static_cast<std::uint32_t>(w.samples.size() * 2);
  out.write("RIFF", 4);
  detail::write_u32(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  detail::write_u32(out, 16);
  detail::write_u16(out, 1);  // PCM
  detail::write_u16(out, 1);  // mono
  detail::write_u32(out, static_cast<std::uint32_t>(w.sample_rate));
  detail::write_u32(out, static_cast<std::uint32_t>(w.sample_rate * 2));
  detail::write_u16(out, 2);
  detail::write_u16(out, 16);
  out.write("data", 4);
  detail::write_u32(out, data_size);
  for (double v : w.samples) {
    double clamped = v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v);
    const std::int16_t s = static_cast<std::int16_t>(std::lround(clamped * 32767.0));
    detail::write_u16(out, static_cast<std::uint16_t>(s));
  }
  if (!out) throw FormatError(path + ": write failed");
}

// ---------------------------------------------------------------------------
// STFT + mel filterbank
// ---------------------------------------------------------------------------

namespace detail {

// Iterative radix-2 Cooley-Tukey; n must be a power of two.
inline void fft_inplace(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * 3.14159265358979323846 / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

}  // namespace detail

struct LogmelConfig {
  int n_mels = 128;
  int n_frames = 128;
  int fft_size = 1024;
  int hop = 0;         // 0: derived so n_frames frames cover the clip
  double fmin = 0.0;
  double fmax = 0.0;   // 0: sample_rate / 2
};

// Triangular filters on a mel-spaced grid; rows are bands, columns are the
// fft_size/2 + 1 magnitude bins.
inline Tensor mel_filterbank(int n_mels, int fft_size, int sample_rate, double fmin, double fmax) {
  if (n_mels < 1) throw UserError("mel_filterbank: need at least one band");
  if (!detail::is_power_of_two(fft_size)) throw UserError("mel_filterbank: fft_size must be a power of two");
  if (fmax <= 0.0) fmax = sample_rate / 2.0;
  if (!(fmin >= 0.0 && fmin < fmax)) throw UserError("mel_filterbank: need 0 <= fmin < fmax");
  const int bins = fft_size / 2 + 1;
  const double mel_lo = detail::hz_to_mel(fmin);
  const double mel_hi = detail::hz_to_mel(fmax);
  std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
  for (int i = 0; i < n_mels + 2; ++i) {
    edges[static_cast<std::size_t>(i)] = detail::mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));
  }
  Tensor fb({n_mels, bins});
  for (int m = 0; m < n_mels; ++m) {
    const double f0 = edges[static_cast<std::size_t>(m)];
    const double f1 = edges[static_cast<std::size_t>(m) + 1];
    const double f2 = edges[static_cast<std::size_t>(m) + 2];
    for (int k = 0; k < bins; ++k) {
      const double fk = static_cast<double>(k) * sample_rate / fft_size;
      double w = 0.0;
      if (fk > f0 && fk < f1) {
        w = (fk - f0) / (f1 - f0);
      } else if (fk >= f1 && fk < f2) {
        w = (f2 - fk) / (f2 - f1);
      }
      fb.at2(m, k) = w;
    }
  }
  return fb;
}

// Mel-band energies before log compression and scaling: Hann-windowed
// magnitude STFT through the triangular filterbank, time axis padded or
// center-cropped to exactly n_frames columns. Kept public so the monotone
// pre-log stage can be checked on its own.
inline Tensor mel_energies(const Waveform& wave, const LogmelConfig& cfg = {}) {
  if (wave.samples.empty()) throw UserError("mel_energies: empty waveform");
  if (wave.sample_rate <= 0) throw UserError("mel_energies: sample rate must be positive");
  if (!detail::is_power_of_two(cfg.fft_size)) throw UserError("mel_energies: fft_size must be a power of two");
  if (cfg.n_frames < 1) throw UserError("mel_energies: n_frames must be positive");

  const int len = static_cast<int>(wave.samples.size());
  const int fft = cfg.fft_size;
  int hop = cfg.hop;
  if (hop <= 0) hop = std::max(1, cfg.n_frames > 1 ? (len - fft) / (cfg.n_frames - 1) : 1);
  const int n_raw = len >= fft ? (len - fft) / hop + 1 : 1;

  std::vector<double> window(static_cast<std::size_t>(fft));
  for (int i = 0; i < fft; ++i) {
    window[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * 3.14159265358979323846 * i / (fft - 1));
  }
  const Tensor fb = mel_filterbank(cfg.n_mels, fft, wave.sample_rate, cfg.fmin, cfg.fmax);
  const int bins = fft / 2 + 1;

  // pad or center-crop the raw time axis to n_frames; only the surviving
  // frames are ever computed
  const int offset = n_raw > cfg.n_frames ? (n_raw - cfg.n_frames) / 2 : 0;
  const int copy = std::min(n_raw, cfg.n_frames);

  Tensor out({cfg.n_mels, cfg.n_frames});
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(fft));
  std::vector<double> mag(static_cast<std::size_t>(bins));
  for (int t = 0; t < copy; ++t) {
    const int start = (t + offset) * hop;
    for (int i = 0; i < fft; ++i) {
      const int si = start + i;
      const double s = si < len ? wave.samples[static_cast<std::size_t>(si)] : 0.0;
      buf[static_cast<std::size_t>(i)] = {s * window[static_cast<std::size_t>(i)], 0.0};
    }
    detail::fft_inplace(buf);
    for (int k = 0; k < bins; ++k) mag[static_cast<std::size_t>(k)] = std::abs(buf[static_cast<std::size_t>(k)]);
    for (int m = 0; m < cfg.n_mels; ++m) {
      double acc = 0.0;
      const double* w = &fb.data[static_cast<std::size_t>(m) * bins];
      for (int k = 0; k < bins; ++k) acc += w[k] * mag[static_cast<std::size_t>(k)];
      out.at2(m, t) = acc;
    }
  }
  return out;
}

// Full spectrogram pipeline: mel energies -> log(1+x) -> global min-max to
// [0,1]. Silence maps to an exactly-zero raster, the attribution baseline.
inline Tensor logmel(const Waveform& wave, const LogmelConfig& cfg = {}) {
  Tensor e = mel_energies(wave, cfg);
  for (double& v : e.data) v = std::log1p(v);
  double lo = e.data[0], hi = e.data[0];
  for (double v : e.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi > lo) {
    for (double& v : e.data) v = (v - lo) / (hi - lo);
  } else {
    std::fill(e.data.begin(), e.data.end(), 0.0);
  }
  return Tensor({cfg.n_mels, cfg.n_frames, 1}, std::move(e.data));
}

// ---------------------------------------------------------------------------
// Speech attribution post-processing
// ---------------------------------------------------------------------------

// Reduce a (mel x time) attribution map to per-frame importance by averaging
// over the frequency axis. Accepts rank-2 or single-channel rank-3 maps.
inline std::vector<double> time_importance(const Tensor& shap_speech) {
  if (!(shap_speech.ndim() == 2 || (shap_speech.ndim() == 3 && shap_speech.dim(2) == 1))) {
    throw ShapeError("time_importance: expected (mels,frames) map, got " + shap_speech.shape_str());
  }
  if (!shap_speech.all_finite()) throw NumericError("time_importance: non-finite attribution map");
  const int mels = shap_speech.dim(0);
  const int frames = shap_speech.dim(1);
  std::vector<double> out(static_cast<std::size_t>(frames), 0.0);
  for (int m = 0; m < mels; ++m) {
    for (int t = 0; t < frames; ++t) {
      out[static_cast<std::size_t>(t)] += shap_speech.data[(static_cast<std::size_t>(m) * frames + t)];
    }
  }
  for (double& v : out) v /= mels;
  return out;
}

// Linear-interpolation percentile between order statistics (the "inclusive"
// scheme): rank p/100 * (n-1).
inline double percentile_linear(std::vector<double> values, double p) {
  if (values.empty()) throw UserError("percentile: empty vector");
  if (p < 0.0 || p > 100.0) throw UserError("percentile: p must be in [0,100]");
  std::sort(values.begin(), values.end());
  const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(rank);
  const double frac = rank - static_cast<double>(lo);
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

// Frames strictly below the percentile threshold are dropped; ties survive.
// Returns maximal [start,end) runs of surviving frames.
inline std::vector<std::pair<int, int>> threshold_segments(const std::vector<double>& importance,
                                                           double percentile = 30.0) {
  const double thr = percentile_linear(importance, percentile);
  std::vector<std::pair<int, int>> intervals;
  int start = -1;
  for (int i = 0; i <= static_cast<int>(importance.size()); ++i) {
    const bool keep = i < static_cast<int>(importance.size()) && importance[static_cast<std::size_t>(i)] >= thr;
    if (keep && start < 0) start = i;
    if (!keep && start >= 0) {
      intervals.emplace_back(start, i);
      start = -1;
    }
  }
  return intervals;
}

struct WordToken {
  std::string word;
  double start = 0.0;  // seconds
  double end = 0.0;
};

// JSON list of {word, start, end}. Intervals must be ordered and
// non-overlapping; when max_duration > 0 they must also fit inside it.
inline std::vector<WordToken> load_alignment(const std::string& path, double max_duration = 0.0) {
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": bad alignment JSON: " + e.what());
  }
  if (!j.is_array()) throw FormatError(path + ": alignment JSON must be a list");
  std::vector<WordToken> tokens;
  double prev_end = 0.0;
  for (const auto& item : j) {
    WordToken t;
    try {
      t.word = item.at("word").get<std::string>();
      t.start = item.at("start").get<double>();
      t.end = item.at("end").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path + ": bad alignment entry: " + e.what());
    }
    if (!(t.start >= 0.0 && t.end >= t.start)) throw FormatError(path + ": alignment interval out of order");
    if (t.start < prev_end) throw FormatError(path + ": overlapping alignment intervals");
    if (max_duration > 0.0 && t.end > max_duration + 1e-9) {
      throw FormatError(path + ": alignment interval beyond waveform duration");
    }
    prev_end = t.end;
    tokens.push_back(std::move(t));
  }
  return tokens;
}

// Words overlapping the retained frame intervals by at least half the word's
// duration. Zero-length words count when their instant is retained.
inline std::vector<std::string> highlight_words(const std::vector<std::pair<int, int>>& intervals,
                                                const std::vector<WordToken>& alignment, double frame_duration) {
  if (frame_duration <= 0.0) throw UserError("highlight_words: frame_duration must be positive");
  std::vector<std::string> out;
  for (const WordToken& t : alignment) {
    const double dur = t.end - t.start;
    double overlap = 0.0;
    bool instant_hit = false;
    for (const auto& [s, e] : intervals) {
      const double is = s * frame_duration;
      const double ie = e * frame_duration;
      overlap += std::max(0.0, std::min(t.end, ie) - std::max(t.start, is));
      if (t.start >= is && t.start < ie) instant_hit = true;
    }
    // tolerance keeps exact-boundary overlaps inclusive under FP noise
    if ((dur > 0.0 && overlap >= 0.5 * dur - 1e-12) || (dur <= 0.0 && instant_hit)) {
      out.push_back(t.word);
    }
  }
  return out;
}

}  // namespace dncshap
