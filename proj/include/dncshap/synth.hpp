#pragma once

#include <vector>

#include "dncshap/rng.hpp"
#include "dncshap/tensor.hpp"
#include "dncshap/train.hpp"

namespace dncshap {

// Four-class multimodal toy data. The class is only decodable from BOTH
// modalities: bit 1 is the image brightness (dark vs bright mean), bit 0 is
// which spectrogram half-band carries the energy. Either modality alone caps
// at 50% accuracy.
inline std::vector<Sample> make_multimodal_dataset(int n, int size, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int label = i % 4;
    const int bright = label >> 1;
    const int high_band = label & 1;

    Sample s;
    s.label = label;
    s.image = Tensor({size, size, 3});
    const double base = bright ? 0.75 : 0.15;
    for (double& v : s.image.data) {
      double x = base + 0.2 * (rng.uniform() - 0.5);
      v = x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x);
    }

    s.speech = Tensor({size, size, 1});
    const int band_lo = high_band ? size / 2 : 0;
    const int band_hi = high_band ? size : size / 2;
    for (int r = 0; r < size; ++r) {
      const bool active = r >= band_lo && r < band_hi;
      for (int c = 0; c < size; ++c) {
        s.speech.at3(r, c, 0) = active ? 0.55 + 0.4 * rng.uniform() : 0.05 * rng.uniform();
      }
    }
    out.push_back(std::move(s));
  }
  rng.shuffle(out);
  return out;
}

// Two-class data where the label is a deterministic function of mean pixel
// intensity; the speech raster is label-free noise.
inline std::vector<Sample> make_intensity_dataset(int n, int size, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    Sample s;
    s.label = label;
    s.image = Tensor({size, size, 3});
    const double base = label ? 0.8 : 0.2;
    for (double& v : s.image.data) {
      double x = base + 0.2 * (rng.uniform() - 0.5);
      v = x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x);
    }
    s.speech = Tensor({size, size, 1});
    for (double& v : s.speech.data) v = rng.uniform();
    out.push_back(std::move(s));
  }
  rng.shuffle(out);
  return out;
}

// Zero out one modality in-place, for unimodal ablation runs.
enum class Ablation { none, image_only, speech_only };

inline void apply_ablation(std::vector<Sample>& data, Ablation mode) {
  if (mode == Ablation::none) return;
  for (Sample& s : data) {
    Tensor& victim = mode == Ablation::image_only ? s.speech : s.image;
    std::fill(victim.data.begin(), victim.data.end(), 0.0);
  }
}

}  // namespace dncshap
