#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dncshap/error.hpp"
#include "dncshap/imageio.hpp"
#include "dncshap/loss.hpp"
#include "dncshap/shapley.hpp"
#include "dncshap/tensor.hpp"

namespace dncshap {

// Black-box two-input classifier: (image, speech) -> probability vector.
using PredictFn = std::function<std::vector<double>(const Tensor& image, const Tensor& speech)>;

// Axis-aligned half-open pixel rectangle [r0,r1) x [c0,c1).
struct Rect {
  int r0 = 0, c0 = 0, r1 = 0, c1 = 0;

  int height() const { return r1 - r0; }
  int width() const { return c1 - c0; }
  long long area() const { return static_cast<long long>(height()) * width(); }
  bool empty() const { return height() <= 0 || width() <= 0; }

  bool operator<(const Rect& o) const {
    return std::tie(r0, c0, r1, c1) < std::tie(o.r0, o.c0, o.r1, o.c1);
  }
  bool operator==(const Rect& o) const {
    return r0 == o.r0 && c0 == o.c0 && r1 == o.r1 && c1 == o.c1;
  }
};

// Copy of the input with the rectangle (all channels) replaced by the
// baseline value. An empty rectangle returns the input unchanged.
inline Tensor mask_region(const Tensor& input, const Rect& region, double baseline = 0.0) {
  if (input.ndim() != 3) throw ShapeError("mask_region: expected rank-3 tensor, got " + input.shape_str());
  if (region.r1 < region.r0 || region.c1 < region.c0) throw UserError("mask_region: malformed region");
  if (region.empty()) return input;
  if (region.r0 < 0 || region.c0 < 0 || region.r1 > input.dim(0) || region.c1 > input.dim(1)) {
    throw UserError("mask_region: region out of bounds for " + input.shape_str());
  }
  Tensor out = input;
  const int channels = input.dim(2);
  for (int r = region.r0; r < region.r1; ++r) {
    for (int c = region.c0; c < region.c1; ++c) {
      for (int k = 0; k < channels; ++k) out.at3(r, c, k) = baseline;
    }
  }
  return out;
}

struct ModalityScores {
  int arg_max = 0;
  double pred_f = 0.0;  // both modalities present
  double pred_b = 0.0;  // both blank
  double pred_1 = 0.0;  // image only
  double pred_2 = 0.0;  // speech only
  double score_1 = 0.0; // image importance
  double score_2 = 0.0; // speech importance
};

namespace detail {

inline double class_prob(const PredictFn& model, const Tensor& img, const Tensor& spc, int cls) {
  const std::vector<double> probs = model(img, spc);
  try {
    validate_probability_vector(probs);
  } catch (const NumericError& e) {
    throw NumericError(std::string("model output is not a probability vector: ") + e.what());
  }
  if (cls >= static_cast<int>(probs.size())) throw NumericError("model output length changed between calls");
  return probs[static_cast<std::size_t>(cls)];
}

}  // namespace detail

// The modality-level game: players {image, speech}, value of a coalition is
// the predicted-class probability with absent modalities replaced by the
// baseline raster. score_1/score_2 are exactly the two-player Shapley values,
// so score_1 + score_2 = pred_f - pred_b.
inline ModalityScores modality_scores(const PredictFn& model, const Tensor& image, const Tensor& speech,
                                      double baseline = 0.0) {
  const std::vector<double> full = model(image, speech);
  try {
    validate_probability_vector(full);
  } catch (const NumericError& e) {
    throw NumericError(std::string("model output is not a probability vector: ") + e.what());
  }
  ModalityScores s;
  s.arg_max = 0;
  for (std::size_t i = 1; i < full.size(); ++i) {
    if (full[i] > full[static_cast<std::size_t>(s.arg_max)]) s.arg_max = static_cast<int>(i);
  }
  const Tensor blank_img(image.shape, baseline);
  const Tensor blank_spc(speech.shape, baseline);
  s.pred_f = full[static_cast<std::size_t>(s.arg_max)];
  s.pred_b = detail::class_prob(model, blank_img, blank_spc, s.arg_max);
  s.pred_1 = detail::class_prob(model, image, blank_spc, s.arg_max);
  s.pred_2 = detail::class_prob(model, blank_img, speech, s.arg_max);
  const auto [s1, s2] = two_player_shapley(s.pred_b, s.pred_1, s.pred_2, s.pred_f);
  s.score_1 = s1;
  s.score_2 = s2;
  return s;
}

struct AttributionRequest {
  PredictFn model;
  Tensor image;   // (h,w,3)
  Tensor speech;  // (h,w,1)
  int times = 6;  // recursion depth; 0 spreads the modality score uniformly
  double baseline = 0.0;
  int jobs = 1;   // worker threads for sibling model evaluations
};

struct AttributionResult {
  int arg_max = 0;
  double pred_f = 0.0, pred_b = 0.0, pred_1 = 0.0, pred_2 = 0.0;
  double score_1 = 0.0, score_2 = 0.0;
  Tensor shap_img;     // (h,w) per-pixel densities summing to score_1
  Tensor shap_speech;  // (h,w) per-pixel densities summing to score_2
  long long eval_count = 0;
  int effective_depth = 0;
};

namespace detail {

inline bool rect_can_split(const Rect& r) { return r.height() >= 2 || r.width() >= 2; }

// Bisect the longer dimension (rows win ties); odd lengths give the extra
// pixel to the first half.
inline std::pair<Rect, Rect> rect_split(const Rect& r) {
  if (r.height() >= r.width()) {
    const int mid = r.r0 + (r.height() + 1) / 2;
    return {Rect{r.r0, r.c0, mid, r.c1}, Rect{mid, r.c0, r.r1, r.c1}};
  }
  const int mid = r.c0 + (r.width() + 1) / 2;
  return {Rect{r.r0, r.c0, r.r1, mid}, Rect{r.r0, mid, r.r1, r.c1}};
}

// Children must sum exactly to the parent score. The correction is spread
// proportionally to |raw| shares, so a zero-raw child stays zero; when both
// raws vanish the parent score is split equally.
inline std::pair<double, double> rescale_children(double parent, double raw_a, double raw_b) {
  const double denom = std::abs(raw_a) + std::abs(raw_b);
  if (denom == 0.0) return {parent * 0.5, parent * 0.5};
  const double residual = parent - (raw_a + raw_b);
  return {raw_a + residual * std::abs(raw_a) / denom, raw_b + residual * std::abs(raw_b) / denom};
}

inline void run_indexed(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const int workers = std::min<long long>(jobs, static_cast<long long>(n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr first_error = nullptr;
  std::mutex err_mutex;
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&, t]() {
      try {
        for (std::size_t i = static_cast<std::size_t>(t); i < n; i += static_cast<std::size_t>(workers)) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (std::thread& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Evaluates the predicted-class probability with one rectangle of one
// modality zeroed, memoized by (modality, rect). Pending misses run in
// parallel; cache writes happen on the calling thread so results do not
// depend on scheduling.
class MaskedEvaluator {
 public:
  MaskedEvaluator(const PredictFn& model, const Tensor& image, const Tensor& speech, int arg_max, double baseline,
                  int jobs)
      : model_(model), image_(image), speech_(speech), arg_max_(arg_max), baseline_(baseline), jobs_(jobs) {}

  void seed(int modality, const Rect& rect, double value) { cache_[{modality, rect}] = value; }

  // Batch interface: all rects of one level at once.
  std::vector<double> evaluate(const std::vector<std::pair<int, Rect>>& keys) {
    std::vector<double> values(keys.size(), 0.0);
    std::vector<std::size_t> miss;
    for (std::size_t i = 0; i < keys.size(); ++i) {
      auto it = cache_.find(keys[i]);
      if (it != cache_.end()) {
        values[i] = it->second;
      } else {
        miss.push_back(i);
      }
    }
    std::vector<double> miss_values(miss.size(), 0.0);
    run_indexed(miss.size(), jobs_, [&](std::size_t j) {
      const auto& [modality, rect] = keys[miss[j]];
      const Tensor masked_img = modality == 0 ? mask_region(image_, rect, baseline_) : image_;
      const Tensor masked_spc = modality == 1 ? mask_region(speech_, rect, baseline_) : speech_;
      miss_values[j] = class_prob(model_, masked_img, masked_spc, arg_max_);
    });
    for (std::size_t j = 0; j < miss.size(); ++j) {
      values[miss[j]] = miss_values[j];
      cache_[keys[miss[j]]] = miss_values[j];
      ++eval_count_;
    }
    return values;
  }

  long long eval_count() const { return eval_count_; }

 private:
  const PredictFn& model_;
  const Tensor& image_;
  const Tensor& speech_;
  int arg_max_;
  double baseline_;
  int jobs_;
  std::map<std::pair<int, Rect>, double> cache_;
  long long eval_count_ = 0;
};

struct RegionNode {
  Rect rect;
  double score = 0.0;    // final (rescaled) Shapley mass of this region
  double v_empty = 0.0;  // model value with exactly this region zeroed
  int depth = 0;
};

// Expands one modality's region tree breadth-first and paints leaf densities.
inline int attribute_modality(MaskedEvaluator& ev, int modality, const Rect& full, double root_score,
                              double root_v_empty, double pred_f, int times, Tensor& map_out) {
  int effective_depth = 0;
  std::vector<RegionNode> level = {{full, root_score, root_v_empty, 0}};
  while (!level.empty()) {
    std::vector<RegionNode> next;
    std::vector<std::size_t> split_nodes;
    std::vector<std::pair<int, Rect>> keys;
    for (std::size_t i = 0; i < level.size(); ++i) {
      const RegionNode& node = level[i];
      if (node.depth >= times || !rect_can_split(node.rect)) {
        const double density = node.score / static_cast<double>(node.rect.area());
        for (int r = node.rect.r0; r < node.rect.r1; ++r) {
          for (int c = node.rect.c0; c < node.rect.c1; ++c) map_out.at2(r, c) = density;
        }
        effective_depth = std::max(effective_depth, node.depth);
        continue;
      }
      split_nodes.push_back(i);
      const auto [a, b] = rect_split(node.rect);
      keys.emplace_back(modality, b);  // value with only A present (B zeroed)
      keys.emplace_back(modality, a);  // value with only B present (A zeroed)
    }
    const std::vector<double> vals = ev.evaluate(keys);
    for (std::size_t j = 0; j < split_nodes.size(); ++j) {
      const RegionNode& node = level[split_nodes[j]];
      const auto [a, b] = rect_split(node.rect);
      const double v_only_a = vals[2 * j];
      const double v_only_b = vals[2 * j + 1];
      const auto [raw_a, raw_b] = two_player_shapley(node.v_empty, v_only_a, v_only_b, pred_f);
      const auto [score_a, score_b] = rescale_children(node.score, raw_a, raw_b);
      next.push_back({a, score_a, v_only_b, node.depth + 1});
      next.push_back({b, score_b, v_only_a, node.depth + 1});
    }
    level = std::move(next);
  }
  return effective_depth;
}

}  // namespace detail

// Algorithm: anchor the four modality predictions, then recursively bisect
// each modality's raster. At every node the two halves play a two-player
// game whose coalition value is the predicted-class probability with the
// absent halves zeroed inside the node's region (everything else keeps its
// original values); raw child scores are rescaled to sum to the parent's, so
// efficiency holds along the whole tree. Deterministic for any job count.
inline AttributionResult dnc_shap(const AttributionRequest& req) {
  if (req.times < 0) throw UserError("dnc_shap: times must be >= 0");
  if (req.jobs < 1) throw UserError("dnc_shap: jobs must be >= 1");
  if (req.image.ndim() != 3 || req.speech.ndim() != 3) {
    throw ShapeError("dnc_shap: image and speech must be rank-3 tensors");
  }
  if (req.image.dim(0) != req.speech.dim(0) || req.image.dim(1) != req.speech.dim(1)) {
    throw ShapeError("dnc_shap: image " + req.image.shape_str() + " and speech " + req.speech.shape_str() +
                     " must share spatial dimensions");
  }

  const ModalityScores ms = modality_scores(req.model, req.image, req.speech, req.baseline);

  AttributionResult res;
  res.arg_max = ms.arg_max;
  res.pred_f = ms.pred_f;
  res.pred_b = ms.pred_b;
  res.pred_1 = ms.pred_1;
  res.pred_2 = ms.pred_2;
  res.score_1 = ms.score_1;
  res.score_2 = ms.score_2;

  const int h = req.image.dim(0);
  const int w = req.image.dim(1);
  const Rect full{0, 0, h, w};
  res.shap_img = Tensor({h, w});
  res.shap_speech = Tensor({h, w});

  detail::MaskedEvaluator ev(req.model, req.image, req.speech, ms.arg_max, req.baseline, req.jobs);
  // the four anchors are already paid for
  ev.seed(0, Rect{0, 0, 0, 0}, ms.pred_f);
  ev.seed(1, Rect{0, 0, 0, 0}, ms.pred_f);
  ev.seed(0, full, ms.pred_2);  // image fully zeroed, speech original
  ev.seed(1, full, ms.pred_1);  // speech fully zeroed, image original

  const int d_img =
      detail::attribute_modality(ev, 0, full, ms.score_1, ms.pred_2, ms.pred_f, req.times, res.shap_img);
  const int d_spc =
      detail::attribute_modality(ev, 1, full, ms.score_2, ms.pred_1, ms.pred_f, req.times, res.shap_speech);

  res.effective_depth = std::max(d_img, d_spc);
  res.eval_count = 4 + ev.eval_count();
  return res;
}

// Min-max normalization to 8-bit grayscale; a constant map renders mid-gray.
inline std::vector<std::uint8_t> render_heatmap(const Tensor& map) {
  if (map.ndim() != 2) throw ShapeError("render_heatmap: expected rank-2 map, got " + map.shape_str());
  if (!map.all_finite()) throw NumericError("render_heatmap: non-finite map");
  double lo = map.data[0], hi = map.data[0];
  for (double v : map.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::vector<std::uint8_t> out(map.data.size(), 128);
  if (hi > lo) {
    for (std::size_t i = 0; i < map.data.size(); ++i) {
      const double scaled = 255.0 * (map.data[i] - lo) / (hi - lo);
      out[i] = static_cast<std::uint8_t>(scaled);  // floor; 1.0 maps to 255 exactly
    }
  }
  return out;
}

inline nlohmann::json attribution_json(const AttributionResult& r) {
  return nlohmann::json{{"arg_max", r.arg_max},     {"pred_f", r.pred_f},
                        {"pred_b", r.pred_b},       {"pred_1", r.pred_1},
                        {"pred_2", r.pred_2},       {"score_1", r.score_1},
                        {"score_2", r.score_2},     {"eval_count", r.eval_count},
                        {"effective_depth", r.effective_depth}};
}

// Emits the artifact set: <stem>.json plus <stem>.img.csv/.pgm and
// <stem>.spc.csv/.pgm. Extra JSON fields (predicted label, ground truth,
// score) are merged into the summary document.
inline void write_attribution_artifacts(const std::string& out_dir, const std::string& stem,
                                        const AttributionResult& r, const nlohmann::json& extra = {}) {
  namespace fs = std::filesystem;
  const fs::path dir(out_dir);
  nlohmann::json doc = attribution_json(r);
  if (extra.is_object()) {
    for (auto it = extra.begin(); it != extra.end(); ++it) doc[it.key()] = it.value();
  }
  {
    std::ofstream out(dir / (stem + ".json"));
    if (!out) throw FormatError((dir / (stem + ".json")).string() + ": cannot open for writing");
    out << doc.dump(2) << "\n";
  }
  write_matrix_csv((dir / (stem + ".img.csv")).string(), r.shap_img);
  write_matrix_csv((dir / (stem + ".spc.csv")).string(), r.shap_speech);
  write_pgm((dir / (stem + ".img.pgm")).string(), r.shap_img.dim(1), r.shap_img.dim(0), render_heatmap(r.shap_img));
  write_pgm((dir / (stem + ".spc.pgm")).string(), r.shap_speech.dim(1), r.shap_speech.dim(0),
            render_heatmap(r.shap_speech));
}

}  // namespace dncshap
