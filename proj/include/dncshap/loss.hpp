#pragma once

#include <cmath>
#include <vector>

#include "dncshap/error.hpp"

namespace dncshap {

struct LossConfig {
  double ce_weight = 1.0;
  double focal_weight = 0.5;
  double focal_gamma = 2.0;  // gamma = 0 reduces the focal term to plain CE
};

inline constexpr double kProbEps = 1e-12;

inline void validate_probability_vector(const std::vector<double>& p, double tol = 1e-6) {
  if (p.empty()) throw NumericError("probability vector is empty");
  double total = 0.0;
  for (double v : p) {
    if (!std::isfinite(v)) throw NumericError("probability vector contains non-finite value");
    if (v < -tol || v > 1.0 + tol) throw NumericError("probability vector entry outside [0,1]");
    total += v;
  }
  if (std::abs(total - 1.0) > tol) throw NumericError("probability vector does not sum to 1");
}

inline int one_hot_index(const std::vector<double>& target) {
  int idx = -1;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] == 1.0) {
      if (idx >= 0) throw NumericError("target is not one-hot: multiple ones");
      idx = static_cast<int>(i);
    } else if (target[i] != 0.0) {
      throw NumericError("target is not one-hot: entry not in {0,1}");
    }
  }
  if (idx < 0) throw NumericError("target is not one-hot: no one");
  return idx;
}

// ce_weight * CE + focal_weight * (1 - p_t)^gamma * CE, with p_t clamped away
// from zero so a confident miss costs a large finite value, never NaN.
inline double combined_loss(const std::vector<double>& pred, const std::vector<double>& target,
                            const LossConfig& cfg = {}) {
  validate_probability_vector(pred);
  if (pred.size() != target.size()) throw NumericError("combined_loss: pred/target length mismatch");
  const int t = one_hot_index(target);
  const double pt = std::max(pred[static_cast<std::size_t>(t)], kProbEps);
  const double one_minus = std::max(1.0 - pt, 0.0);  // pt may exceed 1 by the validation tolerance
  const double ce = -std::log(pt);
  const double focal = std::pow(one_minus, cfg.focal_gamma) * ce;
  return cfg.ce_weight * ce + cfg.focal_weight * focal;
}

// dL/dpred. Only the target-class entry is nonzero; the caller backpropagates
// it through the softmax Jacobian.
inline std::vector<double> combined_loss_grad(const std::vector<double>& pred, int target_index,
                                              const LossConfig& cfg = {}) {
  std::vector<double> g(pred.size(), 0.0);
  const double pt = std::max(pred[static_cast<std::size_t>(target_index)], kProbEps);
  const double one_minus = std::max(1.0 - pt, 0.0);
  // d/dp [ -ln p ] = -1/p
  double d = cfg.ce_weight * (-1.0 / pt);
  // d/dp [ (1-p)^g * (-ln p) ] = g (1-p)^(g-1) ln p - (1-p)^g / p
  if (cfg.focal_weight != 0.0) {
    double dfocal = -std::pow(one_minus, cfg.focal_gamma) / pt;
    if (cfg.focal_gamma != 0.0 && one_minus > 0.0) {
      dfocal += cfg.focal_gamma * std::pow(one_minus, cfg.focal_gamma - 1.0) * std::log(pt);
    }
    d += cfg.focal_weight * dfocal;
  }
  g[static_cast<std::size_t>(target_index)] = d;
  return g;
}

}  // namespace dncshap
