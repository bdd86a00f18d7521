#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "dncshap/error.hpp"

namespace dncshap {

// Rows index ground truth, columns index predictions.
struct ConfusionMatrix {
  int k = 0;
  std::vector<long long> counts;

  explicit ConfusionMatrix(int classes) : k(classes), counts(static_cast<std::size_t>(classes) * classes, 0) {
    if (classes < 1) throw UserError("confusion matrix needs at least one class");
  }

  long long& at(int truth, int pred) { return counts[static_cast<std::size_t>(truth) * k + pred]; }
  long long at(int truth, int pred) const { return counts[static_cast<std::size_t>(truth) * k + pred]; }

  void add(int truth, int pred) {
    if (truth < 0 || truth >= k || pred < 0 || pred >= k) throw UserError("confusion matrix: class index out of range");
    ++at(truth, pred);
  }

  long long total() const {
    long long t = 0;
    for (long long c : counts) t += c;
    return t;
  }

  long long trace() const {
    long long t = 0;
    for (int i = 0; i < k; ++i) t += at(i, i);
    return t;
  }

  long long row_sum(int r) const {
    long long t = 0;
    for (int j = 0; j < k; ++j) t += at(r, j);
    return t;
  }

  long long col_sum(int c) const {
    long long t = 0;
    for (int i = 0; i < k; ++i) t += at(i, c);
    return t;
  }
};

inline ConfusionMatrix confusion_from_pairs(const std::vector<int>& truth, const std::vector<int>& pred, int k) {
  if (truth.size() != pred.size()) throw UserError("confusion matrix: truth/pred length mismatch");
  ConfusionMatrix cm(k);
  for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], pred[i]);
  return cm;
}

inline double accuracy(const ConfusionMatrix& cm) {
  const long long n = cm.total();
  if (n == 0) throw UserError("accuracy: empty confusion matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(n);
}

// Unweighted mean of per-class F1. A class with neither support nor
// predictions contributes F1 = 0.
inline double macro_f1(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw UserError("macro_f1: empty confusion matrix");
  double total = 0.0;
  for (int c = 0; c < cm.k; ++c) {
    const double tp = static_cast<double>(cm.at(c, c));
    const double fp = static_cast<double>(cm.col_sum(c)) - tp;
    const double fn = static_cast<double>(cm.row_sum(c)) - tp;
    const double denom = 2.0 * tp + fp + fn;
    total += denom > 0.0 ? 2.0 * tp / denom : 0.0;
  }
  return total / cm.k;
}

// (p_o - p_e) / (1 - p_e); degenerate marginals (p_e == 1) map to 0.
inline double cohen_kappa(const ConfusionMatrix& cm) {
  const long long n = cm.total();
  if (n == 0) throw UserError("cohen_kappa: empty confusion matrix");
  const double dn = static_cast<double>(n);
  const double po = static_cast<double>(cm.trace()) / dn;
  double pe = 0.0;
  for (int c = 0; c < cm.k; ++c) {
    pe += (static_cast<double>(cm.row_sum(c)) / dn) * (static_cast<double>(cm.col_sum(c)) / dn);
  }
  if (pe >= 1.0) return 0.0;
  return (po - pe) / (1.0 - pe);
}

inline nlohmann::json metrics_report(const ConfusionMatrix& cm) {
  nlohmann::json confusion = nlohmann::json::array();
  for (int i = 0; i < cm.k; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < cm.k; ++j) row.push_back(cm.at(i, j));
    confusion.push_back(row);
  }
  return nlohmann::json{{"accuracy", accuracy(cm)},
                        {"macro_f1", macro_f1(cm)},
                        {"cohen_kappa", cohen_kappa(cm)},
                        {"confusion", confusion}};
}

}  // namespace dncshap
