#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "dncshap/error.hpp"

namespace dncshap {

// Dense n-dimensional array of doubles, row-major. Rasters use (rows, cols,
// channels); embeddings and logits are rank-1.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;

  explicit Tensor(std::vector<int> s, double fill = 0.0) : shape(std::move(s)) {
    for (int d : shape) {
      if (d <= 0) throw ShapeError("tensor dimensions must be positive");
    }
    data.assign(static_cast<std::size_t>(count(shape)), fill);
  }

  Tensor(std::vector<int> s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
    if (static_cast<long long>(data.size()) != count(shape)) {
      throw ShapeError("tensor data length does not match shape");
    }
  }

  static long long count(const std::vector<int>& s) {
    long long n = 1;
    for (int d : s) n *= d;
    return n;
  }

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }

  int ndim() const { return static_cast<int>(shape.size()); }
  long long numel() const { return static_cast<long long>(data.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  // Rank-3 accessors (rows, cols, channels).
  double& at3(int r, int c, int k) {
    return data[(static_cast<std::size_t>(r) * shape[1] + c) * shape[2] + k];
  }
  double at3(int r, int c, int k) const {
    return data[(static_cast<std::size_t>(r) * shape[1] + c) * shape[2] + k];
  }

  // Rank-2 accessors (rows, cols).
  double& at2(int r, int c) { return data[static_cast<std::size_t>(r) * shape[1] + c]; }
  double at2(int r, int c) const { return data[static_cast<std::size_t>(r) * shape[1] + c]; }

  bool all_finite() const {
    for (double v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  double sum() const { return std::accumulate(data.begin(), data.end(), 0.0); }

  double mean() const { return data.empty() ? 0.0 : sum() / static_cast<double>(data.size()); }

  std::string shape_str() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) os << ",";
      os << shape[i];
    }
    os << ")";
    return os.str();
  }
};

inline Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("elementwise add: shapes " + a.shape_str() + " and " + b.shape_str() + " differ");
  }
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

inline Tensor multiply(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("elementwise multiply: shapes " + a.shape_str() + " and " + b.shape_str() + " differ");
  }
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
  return out;
}

}  // namespace dncshap
