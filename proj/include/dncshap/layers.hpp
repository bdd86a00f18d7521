#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dncshap/error.hpp"
#include "dncshap/rng.hpp"
#include "dncshap/tensor.hpp"

namespace dncshap {

enum class LayerKind : int {
  conv2d = 1,
  maxpool2d = 2,
  dense = 3,
  batchnorm = 4,
  relu = 5,
  softmax = 6,
};

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::maxpool2d: return "maxpool2d";
    case LayerKind::dense: return "dense";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::relu: return "relu";
    case LayerKind::softmax: return "softmax";
  }
  return "?";
}

// Trainable tensor plus its gradient accumulator.
struct ParamRef {
  Tensor* value;
  Tensor* grad;
};

struct LayerCache {
  Tensor input;
  Tensor output;               // kept only by softmax
  std::vector<int> pool_src;   // maxpool: winning flat input index per output cell
};

// One layer of any supported kind. Unused fields stay empty; a plain struct
// keeps checkpoint serialization and shape reporting straightforward.
struct Layer {
  LayerKind kind = LayerKind::relu;
  std::string name;

  int kernel = 0;       // conv2d
  int stride = 1;       // conv2d / maxpool2d
  int filters = 0;      // conv2d
  int in_channels = 0;  // conv2d / batchnorm
  bool same_pad = false;
  int pool = 0;      // maxpool2d
  int units = 0;     // dense
  int in_count = 0;  // dense

  Tensor w, b;                      // conv2d: w (filters,kh,kw,in_ch); dense: w (units,in_count)
  Tensor gamma, beta, rmean, rvar;  // batchnorm, per channel
  Tensor gw, gb, ggamma, gbeta;

  // batchnorm batch statistics, accumulated during training
  Tensor stat_sum, stat_sumsq;
  long long stat_count = 0;
};

inline constexpr double kBatchnormEps = 1e-5;

inline Layer make_conv2d(std::string name, int in_channels, int filters, int kernel, bool same_pad, Rng& rng,
                         int stride = 1) {
  Layer l;
  l.kind = LayerKind::conv2d;
  l.name = std::move(name);
  l.kernel = kernel;
  l.stride = stride;
  l.filters = filters;
  l.in_channels = in_channels;
  l.same_pad = same_pad;
  l.w = Tensor({filters, kernel, kernel, in_channels});
  l.b = Tensor({filters});
  const double bound = std::sqrt(6.0 / (kernel * kernel * in_channels));
  for (double& v : l.w.data) v = rng.uniform(-bound, bound);
  l.gw = Tensor::zeros_like(l.w);
  l.gb = Tensor::zeros_like(l.b);
  return l;
}

inline Layer make_maxpool2d(std::string name, int pool, int stride = 0) {
  Layer l;
  l.kind = LayerKind::maxpool2d;
  l.name = std::move(name);
  l.pool = pool;
  l.stride = stride > 0 ? stride : pool;
  return l;
}

inline Layer make_dense(std::string name, int in_count, int units, Rng& rng) {
  Layer l;
  l.kind = LayerKind::dense;
  l.name = std::move(name);
  l.units = units;
  l.in_count = in_count;
  l.w = Tensor({units, in_count});
  l.b = Tensor({units});
  const double bound = std::sqrt(6.0 / in_count);
  for (double& v : l.w.data) v = rng.uniform(-bound, bound);
  l.gw = Tensor::zeros_like(l.w);
  l.gb = Tensor::zeros_like(l.b);
  return l;
}

inline Layer make_batchnorm(std::string name, int channels) {
  Layer l;
  l.kind = LayerKind::batchnorm;
  l.name = std::move(name);
  l.in_channels = channels;
  l.gamma = Tensor({channels}, 1.0);
  l.beta = Tensor({channels});
  l.rmean = Tensor({channels});
  l.rvar = Tensor({channels}, 1.0);
  l.ggamma = Tensor::zeros_like(l.gamma);
  l.gbeta = Tensor::zeros_like(l.beta);
  l.stat_sum = Tensor({channels});
  l.stat_sumsq = Tensor({channels});
  return l;
}

inline Layer make_relu(std::string name) {
  Layer l;
  l.kind = LayerKind::relu;
  l.name = std::move(name);
  return l;
}

inline Layer make_softmax(std::string name) {
  Layer l;
  l.kind = LayerKind::softmax;
  l.name = std::move(name);
  return l;
}

namespace detail {

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

inline Tensor conv2d_forward(const Layer& l, const Tensor& in) {
  require(in.ndim() == 3, "conv2d '" + l.name + "': expected rank-3 input, got " + in.shape_str());
  const int h = in.dim(0), w = in.dim(1), c = in.dim(2);
  require(c == l.in_channels, "conv2d '" + l.name + "': input has " + std::to_string(c) + " channels, layer expects " +
                                  std::to_string(l.in_channels));
  int oh, ow, pad_top, pad_left;
  if (l.same_pad) {
    oh = (h + l.stride - 1) / l.stride;
    ow = (w + l.stride - 1) / l.stride;
    const int pad_h = std::max((oh - 1) * l.stride + l.kernel - h, 0);
    const int pad_w = std::max((ow - 1) * l.stride + l.kernel - w, 0);
    pad_top = pad_h / 2;
    pad_left = pad_w / 2;
  } else {
    require(h >= l.kernel && w >= l.kernel,
            "conv2d '" + l.name + "': input " + in.shape_str() + " smaller than kernel " + std::to_string(l.kernel));
    oh = (h - l.kernel) / l.stride + 1;
    ow = (w - l.kernel) / l.stride + 1;
    pad_top = 0;
    pad_left = 0;
  }
  Tensor out({oh, ow, l.filters});
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      for (int f = 0; f < l.filters; ++f) {
        double acc = l.b.data[f];
        for (int ky = 0; ky < l.kernel; ++ky) {
          const int iy = oy * l.stride + ky - pad_top;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < l.kernel; ++kx) {
            const int ix = ox * l.stride + kx - pad_left;
            if (ix < 0 || ix >= w) continue;
            const double* iv = &in.data[(static_cast<std::size_t>(iy) * w + ix) * c];
            const double* wv = &l.w.data[((static_cast<std::size_t>(f) * l.kernel + ky) * l.kernel + kx) * c];
            for (int ic = 0; ic < c; ++ic) acc += iv[ic] * wv[ic];
          }
        }
        out.at3(oy, ox, f) = acc;
      }
    }
  }
  return out;
}

inline Tensor conv2d_backward(Layer& l, const Tensor& gout, const Tensor& in) {
  const int h = in.dim(0), w = in.dim(1), c = in.dim(2);
  const int oh = gout.dim(0), ow = gout.dim(1);
  int pad_top = 0, pad_left = 0;
  if (l.same_pad) {
    const int pad_h = std::max((oh - 1) * l.stride + l.kernel - h, 0);
    const int pad_w = std::max((ow - 1) * l.stride + l.kernel - w, 0);
    pad_top = pad_h / 2;
    pad_left = pad_w / 2;
  }
  Tensor gin = Tensor::zeros_like(in);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      for (int f = 0; f < l.filters; ++f) {
        const double g = gout.at3(oy, ox, f);
        l.gb.data[f] += g;
        for (int ky = 0; ky < l.kernel; ++ky) {
          const int iy = oy * l.stride + ky - pad_top;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < l.kernel; ++kx) {
            const int ix = ox * l.stride + kx - pad_left;
            if (ix < 0 || ix >= w) continue;
            const std::size_t ii = (static_cast<std::size_t>(iy) * w + ix) * c;
            const std::size_t wi = ((static_cast<std::size_t>(f) * l.kernel + ky) * l.kernel + kx) * c;
            for (int ic = 0; ic < c; ++ic) {
              l.gw.data[wi + ic] += g * in.data[ii + ic];
              gin.data[ii + ic] += g * l.w.data[wi + ic];
            }
          }
        }
      }
    }
  }
  return gin;
}

inline Tensor maxpool_forward(const Layer& l, const Tensor& in, LayerCache* cache) {
  require(in.ndim() == 3, "maxpool2d '" + l.name + "': expected rank-3 input, got " + in.shape_str());
  const int h = in.dim(0), w = in.dim(1), c = in.dim(2);
  require(h >= l.pool && w >= l.pool,
          "maxpool2d '" + l.name + "': input " + in.shape_str() + " smaller than pool " + std::to_string(l.pool));
  const int oh = (h - l.pool) / l.stride + 1;
  const int ow = (w - l.pool) / l.stride + 1;
  Tensor out({oh, ow, c});
  if (cache) cache->pool_src.assign(out.data.size(), 0);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      for (int k = 0; k < c; ++k) {
        double best = -1e308;
        int best_idx = 0;
        for (int py = 0; py < l.pool; ++py) {
          for (int px = 0; px < l.pool; ++px) {
            const int iy = oy * l.stride + py;
            const int ix = ox * l.stride + px;
            const int idx = (iy * w + ix) * c + k;
            if (in.data[idx] > best) {
              best = in.data[idx];
              best_idx = idx;
            }
          }
        }
        const std::size_t oi = (static_cast<std::size_t>(oy) * ow + ox) * c + k;
        out.data[oi] = best;
        if (cache) cache->pool_src[oi] = best_idx;
      }
    }
  }
  return out;
}

inline Tensor dense_forward(const Layer& l, const Tensor& in) {
  require(static_cast<int>(in.numel()) == l.in_count, "dense '" + l.name + "': input " + in.shape_str() + " has " +
                                                          std::to_string(in.numel()) + " values, layer expects " +
                                                          std::to_string(l.in_count));
  Tensor out({l.units});
  for (int u = 0; u < l.units; ++u) {
    double acc = l.b.data[u];
    const double* wv = &l.w.data[static_cast<std::size_t>(u) * l.in_count];
    for (int i = 0; i < l.in_count; ++i) acc += wv[i] * in.data[i];
    out.data[u] = acc;
  }
  return out;
}

inline Tensor dense_backward(Layer& l, const Tensor& gout, const Tensor& in) {
  Tensor gin = Tensor::zeros_like(in);
  for (int u = 0; u < l.units; ++u) {
    const double g = gout.data[u];
    l.gb.data[u] += g;
    double* gwv = &l.gw.data[static_cast<std::size_t>(u) * l.in_count];
    const double* wv = &l.w.data[static_cast<std::size_t>(u) * l.in_count];
    for (int i = 0; i < l.in_count; ++i) {
      gwv[i] += g * in.data[i];
      gin.data[i] += g * wv[i];
    }
  }
  return gin;
}

inline Tensor batchnorm_forward(const Layer& l, const Tensor& in) {
  require(in.ndim() == 3, "batchnorm '" + l.name + "': expected rank-3 input, got " + in.shape_str());
  const int c = in.dim(2);
  require(c == l.in_channels, "batchnorm '" + l.name + "': input has " + std::to_string(c) +
                                  " channels, layer expects " + std::to_string(l.in_channels));
  Tensor out = in;
  std::vector<double> scale(c), shift(c);
  for (int k = 0; k < c; ++k) {
    const double inv_std = 1.0 / std::sqrt(l.rvar.data[k] + kBatchnormEps);
    scale[k] = l.gamma.data[k] * inv_std;
    shift[k] = l.beta.data[k] - l.rmean.data[k] * scale[k];
  }
  const std::size_t n = out.data.size();
  for (std::size_t i = 0; i < n; ++i) {
    const int k = static_cast<int>(i % c);
    out.data[i] = out.data[i] * scale[k] + shift[k];
  }
  return out;
}

inline Tensor batchnorm_backward(Layer& l, const Tensor& gout, const Tensor& in) {
  const int c = in.dim(2);
  Tensor gin = Tensor::zeros_like(in);
  std::vector<double> inv_std(c);
  for (int k = 0; k < c; ++k) inv_std[k] = 1.0 / std::sqrt(l.rvar.data[k] + kBatchnormEps);
  const std::size_t n = in.data.size();
  for (std::size_t i = 0; i < n; ++i) {
    const int k = static_cast<int>(i % c);
    const double xhat = (in.data[i] - l.rmean.data[k]) * inv_std[k];
    l.ggamma.data[k] += gout.data[i] * xhat;
    l.gbeta.data[k] += gout.data[i];
    gin.data[i] = gout.data[i] * l.gamma.data[k] * inv_std[k];
  }
  return gin;
}

}  // namespace detail

inline Tensor softmax(const Tensor& logits) {
  if (logits.ndim() != 1) throw ShapeError("softmax: expected rank-1 input, got " + logits.shape_str());
  Tensor out = logits;
  double mx = out.data[0];
  for (double v : out.data) mx = std::max(mx, v);
  double total = 0.0;
  for (double& v : out.data) {
    v = std::exp(v - mx);
    total += v;
  }
  for (double& v : out.data) v /= total;
  return out;
}

// Runs one layer forward. Pure: same weights and input give the same bits.
// Every output is checked finite so divergence surfaces at the layer that
// produced it.
inline Tensor layer_forward(const Layer& l, const Tensor& in, LayerCache* cache = nullptr) {
  if (cache) cache->input = in;
  Tensor out;
  switch (l.kind) {
    case LayerKind::conv2d: out = detail::conv2d_forward(l, in); break;
    case LayerKind::maxpool2d: out = detail::maxpool_forward(l, in, cache); break;
    case LayerKind::dense: out = detail::dense_forward(l, in); break;
    case LayerKind::batchnorm: out = detail::batchnorm_forward(l, in); break;
    case LayerKind::relu: {
      out = in;
      for (double& v : out.data) v = v > 0.0 ? v : 0.0;
      break;
    }
    case LayerKind::softmax: {
      out = softmax(in);
      if (cache) cache->output = out;
      break;
    }
  }
  if (!out.all_finite()) {
    throw NumericError(std::string(layer_kind_name(l.kind)) + " '" + l.name + "': non-finite output");
  }
  return out;
}

// Gradient of the loss w.r.t. the layer input; parameter gradients are
// accumulated into the layer's g* tensors. Batchnorm treats its running
// statistics as constants, matching the inference-mode forward above.
inline Tensor layer_backward(Layer& l, const Tensor& gout, const LayerCache& cache) {
  switch (l.kind) {
    case LayerKind::conv2d: return detail::conv2d_backward(l, gout, cache.input);
    case LayerKind::maxpool2d: {
      Tensor gin = Tensor::zeros_like(cache.input);
      for (std::size_t i = 0; i < gout.data.size(); ++i) gin.data[cache.pool_src[i]] += gout.data[i];
      return gin;
    }
    case LayerKind::dense: {
      Tensor gin = detail::dense_backward(l, gout, cache.input);
      return gin;
    }
    case LayerKind::batchnorm: return detail::batchnorm_backward(l, gout, cache.input);
    case LayerKind::relu: {
      Tensor gin = gout;
      for (std::size_t i = 0; i < gin.data.size(); ++i) {
        if (cache.input.data[i] <= 0.0) gin.data[i] = 0.0;
      }
      return gin;
    }
    case LayerKind::softmax: {
      const Tensor& p = cache.output;
      double dot = 0.0;
      for (std::size_t i = 0; i < p.data.size(); ++i) dot += p.data[i] * gout.data[i];
      Tensor gin = gout;
      for (std::size_t i = 0; i < gin.data.size(); ++i) gin.data[i] = p.data[i] * (gout.data[i] - dot);
      return gin;
    }
  }
  throw Error("layer_backward: unknown layer kind");
}

inline void zero_grads(Layer& l) {
  for (Tensor* t : {&l.gw, &l.gb, &l.ggamma, &l.gbeta}) {
    std::fill(t->data.begin(), t->data.end(), 0.0);
  }
}

inline void collect_params(Layer& l, std::vector<ParamRef>& out) {
  switch (l.kind) {
    case LayerKind::conv2d:
    case LayerKind::dense:
      out.push_back({&l.w, &l.gw});
      out.push_back({&l.b, &l.gb});
      break;
    case LayerKind::batchnorm:
      out.push_back({&l.gamma, &l.ggamma});
      out.push_back({&l.beta, &l.gbeta});
      break;
    default: break;
  }
}

// A plain stack of layers.
struct Sequential {
  std::vector<Layer> layers;

  Tensor forward(const Tensor& in) const {
    Tensor x = in;
    for (const Layer& l : layers) x = layer_forward(l, x);
    return x;
  }

  Tensor forward(const Tensor& in, std::vector<LayerCache>& caches) const {
    caches.resize(layers.size());
    Tensor x = in;
    for (std::size_t i = 0; i < layers.size(); ++i) x = layer_forward(layers[i], x, &caches[i]);
    return x;
  }

  Tensor backward(const Tensor& gout, const std::vector<LayerCache>& caches) {
    Tensor g = gout;
    for (std::size_t i = layers.size(); i-- > 0;) g = layer_backward(layers[i], g, caches[i]);
    return g;
  }

  void zero_grads() {
    for (Layer& l : layers) dncshap::zero_grads(l);
  }

  void collect_params(std::vector<ParamRef>& out) {
    for (Layer& l : layers) dncshap::collect_params(l, out);
  }

  // Fold the cached batchnorm inputs of one forward pass into the per-layer
  // batch-statistic accumulators.
  void accumulate_bn_stats(const std::vector<LayerCache>& caches) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      Layer& l = layers[i];
      if (l.kind != LayerKind::batchnorm) continue;
      const Tensor& in = caches[i].input;
      const int c = in.dim(2);
      for (std::size_t j = 0; j < in.data.size(); ++j) {
        const int k = static_cast<int>(j % c);
        l.stat_sum.data[k] += in.data[j];
        l.stat_sumsq.data[k] += in.data[j] * in.data[j];
      }
      l.stat_count += in.numel() / c;
    }
  }

  // Move accumulated batch statistics into the running mean/variance.
  void apply_bn_updates(double momentum) {
    for (Layer& l : layers) {
      if (l.kind != LayerKind::batchnorm || l.stat_count == 0) continue;
      const double n = static_cast<double>(l.stat_count);
      for (int k = 0; k < l.in_channels; ++k) {
        const double mean = l.stat_sum.data[k] / n;
        const double var = std::max(l.stat_sumsq.data[k] / n - mean * mean, 0.0);
        l.rmean.data[k] = (1.0 - momentum) * l.rmean.data[k] + momentum * mean;
        l.rvar.data[k] = (1.0 - momentum) * l.rvar.data[k] + momentum * var;
      }
      std::fill(l.stat_sum.data.begin(), l.stat_sum.data.end(), 0.0);
      std::fill(l.stat_sumsq.data.begin(), l.stat_sumsq.data.end(), 0.0);
      l.stat_count = 0;
    }
  }
};

}  // namespace dncshap
