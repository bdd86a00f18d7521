#pragma once

#include <array>
#include <string>
#include <vector>

#include "dncshap/error.hpp"
#include "dncshap/layers.hpp"
#include "dncshap/rng.hpp"
#include "dncshap/tensor.hpp"

namespace dncshap {

// Where the criss-cross (an addition combining the two modalities' streams)
// sits relative to the backbone sub-networks.
enum class Topology : int {
  proposed = 0,            // single criss-cross after the backbones
  baseline1 = 1,           // criss-crosses both before and after
  baseline2 = 2,           // single criss-cross before the backbones
  baseline3 = 3,           // single criss-cross after the backbones
};

inline const char* topology_name(Topology t) {
  switch (t) {
    case Topology::proposed: return "proposed";
    case Topology::baseline1: return "baseline1";
    case Topology::baseline2: return "baseline2";
    case Topology::baseline3: return "baseline3";
  }
  return "?";
}

inline Topology parse_topology(const std::string& s) {
  if (s == "proposed") return Topology::proposed;
  if (s == "baseline1") return Topology::baseline1;
  if (s == "baseline2") return Topology::baseline2;
  if (s == "baseline3") return Topology::baseline3;
  throw UserError("unknown topology '" + s + "' (expected proposed|baseline1|baseline2|baseline3)");
}

// Defaults mirror the full-scale network; tests and the CLI shrink everything
// through this config.
struct FusionConfig {
  Topology topology = Topology::proposed;
  int input_size = 128;                       // square rasters, divisible by 8
  std::array<int, 3> n1_filters = {64, 128, 256};
  std::array<int, 3> n2_filters = {64, 128, 256};
  int embed_width = 512;
  int head_width = 1024;
  int num_classes = 4;
  std::uint64_t seed = 0;

  void validate() const {
    if (input_size < 8 || input_size % 8 != 0) {
      throw UserError("fusion config: input_size must be a multiple of 8 and >= 8");
    }
    for (int f : n1_filters) {
      if (f < 1) throw UserError("fusion config: n1 filter counts must be positive");
    }
    for (int f : n2_filters) {
      if (f < 1) throw UserError("fusion config: n2 filter counts must be positive");
    }
    if (embed_width < 1) throw UserError("fusion config: embed_width must be positive");
    if (head_width < 1) throw UserError("fusion config: head_width must be positive");
    if (num_classes < 2) throw UserError("fusion config: need at least two classes");
  }
};

struct FusedEmbeddings {
  Tensor f_img;  // F_i
  Tensor f_spc;  // F_s
  Tensor f_mul;  // F_i (.) F_s
};

// Criss-cross intermediate fusion: each modality's plain-stack embedding is
// added to the other modality's backbone embedding, and the two sums gate
// each other multiplicatively.
inline FusedEmbeddings intermediate_fusion(const Tensor& e_n1i, const Tensor& e_n1s, const Tensor& e_n2i,
                                           const Tensor& e_n2s) {
  FusedEmbeddings f;
  f.f_img = add(e_n1i, e_n2s);
  f.f_spc = add(e_n1s, e_n2i);
  f.f_mul = multiply(f.f_img, f.f_spc);
  return f;
}

inline std::array<double, 3> softmax3(double w1, double w2, double w3) {
  const double mx = std::max(w1, std::max(w2, w3));
  const double e1 = std::exp(w1 - mx), e2 = std::exp(w2 - mx), e3 = std::exp(w3 - mx);
  const double z = e1 + e2 + e3;
  return {e1 / z, e2 / z, e3 / z};
}

// Convex combination of the three per-branch logit vectors; the raw weights
// are softmax-normalized so they stay non-negative and sum to one.
inline Tensor late_fusion_logits(const Tensor& o_sp, const Tensor& o_img, const Tensor& o_mul, double w1, double w2,
                                 double w3) {
  if (!o_sp.same_shape(o_img) || !o_sp.same_shape(o_mul) || o_sp.ndim() != 1) {
    throw ShapeError("late_fusion: branch logits must be rank-1 vectors of equal length");
  }
  const std::array<double, 3> w = softmax3(w1, w2, w3);
  Tensor o = Tensor::zeros_like(o_sp);
  for (std::size_t i = 0; i < o.data.size(); ++i) {
    o.data[i] = w[0] * o_sp.data[i] + w[1] * o_img.data[i] + w[2] * o_mul.data[i];
  }
  return o;
}

inline Tensor late_fusion(const Tensor& o_sp, const Tensor& o_img, const Tensor& o_mul, double w1, double w2,
                          double w3) {
  return softmax(late_fusion_logits(o_sp, o_img, o_mul, w1, w2, w3));
}

// Per-forward intermediate state, kept only when training.
struct NetCache {
  LayerCache stem;
  std::vector<LayerCache> n1_img, n1_spc, n2_img, n2_spc;
  std::vector<LayerCache> head_sp, head_img, head_mul;
  Tensor f_img, f_spc;        // needed for the multiply-gate backward
  Tensor o_sp, o_img, o_mul;  // branch logits
  std::array<double, 3> what = {0, 0, 0};
  Tensor yhat;
};

// Miniature ParallelNet: four sub-networks (plain conv stacks N1 and backbone
// stand-ins N2 per modality), a 1x1x3 speech stem, criss-cross intermediate
// fusion, three dense heads and softmax-weighted late fusion.
struct ParallelNetMini {
  using Cache = NetCache;

  FusionConfig cfg;
  Layer stem;  // (S,S,1) -> (S,S,3), feeds the speech backbone
  Sequential n1_img, n1_spc, n2_img, n2_spc;
  Sequential head_sp, head_img, head_mul;
  Tensor fusion_w{{3}};    // raw late-fusion weights, softmaxed at use
  Tensor g_fusion_w{{3}};

  int input_size() const { return cfg.input_size; }
  int num_classes() const { return cfg.num_classes; }

  void check_inputs(const Tensor& image, const Tensor& speech) const {
    const int s = cfg.input_size;
    if (!(image.ndim() == 3 && image.dim(0) == s && image.dim(1) == s && image.dim(2) == 3)) {
      throw ShapeError("forward: image must be (" + std::to_string(s) + "," + std::to_string(s) + ",3), got " +
                       image.shape_str());
    }
    if (!(speech.ndim() == 3 && speech.dim(0) == s && speech.dim(1) == s && speech.dim(2) == 1)) {
      throw ShapeError("forward: speech must be (" + std::to_string(s) + "," + std::to_string(s) + ",1), got " +
                       speech.shape_str());
    }
  }

  // Inference forward; pure, safe to call concurrently on a const model.
  std::vector<double> forward(const Tensor& image, const Tensor& speech) const {
    check_inputs(image, speech);
    const Tensor s3 = layer_forward(stem, speech);
    const Tensor e1i = n1_img.forward(image);
    const Tensor e1s = n1_spc.forward(speech);
    Tensor f_img, f_spc;
    if (cfg.topology == Topology::baseline1 || cfg.topology == Topology::baseline2) {
      const Tensor mixed = add(image, s3);  // raster-level criss-cross
      const Tensor e2i = n2_img.forward(mixed);
      const Tensor e2s = n2_spc.forward(mixed);
      if (cfg.topology == Topology::baseline1) {
        f_img = add(e1i, e2s);  // second criss-cross at embedding level
        f_spc = add(e1s, e2i);
      } else {
        f_img = add(e1i, e2i);
        f_spc = add(e1s, e2s);
      }
    } else {
      const Tensor e2i = n2_img.forward(image);
      const Tensor e2s = n2_spc.forward(s3);
      const FusedEmbeddings f = intermediate_fusion(e1i, e1s, e2i, e2s);
      f_img = std::move(f.f_img);
      f_spc = std::move(f.f_spc);
    }
    const Tensor f_mul = multiply(f_img, f_spc);
    const Tensor o_sp = head_sp.forward(f_spc);
    const Tensor o_img = head_img.forward(f_img);
    const Tensor o_mul = head_mul.forward(f_mul);
    const Tensor yhat = late_fusion(o_sp, o_img, o_mul, fusion_w.data[0], fusion_w.data[1], fusion_w.data[2]);
    return yhat.data;
  }

  // Training forward; records everything backward() needs.
  std::vector<double> forward_train(const Tensor& image, const Tensor& speech, NetCache& c) const {
    check_inputs(image, speech);
    const Tensor s3 = layer_forward(stem, speech, &c.stem);
    const Tensor e1i = n1_img.forward(image, c.n1_img);
    const Tensor e1s = n1_spc.forward(speech, c.n1_spc);
    Tensor e2i, e2s;
    if (cfg.topology == Topology::baseline1 || cfg.topology == Topology::baseline2) {
      const Tensor mixed = add(image, s3);
      e2i = n2_img.forward(mixed, c.n2_img);
      e2s = n2_spc.forward(mixed, c.n2_spc);
    } else {
      e2i = n2_img.forward(image, c.n2_img);
      e2s = n2_spc.forward(s3, c.n2_spc);
    }
    if (cfg.topology == Topology::baseline2) {
      c.f_img = add(e1i, e2i);
      c.f_spc = add(e1s, e2s);
    } else {
      c.f_img = add(e1i, e2s);
      c.f_spc = add(e1s, e2i);
    }
    const Tensor f_mul = multiply(c.f_img, c.f_spc);
    c.o_sp = head_sp.forward(c.f_spc, c.head_sp);
    c.o_img = head_img.forward(c.f_img, c.head_img);
    c.o_mul = head_mul.forward(f_mul, c.head_mul);
    c.what = softmax3(fusion_w.data[0], fusion_w.data[1], fusion_w.data[2]);
    const Tensor o = late_fusion_logits(c.o_sp, c.o_img, c.o_mul, fusion_w.data[0], fusion_w.data[1],
                                        fusion_w.data[2]);
    c.yhat = softmax(o);
    return c.yhat.data;
  }

  // Accumulates parameter gradients from dL/dyhat.
  void backward(const NetCache& c, const std::vector<double>& dyhat) {
    // through the final softmax
    const Tensor& p = c.yhat;
    double dot = 0.0;
    for (std::size_t i = 0; i < p.data.size(); ++i) dot += p.data[i] * dyhat[i];
    Tensor dO = Tensor::zeros_like(p);
    for (std::size_t i = 0; i < p.data.size(); ++i) dO.data[i] = p.data[i] * (dyhat[i] - dot);

    // weighted-addition layer: branch grads and raw-weight grads
    Tensor d_osp = Tensor::zeros_like(dO), d_oimg = Tensor::zeros_like(dO), d_omul = Tensor::zeros_like(dO);
    std::array<double, 3> dwhat = {0, 0, 0};
    for (std::size_t i = 0; i < dO.data.size(); ++i) {
      d_osp.data[i] = c.what[0] * dO.data[i];
      d_oimg.data[i] = c.what[1] * dO.data[i];
      d_omul.data[i] = c.what[2] * dO.data[i];
      dwhat[0] += c.o_sp.data[i] * dO.data[i];
      dwhat[1] += c.o_img.data[i] * dO.data[i];
      dwhat[2] += c.o_mul.data[i] * dO.data[i];
    }
    double wdot = 0.0;
    for (int k = 0; k < 3; ++k) wdot += c.what[static_cast<std::size_t>(k)] * dwhat[static_cast<std::size_t>(k)];
    for (int k = 0; k < 3; ++k) {
      g_fusion_w.data[static_cast<std::size_t>(k)] +=
          c.what[static_cast<std::size_t>(k)] * (dwhat[static_cast<std::size_t>(k)] - wdot);
    }

    Tensor d_fspc = head_sp.backward(d_osp, c.head_sp);
    Tensor d_fimg = head_img.backward(d_oimg, c.head_img);
    const Tensor d_fmul = head_mul.backward(d_omul, c.head_mul);

    // multiply gate
    for (std::size_t i = 0; i < d_fmul.data.size(); ++i) {
      d_fimg.data[i] += d_fmul.data[i] * c.f_spc.data[i];
      d_fspc.data[i] += d_fmul.data[i] * c.f_img.data[i];
    }

    Tensor de1i, de1s, de2i, de2s;
    if (cfg.topology == Topology::baseline2) {
      de1i = d_fimg;
      de2i = d_fimg;
      de1s = d_fspc;
      de2s = d_fspc;
    } else {
      de1i = d_fimg;
      de2s = d_fimg;
      de1s = d_fspc;
      de2i = d_fspc;
    }

    const Tensor g_in_n2i = n2_img.backward(de2i, c.n2_img);
    const Tensor g_in_n2s = n2_spc.backward(de2s, c.n2_spc);
    n1_img.backward(de1i, c.n1_img);
    n1_spc.backward(de1s, c.n1_spc);

    // stem sees the speech component of every backbone input
    Tensor d_stem_out;
    if (cfg.topology == Topology::baseline1 || cfg.topology == Topology::baseline2) {
      d_stem_out = add(g_in_n2i, g_in_n2s);
    } else {
      d_stem_out = g_in_n2s;
    }
    layer_backward(stem, d_stem_out, c.stem);
  }

  void zero_grads() {
    dncshap::zero_grads(stem);
    for (Sequential* s : {&n1_img, &n1_spc, &n2_img, &n2_spc, &head_sp, &head_img, &head_mul}) s->zero_grads();
    std::fill(g_fusion_w.data.begin(), g_fusion_w.data.end(), 0.0);
  }

  std::vector<ParamRef> params() {
    std::vector<ParamRef> out;
    dncshap::collect_params(stem, out);
    for (Sequential* s : {&n1_img, &n1_spc, &n2_img, &n2_spc, &head_sp, &head_img, &head_mul}) {
      s->collect_params(out);
    }
    out.push_back({&fusion_w, &g_fusion_w});
    return out;
  }

  void accumulate_bn_stats(const NetCache& c) {
    n1_img.accumulate_bn_stats(c.n1_img);
    n1_spc.accumulate_bn_stats(c.n1_spc);
    n2_img.accumulate_bn_stats(c.n2_img);
    n2_spc.accumulate_bn_stats(c.n2_spc);
  }

  void apply_bn_updates(double momentum = 0.1) {
    for (Sequential* s : {&n1_img, &n1_spc, &n2_img, &n2_spc}) s->apply_bn_updates(momentum);
  }

  // Canonical layer order used by the checkpoint format.
  std::vector<Layer*> all_layers() {
    std::vector<Layer*> out;
    out.push_back(&stem);
    for (Sequential* s : {&n1_img, &n1_spc, &n2_img, &n2_spc, &head_sp, &head_img, &head_mul}) {
      for (Layer& l : s->layers) out.push_back(&l);
    }
    return out;
  }
  std::vector<const Layer*> all_layers() const {
    std::vector<const Layer*> out;
    out.push_back(&stem);
    for (const Sequential* s : {&n1_img, &n1_spc, &n2_img, &n2_spc, &head_sp, &head_img, &head_mul}) {
      for (const Layer& l : s->layers) out.push_back(&l);
    }
    return out;
  }
};

namespace detail {

// Two same-padded convs + relu per block, then pool; batchnorm, flatten into
// a dense embedding. The plain "N1" stack.
inline Sequential make_plain_stack(const std::string& prefix, int input_size, int in_channels,
                                   const std::array<int, 3>& filters, int embed, Rng& rng) {
  Sequential s;
  int ch = in_channels;
  for (int b = 0; b < 3; ++b) {
    const int f = filters[static_cast<std::size_t>(b)];
    const std::string bs = std::to_string(b + 1);
    s.layers.push_back(make_conv2d(prefix + ".conv" + bs + "a", ch, f, 3, true, rng));
    s.layers.push_back(make_relu(prefix + ".relu" + bs + "a"));
    s.layers.push_back(make_conv2d(prefix + ".conv" + bs + "b", f, f, 3, true, rng));
    s.layers.push_back(make_relu(prefix + ".relu" + bs + "b"));
    s.layers.push_back(make_maxpool2d(prefix + ".pool" + bs, 2));
    ch = f;
  }
  s.layers.push_back(make_batchnorm(prefix + ".bn", ch));
  const int spatial = input_size / 8;
  s.layers.push_back(make_dense(prefix + ".embed", spatial * spatial * ch, embed, rng));
  s.layers.push_back(make_relu(prefix + ".relu_embed"));
  return s;
}

// Single conv + relu + pool per block. Stands in for the pretrained "N2"
// backbone at the same shape contract.
inline Sequential make_backbone_stack(const std::string& prefix, int input_size, int in_channels,
                                      const std::array<int, 3>& filters, int embed, Rng& rng) {
  Sequential s;
  int ch = in_channels;
  for (int b = 0; b < 3; ++b) {
    const int f = filters[static_cast<std::size_t>(b)];
    const std::string bs = std::to_string(b + 1);
    s.layers.push_back(make_conv2d(prefix + ".conv" + bs, ch, f, 3, true, rng));
    s.layers.push_back(make_relu(prefix + ".relu" + bs));
    s.layers.push_back(make_maxpool2d(prefix + ".pool" + bs, 2));
    ch = f;
  }
  s.layers.push_back(make_batchnorm(prefix + ".bn", ch));
  const int spatial = input_size / 8;
  s.layers.push_back(make_dense(prefix + ".embed", spatial * spatial * ch, embed, rng));
  s.layers.push_back(make_relu(prefix + ".relu_embed"));
  return s;
}

inline Sequential make_head(const std::string& prefix, int embed, int head, int classes, Rng& rng) {
  Sequential s;
  s.layers.push_back(make_dense(prefix + ".fc1", embed, head, rng));
  s.layers.push_back(make_relu(prefix + ".relu1"));
  s.layers.push_back(make_dense(prefix + ".fc2", head, head, rng));
  s.layers.push_back(make_relu(prefix + ".relu2"));
  s.layers.push_back(make_dense(prefix + ".logits", head, classes, rng));
  return s;
}

}  // namespace detail

// Builds a seeded network. Construction order is fixed so a seed pins every
// weight.
inline ParallelNetMini build_parallel_net(const FusionConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  ParallelNetMini net;
  net.cfg = cfg;
  net.stem = make_conv2d("stem", 1, 3, 1, true, rng);
  net.n1_img = detail::make_plain_stack("n1_img", cfg.input_size, 3, cfg.n1_filters, cfg.embed_width, rng);
  net.n1_spc = detail::make_plain_stack("n1_spc", cfg.input_size, 1, cfg.n1_filters, cfg.embed_width, rng);
  net.n2_img = detail::make_backbone_stack("n2_img", cfg.input_size, 3, cfg.n2_filters, cfg.embed_width, rng);
  net.n2_spc = detail::make_backbone_stack("n2_spc", cfg.input_size, 3, cfg.n2_filters, cfg.embed_width, rng);
  net.head_sp = detail::make_head("head_sp", cfg.embed_width, cfg.head_width, cfg.num_classes, rng);
  net.head_img = detail::make_head("head_img", cfg.embed_width, cfg.head_width, cfg.num_classes, rng);
  net.head_mul = detail::make_head("head_mul", cfg.embed_width, cfg.head_width, cfg.num_classes, rng);
  for (double& v : net.fusion_w.data) v = rng.uniform(-0.5, 0.5);
  return net;
}

}  // namespace dncshap
