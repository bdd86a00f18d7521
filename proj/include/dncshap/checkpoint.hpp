#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "dncshap/error.hpp"
#include "dncshap/fusion.hpp"

namespace dncshap {

// Little-endian binary checkpoint:
//   magic "PNMINI1"
//   u32 topology, input_size, embed_width, head_width, num_classes
//   u32 n1_filters[3], n2_filters[3]
//   f32 fusion_w[3]
//   u32 layer_count
//   per layer (canonical order, see ParallelNetMini::all_layers):
//     u32 kind, u32 meta_count, u32 meta[], u32 tensor_count,
//     per tensor: u32 ndim, u32 dims[], f32 data[]
// Weights are stored as raw f32; a file loaded and saved again is
// byte-identical.

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

inline void put_f32(std::ostream& out, float f) {
  std::uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(out, v);
}

inline std::uint32_t get_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) throw FormatError(path + ": truncated checkpoint");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline float get_f32(std::istream& in, const std::string& path) {
  const std::uint32_t v = get_u32(in, path);
  float f;
  std::memcpy(&f, &v, 4);
  return f;
}

inline std::vector<std::uint32_t> layer_meta(const Layer& l) {
  switch (l.kind) {
    case LayerKind::conv2d:
      return {static_cast<std::uint32_t>(l.kernel), static_cast<std::uint32_t>(l.stride),
              static_cast<std::uint32_t>(l.filters), static_cast<std::uint32_t>(l.in_channels),
              l.same_pad ? 1u : 0u};
    case LayerKind::maxpool2d:
      return {static_cast<std::uint32_t>(l.pool), static_cast<std::uint32_t>(l.stride)};
    case LayerKind::dense:
      return {static_cast<std::uint32_t>(l.units), static_cast<std::uint32_t>(l.in_count)};
    case LayerKind::batchnorm:
      return {static_cast<std::uint32_t>(l.in_channels)};
    default:
      return {};
  }
}

inline std::vector<Tensor*> layer_tensors(Layer& l) {
  switch (l.kind) {
    case LayerKind::conv2d:
    case LayerKind::dense:
      return {&l.w, &l.b};
    case LayerKind::batchnorm:
      return {&l.gamma, &l.beta, &l.rmean, &l.rvar};
    default:
      return {};
  }
}

inline std::vector<const Tensor*> layer_tensors(const Layer& l) {
  switch (l.kind) {
    case LayerKind::conv2d:
    case LayerKind::dense:
      return {&l.w, &l.b};
    case LayerKind::batchnorm:
      return {&l.gamma, &l.beta, &l.rmean, &l.rvar};
    default:
      return {};
  }
}

}  // namespace detail

inline constexpr char kCheckpointMagic[] = "PNMINI1";

inline void save_checkpoint(const std::string& path, const ParallelNetMini& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path + ": cannot open for writing");
  out.write(kCheckpointMagic, 7);
  detail::put_u32(out, static_cast<std::uint32_t>(net.cfg.topology));
  detail::put_u32(out, static_cast<std::uint32_t>(net.cfg.input_size));
  detail::put_u32(out, static_cast<std::uint32_t>(net.cfg.embed_width));
  detail::put_u32(out, static_cast<std::uint32_t>(net.cfg.head_width));
  detail::put_u32(out, static_cast<std::uint32_t>(net.cfg.num_classes));
  for (int f : net.cfg.n1_filters) detail::put_u32(out, static_cast<std::uint32_t>(f));
  for (int f : net.cfg.n2_filters) detail::put_u32(out, static_cast<std::uint32_t>(f));
  for (double v : net.fusion_w.data) detail::put_f32(out, static_cast<float>(v));

  const auto layers = net.all_layers();
  detail::put_u32(out, static_cast<std::uint32_t>(layers.size()));
  for (const Layer* l : layers) {
    detail::put_u32(out, static_cast<std::uint32_t>(l->kind));
    const auto meta = detail::layer_meta(*l);
    detail::put_u32(out, static_cast<std::uint32_t>(meta.size()));
    for (std::uint32_t m : meta) detail::put_u32(out, m);
    const auto tensors = detail::layer_tensors(*l);
    detail::put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const Tensor* t : tensors) {
      detail::put_u32(out, static_cast<std::uint32_t>(t->shape.size()));
      for (int d : t->shape) detail::put_u32(out, static_cast<std::uint32_t>(d));
      for (double v : t->data) detail::put_f32(out, static_cast<float>(v));
    }
  }
  if (!out) throw FormatError(path + ": write failed");
}

inline ParallelNetMini load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open");
  char magic[7];
  in.read(magic, 7);
  if (in.gcount() != 7 || std::memcmp(magic, kCheckpointMagic, 7) != 0) {
    throw FormatError(path + ": not a PNMINI1 checkpoint");
  }
  FusionConfig cfg;
  const std::uint32_t topo = detail::get_u32(in, path);
  if (topo > 3) throw FormatError(path + ": unknown topology tag");
  cfg.topology = static_cast<Topology>(topo);
  cfg.input_size = static_cast<int>(detail::get_u32(in, path));
  cfg.embed_width = static_cast<int>(detail::get_u32(in, path));
  cfg.head_width = static_cast<int>(detail::get_u32(in, path));
  cfg.num_classes = static_cast<int>(detail::get_u32(in, path));
  for (int& f : cfg.n1_filters) f = static_cast<int>(detail::get_u32(in, path));
  for (int& f : cfg.n2_filters) f = static_cast<int>(detail::get_u32(in, path));
  float fw[3];
  for (float& v : fw) v = detail::get_f32(in, path);

  ParallelNetMini net = build_parallel_net(cfg);
  for (int k = 0; k < 3; ++k) net.fusion_w.data[static_cast<std::size_t>(k)] = fw[k];

  auto layers = net.all_layers();
  const std::uint32_t count = detail::get_u32(in, path);
  if (count != layers.size()) {
    throw FormatError(path + ": layer count " + std::to_string(count) + " does not match architecture (" +
                      std::to_string(layers.size()) + ")");
  }
  for (Layer* l : layers) {
    const std::uint32_t kind = detail::get_u32(in, path);
    if (kind != static_cast<std::uint32_t>(l->kind)) {
      throw FormatError(path + ": layer kind mismatch at '" + l->name + "'");
    }
    const auto expect_meta = detail::layer_meta(*l);
    const std::uint32_t meta_count = detail::get_u32(in, path);
    if (meta_count != expect_meta.size()) throw FormatError(path + ": layer meta mismatch at '" + l->name + "'");
    for (std::uint32_t expected : expect_meta) {
      if (detail::get_u32(in, path) != expected) {
        throw FormatError(path + ": layer parameter mismatch at '" + l->name + "'");
      }
    }
    const auto tensors = detail::layer_tensors(*l);
    const std::uint32_t tensor_count = detail::get_u32(in, path);
    if (tensor_count != tensors.size()) throw FormatError(path + ": tensor count mismatch at '" + l->name + "'");
    for (Tensor* t : tensors) {
      const std::uint32_t ndim = detail::get_u32(in, path);
      if (ndim != t->shape.size()) throw FormatError(path + ": tensor rank mismatch at '" + l->name + "'");
      for (int d : t->shape) {
        if (detail::get_u32(in, path) != static_cast<std::uint32_t>(d)) {
          throw FormatError(path + ": tensor shape mismatch at '" + l->name + "'");
        }
      }
      for (double& v : t->data) v = static_cast<double>(detail::get_f32(in, path));
    }
  }
  // trailing garbage means the file is not what it claims to be
  if (in.peek() != EOF) throw FormatError(path + ": trailing bytes after checkpoint payload");
  return net;
}

}  // namespace dncshap
