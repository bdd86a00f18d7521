#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dncshap/error.hpp"
#include "dncshap/tensor.hpp"

namespace dncshap {

namespace detail {

// PNM token reader: skips whitespace and '#' comments.
inline std::string pnm_token(std::istream& in, const std::string& path) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (!std::isspace(c)) {
      tok.push_back(static_cast<char>(c));
      while ((c = in.peek()) != EOF && !std::isspace(c)) {
        tok.push_back(static_cast<char>(in.get()));
      }
      return tok;
    }
  }
  throw FormatError(path + ": truncated PNM header");
}

inline int pnm_int(std::istream& in, const std::string& path) {
  const std::string tok = pnm_token(in, path);
  try {
    return std::stoi(tok);
  } catch (const std::exception&) {
    throw FormatError(path + ": bad PNM header token '" + tok + "'");
  }
}

}  // namespace detail

// Binary PPM (P6) or PGM (P5), 8-bit, values scaled to [0,1].
// PPM yields (h,w,3), PGM yields (h,w,1).
inline Tensor read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open");
  const std::string magic = detail::pnm_token(in, path);
  int channels;
  if (magic == "P6") {
    channels = 3;
  } else if (magic == "P5") {
    channels = 1;
  } else {
    throw FormatError(path + ": unsupported PNM magic '" + magic + "' (need binary P5/P6)");
  }
  const int w = detail::pnm_int(in, path);
  const int h = detail::pnm_int(in, path);
  const int maxval = detail::pnm_int(in, path);
  if (w <= 0 || h <= 0) throw FormatError(path + ": non-positive PNM dimensions");
  if (maxval != 255) throw FormatError(path + ": only maxval 255 is supported");
  in.get();  // single whitespace byte after maxval
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * channels);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw FormatError(path + ": truncated PNM pixel data");
  Tensor t({h, w, channels});
  for (std::size_t i = 0; i < raw.size(); ++i) t.data[i] = raw[i] / 255.0;
  return t;
}

inline void write_pgm(const std::string& path, int width, int height, const std::vector<std::uint8_t>& pixels) {
  if (static_cast<std::size_t>(width) * height != pixels.size()) {
    throw ShapeError("write_pgm: pixel count does not match dimensions");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path + ": cannot open for writing");
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!out) throw FormatError(path + ": write failed");
}

inline void write_ppm(const std::string& path, const Tensor& image) {
  if (image.ndim() != 3 || image.dim(2) != 3) throw ShapeError("write_ppm: expected (h,w,3) tensor");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path + ": cannot open for writing");
  out << "P6\n" << image.dim(1) << " " << image.dim(0) << "\n255\n";
  std::vector<unsigned char> raw(image.data.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    double v = image.data[i];
    v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    raw[i] = static_cast<unsigned char>(v * 255.0 + 0.5);
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw FormatError(path + ": write failed");
}

// Rank-2 tensor as comma-separated rows. %.17g keeps doubles round-trippable.
inline void write_matrix_csv(const std::string& path, const Tensor& m) {
  if (m.ndim() != 2) throw ShapeError("write_matrix_csv: expected rank-2 tensor, got " + m.shape_str());
  std::ofstream out(path);
  if (!out) throw FormatError(path + ": cannot open for writing");
  char buf[40];
  for (int r = 0; r < m.dim(0); ++r) {
    for (int c = 0; c < m.dim(1); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", m.at2(r, c));
      if (c) out << ',';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw FormatError(path + ": write failed");
}

inline Tensor read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open");
  std::vector<double> values;
  int cols = -1, rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    int n = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw FormatError(path + ": bad CSV value '" + cell + "' at row " + std::to_string(rows));
      }
      ++n;
    }
    if (cols < 0) {
      cols = n;
    } else if (n != cols) {
      throw FormatError(path + ": ragged CSV (row " + std::to_string(rows) + " has " + std::to_string(n) +
                        " columns, expected " + std::to_string(cols) + ")");
    }
    ++rows;
  }
  if (rows == 0) throw FormatError(path + ": empty CSV matrix");
  return Tensor({rows, cols}, std::move(values));
}

}  // namespace dncshap
