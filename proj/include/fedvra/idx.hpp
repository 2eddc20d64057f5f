#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedvra/objectives.hpp"

namespace fedvra {

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw std::runtime_error("idx: truncated header while reading " + what);
  }
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

inline void write_be32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace detail

struct IdxNormalization {
  bool enabled = true;
  double mean = 0.1307;  // conventional values; documented in the README
  double std = 0.3081;
};

// Big-endian IDX pair (images magic 2051, labels magic 2049). Pixels are
// scaled to [0,1] and then mean/std normalized when enabled.
inline Shard load_idx(const std::string& images_path, const std::string& labels_path,
                      const IdxNormalization& norm = {}) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("idx: cannot open " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error("idx: cannot open " + labels_path);

  const std::uint32_t img_magic = detail::read_be32(img, "image magic");
  if (img_magic != 2051)
    throw std::runtime_error("idx: bad image magic " + std::to_string(img_magic));
  const std::uint32_t n = detail::read_be32(img, "image count");
  const std::uint32_t rows = detail::read_be32(img, "rows");
  const std::uint32_t cols = detail::read_be32(img, "cols");

  const std::uint32_t lab_magic = detail::read_be32(lab, "label magic");
  if (lab_magic != 2049)
    throw std::runtime_error("idx: bad label magic " + std::to_string(lab_magic));
  const std::uint32_t n_lab = detail::read_be32(lab, "label count");
  if (n != n_lab) {
    throw std::runtime_error("idx: image/label count mismatch (" + std::to_string(n) + " vs " +
                             std::to_string(n_lab) + ")");
  }

  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  std::vector<unsigned char> buf(pixels);
  Shard shard;
  shard.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(pixels));
  shard.labels.resize(n);
  int max_label = 0;
  for (std::uint32_t j = 0; j < n; ++j) {
    if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels))) {
      throw std::runtime_error("idx: truncated image data at sample " + std::to_string(j));
    }
    for (std::size_t t = 0; t < pixels; ++t) {
      double v = buf[t] / 255.0;
      if (norm.enabled) v = (v - norm.mean) / norm.std;
      shard.features(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(t)) = v;
    }
    char y = 0;
    if (!lab.read(&y, 1)) {
      throw std::runtime_error("idx: truncated label data at sample " + std::to_string(j));
    }
    shard.labels[j] = static_cast<unsigned char>(y);
    max_label = std::max(max_label, shard.labels[j]);
  }
  shard.num_classes = max_label + 1;
  return shard;
}

// Writers for fixtures and exported datasets (row-major pixel order).
inline void write_idx_images(const std::string& path, const std::vector<std::vector<unsigned char>>& images,
                             std::uint32_t rows, std::uint32_t cols) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("idx: cannot write " + path);
  detail::write_be32(out, 2051);
  detail::write_be32(out, static_cast<std::uint32_t>(images.size()));
  detail::write_be32(out, rows);
  detail::write_be32(out, cols);
  for (const auto& im : images) {
    if (im.size() != static_cast<std::size_t>(rows) * cols)
      throw std::invalid_argument("idx: image size mismatch");
    out.write(reinterpret_cast<const char*>(im.data()), static_cast<std::streamsize>(im.size()));
  }
}

inline void write_idx_labels(const std::string& path, const std::vector<unsigned char>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("idx: cannot write " + path);
  detail::write_be32(out, 2049);
  detail::write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
}

}  // namespace fedvra
