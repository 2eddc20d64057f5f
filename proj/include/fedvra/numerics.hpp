#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedvra {

// Flat parameter vector; the common currency for global models, client
// models and duals.
using Vec = Eigen::VectorXd;

inline void check_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) {
    throw std::runtime_error(std::string("non-finite entries in ") + what);
  }
}

// Axis-aligned box, coordinatewise bounds.
struct BoxSet {
  Vec lower;
  Vec upper;

  static BoxSet uniform(Eigen::Index dim, double lo, double hi) {
    if (lo > hi) throw std::invalid_argument("BoxSet: lower > upper");
    BoxSet b;
    b.lower = Vec::Constant(dim, lo);
    b.upper = Vec::Constant(dim, hi);
    return b;
  }
  static BoxSet unbounded(Eigen::Index dim) {
    return uniform(dim, -std::numeric_limits<double>::infinity(),
                   std::numeric_limits<double>::infinity());
  }

  bool contains(const Vec& v, double tol = 0.0) const {
    return v.size() == lower.size() && (v.array() >= lower.array() - tol).all() &&
           (v.array() <= upper.array() + tol).all();
  }
};

// Product of block_count probability simplices of size block_size each.
struct SimplexProductSet {
  int block_size = 1;
  int block_count = 1;

  Eigen::Index dim() const {
    return static_cast<Eigen::Index>(block_size) * block_count;
  }
  bool contains(const Vec& v, double tol = 1e-12) const {
    if (v.size() != dim()) return false;
    for (int b = 0; b < block_count; ++b) {
      auto blk = v.segment(static_cast<Eigen::Index>(b) * block_size, block_size);
      if ((blk.array() < -tol).any()) return false;
      if (std::abs(blk.sum() - 1.0) > tol * block_size + 1e-12) return false;
    }
    return true;
  }
};

inline Vec lincomb(std::span<const double> coeffs, std::span<const Vec> vectors) {
  if (coeffs.empty() || coeffs.size() != vectors.size()) {
    throw std::invalid_argument("lincomb: need equally many coefficients and vectors, at least one");
  }
  const Eigen::Index d = vectors[0].size();
  Vec out = Vec::Zero(d);
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    if (vectors[k].size() != d) throw std::invalid_argument("lincomb: dimension mismatch");
    out += coeffs[k] * vectors[k];
  }
  check_finite(out, "lincomb result");
  return out;
}

inline double norm_sq(const Vec& v) { return v.squaredNorm(); }

inline Vec project_box(const Vec& v, const BoxSet& set) {
  if (v.size() != set.lower.size() || v.size() != set.upper.size()) {
    throw std::invalid_argument("project_box: dimension mismatch");
  }
  return v.cwiseMax(set.lower).cwiseMin(set.upper);
}

// Euclidean projection of a single block onto the probability simplex
// (sort-and-threshold, O(K log K)).
inline void project_simplex_inplace(Eigen::Ref<Vec> v) {
  const Eigen::Index K = v.size();
  std::vector<double> u(v.data(), v.data() + K);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cumsum = 0.0;
  double theta = 0.0;
  int support = 0;
  for (Eigen::Index j = 0; j < K; ++j) {
    cumsum += u[static_cast<std::size_t>(j)];
    const double t = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (u[static_cast<std::size_t>(j)] - t > 0.0) {
      theta = t;
      support = static_cast<int>(j) + 1;
    }
  }
  (void)support;
  v = (v.array() - theta).max(0.0);
}

inline Vec project_simplex_product(const Vec& v, const SimplexProductSet& set) {
  if (v.size() != set.dim()) {
    throw std::invalid_argument("project_simplex_product: dimension mismatch");
  }
  Vec out = v;
  for (int b = 0; b < set.block_count; ++b) {
    project_simplex_inplace(
        out.segment(static_cast<Eigen::Index>(b) * set.block_size, set.block_size));
  }
  check_finite(out, "project_simplex_product result");
  return out;
}

}  // namespace fedvra
