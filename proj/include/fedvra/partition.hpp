#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "fedvra/objectives.hpp"
#include "fedvra/rng.hpp"

namespace fedvra {

struct PartitionSpec {
  enum class Mode { iid, dirichlet };
  Mode mode = Mode::iid;
  double alpha = 0.2;  // dirichlet concentration
  int N = 1;
  std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<std::vector<int>> assign_indices(const Shard& dataset,
                                                    const PartitionSpec& spec,
                                                    RngStream& rng) {
  std::vector<std::vector<int>> owners(static_cast<std::size_t>(spec.N));
  if (spec.mode == PartitionSpec::Mode::iid) {
    for (int j = 0; j < dataset.n(); ++j) {
      owners[rng.index(static_cast<std::size_t>(spec.N))].push_back(j);
    }
    return owners;
  }
  // Non-IID: per class, client shares drawn from Dirichlet(alpha * 1_N);
  // the class's samples are split into contiguous runs sized by the shares
  // (the split-by-proportions scheme of the heterogeneous-partition method
  // the protocol follows).
  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(dataset.num_classes));
  for (int j = 0; j < dataset.n(); ++j) {
    by_class[static_cast<std::size_t>(dataset.labels[static_cast<std::size_t>(j)])].push_back(j);
  }
  for (const auto& members : by_class) {
    std::vector<double> share(static_cast<std::size_t>(spec.N));
    double sum = 0.0;
    do {
      sum = 0.0;
      for (int i = 0; i < spec.N; ++i) {
        const double g = rng.gamma(spec.alpha);
        share[static_cast<std::size_t>(i)] = g;
        sum += g;
      }
    } while (!(sum > 0.0));
    const auto nc = static_cast<double>(members.size());
    double cum = 0.0;
    std::size_t start = 0;
    for (int i = 0; i < spec.N; ++i) {
      cum += share[static_cast<std::size_t>(i)] / sum;
      const std::size_t stop =
          i + 1 == spec.N ? members.size()
                          : std::min<std::size_t>(members.size(),
                                                  static_cast<std::size_t>(std::lround(cum * nc)));
      for (std::size_t t = start; t < stop; ++t) {
        owners[static_cast<std::size_t>(i)].push_back(members[t]);
      }
      start = std::max(start, stop);
    }
  }
  return owners;
}

}  // namespace detail

// Split a labeled dataset into N disjoint shards covering it exactly.
// Redraws the whole assignment until no shard is empty (bounded retries).
inline std::vector<Shard> partition(const Shard& dataset, const PartitionSpec& spec) {
  dataset.validate();
  if (spec.N < 1) throw std::invalid_argument("partition: N must be >= 1");
  if (spec.mode == PartitionSpec::Mode::dirichlet) {
    if (!dataset.labeled()) throw std::invalid_argument("partition: dirichlet mode needs labels");
    if (!(spec.alpha > 0.0)) throw std::invalid_argument("partition: alpha must be positive");
  }
  if (dataset.n() < spec.N)
    throw std::invalid_argument("partition: fewer samples than clients");

  RngStream rng(stream_seed(spec.seed, 0, 0x706172ULL));
  std::vector<std::vector<int>> owners;
  bool ok = false;
  for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
    owners = detail::assign_indices(dataset, spec, rng);
    ok = std::none_of(owners.begin(), owners.end(),
                      [](const std::vector<int>& v) { return v.empty(); });
  }
  if (!ok) throw std::runtime_error("partition: retry budget exhausted, a shard stayed empty");

  std::vector<Shard> shards;
  shards.reserve(static_cast<std::size_t>(spec.N));
  for (auto& idx : owners) {
    std::sort(idx.begin(), idx.end());
    Shard s;
    s.features.resize(static_cast<Eigen::Index>(idx.size()), dataset.feature_dim());
    s.num_classes = dataset.num_classes;
    for (std::size_t r = 0; r < idx.size(); ++r) {
      s.features.row(static_cast<Eigen::Index>(r)) = dataset.features.row(idx[r]);
      if (dataset.labeled()) s.labels.push_back(dataset.labels[static_cast<std::size_t>(idx[r])]);
    }
    shards.push_back(std::move(s));
  }
  return shards;
}

// Controllable-heterogeneity testbed: client i minimizes
// 1/2 ||x - c_i||^2 with c_i = c_bar + heterogeneity * u_i. The u_i are
// mean-centered (uniform weights), so the global minimizer stays c_bar, and
// scaled to unit mean-square norm, so
// (1/N) sum ||grad f_i(c_bar)||^2 = heterogeneity^2 exactly.
inline std::vector<ObjectivePtr> synth_quadratic_family(int N, int d,
                                                                      double heterogeneity,
                                                                      std::uint64_t seed) {
  if (N < 1 || d < 1) throw std::invalid_argument("synth_quadratic_family: N, d must be >= 1");
  if (heterogeneity < 0.0)
    throw std::invalid_argument("synth_quadratic_family: heterogeneity must be >= 0");
  RngStream rng(stream_seed(seed, 0, 0x71756164ULL));
  Vec c_bar(d);
  for (int t = 0; t < d; ++t) c_bar(t) = rng.gaussian();

  std::vector<Vec> u(static_cast<std::size_t>(N), Vec::Zero(d));
  if (heterogeneity > 0.0 && N > 1) {
    Vec mean = Vec::Zero(d);
    for (auto& ui : u) {
      for (int t = 0; t < d; ++t) ui(t) = rng.gaussian();
      mean += ui;
    }
    mean /= static_cast<double>(N);
    double msq = 0.0;
    for (auto& ui : u) {
      ui -= mean;
      msq += ui.squaredNorm();
    }
    const double scale = std::sqrt(static_cast<double>(N) / msq);
    for (auto& ui : u) ui *= scale;
  }

  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(d, d);
  std::vector<ObjectivePtr> out;
  out.reserve(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) {
    out.push_back(make_quadratic(A, c_bar + heterogeneity * u[static_cast<std::size_t>(i)]));
  }
  return out;
}

struct HluSpec {
  enum class Mode { fixed, uniform_range };
  Mode mode = Mode::fixed;
  int fixed_value = 2;
  int lo = 1, hi = 5;
};

// R x N table of per-round step counts (deterministic in the seed).
inline std::vector<std::vector<int>> hlu_schedule(int N, int R, const HluSpec& spec,
                                                  std::uint64_t seed) {
  if (spec.mode == HluSpec::Mode::fixed) {
    if (spec.fixed_value < 1) throw std::invalid_argument("hlu_schedule: fixed value must be >= 1");
  } else {
    if (spec.lo < 1) throw std::invalid_argument("hlu_schedule: lo must be >= 1");
    if (spec.lo > spec.hi) throw std::invalid_argument("hlu_schedule: lo > hi");
  }
  RngStream rng(stream_seed(seed, 0, 0x686c75ULL));
  std::vector<std::vector<int>> table(static_cast<std::size_t>(R),
                                      std::vector<int>(static_cast<std::size_t>(N)));
  for (auto& row : table) {
    for (auto& q : row) {
      q = spec.mode == HluSpec::Mode::fixed ? spec.fixed_value : rng.int_range(spec.lo, spec.hi);
    }
  }
  return table;
}

// Data-proportional client weights, renormalized to sum to 1.
inline std::vector<double> data_weights(const std::vector<Shard>& shards) {
  double total = 0.0;
  for (const auto& s : shards) total += s.n();
  std::vector<double> w;
  w.reserve(shards.size());
  for (const auto& s : shards) w.push_back(s.n() / total);
  return w;
}

inline std::vector<double> uniform_weights(int N) {
  return std::vector<double>(static_cast<std::size_t>(N), 1.0 / N);
}

// Synthetic classification data: `classes` gaussian blobs on a circle of
// radius `spread`, plus a constant bias feature appended as the last column.
inline Shard make_gaussian_blobs(int n, int classes, int dim, double spread,
                                 std::uint64_t seed, double noise = 0.5,
                                 bool bias_column = true) {
  if (dim < 2) throw std::invalid_argument("make_gaussian_blobs: dim must be >= 2");
  RngStream rng(stream_seed(seed, 0, 0x626c6f62ULL));
  Shard s;
  s.num_classes = classes;
  s.features.resize(n, dim + (bias_column ? 1 : 0));
  s.labels.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const int y = static_cast<int>(rng.index(static_cast<std::size_t>(classes)));
    const double angle = 2.0 * M_PI * y / classes;
    s.features(j, 0) = spread * std::cos(angle) + noise * rng.gaussian();
    s.features(j, 1) = spread * std::sin(angle) + noise * rng.gaussian();
    for (int t = 2; t < dim; ++t) s.features(j, t) = noise * rng.gaussian();
    if (bias_column) s.features(j, dim) = 1.0;
    s.labels[static_cast<std::size_t>(j)] = y;
  }
  return s;
}

}  // namespace fedvra
