#pragma once

#include <cstdint>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace fedvra {

// splitmix64 finalizer; avalanches a 64-bit word.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stream-seed scheme used everywhere: client i at round r draws from
// stream_seed(master, r, i); server-side sampling at round r uses id = N + 1.
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t round, std::uint64_t id) {
  return mix64(mix64(master ^ 0x5851f42d4c957f2dULL) ^ mix64(round) ^ mix64(~id));
}

// Deterministic random stream. The generator is std::mt19937_64; every draw
// helper below is defined on its raw 64-bit output so that two code paths
// sharing a stream consume identical sequences.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  static RngStream client(std::uint64_t master, std::uint64_t round, int client_id) {
    return RngStream(stream_seed(master, round, static_cast<std::uint64_t>(client_id)));
  }
  static RngStream server(std::uint64_t master, std::uint64_t round, int num_clients) {
    return RngStream(stream_seed(master, round, static_cast<std::uint64_t>(num_clients) + 1));
  }

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return gen_(); }

  // uniform on [0,1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal, Box-Muller with a cached spare
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // uniform index in [0, n); fixed-point multiply keeps the bias below 2^-64*n
  std::size_t index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("RngStream::index: n must be positive");
    using u128 = unsigned __int128;
    return static_cast<std::size_t>((static_cast<u128>(gen_()) * n) >> 64);
  }

  // uniform integer in [lo, hi] inclusive
  int int_range(int lo, int hi) {
    if (lo > hi) throw std::invalid_argument("RngStream::int_range: lo > hi");
    return lo + static_cast<int>(index(static_cast<std::size_t>(hi - lo) + 1));
  }

  // Marsaglia-Tsang gamma variate, shape alpha > 0, unit scale
  double gamma(double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("RngStream::gamma: alpha must be positive");
    if (alpha < 1.0) {
      const double u = std::max(uniform(), 1e-300);
      return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
    }
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = gaussian();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// S i.i.d.-with-replacement indices into [0, n). Single point through which
// every mini-batch in the engine and in the direct baseline implementations
// draws, so dual-path comparisons see identical batches.
inline std::vector<int> draw_batch(RngStream& rng, std::size_t n, int S) {
  std::vector<int> idx(static_cast<std::size_t>(S));
  for (auto& j : idx) j = static_cast<int>(rng.index(n));
  return idx;
}

}  // namespace fedvra
