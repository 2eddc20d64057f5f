#include <catch2/catch_amalgamated.hpp>

#include "fedvra/numerics.hpp"
#include "fedvra/rng.hpp"

using namespace fedvra;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// Exhaustive active-set oracle for the simplex projection: tries every
// nonempty support, solves the equality-constrained problem on it and keeps
// the feasible candidate closest to v.
Vec simplex_oracle(const Vec& v) {
  const int K = static_cast<int>(v.size());
  Vec best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < (1u << K); ++mask) {
    double sum = 0.0;
    int count = 0;
    for (int j = 0; j < K; ++j) {
      if (mask & (1u << j)) {
        sum += v(j);
        ++count;
      }
    }
    const double theta = (sum - 1.0) / count;
    Vec cand = Vec::Zero(K);
    bool feasible = true;
    for (int j = 0; j < K; ++j) {
      if (mask & (1u << j)) {
        cand(j) = v(j) - theta;
        if (cand(j) < -1e-12) feasible = false;
      }
    }
    if (!feasible) continue;
    const double dist = (cand - v).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = cand;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("lincomb basics") {
  const Vec v = vec({1.0, -2.0, 3.0});
  const std::vector<Vec> single{v};
  const std::vector<double> one{1.0};
  REQUIRE(lincomb(one, single).isApprox(v));

  const std::vector<Vec> twice{v, v};
  const std::vector<double> cancel{1.0, -1.0};
  REQUIRE(lincomb(cancel, twice).norm() == 0.0);

  const std::vector<Vec> pair{vec({2.0, 0.0}), vec({0.0, 2.0})};
  const std::vector<double> half{0.5, 0.5};
  REQUIRE(lincomb(half, pair).isApprox(vec({1.0, 1.0})));

  const std::vector<Vec> mismatched{vec({1.0}), vec({1.0, 2.0})};
  REQUIRE_THROWS_AS(lincomb(cancel, mismatched), std::invalid_argument);
  REQUIRE_THROWS_AS(lincomb(std::vector<double>{}, std::vector<Vec>{}), std::invalid_argument);
}

TEST_CASE("norm_sq basics") {
  REQUIRE(norm_sq(Vec::Zero(4)) == 0.0);
  REQUIRE(norm_sq(vec({3.0, 4.0})) == 25.0);
  Vec e = Vec::Zero(7);
  e(3) = 1.0;
  REQUIRE(norm_sq(e) == 1.0);
}

TEST_CASE("project_box clamps coordinatewise") {
  const auto box = BoxSet::uniform(2, -1.0, 1.0);
  REQUIRE(project_box(vec({0.3, -0.7}), box).isApprox(vec({0.3, -0.7})));
  REQUIRE(project_box(vec({2.0, -3.0}), box).isApprox(vec({1.0, -1.0})));
  REQUIRE(project_box(vec({1.0, -1.0}), box).isApprox(vec({1.0, -1.0})));
  REQUIRE_THROWS_AS(project_box(vec({1.0}), box), std::invalid_argument);
}

TEST_CASE("project_simplex_product hand cases") {
  const SimplexProductSet set{2, 1};
  REQUIRE(project_simplex_product(vec({0.5, 0.5}), set).isApprox(vec({0.5, 0.5})));
  REQUIRE(project_simplex_product(vec({2.0, 0.0}), set).isApprox(vec({1.0, 0.0})));
  REQUIRE(project_simplex_product(vec({1.0, 1.0}), set).isApprox(vec({0.5, 0.5})));
  REQUIRE_THROWS_AS(project_simplex_product(vec({1.0}), set), std::invalid_argument);
}

TEST_CASE("projections are idempotent and nonexpansive") {
  RngStream rng(12345);
  for (int trial = 0; trial < 200; ++trial) {
    const int K = 2 + trial % 3;
    const int blocks = 1 + trial % 4;
    const SimplexProductSet set{K, blocks};
    Vec u(set.dim()), v(set.dim());
    for (Eigen::Index t = 0; t < u.size(); ++t) {
      u(t) = 4.0 * rng.gaussian();
      v(t) = 4.0 * rng.gaussian();
    }
    const Vec pu = project_simplex_product(u, set);
    const Vec pv = project_simplex_product(v, set);
    REQUIRE(set.contains(pu));
    REQUIRE((project_simplex_product(pu, set) - pu).lpNorm<Eigen::Infinity>() <= 1e-14);
    REQUIRE((pu - pv).norm() <= (u - v).norm() + 1e-12);

    const auto box = BoxSet::uniform(u.size(), -1.5, 2.0);
    const Vec bu = project_box(u, box);
    const Vec bv = project_box(v, box);
    REQUIRE(box.contains(bu));
    REQUIRE((project_box(bu, box) - bu).lpNorm<Eigen::Infinity>() <= 1e-14);
    REQUIRE((bu - bv).norm() <= (u - v).norm() + 1e-12);
  }
}

TEST_CASE("simplex projection agrees with the active-set oracle") {
  RngStream rng(777);
  for (int trial = 0; trial < 300; ++trial) {
    const int K = 2 + trial % 3;  // K <= 4
    Vec v(K);
    for (int t = 0; t < K; ++t) v(t) = 5.0 * rng.gaussian();
    const Vec got = project_simplex_product(v, SimplexProductSet{K, 1});
    const Vec want = simplex_oracle(v);
    REQUIRE((got - want).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
}
