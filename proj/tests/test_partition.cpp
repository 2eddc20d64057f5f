#include <catch2/catch_amalgamated.hpp>

#include <numeric>

#include "fedvra/partition.hpp"

using namespace fedvra;

namespace {

Shard balanced_dataset(int n, int classes, std::uint64_t seed) {
  RngStream rng(seed);
  Shard s;
  s.num_classes = classes;
  s.features.resize(n, 2);
  s.labels.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    s.labels[static_cast<std::size_t>(j)] = j % classes;
    s.features(j, 0) = rng.gaussian();
    s.features(j, 1) = rng.gaussian();
  }
  return s;
}

// median over clients of the local mass held by the two largest classes
double median_top2_mass(const std::vector<Shard>& shards, int classes) {
  std::vector<double> top2;
  for (const auto& s : shards) {
    std::vector<int> hist(static_cast<std::size_t>(classes), 0);
    for (int y : s.labels) ++hist[static_cast<std::size_t>(y)];
    std::sort(hist.begin(), hist.end(), std::greater<int>());
    top2.push_back(static_cast<double>(hist[0] + hist[1]) / s.n());
  }
  std::sort(top2.begin(), top2.end());
  return top2[top2.size() / 2];
}

std::multiset<double> feature_multiset(const std::vector<Shard>& shards) {
  std::multiset<double> out;
  for (const auto& s : shards)
    for (int j = 0; j < s.n(); ++j) out.insert(s.features(j, 0));
  return out;
}

}  // namespace

TEST_CASE("partition is an exact set partition and deterministic") {
  const auto data = balanced_dataset(500, 5, 1);
  PartitionSpec spec;
  spec.mode = PartitionSpec::Mode::dirichlet;
  spec.alpha = 0.5;
  spec.N = 8;
  spec.seed = 99;

  const auto shards = partition(data, spec);
  REQUIRE(shards.size() == 8);
  int total = 0;
  for (const auto& s : shards) {
    REQUIRE(s.n() >= 1);
    total += s.n();
  }
  REQUIRE(total == 500);
  REQUIRE(feature_multiset(shards) == feature_multiset({data}));

  const auto again = partition(data, spec);
  for (std::size_t i = 0; i < shards.size(); ++i) {
    REQUIRE(shards[i].features == again[i].features);
    REQUIRE(shards[i].labels == again[i].labels);
  }
}

TEST_CASE("N = 1 returns the whole dataset") {
  const auto data = balanced_dataset(40, 4, 2);
  PartitionSpec spec;
  spec.N = 1;
  const auto shards = partition(data, spec);
  REQUIRE(shards.size() == 1);
  REQUIRE(shards[0].n() == 40);
}

TEST_CASE("large alpha approaches the global class histogram") {
  const auto data = balanced_dataset(10000, 10, 3);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    PartitionSpec spec;
    spec.mode = PartitionSpec::Mode::dirichlet;
    spec.alpha = 1000.0;
    spec.N = 10;
    spec.seed = seed;
    const auto shards = partition(data, spec);
    for (const auto& s : shards) {
      std::vector<int> hist(10, 0);
      for (int y : s.labels) ++hist[static_cast<std::size_t>(y)];
      for (int c = 0; c < 10; ++c) {
        const double frac = static_cast<double>(hist[static_cast<std::size_t>(c)]) / s.n();
        REQUIRE(frac == Catch::Approx(0.1).epsilon(0.10));
      }
    }
  }
}

TEST_CASE("alpha = 0.2 concentrates shards on a couple of classes") {
  const auto data = balanced_dataset(10000, 10, 4);
  std::vector<double> low_alpha, high_alpha;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    PartitionSpec spec;
    spec.mode = PartitionSpec::Mode::dirichlet;
    spec.N = 100;
    spec.seed = seed;
    spec.alpha = 0.2;
    low_alpha.push_back(median_top2_mass(partition(data, spec), 10));
    spec.alpha = 10.0;
    high_alpha.push_back(median_top2_mass(partition(data, spec), 10));
  }
  std::sort(low_alpha.begin(), low_alpha.end());
  REQUIRE(low_alpha[low_alpha.size() / 2] >= 0.75);  // median over the seeds
  for (std::size_t i = 0; i < low_alpha.size(); ++i) {
    REQUIRE(low_alpha[i] > high_alpha[i]);
  }
}

TEST_CASE("synthetic quadratic family geometry") {
  const auto homo = synth_quadratic_family(6, 4, 0.0, 5);
  const auto* q0 = dynamic_cast<const detail::QuadraticObjective*>(homo[0].get());
  for (const auto& obj : homo) {
    const auto* q = dynamic_cast<const detail::QuadraticObjective*>(obj.get());
    REQUIRE((q->center() - q0->center()).norm() == 0.0);
  }

  const double het = 5.0;
  const auto fam = synth_quadratic_family(9, 4, het, 6);
  Vec mean_center = Vec::Zero(4);
  double dissim = 0.0;
  for (const auto& obj : fam) {
    const auto* q = dynamic_cast<const detail::QuadraticObjective*>(obj.get());
    mean_center += q->center() / 9.0;
  }
  for (const auto& obj : fam) {
    dissim += obj->full_grad(mean_center).squaredNorm() / 9.0;
  }
  // weighted mean of the centers is the global minimizer; dissimilarity at
  // it equals heterogeneity^2 by construction
  Vec grad_sum = Vec::Zero(4);
  for (const auto& obj : fam) grad_sum += obj->full_grad(mean_center);
  REQUIRE(grad_sum.norm() <= 1e-10);
  REQUIRE(dissim == Catch::Approx(het * het).margin(1e-8));
}

TEST_CASE("hlu_schedule modes") {
  HluSpec fixed;
  fixed.mode = HluSpec::Mode::fixed;
  fixed.fixed_value = 2;
  const auto table = hlu_schedule(7, 5, fixed, 1);
  for (const auto& row : table)
    for (int q : row) REQUIRE(q == 2);

  HluSpec range;
  range.mode = HluSpec::Mode::uniform_range;
  range.lo = 1;
  range.hi = 5;
  const auto t1 = hlu_schedule(100, 100, range, 42);
  const auto t2 = hlu_schedule(100, 100, range, 42);
  REQUIRE(t1 == t2);
  double mean = 0.0;
  for (const auto& row : t1)
    for (int q : row) {
      REQUIRE(q >= 1);
      REQUIRE(q <= 5);
      mean += q;
    }
  mean /= 100.0 * 100.0;
  REQUIRE(mean >= 2.8);
  REQUIRE(mean <= 3.2);

  HluSpec bad;
  bad.mode = HluSpec::Mode::uniform_range;
  bad.lo = 4;
  bad.hi = 2;
  REQUIRE_THROWS_AS(hlu_schedule(3, 3, bad, 0), std::invalid_argument);
}

TEST_CASE("client weights") {
  const auto data = balanced_dataset(100, 4, 8);
  PartitionSpec spec;
  spec.N = 4;
  spec.seed = 3;
  const auto shards = partition(data, spec);
  const auto w = data_weights(shards);
  REQUIRE(std::accumulate(w.begin(), w.end(), 0.0) == Catch::Approx(1.0).margin(1e-12));
  for (std::size_t i = 0; i < w.size(); ++i) {
    REQUIRE(w[i] == Catch::Approx(shards[i].n() / 100.0));
  }
}
