#include <catch2/catch_amalgamated.hpp>

#include "fedvra/fedvra_u.hpp"
#include "fedvra/partition.hpp"

using namespace fedvra;

namespace {

Shard blob_shard(int n, std::uint64_t seed) { return make_gaussian_blobs(n, 2, 2, 2.0, seed, 0.3, false); }

// z_j = P_simplex(-dists_j / rho) is the exact per-block minimizer of the
// regularized assignment subproblem; alternating it with weighted centroid
// means converges to a joint stationary point of the soft-clustering cost.
struct StationaryPoint {
  Vec x, y;
};

StationaryPoint construct_stationary(const Shard& shard, const BlockObjective& obj, int K,
                                     double rho) {
  const int n = shard.n();
  const int d = shard.feature_dim();
  Vec x(K * d);
  for (int k = 0; k < K; ++k) x.segment(k * d, d) = shard.features.row(k % n).transpose();
  Vec y = obj.initial_y();
  const SimplexProductSet set = obj.y_set();
  for (int it = 0; it < 2000; ++it) {
    for (int j = 0; j < n; ++j) {
      Vec score(K);
      for (int k = 0; k < K; ++k) {
        score(k) = -(shard.features.row(j).transpose() - x.segment(k * d, d)).squaredNorm() / rho;
      }
      y.segment(j * K, K) = project_simplex_product(score, SimplexProductSet{K, 1});
    }
    for (int k = 0; k < K; ++k) {
      Vec num = Vec::Zero(d);
      double den = 0.0;
      for (int j = 0; j < n; ++j) {
        num += y(j * K + k) * shard.features.row(j).transpose();
        den += y(j * K + k);
      }
      if (den > 1e-12) x.segment(k * d, d) = num / den;
    }
  }
  (void)set;
  return {x, y};
}

}  // namespace

TEST_CASE("y_local_steps: fixed points, feasibility, zero stepsize") {
  const auto shard = blob_shard(8, 3);
  const int K = 2;
  const double rho = 0.1;
  const auto obj = make_soft_clustering(shard, K, 10.0, rho);

  BlockClientState client;
  client.objective = obj;
  client.y = obj->initial_y();
  client.lambda = Vec::Zero(obj->dim_x());
  client.eta_y = 0.2;
  client.Q_y = 3;
  client.Q_hat = 4;

  RoundOptions opt;
  opt.S = 0;
  RngStream rng(5);
  detail::BatchSource batches(shard.n(), 0, BatchMode::iid);

  // feasible output, always
  Vec x0 = Vec::Zero(obj->dim_x());
  Vec y_new = y_local_steps(client, x0, opt, rng, batches);
  REQUIRE(obj->y_set().contains(y_new));

  // eta_y = 0 keeps y
  client.eta_y = 0.0;
  REQUIRE(y_local_steps(client, x0, opt, rng, batches) == client.y);
  client.eta_y = 0.2;

  // blockwise minimizer is a fixed point of step + projection
  const auto sp = construct_stationary(shard, *obj, K, rho);
  client.y = sp.y;
  y_new = y_local_steps(client, sp.x, opt, rng, batches);
  REQUIRE((y_new - sp.y).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("x_local_steps hand trajectory on a one-sample instance") {
  Shard s;
  s.features.resize(1, 2);
  s.features << 1.0, 0.0;
  const auto obj = make_soft_clustering(s, 1, 10.0, 0.1);

  BlockClientState client;
  client.objective = obj;
  client.y = obj->initial_y();  // the single simplex block is pinned to 1
  client.lambda = Vec::Zero(2);
  client.gamma = 0.5;
  client.eta = 0.1;
  client.Q_y = 0;
  client.Q_hat = 2;

  RoundOptions opt;
  opt.S = 0;
  RngStream rng(1);
  detail::BatchSource batches(1, 0, BatchMode::iid);
  const Vec x_new = x_local_steps(client, Vec::Zero(2), client.y, opt, rng, batches);
  REQUIRE(x_new(0) == Catch::Approx(0.35).margin(1e-15));
  REQUIRE(x_new(1) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("x_local_steps satisfies the Lemma-1 replay identity") {
  const auto shard = blob_shard(6, 11);
  const auto obj = make_soft_clustering(shard, 2, 10.0, 0.1);
  BlockClientState client;
  client.objective = obj;
  client.y = obj->initial_y();
  client.lambda = Vec::Constant(obj->dim_x(), 0.2);
  client.gamma = 1.5;
  client.eta = 0.05;
  client.Q_y = 1;
  client.Q_hat = 5;

  RoundOptions opt;
  opt.S = 2;
  opt.record_traces = true;
  RngStream rng(77);
  detail::BatchSource batches(shard.n(), 2, BatchMode::iid);
  const Vec x0 = Vec::Constant(obj->dim_x(), 0.3);
  const Vec y_new = y_local_steps(client, x0, opt, rng, batches);
  LemmaTrace trace;
  const Vec x_new = x_local_steps(client, x0, y_new, opt, rng, batches, &trace);
  trace.a = 0.7;
  trace.x_new = x_new;
  trace.lambda_new = dual_update(client.lambda, 0.7, client.gamma, x0, x_new);
  REQUIRE(lemma1_check(trace) <= 1e-10);
}

TEST_CASE("server_update_proj") {
  std::vector<ClientState> clients(1);
  clients[0].lambda = Vec::Zero(2);
  clients[0].omega = 1.0;
  clients[0].gamma = 2.0;
  const std::vector<double> d{1.0}, omegas{1.0}, gammas{2.0};

  Contribution c;
  c.client_id = 0;
  c.scaled_delta = Vec(2);
  c.scaled_delta << 2.0, -6.0;
  c.a = 1.0;
  const std::vector<Contribution> contributions{c};

  // an all-real box leaves the update identical to the unprojected one
  auto unbounded = ServerState::init(Vec::Zero(2), clients);
  auto reference = ServerState::init(Vec::Zero(2), clients);
  server_update_proj(unbounded, contributions, d, omegas, gammas, BoxSet::unbounded(2));
  server_update(reference, contributions, d, omegas, gammas);
  REQUIRE(unbounded.x0 == reference.x0);
  REQUIRE(unbounded.lambda == reference.lambda);

  // clamped coordinates when the pre-projection point leaves the box; the
  // dual aggregate ignores the box
  auto clamped = ServerState::init(Vec::Zero(2), clients);
  server_update_proj(clamped, contributions, d, omegas, gammas, BoxSet::uniform(2, -1.0, 1.0));
  REQUIRE(clamped.x0(0) == 1.0);
  REQUIRE(clamped.x0(1) == -1.0);
  REQUIRE(clamped.lambda == reference.lambda);
}

TEST_CASE("optimality gap: stationary and nonstationary points") {
  const auto shard = blob_shard(10, 7);
  const int K = 2;
  const double rho = 0.1;
  const auto obj = make_soft_clustering(shard, K, 10.0, rho);
  const auto sp = construct_stationary(shard, *obj, K, rho);

  std::vector<BlockClientState> clients(1);
  clients[0].objective = obj;
  clients[0].y = sp.y;
  clients[0].lambda = Vec::Zero(obj->dim_x());
  clients[0].omega = 1.0;
  clients[0].gamma = 2.0;
  clients[0].eta = 0.01;
  clients[0].eta_y = 0.1;
  clients[0].Q_y = 2;
  clients[0].Q_hat = 4;

  ServerState server;
  server.x0 = sp.x;
  server.lambda = Vec::Zero(obj->dim_x());
  server.beta = 0.5;
  const BoxSet box = BoxSet::uniform(obj->dim_x(), -10.0, 10.0);
  REQUIRE(optimality_gap(server, clients, box) <= 1e-10);

  // a perturbed point has a positive gap, matching an independent evaluation
  server.x0 = sp.x + Vec::Constant(obj->dim_x(), 0.5);
  clients[0].y = obj->initial_y();
  const double g = optimality_gap(server, clients, box);
  REQUIRE(g > 0.0);

  const double beta = compute_beta_u(clients);
  Vec y_virtual = clients[0].y;
  for (int t = 0; t < clients[0].Q_y; ++t) {
    y_virtual = project_simplex_product(
        y_virtual - clients[0].eta_y * obj->grad_y(server.x0, y_virtual), obj->y_set());
  }
  const Vec x_probe =
      project_box(server.x0 - beta * obj->grad_x(server.x0, y_virtual), box);
  const Vec y_probe = project_simplex_product(
      clients[0].y - clients[0].eta_y * obj->grad_y(server.x0, clients[0].y), obj->y_set());
  const double expected = (server.x0 - x_probe).squaredNorm() / (beta * beta) +
                          (clients[0].y - y_probe).squaredNorm() /
                              (clients[0].eta_y * clients[0].eta_y);
  REQUIRE(g == Catch::Approx(expected).margin(1e-12));
}

TEST_CASE("feasibility_check_u") {
  const double L = 1.0, p = 0.4, a = 2.0, d = 2.5;
  const int Q = 2, Q_y = 3;
  // strengthen the Theorem-1 recipe to absorb the sqrt(1-p) factor
  const auto sp = suggest_params(L, p, a, d, Q);
  const double gamma = sp.gamma * 2.0 / std::sqrt(1.0 - p);
  const double eta = 1.0 / (2.0 * (a + d) * gamma * Q);
  const double beta = 0.02;
  const double c2 = a * gamma * eta * qtilde(gamma, eta, Q).q_tilde;
  const double bound = L + 4.0 * beta * Q_y * L * L * (1.0 + 400.0 / (c2 * c2));

  const auto pass = feasibility_check_u(L, p, a, d, gamma, eta, 0.5 / bound, Q, Q_y, beta);
  REQUIRE(pass.pass);

  // eta_y = 1/L ignores the Q_y term and fails condition (28)
  const auto fail = feasibility_check_u(L, p, a, d, gamma, eta, 1.0 / L, Q, Q_y, beta);
  REQUIRE_FALSE(fail.pass);
  REQUIRE_FALSE(fail.find("eta_y_28")->pass);

  REQUIRE_THROWS_AS(feasibility_check_u(L, 1.0, a, d, gamma, eta, 0.5 / bound, Q, Q_y, beta),
                    std::invalid_argument);
}

TEST_CASE("Q_y = 0 with a y-independent objective reduces to a FedVRA round") {
  const int N = 5, dim = 3, S = 2, rounds = 30;
  const auto inner = synth_quadratic_family(N, dim, 3.0, 19);
  const auto omegas = uniform_weights(N);

  std::vector<BlockClientState> uclients;
  std::vector<ClientState> fclients;
  for (int i = 0; i < N; ++i) {
    BlockClientState u;
    u.objective = make_x_only_block(inner[static_cast<std::size_t>(i)]);
    u.y = u.objective->initial_y();
    u.lambda = Vec::Zero(dim);
    u.omega = omegas[static_cast<std::size_t>(i)];
    u.gamma = 1.2;
    u.eta = 0.04;
    u.eta_y = 0.1;
    u.Q_y = 0;
    u.Q_hat = 3;
    uclients.push_back(std::move(u));

    ClientState f;
    f.objective = inner[static_cast<std::size_t>(i)];
    f.lambda = Vec::Zero(dim);
    f.omega = omegas[static_cast<std::size_t>(i)];
    f.gamma = 1.2;
    f.eta = 0.04;
    fclients.push_back(std::move(f));
  }
  auto userver = ServerState::init(Vec::Ones(dim), fclients);
  auto fserver = ServerState::init(Vec::Ones(dim), fclients);
  const BoxSet box = BoxSet::unbounded(dim);

  RoundOptions opt;
  opt.S = S;
  const std::uint64_t seed = 4242;
  SamplingScheme scheme;
  scheme.kind = SamplingScheme::Kind::uniform_m;
  scheme.m = 2;
  for (int r = 0; r < rounds; ++r) {
    RngStream server_rng = RngStream::server(seed, static_cast<std::uint64_t>(r), N);
    const SampleResult sample = sample_clients(N, scheme, server_rng);
    RoundPlan plan;
    plan.active = sample.active;
    plan.p = sample.p;
    plan.a.assign(static_cast<std::size_t>(N), 1.0);
    plan.d.assign(static_cast<std::size_t>(N), 2.0);
    plan.Q.assign(static_cast<std::size_t>(N), 3);
    run_round_u(userver, uclients, plan, box, opt, seed);
    run_round(fserver, fclients, plan, opt, seed);
    REQUIRE((userver.x0 - fserver.x0).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
  for (int i = 0; i < N; ++i) {
    REQUIRE((uclients[static_cast<std::size_t>(i)].lambda -
             fclients[static_cast<std::size_t>(i)].lambda)
                .lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}
