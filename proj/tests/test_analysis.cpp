#include <catch2/catch_amalgamated.hpp>

#include "fedvra/analysis.hpp"
#include "fedvra/partition.hpp"

using namespace fedvra;

TEST_CASE("qtilde values and identity") {
  const auto single = qtilde(1.0, 0.3, 1);
  REQUIRE(single.q_tilde == 1.0);
  REQUIRE(single.b == std::vector<double>{1.0});

  REQUIRE(qtilde(0.0, 0.1, 5).q_tilde == 5.0);

  const auto q = qtilde(1.0, 0.5, 3);
  REQUIRE(q.b[0] == Catch::Approx(0.25));
  REQUIRE(q.b[1] == Catch::Approx(0.5));
  REQUIRE(q.b[2] == 1.0);
  REQUIRE(q.q_tilde == Catch::Approx(1.75));
  REQUIRE(qtilde_closed(0.5, 3) == Catch::Approx(1.75));

  REQUIRE_THROWS_AS(qtilde(2.0, 0.6, 3), std::invalid_argument);

  // identity |sum (1-ge)^t - (1-(1-ge)^Q)/ge| over a grid
  RngStream rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const double ge = trial < 20 ? std::pow(10.0, -1.0 - trial % 8) : rng.uniform();
    const int Q = 1 + static_cast<int>(rng.index(12));
    const double lhs = qtilde(1.0, ge, Q).q_tilde;
    REQUIRE(std::abs(lhs - qtilde_closed(ge, Q)) <= 1e-12);
  }
}

TEST_CASE("lemma1_check replays recorded rounds exactly") {
  // Q = 1: the closed form is one explicit step, deviation 0
  {
    ClientState client;
    client.lambda = Vec::Constant(2, 0.3);
    client.gamma = 0.8;
    client.eta = 0.5;
    client.objective = synth_quadratic_family(1, 2, 0.0, 3)[0];
    RoundOptions opt;
    opt.record_traces = true;
    RngStream rng(1);
    LemmaTrace trace;
    const Vec x0 = Vec::Ones(2);
    const Vec x_new = local_round(client, x0, 1, opt, rng, &trace);
    trace.a = 1.0;
    trace.x_new = x_new;
    trace.lambda_new = dual_update(client.lambda, 1.0, client.gamma, x0, x_new);
    REQUIRE(lemma1_check(trace) == 0.0);

    // a = 0 leaves the dual untouched and the lambda form collapses
    trace.a = 0.0;
    trace.lambda_new = client.lambda;
    REQUIRE(lemma1_check(trace) == 0.0);
  }

  // randomized configurations with stochastic gradients
  RngStream scenario(909);
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = 1 + static_cast<int>(scenario.index(20));
    const int Q = 1 + static_cast<int>(scenario.index(10));
    const int n = 4 + static_cast<int>(scenario.index(5));
    Eigen::MatrixXd B(n, dim);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < dim; ++j) B(i, j) = scenario.gaussian();
    Vec center(dim);
    for (int j = 0; j < dim; ++j) center(j) = scenario.gaussian();

    ClientState client;
    client.objective = make_quadratic(B.transpose() * B / n, center);
    client.lambda = Vec(dim);
    for (int j = 0; j < dim; ++j) client.lambda(j) = scenario.gaussian();
    client.gamma = 0.1 + 2.0 * scenario.uniform();
    // gamma*eta in (0,1) with eta also below the stability threshold 1/L
    client.eta = scenario.uniform(0.05, 0.95) *
                 std::min(1.0 / client.gamma, 0.5 / client.objective->smoothness());

    Vec x0(dim);
    for (int j = 0; j < dim; ++j) x0(j) = scenario.gaussian();

    RoundOptions opt;
    opt.S = 2;
    opt.record_traces = true;
    RngStream rng(scenario());
    LemmaTrace trace;
    const Vec x_new = local_round(client, x0, Q, opt, rng, &trace);
    const double a = 2.0 * scenario.uniform();
    trace.a = a;
    trace.x_new = x_new;
    trace.lambda_new = dual_update(client.lambda, a, client.gamma, x0, x_new);
    REQUIRE(lemma1_check(trace) <= 1e-10);
  }
}

TEST_CASE("suggest_params reproduces the constructive recipe") {
  const auto p1 = suggest_params(1.0, 0.1, 7.0, 10.0, 2);
  REQUIRE(p1.gamma == Catch::Approx(680.0));
  REQUIRE(p1.eta == Catch::Approx(1.0 / 46240.0));
  REQUIRE(p1.gamma * p1.eta * 2 == Catch::Approx(1.0 / 34.0));

  const auto p2 = suggest_params(1.0, 1.0, 1.0, 1.0, 1);
  REQUIRE(p2.gamma == Catch::Approx(56.0));
  REQUIRE(p2.eta == Catch::Approx(1.0 / 224.0));

  REQUIRE_THROWS_AS(suggest_params(1.0, 0.0, 1.0, 1.0, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(suggest_params(1.0, 0.5, 0.0, 1.0, 1), std::invalid_argument);
}

TEST_CASE("feasibility_check passes the construction and flags perturbations") {
  RngStream rng(1234);
  for (int trial = 0; trial < 50; ++trial) {
    const double L = 0.1 + 5.0 * rng.uniform();
    const double p = 0.05 + 0.95 * rng.uniform();
    const double a = 0.5 + 9.5 * rng.uniform();
    const double d = 1.0 + 9.0 * rng.uniform();
    const int Q = 1 + static_cast<int>(rng.index(8));
    const auto sp = suggest_params(L, p, a, d, Q);

    const auto rep = feasibility_check(L, p, a, d, sp.gamma, sp.eta, Q);
    REQUIRE(rep.pass);

    // eta -> 2/gamma breaks the 1/gamma branch of (18)
    const auto bad_eta = feasibility_check(L, p, a, d, sp.gamma, 2.0 / sp.gamma, Q);
    REQUIRE_FALSE(bad_eta.pass);
    REQUIRE_FALSE(bad_eta.find("eta_18_gamma")->pass);

    // gamma -> L (eta re-derived) leaves only condition (17) failing
    const double eta_l = 1.0 / (2.0 * (a + d) * L * Q);
    const auto bad_gamma = feasibility_check(L, p, a, d, L, eta_l, Q);
    REQUIRE_FALSE(bad_gamma.pass);
    REQUIRE_FALSE(bad_gamma.find("penalty_17")->pass);
    REQUIRE(bad_gamma.find("penalty_17")->slack < 0.0);
    REQUIRE(bad_gamma.find("eta_18_gamma")->pass);
    REQUIRE(bad_gamma.find("eta_18_aggregate")->pass);
  }
  REQUIRE_THROWS_AS(feasibility_check(1.0, 0.5, 0.0, 1.0, 10.0, 0.01, 2),
                    std::invalid_argument);
}

TEST_CASE("diagnostics quantities") {
  const int N = 3, dim = 2;
  const auto objs = synth_quadratic_family(N, dim, 2.0, 6);
  std::vector<ClientState> clients;
  for (const auto& obj : objs) {
    ClientState c;
    c.omega = 1.0 / N;
    c.gamma = 2.0;
    c.eta = 0.05;
    c.objective = obj;
    c.lambda = Vec::Zero(dim);
    clients.push_back(c);
  }
  auto server = ServerState::init(Vec::Ones(dim), clients);

  RoundPlan plan;
  plan.active = {0, 1, 2};
  plan.p.assign(3, 0.5);
  plan.a.assign(3, 1.0);
  plan.d.assign(3, 2.0);
  plan.Q.assign(3, 4);

  // lambda_i = grad f_i(x0): every Xi vanishes and P = f(x0)
  for (auto& c : clients) c.lambda = c.objective->full_grad(server.x0);
  auto row = diagnostics(server, clients, plan);
  for (double xi : row.Xi) REQUIRE(xi <= 1e-24);
  REQUIRE(row.P == Catch::Approx(global_loss(clients, server.x0)).margin(1e-12));
  REQUIRE(row.remark1_d_ok);  // d = 2 = 1/p

  // lambda_i = 0 on quadratics: Xi_i = ||A_i (x0 - c_i)||^2
  for (auto& c : clients) c.lambda = Vec::Zero(dim);
  row = diagnostics(server, clients, plan);
  for (int i = 0; i < N; ++i) {
    const auto* q = dynamic_cast<const detail::QuadraticObjective*>(objs[static_cast<std::size_t>(i)].get());
    const double expect = (q->matrix() * (server.x0 - q->center())).squaredNorm();
    REQUIRE(row.Xi[static_cast<std::size_t>(i)] == Catch::Approx(expect).margin(1e-12));
  }

  // C2 computed from the b-sum agrees with a * (1-(1-ge)^Q)
  for (int i = 0; i < N; ++i) {
    const double direct = plan.a[static_cast<std::size_t>(i)] *
                          qtilde_closed(clients[static_cast<std::size_t>(i)].gamma *
                                            clients[static_cast<std::size_t>(i)].eta,
                                        plan.Q[static_cast<std::size_t>(i)]) *
                          clients[static_cast<std::size_t>(i)].gamma *
                          clients[static_cast<std::size_t>(i)].eta;
    REQUIRE(std::abs(row.C2[static_cast<std::size_t>(i)] - direct) <= 1e-12);
  }

  plan.d.assign(3, 1.0);  // d != 1/p now
  row = diagnostics(server, clients, plan);
  REQUIRE_FALSE(row.remark1_d_ok);
}

TEST_CASE("expected aggregation brute force matches the closed forms") {
  auto build = [](int N, std::uint64_t seed) {
    const auto objs = synth_quadratic_family(N, 3, 3.0, seed);
    std::vector<ClientState> clients;
    RngStream rng(seed + 1);
    for (const auto& obj : objs) {
      ClientState c;
      c.omega = 1.0 / N;
      c.gamma = 0.5 + 2.0 * rng.uniform();
      c.eta = 0.02 + 0.05 * rng.uniform();
      c.objective = obj;
      c.lambda = Vec(3);
      for (int t = 0; t < 3; ++t) c.lambda(t) = rng.gaussian();
      clients.push_back(c);
    }
    auto server = ServerState::init(Vec::Ones(3), clients);
    server.lambda = lambda_weighted_sum(clients);
    return std::pair{std::move(server), std::move(clients)};
  };

  // full participation: the expectation is the single deterministic outcome
  {
    auto [server, clients] = build(2, 5);
    const auto chk = expected_aggregate_bruteforce(server, clients, 2, DMode::N_over_m);
    REQUIRE(chk.deviation <= 1e-12);
  }
  {
    auto [server, clients] = build(4, 9);
    REQUIRE(expected_aggregate_bruteforce(server, clients, 2, DMode::N_over_m).deviation <= 1e-12);
    REQUIRE(expected_aggregate_bruteforce(server, clients, 2, DMode::one).deviation <= 1e-12);
  }
  {
    auto [server, clients] = build(7, 2);
    REQUIRE_THROWS_AS(expected_aggregate_bruteforce(server, clients, 2, DMode::one),
                      std::invalid_argument);
  }
}

TEST_CASE("gradient correction steers local SGs toward the global gradient") {
  // two heterogeneous quadratic clients, full-gradient ADMM (a = d = 1)
  const int dim = 3;
  const auto objs = synth_quadratic_family(2, dim, 4.0, 13);
  std::vector<ClientState> clients;
  for (const auto& obj : objs) {
    ClientState c;
    c.omega = 0.5;
    c.gamma = 8.0;
    c.eta = 0.02;
    c.objective = obj;
    c.lambda = Vec::Zero(dim);
    clients.push_back(c);
  }
  auto server = ServerState::init(Vec::Ones(dim), clients);

  RoundPlan plan;
  plan.active = {0, 1};
  plan.p.assign(2, 1.0);
  plan.a.assign(2, 1.0);
  plan.d.assign(2, 1.0);
  plan.Q.assign(2, 3);

  RoundOptions opt;
  opt.S = 0;
  opt.record_traces = true;
  double corrected = 0.0, raw = 0.0;
  for (int r = 0; r < 100; ++r) {
    const double beta = compute_beta(clients);
    const Vec lambda_bar = server.lambda;
    std::vector<Vec> lambdas{clients[0].lambda, clients[1].lambda};
    const RoundOutput out = run_round(server, clients, plan, opt, 99);
    if (r < 10) continue;  // let the duals warm up
    for (const auto& trace : out.traces) {
      Vec x = trace.x0;
      const auto& c = clients[static_cast<std::size_t>(trace.client_id)];
      for (int t = 0; t < trace.Q; ++t) {
        const Vec g = trace.grads[static_cast<std::size_t>(t)];
        const Vec global = global_grad(clients, x);
        const Vec corr = g + c.gamma * beta * lambda_bar -
                         lambdas[static_cast<std::size_t>(trace.client_id)];
        corrected += (corr - global).norm();
        raw += (g - global).norm();
        x -= c.eta * (g - lambdas[static_cast<std::size_t>(trace.client_id)] +
                      c.gamma * (x - trace.x0));
      }
    }
  }
  REQUIRE(corrected < raw);
}
