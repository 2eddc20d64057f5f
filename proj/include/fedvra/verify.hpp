#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <vector>

#include "fedvra/analysis.hpp"
#include "fedvra/partition.hpp"
#include "fedvra/presets.hpp"

namespace fedvra {

struct SuiteResult {
  std::string name;
  bool pass = false;
  double max_deviation = 0.0;
  double elapsed_seconds = 0.0;
  std::vector<std::string> details;
};

namespace detail {

template <typename Body>
SuiteResult timed_suite(const std::string& name, Body&& body) {
  SuiteResult out;
  out.name = name;
  const auto t0 = std::chrono::steady_clock::now();
  body(out);
  out.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace detail

// 100 randomized Lemma-1 replays (dim <= 20, Q <= 10, gamma*eta in (0,1),
// stochastic gradients); both closed forms must match within 1e-10.
inline SuiteResult verify_lemma1(int trials = 100, std::uint64_t seed = 0xa11ceULL) {
  return detail::timed_suite("lemma1", [&](SuiteResult& out) {
    RngStream scenario(seed);
    double worst = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
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
      trace.a = 2.0 * scenario.uniform();
      trace.x_new = x_new;
      trace.lambda_new = dual_update(client.lambda, trace.a, client.gamma, x0, x_new);
      worst = std::max(worst, lemma1_check(trace));
    }
    out.max_deviation = worst;
    out.pass = worst <= 1e-10;
    out.details.push_back("trials=" + std::to_string(trials));
  });
}

// |sum_t (1-ge)^t - (1-(1-ge)^Q)/ge| <= 1e-12 over a 200-point grid, plus
// the exact ge = 0 limit.
inline SuiteResult verify_qtilde(std::uint64_t seed = 0x71cULL) {
  return detail::timed_suite("qtilde", [&](SuiteResult& out) {
    RngStream rng(seed);
    double worst = 0.0;
    bool exact_zero = true;
    for (int trial = 0; trial < 200; ++trial) {
      const double ge = trial < 40 ? std::pow(10.0, -1.0 - trial % 10) : rng.uniform();
      const int Q = 1 + static_cast<int>(rng.index(12));
      worst = std::max(worst, std::abs(qtilde(1.0, ge, Q).q_tilde - qtilde_closed(ge, Q)));
    }
    for (int Q = 1; Q <= 12; ++Q) {
      if (qtilde(0.0, 0.3, Q).q_tilde != static_cast<double>(Q)) exact_zero = false;
    }
    out.max_deviation = worst;
    out.pass = worst <= 1e-12 && exact_zero;
    out.details.push_back("grid=200");
  });
}

// N = 4, m = 2 subset enumeration against the d = N/m and d = 1 closed forms.
inline SuiteResult verify_aggregation(std::uint64_t seed = 0xa66ULL) {
  return detail::timed_suite("aggregation", [&](SuiteResult& out) {
    const int N = 4, dim = 3;
    const auto objs = synth_quadratic_family(N, dim, 3.0, seed);
    std::vector<ClientState> clients;
    RngStream rng(seed + 1);
    for (const auto& obj : objs) {
      ClientState c;
      c.omega = 1.0 / N;
      c.gamma = 0.5 + 2.0 * rng.uniform();
      c.eta = 0.02 + 0.05 * rng.uniform();
      c.objective = obj;
      c.lambda = Vec(dim);
      for (int t = 0; t < dim; ++t) c.lambda(t) = rng.gaussian();
      clients.push_back(c);
    }
    auto server = ServerState::init(Vec::Ones(dim), clients);
    const double dev1 = expected_aggregate_bruteforce(server, clients, 2, DMode::N_over_m).deviation;
    const double dev2 = expected_aggregate_bruteforce(server, clients, 2, DMode::one).deviation;
    out.max_deviation = std::max(dev1, dev2);
    out.pass = out.max_deviation <= 1e-12;
    out.details.push_back("d=N/m deviation=" + std::to_string(dev1));
    out.details.push_back("d=1 deviation=" + std::to_string(dev2));
  });
}

// suggest_params output passes feasibility_check on 50 random inputs and the
// two canonical perturbations are flagged with the right condition.
inline SuiteResult verify_feasibility(std::uint64_t seed = 0xfea5ULL) {
  return detail::timed_suite("feasibility", [&](SuiteResult& out) {
    RngStream rng(seed);
    out.pass = true;
    for (int trial = 0; trial < 50; ++trial) {
      const double L = 0.1 + 5.0 * rng.uniform();
      const double p = 0.05 + 0.95 * rng.uniform();
      const double a = 0.5 + 9.5 * rng.uniform();
      const double d = 1.0 + 9.0 * rng.uniform();
      const int Q = 1 + static_cast<int>(rng.index(8));
      const auto sp = suggest_params(L, p, a, d, Q);
      if (!feasibility_check(L, p, a, d, sp.gamma, sp.eta, Q).pass) {
        out.pass = false;
        out.details.push_back("construction failed feasibility at trial " + std::to_string(trial));
      }
      const auto bad_eta = feasibility_check(L, p, a, d, sp.gamma, 2.0 / sp.gamma, Q);
      if (bad_eta.pass || bad_eta.find("eta_18_gamma")->pass) {
        out.pass = false;
        out.details.push_back("eta perturbation not flagged at trial " + std::to_string(trial));
      }
      const double eta_l = 1.0 / (2.0 * (a + d) * L * Q);
      const auto bad_gamma = feasibility_check(L, p, a, d, L, eta_l, Q);
      if (bad_gamma.pass || bad_gamma.find("penalty_17")->pass) {
        out.pass = false;
        out.details.push_back("gamma perturbation not flagged at trial " + std::to_string(trial));
      }
    }
    out.details.push_back("trials=50");
  });
}

// Exact-equivalence presets against their direct implementations over 50
// rounds with shared RNG streams (max x0 deviation over the run).
inline SuiteResult verify_presets(std::uint64_t seed = 0x9e5e75ULL) {
  return detail::timed_suite("presets", [&](SuiteResult& out) {
    const int N = 6, dim = 4, S = 2, rounds = 50, m = 2;
    const double eta = 0.04, gamma = 1.5;
    const auto objs = synth_quadratic_family(N, dim, 3.0, seed);
    const auto omegas = uniform_weights(N);
    HluSpec hlu;
    hlu.mode = HluSpec::Mode::uniform_range;
    hlu.lo = 1;
    hlu.hi = 5;
    const auto q_table = hlu_schedule(N, rounds, hlu, seed + 7);

    auto engine_trajectory = [&](PresetName name) {
      PresetContext ctx;
      ctx.N = N;
      ctx.m = m;
      ctx.omegas = omegas;
      ctx.Q_table = q_table;
      ctx.gamma = gamma;
      ctx.eta = eta;
      const PresetRule rule = apply_preset(name, ctx);
      std::vector<ClientState> clients;
      for (int i = 0; i < N; ++i) {
        ClientState c;
        c.lambda = Vec::Zero(dim);
        c.omega = omegas[static_cast<std::size_t>(i)];
        c.gamma = rule.client_gamma();
        c.eta = rule.client_eta();
        c.objective = objs[static_cast<std::size_t>(i)];
        clients.push_back(std::move(c));
      }
      auto server = ServerState::init(Vec::Ones(dim), clients);
      std::vector<Vec> xs;
      RoundOptions opt;
      opt.S = S;
      SamplingScheme scheme;
      scheme.kind = SamplingScheme::Kind::uniform_m;
      scheme.m = m;
      for (int r = 0; r < rounds; ++r) {
        RngStream server_rng = RngStream::server(seed, static_cast<std::uint64_t>(r), N);
        const SampleResult sample = sample_clients(N, scheme, server_rng);
        run_round(server, clients, rule.plan(r, sample.active, sample.p), opt, seed);
        xs.push_back(server.x0);
      }
      return xs;
    };

    auto sampled_active = [&](int r) {
      RngStream server_rng = RngStream::server(seed, static_cast<std::uint64_t>(r), N);
      SamplingScheme scheme;
      scheme.kind = SamplingScheme::Kind::uniform_m;
      scheme.m = m;
      return sample_clients(N, scheme, server_rng).active;
    };

    double worst = 0.0;
    {  // fedavg
      const auto engine = engine_trajectory(PresetName::fedavg);
      Vec x0 = Vec::Ones(dim);
      double dev = 0.0;
      for (int r = 0; r < rounds; ++r) {
        x0 = fedavg_direct_round(x0, objs, omegas, sampled_active(r), eta,
                                 q_table[static_cast<std::size_t>(r)], S, BatchMode::iid, seed, r);
        dev = std::max(dev, (x0 - engine[static_cast<std::size_t>(r)]).lpNorm<Eigen::Infinity>());
      }
      out.details.push_back("fedavg deviation=" + std::to_string(dev));
      worst = std::max(worst, dev);
    }
    {  // fednova
      const auto engine = engine_trajectory(PresetName::fednova);
      Vec x0 = Vec::Ones(dim);
      double dev = 0.0;
      for (int r = 0; r < rounds; ++r) {
        x0 = fednova_direct_round(x0, objs, omegas, sampled_active(r), eta,
                                  q_table[static_cast<std::size_t>(r)], S, BatchMode::iid, seed, r);
        dev = std::max(dev, (x0 - engine[static_cast<std::size_t>(r)]).lpNorm<Eigen::Infinity>());
      }
      out.details.push_back("fednova deviation=" + std::to_string(dev));
      worst = std::max(worst, dev);
    }
    {  // fedprox
      const auto engine = engine_trajectory(PresetName::fedprox);
      Vec x0 = Vec::Ones(dim);
      double dev = 0.0;
      for (int r = 0; r < rounds; ++r) {
        x0 = fedprox_direct_round(x0, objs, omegas, sampled_active(r), eta, gamma,
                                  q_table[static_cast<std::size_t>(r)], S, BatchMode::iid, seed, r);
        dev = std::max(dev, (x0 - engine[static_cast<std::size_t>(r)]).lpNorm<Eigen::Infinity>());
      }
      out.details.push_back("fedprox deviation=" + std::to_string(dev));
      worst = std::max(worst, dev);
    }
    {  // fedadmm vs Algorithm 2
      const auto engine = engine_trajectory(PresetName::fedadmm);
      AdmmDirectState st;
      st.x0 = Vec::Ones(dim);
      st.lambdas.assign(static_cast<std::size_t>(N), Vec::Zero(dim));
      st.lambda_bar = Vec::Zero(dim);
      double dev = 0.0;
      for (int r = 0; r < rounds; ++r) {
        admm_direct_round(st, objs, omegas, gamma, eta, q_table[static_cast<std::size_t>(r)],
                          sampled_active(r), S, BatchMode::iid, seed, r);
        dev = std::max(dev,
                       (st.x0 - engine[static_cast<std::size_t>(r)]).lpNorm<Eigen::Infinity>());
      }
      out.details.push_back("fedadmm deviation=" + std::to_string(dev));
      worst = std::max(worst, dev);
    }
    out.max_deviation = worst;
    out.pass = worst <= 1e-12;
  });
}

// Exhaustive-enumeration unbiasedness (n_i = 6, S = 2) for the quadratic and
// logistic objectives.
inline SuiteResult verify_unbiasedness(std::uint64_t seed = 0x5bULL) {
  return detail::timed_suite("unbiasedness", [&](SuiteResult& out) {
    RngStream rng(seed);
    auto exhaustive = [](const Objective& obj, const Vec& x, int S) {
      const int n = obj.num_samples();
      Vec total = Vec::Zero(obj.dim());
      long count = 0;
      std::vector<int> idx(static_cast<std::size_t>(S), 0);
      for (;;) {
        total += obj.batch_grad(x, idx);
        ++count;
        int pos = S - 1;
        while (pos >= 0 && ++idx[static_cast<std::size_t>(pos)] == n) {
          idx[static_cast<std::size_t>(pos)] = 0;
          --pos;
        }
        if (pos < 0) break;
      }
      return (total / static_cast<double>(count) - obj.full_grad(x)).lpNorm<Eigen::Infinity>();
    };

    Eigen::MatrixXd B(6, 6);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) B(i, j) = rng.gaussian();
    const auto quad = make_quadratic(B.transpose() * B / 6.0, Vec::Ones(6));
    Vec xq(6);
    for (int t = 0; t < 6; ++t) xq(t) = rng.gaussian();
    const double dev_q = exhaustive(*quad, xq, 2);

    const Shard shard = make_gaussian_blobs(6, 2, 2, 2.0, seed + 3);
    const auto logit = make_logistic(shard, 0.01);
    Vec xl(logit->dim());
    for (Eigen::Index t = 0; t < xl.size(); ++t) xl(t) = 0.3 * rng.gaussian();
    const double dev_l = exhaustive(*logit, xl, 2);

    out.max_deviation = std::max(dev_q, dev_l);
    out.pass = out.max_deviation <= 1e-12;
    out.details.push_back("quadratic deviation=" + std::to_string(dev_q));
    out.details.push_back("logistic deviation=" + std::to_string(dev_l));
  });
}

inline SuiteResult run_verify_suite(const std::string& name) {
  if (name == "lemma1") return verify_lemma1();
  if (name == "qtilde") return verify_qtilde();
  if (name == "aggregation") return verify_aggregation();
  if (name == "feasibility") return verify_feasibility();
  if (name == "presets") return verify_presets();
  if (name == "unbiasedness") return verify_unbiasedness();
  throw std::invalid_argument("unknown verify suite: " + name +
                              " (have: lemma1, qtilde, aggregation, feasibility, presets, "
                              "unbiasedness)");
}

}  // namespace fedvra
