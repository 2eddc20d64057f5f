#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedvra/metrics.hpp"
#include "fedvra/numerics.hpp"
#include "fedvra/objectives.hpp"
#include "fedvra/rng.hpp"

namespace fedvra {

// Raised when an iterate picks up a non-finite coordinate. No silent clipping.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int round, int client, int step)
      : std::runtime_error("divergence at round " + std::to_string(round) + ", client " +
                           std::to_string(client) + ", local step " + std::to_string(step)),
        round(round),
        client(client),
        step(step) {}
  int round, client, step;
};

struct ClientState {
  Vec lambda;                // dual variable; x_i is materialized per round only
  double omega = 1.0;        // aggregation weight
  double gamma = 1.0;        // penalty parameter
  double eta = 0.1;          // local stepsize
  ObjectivePtr objective;
};

inline bool gamma_zero_mode(const std::vector<ClientState>& clients) {
  return std::all_of(clients.begin(), clients.end(),
                     [](const ClientState& c) { return c.gamma == 0.0; });
}

inline double compute_beta(const std::vector<ClientState>& clients) {
  double s = 0.0;
  for (const auto& c : clients) s += c.omega * c.gamma;
  return s > 0.0 ? 1.0 / s : std::numeric_limits<double>::quiet_NaN();
}

struct ServerState {
  Vec x0;
  Vec lambda;   // running sum_i omega_i lambda_i, maintained incrementally
  double beta = 1.0;
  int round = 0;

  static ServerState init(Vec x0, const std::vector<ClientState>& clients) {
    ServerState s;
    s.x0 = std::move(x0);
    s.lambda = Vec::Zero(s.x0.size());
    for (const auto& c : clients) s.lambda += c.omega * c.lambda;
    s.beta = compute_beta(clients);
    return s;
  }
};

inline Vec lambda_weighted_sum(const std::vector<ClientState>& clients) {
  Vec s = Vec::Zero(clients.front().lambda.size());
  for (const auto& c : clients) s += c.omega * c.lambda;
  return s;
}

inline double lambda_consistency_error(const ServerState& server,
                                       const std::vector<ClientState>& clients) {
  return (server.lambda - lambda_weighted_sum(clients)).lpNorm<Eigen::Infinity>();
}

// Per-round control inputs. p/a/d/Q are indexed by client id over the full
// population; only entries of active clients are consumed.
struct RoundPlan {
  std::vector<int> active;
  std::vector<double> p;
  std::vector<double> a;
  std::vector<double> d;
  std::vector<int> Q;
};

struct Contribution {
  int client_id = 0;
  Vec scaled_delta;  // gamma_i (x_i^{r+1} - x_0^r); the raw delta in gamma-zero mode
  double a = 0.0;
};

struct SamplingScheme {
  enum class Kind { uniform_m, bernoulli };
  Kind kind = Kind::uniform_m;
  int m = 1;
  std::vector<double> probs;  // bernoulli only
};

struct SampleResult {
  std::vector<int> active;
  std::vector<double> p;
};

inline SampleResult sample_clients(int N, const SamplingScheme& scheme, RngStream& rng) {
  SampleResult out;
  if (scheme.kind == SamplingScheme::Kind::uniform_m) {
    if (scheme.m < 1 || scheme.m > N) throw std::invalid_argument("sample_clients: m out of range");
    std::vector<int> pool(static_cast<std::size_t>(N));
    std::iota(pool.begin(), pool.end(), 0);
    for (int t = 0; t < scheme.m; ++t) {
      const std::size_t j = t + rng.index(static_cast<std::size_t>(N - t));
      std::swap(pool[static_cast<std::size_t>(t)], pool[j]);
    }
    out.active.assign(pool.begin(), pool.begin() + scheme.m);
    std::sort(out.active.begin(), out.active.end());
    out.p.assign(static_cast<std::size_t>(N), static_cast<double>(scheme.m) / N);
  } else {
    if (static_cast<int>(scheme.probs.size()) != N)
      throw std::invalid_argument("sample_clients: need one probability per client");
    for (double p : scheme.probs) {
      if (!(p > 0.0) || p > 1.0)
        throw std::invalid_argument("sample_clients: probabilities must lie in (0,1]");
    }
    for (int i = 0; i < N; ++i) {
      if (rng.uniform() < scheme.probs[static_cast<std::size_t>(i)]) out.active.push_back(i);
    }
    out.p = scheme.probs;
  }
  return out;
}

enum class BatchMode { iid, shuffle };

struct RoundOptions {
  int S = 0;  // mini-batch size; 0 = exact full gradients (sigma = 0 mode)
  BatchMode batch = BatchMode::iid;
  bool record_traces = false;
};

// Everything a Lemma-1 replay needs: the recorded SGs plus the scalars that
// define the b-coefficients and the dual step.
struct LemmaTrace {
  int client_id = 0;
  double gamma = 0.0, eta = 0.0, a = 0.0;
  int Q = 0;
  Vec x0, lambda0;
  std::vector<Vec> grads;
  Vec x_new, lambda_new;
};

namespace detail {

// Mini-batch index source. iid draws with replacement; shuffle walks a
// within-round permutation, reshuffling when exhausted.
class BatchSource {
 public:
  BatchSource(int n, int S, BatchMode mode) : n_(n), S_(S), mode_(mode) {}

  std::vector<int> next(RngStream& rng) {
    if (mode_ == BatchMode::iid) return draw_batch(rng, static_cast<std::size_t>(n_), S_);
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(S_));
    while (static_cast<int>(out.size()) < S_) {
      if (cursor_ >= perm_.size()) reshuffle(rng);
      out.push_back(perm_[cursor_++]);
    }
    return out;
  }

 private:
  void reshuffle(RngStream& rng) {
    perm_.resize(static_cast<std::size_t>(n_));
    std::iota(perm_.begin(), perm_.end(), 0);
    for (std::size_t t = perm_.size(); t > 1; --t) {
      std::swap(perm_[t - 1], perm_[rng.index(t)]);
    }
    cursor_ = 0;
  }

  int n_, S_;
  BatchMode mode_;
  std::vector<int> perm_;
  std::size_t cursor_ = 0;
};

}  // namespace detail

// Q local SGD steps on the augmented Lagrangian:
//   x <- x - eta (g_i(x) - lambda_i + gamma_i (x - x_0^r)).
// Does not mutate the client; the dual step is separate.
inline Vec local_round(const ClientState& client, const Vec& x0, int Q, const RoundOptions& opt,
                       RngStream& rng, LemmaTrace* trace = nullptr, int round = 0,
                       int client_id = 0) {
  if (Q < 1) throw std::invalid_argument("local_round: Q must be >= 1");
  if (trace && client.gamma * client.eta > 1.0) {
    throw std::invalid_argument("local_round: Lemma-1 tracing requires gamma*eta <= 1");
  }
  const Objective& obj = *client.objective;
  detail::BatchSource batches(obj.num_samples(), opt.S, opt.batch);
  Vec x = x0;
  if (trace) {
    trace->client_id = client_id;
    trace->gamma = client.gamma;
    trace->eta = client.eta;
    trace->Q = Q;
    trace->x0 = x0;
    trace->lambda0 = client.lambda;
    trace->grads.clear();
  }
  for (int t = 0; t < Q; ++t) {
    const Vec g = opt.S == 0 ? obj.full_grad(x) : obj.batch_grad(x, batches.next(rng));
    if (trace) trace->grads.push_back(g);
    x -= client.eta * (g - client.lambda + client.gamma * (x - x0));
    if (!x.allFinite()) throw DivergenceError(round, client_id, t);
  }
  return x;
}

// lambda_i^{r+1} = lambda_i^r + a gamma (x_0^r - x_i^{r+1})
inline Vec dual_update(const Vec& lambda, double a, double gamma, const Vec& x0,
                       const Vec& x_new) {
  if (a < 0.0) throw std::invalid_argument("dual_update: a must be >= 0");
  return lambda + a * gamma * (x0 - x_new);
}

// Split server update: the dual aggregate first, then the global model using
// the fresh dual. In gamma-zero mode the analytic limit beta*gamma_i ->
// 1/sum omega_j replaces the delta scaling and the dual pull vanishes
// (a = 0 enforced).
inline void server_update(ServerState& server, std::span<const Contribution> contributions,
                          std::span<const double> d, std::span<const double> omegas,
                          std::span<const double> gammas) {
  const int N = static_cast<int>(omegas.size());
  for (const auto& c : contributions) {
    if (c.client_id < 0 || c.client_id >= N)
      throw std::invalid_argument("server_update: contribution from unknown client id");
  }
  const bool zero_mode =
      std::all_of(gammas.begin(), gammas.end(), [](double g) { return g == 0.0; });
  if (!zero_mode) {
    double s = 0.0;
    for (int i = 0; i < N; ++i) s += omegas[static_cast<std::size_t>(i)] * gammas[static_cast<std::size_t>(i)];
    server.beta = 1.0 / s;
    // Step 19: lambda^{r+1} = lambda^r + sum omega_i a_i gamma_i (x_0 - x_i^{r+1})
    for (const auto& c : contributions) {
      server.lambda -= omegas[static_cast<std::size_t>(c.client_id)] * c.a * c.scaled_delta;
    }
    // Step 20
    for (const auto& c : contributions) {
      server.x0 += server.beta * omegas[static_cast<std::size_t>(c.client_id)] *
                   d[static_cast<std::size_t>(c.client_id)] * c.scaled_delta;
    }
    server.x0 -= server.beta * server.lambda;
  } else {
    if (server.lambda.lpNorm<Eigen::Infinity>() != 0.0)
      throw std::invalid_argument("server_update: gamma-zero mode requires zero duals");
    double wsum = 0.0;
    for (double w : omegas) wsum += w;
    for (const auto& c : contributions) {
      if (c.a != 0.0)
        throw std::invalid_argument("server_update: gamma-zero mode requires a = 0");
      server.x0 += (omegas[static_cast<std::size_t>(c.client_id)] *
                    d[static_cast<std::size_t>(c.client_id)] / wsum) *
                   c.scaled_delta;
    }
  }
  check_finite(server.x0, "server x0");
}

struct RoundOutput {
  std::vector<Contribution> contributions;
  std::vector<Vec> deltas;  // x_i^{r+1} - x_0^r per active client, plan order
  std::vector<LemmaTrace> traces;
  double consensus_err = 0.0;
};

// One full round of Algorithm 1 given an already-sampled plan. Broadcasts
// x_0^r, runs local rounds + dual updates on active clients (inactive ones
// keep lambda_i and implicitly take x_i = x_0^r), then the split server
// update. Per-(client, round) RNG streams make execution order irrelevant.
inline RoundOutput run_round(ServerState& server, std::vector<ClientState>& clients,
                             const RoundPlan& plan, const RoundOptions& opt,
                             std::uint64_t master_seed) {
  const int N = static_cast<int>(clients.size());
  if (static_cast<int>(plan.p.size()) != N || static_cast<int>(plan.a.size()) != N ||
      static_cast<int>(plan.d.size()) != N || static_cast<int>(plan.Q.size()) != N) {
    throw std::invalid_argument("run_round: plan arrays must cover all clients");
  }
  const bool zero_mode = gamma_zero_mode(clients);
  RoundOutput out;
  for (int i : plan.active) {
    if (i < 0 || i >= N) throw std::invalid_argument("run_round: active id out of range");
    ClientState& client = clients[static_cast<std::size_t>(i)];
    RngStream rng = RngStream::client(master_seed, static_cast<std::uint64_t>(server.round), i);
    LemmaTrace trace;
    const Vec x_new =
        local_round(client, server.x0, plan.Q[static_cast<std::size_t>(i)], opt, rng,
                    opt.record_traces ? &trace : nullptr, server.round, i);
    const Vec delta = x_new - server.x0;
    const double a_i = plan.a[static_cast<std::size_t>(i)];
    client.lambda = dual_update(client.lambda, a_i, client.gamma, server.x0, x_new);
    Contribution c;
    c.client_id = i;
    c.scaled_delta = zero_mode ? delta : (client.gamma * delta).eval();
    c.a = a_i;
    if (opt.record_traces) {
      trace.a = a_i;
      trace.x_new = x_new;
      trace.lambda_new = client.lambda;
      out.traces.push_back(std::move(trace));
    }
    out.consensus_err += client.omega * delta.squaredNorm();
    out.deltas.push_back(delta);
    out.contributions.push_back(std::move(c));
  }
  std::vector<double> d(plan.d), omegas, gammas;
  omegas.reserve(clients.size());
  gammas.reserve(clients.size());
  for (const auto& c : clients) {
    omegas.push_back(c.omega);
    gammas.push_back(c.gamma);
  }
  server_update(server, out.contributions, d, omegas, gammas);
  server.round += 1;
  return out;
}

// Weighted global objective at x: f(x) = sum omega_i f_i(x).
inline double global_loss(const std::vector<ClientState>& clients, const Vec& x) {
  double f = 0.0;
  for (const auto& c : clients) f += c.omega * c.objective->loss(x);
  return f;
}

inline Vec global_grad(const std::vector<ClientState>& clients, const Vec& x) {
  Vec g = Vec::Zero(x.size());
  for (const auto& c : clients) g += c.omega * c.objective->full_grad(x);
  return g;
}

// Plan provider: invoked after sampling with (round, active, p).
using PlanSource =
    std::function<RoundPlan(int round, const std::vector<int>& active, const std::vector<double>& p)>;

// Extra per-round metric columns (diagnostics, test accuracy) are injected
// by the caller; evaluated at the round's starting state.
using MetricsHook = std::function<void(MetricsRow&, const ServerState&,
                                       const std::vector<ClientState>&, const RoundPlan&)>;

struct ExperimentOptions {
  int rounds = 0;
  SamplingScheme sampling;
  RoundOptions round;
  std::uint64_t seed = 0;
  MetricsHook metrics_hook;                       // optional
  std::function<void(const MetricsRow&)> on_row;  // optional, called as rows complete
};

inline std::vector<MetricsRow> run_experiment(ServerState& server,
                                              std::vector<ClientState>& clients,
                                              const PlanSource& plans,
                                              const ExperimentOptions& opt) {
  std::vector<MetricsRow> rows;
  rows.reserve(static_cast<std::size_t>(opt.rounds));
  const int N = static_cast<int>(clients.size());
  for (int r = 0; r < opt.rounds; ++r) {
    RngStream server_rng = RngStream::server(opt.seed, static_cast<std::uint64_t>(r), N);
    const SampleResult sample = sample_clients(N, opt.sampling, server_rng);
    const RoundPlan plan = plans(r, sample.active, sample.p);

    MetricsRow row;
    row.round = r;
    row.grad_norm_sq = global_grad(clients, server.x0).squaredNorm();
    row.train_loss = global_loss(clients, server.x0);
    if (opt.metrics_hook) opt.metrics_hook(row, server, clients, plan);

    const RoundOutput result = run_round(server, clients, plan, opt.round, opt.seed);
    row.consensus_err = result.consensus_err;
    if (opt.on_row) opt.on_row(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace fedvra
