#pragma once

#include <vector>

#include "fedvra/analysis.hpp"
#include "fedvra/fedcore.hpp"
#include "fedvra/numerics.hpp"
#include "fedvra/objectives.hpp"

namespace fedvra {

// Client state of the two-block constrained variant. y_i lives in the
// objective's simplex product; Q_y projected y-steps precede Q_hat - Q_y
// dual-corrected x-steps each round.
struct BlockClientState {
  Vec y;
  Vec lambda;
  double omega = 1.0;
  double gamma = 1.0;
  double eta = 0.1;
  double eta_y = 0.1;
  int Q_y = 1;
  int Q_hat = 2;
  BlockObjectivePtr objective;
};

// Projected SGD on y at fixed x_0^r:
//   y <- P_Y(y - eta_y g_i^y(x_0^r, y)).
inline Vec y_local_steps(const BlockClientState& client, const Vec& x0, const RoundOptions& opt,
                         RngStream& rng, detail::BatchSource& batches, int round = 0,
                         int client_id = 0) {
  const BlockObjective& obj = *client.objective;
  const SimplexProductSet y_set = obj.y_set();
  Vec y = client.y;
  for (int t = 0; t < client.Q_y; ++t) {
    const Vec g = opt.S == 0 ? obj.grad_y(x0, y) : obj.batch_grad_y(x0, y, batches.next(rng));
    y = project_simplex_product(y - client.eta_y * g, y_set);
    if (!y.allFinite()) throw DivergenceError(round, client_id, t);
  }
  return y;
}

// Dual-corrected x-steps at the fresh y_i^{r+1}:
//   x <- x - eta (g_i^x(x, y_new) - lambda_i + gamma (x - x_0^r)).
inline Vec x_local_steps(const BlockClientState& client, const Vec& x0, const Vec& y_new,
                         const RoundOptions& opt, RngStream& rng, detail::BatchSource& batches,
                         LemmaTrace* trace = nullptr, int round = 0, int client_id = 0) {
  const BlockObjective& obj = *client.objective;
  const int steps = client.Q_hat - client.Q_y;
  if (steps < 0) throw std::invalid_argument("x_local_steps: Q_hat must be >= Q_y");
  if (steps == 0) return x0;
  Vec x = x0;
  if (trace) {
    trace->client_id = client_id;
    trace->gamma = client.gamma;
    trace->eta = client.eta;
    trace->Q = steps;
    trace->x0 = x0;
    trace->lambda0 = client.lambda;
    trace->grads.clear();
  }
  for (int t = 0; t < steps; ++t) {
    const Vec g = opt.S == 0 ? obj.grad_x(x, y_new) : obj.batch_grad_x(x, y_new, batches.next(rng));
    if (trace) trace->grads.push_back(g);
    x -= client.eta * (g - client.lambda + client.gamma * (x - x0));
    if (!x.allFinite()) throw DivergenceError(round, client_id, client.Q_y + t);
  }
  return x;
}

// Step 23 (unprojected dual aggregate) then Step 24 with the box projection.
inline void server_update_proj(ServerState& server, std::span<const Contribution> contributions,
                               std::span<const double> d, std::span<const double> omegas,
                               std::span<const double> gammas, const BoxSet& box) {
  server_update(server, contributions, d, omegas, gammas);
  server.x0 = project_box(server.x0, box);
}

struct RoundOutputU {
  std::vector<Contribution> contributions;
  std::vector<Vec> deltas;
  std::vector<LemmaTrace> traces;
  double consensus_err = 0.0;
};

// One round of the two-block algorithm. Q_y / Q_hat come from the client
// states; the plan supplies active set, p, a and d.
inline RoundOutputU run_round_u(ServerState& server, std::vector<BlockClientState>& clients,
                                const RoundPlan& plan, const BoxSet& box, const RoundOptions& opt,
                                std::uint64_t master_seed) {
  const int N = static_cast<int>(clients.size());
  RoundOutputU out;
  for (int i : plan.active) {
    if (i < 0 || i >= N) throw std::invalid_argument("run_round_u: active id out of range");
    BlockClientState& client = clients[static_cast<std::size_t>(i)];
    RngStream rng = RngStream::client(master_seed, static_cast<std::uint64_t>(server.round), i);
    detail::BatchSource batches(client.objective->num_samples(), opt.S, opt.batch);

    const Vec y_new = y_local_steps(client, server.x0, opt, rng, batches, server.round, i);
    LemmaTrace trace;
    const Vec x_new = x_local_steps(client, server.x0, y_new, opt, rng, batches,
                                    opt.record_traces ? &trace : nullptr, server.round, i);
    client.y = y_new;
    const Vec delta = x_new - server.x0;
    const double a_i = plan.a[static_cast<std::size_t>(i)];
    client.lambda = dual_update(client.lambda, a_i, client.gamma, server.x0, x_new);

    Contribution c;
    c.client_id = i;
    c.scaled_delta = client.gamma * delta;
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
  for (const auto& c : clients) {
    omegas.push_back(c.omega);
    gammas.push_back(c.gamma);
  }
  server_update_proj(server, out.contributions, d, omegas, gammas, box);
  server.round += 1;
  return out;
}

inline double compute_beta_u(const std::vector<BlockClientState>& clients) {
  double s = 0.0;
  for (const auto& c : clients) s += c.omega * c.gamma;
  return 1.0 / s;
}

// Virtual full-participation y update with exact gradients (analysis mode).
inline Vec virtual_y_next(const BlockClientState& client, const Vec& x0) {
  const SimplexProductSet y_set = client.objective->y_set();
  Vec y = client.y;
  for (int t = 0; t < client.Q_y; ++t) {
    y = project_simplex_product(y - client.eta_y * client.objective->grad_y(x0, y), y_set);
  }
  return y;
}

// Projected-gradient optimality gap:
//   G^r = (1/beta^2) ||x0 - P_X(x0 - beta grad_x f(x0, y^{r+1}))||^2
//       + sum_i (omega_i/eta_y_i^2) ||y_i - P_Y(y_i - eta_y_i grad_y f_i(x0, y_i))||^2,
// zero exactly at stationary points of the constrained problem.
inline double optimality_gap(const ServerState& server,
                             const std::vector<BlockClientState>& clients, const BoxSet& box) {
  const double beta = compute_beta_u(clients);
  Vec grad_x_sum = Vec::Zero(server.x0.size());
  double y_term = 0.0;
  for (const auto& client : clients) {
    const Vec y_next = virtual_y_next(client, server.x0);
    grad_x_sum += client.omega * client.objective->grad_x(server.x0, y_next);

    const Vec y_step = project_simplex_product(
        client.y - client.eta_y * client.objective->grad_y(server.x0, client.y),
        client.objective->y_set());
    y_term += client.omega / (client.eta_y * client.eta_y) * (client.y - y_step).squaredNorm();
  }
  const Vec x_step = project_box(server.x0 - beta * grad_x_sum, box);
  return (server.x0 - x_step).squaredNorm() / (beta * beta) + y_term;
}

// Theorem-2 feasibility: the two Theorem-1-style conditions with the
// sqrt(1-p) penalty strengthening, plus the y-stepsize bound.
inline FeasibilityReport feasibility_check_u(double L, double p, double a, double d, double gamma,
                                             double eta, double eta_y, int Q, int Q_y,
                                             double beta) {
  if (a == 0.0)
    throw std::invalid_argument("feasibility_check_u: penalty condition undefined at a = 0");
  if (!(p > 0.0) || p >= 1.0) {
    throw std::invalid_argument(
        "feasibility_check_u: requires p in (0,1) strictly; the penalty bound divides by "
        "sqrt(1-p)");
  }
  if (!(L > 0.0) || !(gamma > 0.0) || !(eta > 0.0) || !(eta_y > 0.0) || d <= 0.0 || Q < 1 ||
      Q_y < 0)
    throw std::invalid_argument("feasibility_check_u: inputs must be positive");
  FeasibilityReport rep;
  const double ge = gamma * eta;
  const double qt = ge <= 1.0 ? qtilde(gamma, eta, Q).q_tilde : static_cast<double>(Q);
  const double c2 = a * ge * qt;

  auto add = [&rep](std::string name, double lhs, double rhs, bool geq) {
    ConditionReport c;
    c.name = std::move(name);
    c.lhs = lhs;
    c.rhs = rhs;
    c.pass = geq ? lhs >= rhs : lhs <= rhs;
    c.slack = geq ? lhs - rhs : rhs - lhs;
    rep.conditions.push_back(std::move(c));
  };

  add("penalty_26", (gamma - L / 2.0) * p * c2 * std::sqrt(1.0 - p), 9.0 * L, true);
  add("eta_27_smoothness", eta, 1.0 / (std::sqrt(6.0) * qt * L), false);
  add("eta_27_gamma", eta, 1.0 / gamma, false);
  add("eta_27_aggregate", eta, 1.0 / ((a + d) * gamma * qt), false);
  add("eta_y_28", 1.0 / eta_y, L + 4.0 * beta * Q_y * L * L * (1.0 + 400.0 / (c2 * c2)), true);

  rep.pass = std::all_of(rep.conditions.begin(), rep.conditions.end(),
                         [](const ConditionReport& c) { return c.pass; });
  return rep;
}

}  // namespace fedvra
