#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "fedvra/fedcore.hpp"
#include "fedvra/numerics.hpp"

namespace fedvra {

// Geometric coefficients of the local recursion: b_t = (1-gamma*eta)^{Q-1-t},
// Q_tilde = ||b||_1, the effective local step count.
struct QtildeResult {
  double q_tilde = 0.0;
  std::vector<double> b;
};

inline QtildeResult qtilde(double gamma, double eta, int Q) {
  const double ge = gamma * eta;
  if (ge < 0.0 || ge > 1.0) throw std::invalid_argument("qtilde: need 0 <= gamma*eta <= 1");
  if (Q < 1) throw std::invalid_argument("qtilde: Q must be >= 1");
  QtildeResult out;
  out.b.assign(static_cast<std::size_t>(Q), 1.0);
  for (int t = Q - 2; t >= 0; --t) {
    out.b[static_cast<std::size_t>(t)] = out.b[static_cast<std::size_t>(t + 1)] * (1.0 - ge);
  }
  double s = 0.0;
  for (double v : out.b) s += v;
  out.q_tilde = s;
  return out;
}

// Closed form (1-(1-x)^Q)/x, evaluated cancellation-free; x = 0 gives Q.
inline double qtilde_closed(double gamma_eta, int Q) {
  if (gamma_eta == 0.0) return static_cast<double>(Q);
  if (gamma_eta == 1.0) return 1.0;
  return -std::expm1(static_cast<double>(Q) * std::log1p(-gamma_eta)) / gamma_eta;
}

// Normalized-averaging SG: G_i = sum_t (b_t/||b||_1) g_t.
inline Vec normalized_avg_sg(const std::vector<Vec>& grads, const QtildeResult& q) {
  Vec g = Vec::Zero(grads.front().size());
  for (std::size_t t = 0; t < grads.size(); ++t) g += q.b[t] * grads[t];
  return g / q.q_tilde;
}

// Replays a recorded trace through both closed forms:
//   x^{(Q)} - x0 = -eta Qt sum_t (b_t/||b||_1)(g_t - lambda), and
//   lambda^{+}  = a gamma eta Qt G + (1 - a gamma eta Qt) lambda.
// Returns the larger of the two max-norm deviations.
inline double lemma1_check(const LemmaTrace& trace) {
  if (static_cast<int>(trace.grads.size()) != trace.Q || trace.Q < 1)
    throw std::invalid_argument("lemma1_check: incomplete trace");
  const QtildeResult q = qtilde(trace.gamma, trace.eta, trace.Q);
  Vec weighted = Vec::Zero(trace.x0.size());
  for (std::size_t t = 0; t < trace.grads.size(); ++t) {
    weighted += (q.b[t] / q.q_tilde) * (trace.grads[t] - trace.lambda0);
  }
  const Vec x_closed = trace.x0 - trace.eta * q.q_tilde * weighted;
  const double dev_x = (x_closed - trace.x_new).lpNorm<Eigen::Infinity>();

  const double c2 = trace.a * trace.gamma * trace.eta * q.q_tilde;
  const Vec g_avg = normalized_avg_sg(trace.grads, q);
  const Vec lambda_closed = c2 * g_avg + (1.0 - c2) * trace.lambda0;
  const double dev_l = (lambda_closed - trace.lambda_new).lpNorm<Eigen::Infinity>();
  return std::max(dev_x, dev_l);
}

// Theorem-1 conditions (17)-(18) at given parameters. Condition (17) is
// evaluated in product form (gamma - L/2) p a gamma eta Qt >= 13 L / 2 so
// gamma appears once on each side.
struct ConditionReport {
  std::string name;
  double lhs = 0.0, rhs = 0.0;
  bool pass = false;
  double slack = 0.0;  // lhs - rhs, signed in the passing direction
};

struct FeasibilityReport {
  std::vector<ConditionReport> conditions;
  bool pass = false;

  const ConditionReport* find(const std::string& name) const {
    for (const auto& c : conditions)
      if (c.name == name) return &c;
    return nullptr;
  }
};

inline FeasibilityReport feasibility_check(double L, double p, double a, double d, double gamma,
                                           double eta, int Q) {
  if (a == 0.0)
    throw std::invalid_argument("feasibility_check: condition (17) undefined at a = 0");
  if (!(L > 0.0) || !(p > 0.0) || p > 1.0 || !(gamma > 0.0) || !(eta > 0.0) || d <= 0.0 || Q < 1)
    throw std::invalid_argument("feasibility_check: inputs must be positive, p in (0,1]");
  FeasibilityReport rep;
  const double ge = gamma * eta;
  const double qt = ge <= 1.0 ? qtilde(gamma, eta, Q).q_tilde : static_cast<double>(Q);

  auto add = [&rep](std::string name, double lhs, double rhs, bool geq) {
    ConditionReport c;
    c.name = std::move(name);
    c.lhs = lhs;
    c.rhs = rhs;
    c.pass = geq ? lhs >= rhs : lhs <= rhs;
    c.slack = geq ? lhs - rhs : rhs - lhs;
    rep.conditions.push_back(std::move(c));
  };

  add("penalty_17", (gamma - L / 2.0) * p * a * ge * qt, 6.5 * L, true);
  add("eta_18_smoothness", eta, 1.0 / (std::sqrt(6.0) * qt * L), false);
  add("eta_18_gamma", eta, 1.0 / gamma, false);
  add("eta_18_aggregate", eta, 1.0 / ((a + d) * gamma * qt), false);

  rep.pass = std::all_of(rep.conditions.begin(), rep.conditions.end(),
                         [](const ConditionReport& c) { return c.pass; });
  return rep;
}

// Constructive recipe: gamma = 28(a+d)L/(p a), eta = 1/(2(a+d) gamma Q).
// The output always passes feasibility_check.
struct SuggestedParams {
  double gamma = 0.0;
  double eta = 0.0;
};

inline SuggestedParams suggest_params(double L, double p, double a, double d, int Q) {
  if (!(a > 0.0) || !(p > 0.0) || p > 1.0 || Q < 1 || !(L > 0.0) || !(d > 0.0))
    throw std::invalid_argument("suggest_params: need a > 0, p in (0,1], Q >= 1, L > 0, d > 0");
  if (1.0 / (2.0 * (a + d) * Q) > 1.0)
    throw std::invalid_argument("suggest_params: needs 2(a+d)Q >= 1");
  SuggestedParams out;
  out.gamma = 28.0 * (a + d) * L / (p * a);
  out.eta = 1.0 / (2.0 * (a + d) * out.gamma * Q);
  return out;
}

// Proof-layer quantities, evaluated with full gradients at the round's
// starting state.
struct DiagnosticsRow {
  std::vector<double> Xi;        // ||grad f_i(x_0^r) - lambda_i^r||^2
  std::vector<double> C1, C2;    // (a+d) g e Qt, a g e Qt
  double P = 0.0;                // potential
  double f_x0 = 0.0;
  bool remark1_d_ok = true;      // d_i = 1/p_i
  bool remark1_c_ok = true;      // (a_i + d_i) eta gamma Qt <= 1
};

inline DiagnosticsRow diagnostics(const ServerState& server,
                                  const std::vector<ClientState>& clients,
                                  const RoundPlan& plan) {
  DiagnosticsRow row;
  row.f_x0 = global_loss(clients, server.x0);
  row.P = row.f_x0;
  const double beta = compute_beta(clients);
  for (std::size_t i = 0; i < clients.size(); ++i) {
    const ClientState& c = clients[i];
    const double qt = qtilde(c.gamma, c.eta, plan.Q[i]).q_tilde;
    const double c1 = (plan.a[i] + plan.d[i]) * c.gamma * c.eta * qt;
    const double c2 = plan.a[i] * c.gamma * c.eta * qt;
    const double xi = (c.objective->full_grad(server.x0) - c.lambda).squaredNorm();
    row.Xi.push_back(xi);
    row.C1.push_back(c1);
    row.C2.push_back(c2);
    if (c2 > 0.0) row.P += c.omega * 4.0 * beta * xi / (plan.p[i] * c2);
    if (std::abs(plan.d[i] * plan.p[i] - 1.0) > 1e-12) row.remark1_d_ok = false;
    if (c1 > 1.0 + 1e-12) row.remark1_c_ok = false;
  }
  return row;
}

// D_1 = sum_i 9 / (p_i (2 a_i + d_i) gamma_i eta_i Qt_i) for one round's plan.
inline double d1_round(const std::vector<ClientState>& clients, const RoundPlan& plan) {
  double s = 0.0;
  for (std::size_t i = 0; i < clients.size(); ++i) {
    const double qt = qtilde(clients[i].gamma, clients[i].eta, plan.Q[i]).q_tilde;
    s += 9.0 / (plan.p[i] * (2.0 * plan.a[i] + plan.d[i]) * clients[i].gamma * clients[i].eta * qt);
  }
  return s;
}

// Monolithic global update from full client state: the one-shot form the
// Step-19/20 split must reproduce. Inactive clients hold x_i^{r+1} = x_0^r
// and their previous duals.
inline Vec monolithic_x0_update(const ServerState& server,
                                const std::vector<ClientState>& clients_after,
                                const RoundPlan& plan, const std::vector<Vec>& active_deltas) {
  const double beta = compute_beta(clients_after);
  Vec x0 = server.x0;
  for (std::size_t k = 0; k < plan.active.size(); ++k) {
    const int i = plan.active[k];
    x0 += beta * clients_after[static_cast<std::size_t>(i)].omega *
          plan.d[static_cast<std::size_t>(i)] * clients_after[static_cast<std::size_t>(i)].gamma *
          active_deltas[k];
  }
  Vec lambda_sum = Vec::Zero(server.x0.size());
  for (const auto& c : clients_after) lambda_sum += c.omega * c.lambda;
  return x0 - beta * lambda_sum;
}

// Brute-force verification of the expected-aggregation semantics of d:
// averages the Step-20 outcome over every m-subset (uniform sampling, dual
// held at lambda^r, i.e. a = 0; the closed forms isolate the aggregation
// term) and compares with the closed form for d = N/m or d = 1.
enum class DMode { one, N_over_m };

struct AggregateCheck {
  Vec empirical;
  Vec closed_form;
  double deviation = 0.0;
};

inline AggregateCheck expected_aggregate_bruteforce(const ServerState& server,
                                                    const std::vector<ClientState>& clients,
                                                    int m, DMode mode, int Q = 2) {
  const int N = static_cast<int>(clients.size());
  if (N > 6) throw std::invalid_argument("expected_aggregate_bruteforce: N too large to enumerate");
  if (m < 1 || m > N) throw std::invalid_argument("expected_aggregate_bruteforce: bad m");
  const double d_val = mode == DMode::N_over_m ? static_cast<double>(N) / m : 1.0;
  const double beta = compute_beta(clients);

  // deterministic virtual local models (full gradients)
  std::vector<Vec> x_tilde;
  RoundOptions opt;
  opt.S = 0;
  RngStream unused(0);
  for (int i = 0; i < N; ++i) {
    x_tilde.push_back(local_round(clients[static_cast<std::size_t>(i)], server.x0, Q, opt, unused));
  }

  Vec mean = Vec::Zero(server.x0.size());
  int count = 0;
  std::vector<int> subset;
  const auto enumerate = [&](auto&& self, int next) -> void {
    if (static_cast<int>(subset.size()) == m) {
      Vec x0 = server.x0;
      for (int i : subset) {
        x0 += beta * clients[static_cast<std::size_t>(i)].omega * d_val *
              clients[static_cast<std::size_t>(i)].gamma *
              (x_tilde[static_cast<std::size_t>(i)] - server.x0);
      }
      x0 -= beta * server.lambda;
      mean += x0;
      ++count;
      return;
    }
    for (int i = next; i < N; ++i) {
      subset.push_back(i);
      self(self, i + 1);
      subset.pop_back();
    }
  };
  enumerate(enumerate, 0);
  mean /= static_cast<double>(count);

  Vec model_avg = Vec::Zero(server.x0.size());
  for (int i = 0; i < N; ++i) {
    model_avg += beta * clients[static_cast<std::size_t>(i)].omega *
                 clients[static_cast<std::size_t>(i)].gamma * x_tilde[static_cast<std::size_t>(i)];
  }
  const double ratio = static_cast<double>(m) / N;
  AggregateCheck out;
  out.empirical = mean;
  out.closed_form = mode == DMode::N_over_m
                        ? (model_avg - beta * server.lambda).eval()
                        : ((1.0 - ratio) * server.x0 + ratio * model_avg - beta * server.lambda)
                              .eval();
  out.deviation = (out.empirical - out.closed_form).lpNorm<Eigen::Infinity>();
  return out;
}

}  // namespace fedvra
