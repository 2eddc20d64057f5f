#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "fedvra/fedcore.hpp"

namespace fedvra {

enum class PresetName { fedavg, fedprox, fednova, scaffold_approx, feddyn_approx, fedadmm, fedvra };

inline PresetName preset_from_string(const std::string& s) {
  if (s == "fedavg") return PresetName::fedavg;
  if (s == "fedprox") return PresetName::fedprox;
  if (s == "fednova") return PresetName::fednova;
  if (s == "scaffold_approx") return PresetName::scaffold_approx;
  if (s == "feddyn_approx") return PresetName::feddyn_approx;
  if (s == "fedadmm") return PresetName::fedadmm;
  if (s == "fedvra") return PresetName::fedvra;
  throw std::invalid_argument("unknown preset: " + s);
}

inline std::string to_string(PresetName p) {
  switch (p) {
    case PresetName::fedavg: return "fedavg";
    case PresetName::fedprox: return "fedprox";
    case PresetName::fednova: return "fednova";
    case PresetName::scaffold_approx: return "scaffold_approx";
    case PresetName::feddyn_approx: return "feddyn_approx";
    case PresetName::fedadmm: return "fedadmm";
    case PresetName::fedvra: return "fedvra";
  }
  return "?";
}

struct PresetContext {
  int N = 1;
  int m = 1;
  std::vector<double> omegas;
  std::vector<std::vector<int>> Q_table;  // per-round rows; last row repeats
  double gamma = 0.1;
  double eta = 0.01;
  double a = 1.0;       // fedvra explicit dual stepsize
  double d = 1.0;       // fedvra explicit aggregation stepsize
  bool d_inv_p = false; // fedvra: d_i^r = 1/p_i^r instead of the constant
};

// Parameter rules of one named preset: the gamma its clients must run with
// and the per-round plan. fednova's d depends on the realized active set, so
// the plan is generated after sampling.
class PresetRule {
 public:
  PresetRule(PresetName name, PresetContext ctx) : name_(name), ctx_(std::move(ctx)) {
    if (static_cast<int>(ctx_.omegas.size()) != ctx_.N)
      throw std::invalid_argument("apply_preset: omegas must have one entry per client");
    if (ctx_.Q_table.empty()) throw std::invalid_argument("apply_preset: empty Q table");
    if (name_ == PresetName::scaffold_approx) {
      const int Q = ctx_.Q_table.front().front();
      if (ctx_.gamma * ctx_.eta * Q >= 1.0) {
        std::fprintf(stderr,
                     "warning: scaffold_approx with gamma*eta*Q = %g >= 1; "
                     "a = 1/(gamma eta Q) leaves a*gamma*eta*Qt far from 1\n",
                     ctx_.gamma * ctx_.eta * Q);
      }
    }
  }

  PresetName name() const { return name_; }

  double client_gamma() const {
    switch (name_) {
      case PresetName::fedavg:
      case PresetName::fednova:
        return 0.0;
      default:
        return ctx_.gamma;
    }
  }
  double client_eta() const { return ctx_.eta; }

  const std::vector<int>& q_row(int round) const {
    const std::size_t r = std::min<std::size_t>(static_cast<std::size_t>(round),
                                                ctx_.Q_table.size() - 1);
    return ctx_.Q_table[r];
  }

  RoundPlan plan(int round, const std::vector<int>& active, const std::vector<double>& p) const {
    const int N = ctx_.N;
    RoundPlan out;
    out.active = active;
    out.p = p;
    out.Q = q_row(round);
    out.a.assign(static_cast<std::size_t>(N), 0.0);
    out.d.assign(static_cast<std::size_t>(N), 1.0);
    const double n_over_m = static_cast<double>(ctx_.N) / ctx_.m;

    switch (name_) {
      case PresetName::fedavg:
      case PresetName::fedprox:
        out.d.assign(static_cast<std::size_t>(N), n_over_m);
        break;
      case PresetName::fednova: {
        // d_i^r = Q_eff^r / (Q_i^r sum_{j in A^r} omega_j), computed from the
        // realized active set
        double wsum = 0.0, qw = 0.0;
        for (int i : active) {
          wsum += ctx_.omegas[static_cast<std::size_t>(i)];
          qw += ctx_.omegas[static_cast<std::size_t>(i)] * out.Q[static_cast<std::size_t>(i)];
        }
        const double q_eff = qw / wsum;
        for (int i : active) {
          out.d[static_cast<std::size_t>(i)] =
              q_eff / (out.Q[static_cast<std::size_t>(i)] * wsum);
        }
        break;
      }
      case PresetName::scaffold_approx: {
        const int Q = out.Q.front();
        out.a.assign(static_cast<std::size_t>(N), 1.0 / (ctx_.gamma * ctx_.eta * Q));
        break;
      }
      case PresetName::feddyn_approx:
        out.a.assign(static_cast<std::size_t>(N), 1.0);
        out.d.assign(static_cast<std::size_t>(N), n_over_m);
        break;
      case PresetName::fedadmm:
        out.a.assign(static_cast<std::size_t>(N), 1.0);
        out.d.assign(static_cast<std::size_t>(N), 1.0);
        break;
      case PresetName::fedvra:
        out.a.assign(static_cast<std::size_t>(N), ctx_.a);
        for (int i = 0; i < N; ++i) {
          out.d[static_cast<std::size_t>(i)] =
              ctx_.d_inv_p ? 1.0 / p[static_cast<std::size_t>(i)] : ctx_.d;
        }
        break;
    }
    return out;
  }

 private:
  PresetName name_;
  PresetContext ctx_;
};

inline PresetRule apply_preset(PresetName name, PresetContext ctx) {
  return PresetRule(name, std::move(ctx));
}

// ---------------------------------------------------------------------------
// Direct baseline implementations. These are written from the baselines'
// own update rules, independent of the engine's code path, and consume RNG
// through the identical (master, round, client) stream discipline so that
// exact-equivalence checks can run with shared randomness.
// ---------------------------------------------------------------------------

namespace direct {

inline Vec plain_local_sgd(const Objective& obj, const Vec& x0, double eta, int Q, int S,
                           BatchMode mode, RngStream& rng, std::vector<Vec>* grads = nullptr) {
  detail::BatchSource batches(obj.num_samples(), S, mode);
  Vec x = x0;
  for (int t = 0; t < Q; ++t) {
    const Vec g = S == 0 ? obj.full_grad(x) : obj.batch_grad(x, batches.next(rng));
    if (grads) grads->push_back(g);
    x -= eta * g;
  }
  return x;
}

}  // namespace direct

// x_i^{r,t+1} = x_i^{r,t} - eta g_i(x_i^{r,t});
// x_0^{r+1} = x_0^r + (N/m) sum_{i in A} omega_i (x_i^{r+1} - x_0^r).
inline Vec fedavg_direct_round(const Vec& x0, const std::vector<ObjectivePtr>& objs,
                               const std::vector<double>& omegas, const std::vector<int>& active,
                               double eta, const std::vector<int>& Q, int S, BatchMode mode,
                               std::uint64_t master, int round) {
  const double scale = static_cast<double>(objs.size()) / std::max<std::size_t>(active.size(), 1);
  Vec x0_new = x0;
  for (int i : active) {
    RngStream rng = RngStream::client(master, static_cast<std::uint64_t>(round), i);
    const Vec xi = direct::plain_local_sgd(*objs[static_cast<std::size_t>(i)], x0, eta,
                                           Q[static_cast<std::size_t>(i)], S, mode, rng);
    x0_new += scale * omegas[static_cast<std::size_t>(i)] * (xi - x0);
  }
  return x0_new;
}

// FedProx: proximal local SGD, FedAvg-style aggregation.
inline Vec fedprox_direct_round(const Vec& x0, const std::vector<ObjectivePtr>& objs,
                                const std::vector<double>& omegas, const std::vector<int>& active,
                                double eta, double gamma, const std::vector<int>& Q, int S,
                                BatchMode mode, std::uint64_t master, int round) {
  const double scale = static_cast<double>(objs.size()) / std::max<std::size_t>(active.size(), 1);
  Vec x0_new = x0;
  for (int i : active) {
    RngStream rng = RngStream::client(master, static_cast<std::uint64_t>(round), i);
    detail::BatchSource batches(objs[static_cast<std::size_t>(i)]->num_samples(), S, mode);
    Vec x = x0;
    for (int t = 0; t < Q[static_cast<std::size_t>(i)]; ++t) {
      const Vec g = S == 0 ? objs[static_cast<std::size_t>(i)]->full_grad(x)
                           : objs[static_cast<std::size_t>(i)]->batch_grad(x, batches.next(rng));
      x -= eta * (g + gamma * (x - x0));
    }
    x0_new += scale * omegas[static_cast<std::size_t>(i)] * (x - x0);
  }
  return x0_new;
}

// Normalized averaging:
// x_0^{r+1} = x_0^r - eta Q_eff^r sum_{i in A} (omega_i / sum_A omega)
//             sum_t g_i(x_i^{r,t}) / Q_i^r.
inline Vec fednova_direct_round(const Vec& x0, const std::vector<ObjectivePtr>& objs,
                                const std::vector<double>& omegas, const std::vector<int>& active,
                                double eta, const std::vector<int>& Q, int S, BatchMode mode,
                                std::uint64_t master, int round) {
  double wsum = 0.0, qw = 0.0;
  for (int i : active) {
    wsum += omegas[static_cast<std::size_t>(i)];
    qw += omegas[static_cast<std::size_t>(i)] * Q[static_cast<std::size_t>(i)];
  }
  const double q_eff = qw / wsum;
  Vec x0_new = x0;
  for (int i : active) {
    RngStream rng = RngStream::client(master, static_cast<std::uint64_t>(round), i);
    std::vector<Vec> grads;
    direct::plain_local_sgd(*objs[static_cast<std::size_t>(i)], x0, eta,
                            Q[static_cast<std::size_t>(i)], S, mode, rng, &grads);
    Vec g_sum = Vec::Zero(x0.size());
    for (const Vec& g : grads) g_sum += g;
    x0_new -= eta * q_eff * (omegas[static_cast<std::size_t>(i)] / wsum) * g_sum /
              static_cast<double>(Q[static_cast<std::size_t>(i)]);
  }
  return x0_new;
}

// Federated ADMM (the a = d = 1 algorithm), kept as its own state machine.
struct AdmmDirectState {
  Vec x0;
  std::vector<Vec> lambdas;
  Vec lambda_bar;  // sum omega_i lambda_i
};

inline void admm_direct_round(AdmmDirectState& st, const std::vector<ObjectivePtr>& objs,
                              const std::vector<double>& omegas, double gamma, double eta,
                              const std::vector<int>& Q, const std::vector<int>& active, int S,
                              BatchMode mode, std::uint64_t master, int round) {
  double beta_den = 0.0;
  for (double w : omegas) beta_den += w * gamma;
  const double beta = 1.0 / beta_den;

  Vec lambda_new = st.lambda_bar;
  Vec delta_sum = Vec::Zero(st.x0.size());
  for (int i : active) {
    RngStream rng = RngStream::client(master, static_cast<std::uint64_t>(round), i);
    detail::BatchSource batches(objs[static_cast<std::size_t>(i)]->num_samples(), S, mode);
    Vec x = st.x0;
    for (int t = 0; t < Q[static_cast<std::size_t>(i)]; ++t) {
      const Vec g = S == 0 ? objs[static_cast<std::size_t>(i)]->full_grad(x)
                           : objs[static_cast<std::size_t>(i)]->batch_grad(x, batches.next(rng));
      x -= eta * (g - st.lambdas[static_cast<std::size_t>(i)] + gamma * (x - st.x0));
    }
    st.lambdas[static_cast<std::size_t>(i)] += gamma * (st.x0 - x);
    lambda_new += omegas[static_cast<std::size_t>(i)] * gamma * (st.x0 - x);
    delta_sum += omegas[static_cast<std::size_t>(i)] * gamma * (x - st.x0);
  }
  st.lambda_bar = lambda_new;
  st.x0 += beta * delta_sum - beta * lambda_new;
}

// Control-variate form the paper attributes to SCAFFOLD, implemented with
// equality: x^{t+1} = x^t - eta (g + lambda_bar - lambda_i),
// lambda_i^{+} = (1/Q) sum_t g_t, and the d = 1 delta aggregation
// x_0^{r+1} = x_0^r + sum_{i in A} omega_i (x_i^{r+1} - x_0^r).
struct ScaffoldFormState {
  Vec x0;
  std::vector<Vec> lambdas;
  Vec lambda_bar;
};

inline void scaffold_form_round(ScaffoldFormState& st, const std::vector<ObjectivePtr>& objs,
                                const std::vector<double>& omegas, double eta, int Q,
                                const std::vector<int>& active, int S, BatchMode mode,
                                std::uint64_t master, int round) {
  Vec x0_new = st.x0;
  const Vec lambda_bar = st.lambda_bar;  // round-start broadcast
  for (int i : active) {
    RngStream rng = RngStream::client(master, static_cast<std::uint64_t>(round), i);
    detail::BatchSource batches(objs[static_cast<std::size_t>(i)]->num_samples(), S, mode);
    Vec x = st.x0;
    Vec g_sum = Vec::Zero(st.x0.size());
    for (int t = 0; t < Q; ++t) {
      const Vec g = S == 0 ? objs[static_cast<std::size_t>(i)]->full_grad(x)
                           : objs[static_cast<std::size_t>(i)]->batch_grad(x, batches.next(rng));
      g_sum += g;
      x -= eta * (g + lambda_bar - st.lambdas[static_cast<std::size_t>(i)]);
    }
    const Vec lambda_new = g_sum / static_cast<double>(Q);
    st.lambda_bar += omegas[static_cast<std::size_t>(i)] *
                     (lambda_new - st.lambdas[static_cast<std::size_t>(i)]);
    st.lambdas[static_cast<std::size_t>(i)] = lambda_new;
    x0_new += omegas[static_cast<std::size_t>(i)] * (x - st.x0);
  }
  st.x0 = x0_new;
}

}  // namespace fedvra
