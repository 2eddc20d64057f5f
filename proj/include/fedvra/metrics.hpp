#pragma once

#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace fedvra {

// One row per round. grad_norm_sq / train_loss / the diagnostics block are
// evaluated at the round's starting state (x_0^r, lambda^r), matching the
// quantities the convergence bound averages.
struct MetricsRow {
  int round = 0;
  double grad_norm_sq = 0.0;
  double train_loss = 0.0;
  std::optional<double> test_accuracy;
  double consensus_err = 0.0;
  std::optional<double> xi_mean;
  std::optional<double> potential;
  std::optional<double> gap;
  std::optional<int> remark1_d_ok;
  std::optional<int> remark1_c_ok;
};

inline std::string csv_header(bool diagnostics) {
  std::string h = "round,grad_norm_sq,train_loss,test_accuracy,consensus_err";
  if (diagnostics) h += ",xi_mean,potential_P,gap_G,remark1_d,remark1_c1";
  return h;
}

namespace detail {
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}
inline std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }
inline std::string fmt(const std::optional<int>& v) { return v ? std::to_string(*v) : std::string(); }
}  // namespace detail

inline std::string csv_row(const MetricsRow& m, bool diagnostics) {
  using detail::fmt;
  std::string s = std::to_string(m.round) + "," + fmt(m.grad_norm_sq) + "," +
                  fmt(m.train_loss) + "," + fmt(m.test_accuracy) + "," + fmt(m.consensus_err);
  if (diagnostics) {
    s += "," + fmt(m.xi_mean) + "," + fmt(m.potential) + "," + fmt(m.gap) + "," +
         fmt(m.remark1_d_ok) + "," + fmt(m.remark1_c_ok);
  }
  return s;
}

}  // namespace fedvra
