#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fedvra/partition.hpp"
#include "fedvra/presets.hpp"

namespace fedvra {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::vector<std::string>& errors)
      : std::runtime_error(join(errors)), errors(errors) {}
  std::vector<std::string> errors;

 private:
  static std::string join(const std::vector<std::string>& errors) {
    std::string out = "invalid configuration:";
    for (const auto& e : errors) out += "\n  - " + e;
    return out;
  }
};

enum class ProblemKind { quadratic_family, logistic, mlp_mnist, soft_clustering };

// Flat key-value experiment description. The grammar is lines of
// `key = value`, `#` comments, blank lines ignored; unknown keys are errors.
struct ExperimentConfig {
  ProblemKind problem = ProblemKind::quadratic_family;

  // problem parameters
  int dim = 10;                // quadratic_family
  double heterogeneity = 5.0;  // quadratic_family
  int samples = 2000;          // synthetic datasets
  int classes = 10;            // synthetic classification
  double spread = 2.0;         // gaussian blob radius
  double noise = 0.5;          // gaussian blob noise
  double holdout = 0.2;        // synthetic test fraction
  double l2_mu = 1e-3;         // logistic
  int hidden = 200;            // mlp
  std::string images, labels, test_images, test_labels;  // mlp_mnist IDX paths
  bool normalize = true;
  int K = 3;                   // soft_clustering
  double box_radius = 10.0;    // soft_clustering
  double rho = 0.1;            // soft_clustering

  // federation
  int N = 10;
  int m = 2;
  int R = 100;
  int S = 0;  // 0 = exact full gradients
  std::uint64_t seed = 1;
  PartitionSpec::Mode partition_mode = PartitionSpec::Mode::iid;
  double alpha = 0.2;
  bool uniform_omegas = false;
  int epochs = 2;
  bool hlu = false;  // epochs drawn uniformly from [hlu_lo, hlu_hi]
  int hlu_lo = 1;
  int hlu_hi = 5;
  BatchMode batch_mode = BatchMode::iid;

  // algorithm
  std::string algorithm = "fedvra";
  double a = 1.0;
  double d = 1.0;
  bool d_inv_p = false;  // `d = inv_p`
  double gamma = 0.1;
  double eta = 0.01;
  bool suggest = false;  // derive gamma/eta per client from suggest_params
  double eta_y = 0.05;   // fedvra_u
  int Q_y = 1;           // fedvra_u, in steps

  // output
  std::string output = "metrics.csv";
  bool diagnostics = false;
  std::vector<double> acc_thresholds = {0.5, 0.6, 0.7, 0.9};
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct ConfigParser {
  std::map<std::string, std::string> kv;
  std::vector<std::string> errors;

  bool has(const std::string& key) const { return kv.count(key) > 0; }

  template <typename T, typename Convert>
  void get(const std::string& key, T& out, Convert&& convert) {
    const auto it = kv.find(key);
    if (it == kv.end()) return;
    try {
      out = convert(it->second);
    } catch (const std::exception& e) {
      errors.push_back(key + ": " + e.what());
    }
    kv.erase(it);
  }

  void get_double(const std::string& key, double& out) {
    get(key, out, [](const std::string& v) {
      std::size_t pos = 0;
      const double x = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("not a number: " + v);
      return x;
    });
  }
  void get_int(const std::string& key, int& out) {
    get(key, out, [](const std::string& v) {
      std::size_t pos = 0;
      const long x = std::stol(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("not an integer: " + v);
      return static_cast<int>(x);
    });
  }
  void get_u64(const std::string& key, std::uint64_t& out) {
    get(key, out, [](const std::string& v) { return std::stoull(v); });
  }
  void get_string(const std::string& key, std::string& out) {
    get(key, out, [](const std::string& v) { return v; });
  }
  void get_bool(const std::string& key, bool& out) {
    get(key, out, [](const std::string& v) {
      if (v == "on" || v == "true" || v == "1") return true;
      if (v == "off" || v == "false" || v == "0") return false;
      throw std::invalid_argument("expected on/off: " + v);
    });
  }
};

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
  detail::ConfigParser p;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      p.errors.push_back("line " + std::to_string(lineno) + ": expected `key = value`");
      continue;
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      p.errors.push_back("line " + std::to_string(lineno) + ": empty key or value");
      continue;
    }
    if (p.kv.count(key)) p.errors.push_back("duplicate key: " + key);
    p.kv[key] = value;
  }

  ExperimentConfig cfg;
  p.get("problem", cfg.problem, [](const std::string& v) {
    if (v == "quadratic_family") return ProblemKind::quadratic_family;
    if (v == "logistic") return ProblemKind::logistic;
    if (v == "mlp_mnist") return ProblemKind::mlp_mnist;
    if (v == "soft_clustering") return ProblemKind::soft_clustering;
    throw std::invalid_argument("unknown problem: " + v);
  });
  p.get_int("dim", cfg.dim);
  p.get_double("heterogeneity", cfg.heterogeneity);
  p.get_int("samples", cfg.samples);
  p.get_int("classes", cfg.classes);
  p.get_double("spread", cfg.spread);
  p.get_double("noise", cfg.noise);
  p.get_double("holdout", cfg.holdout);
  p.get_double("l2_mu", cfg.l2_mu);
  p.get_int("hidden", cfg.hidden);
  p.get_string("images", cfg.images);
  p.get_string("labels", cfg.labels);
  p.get_string("test_images", cfg.test_images);
  p.get_string("test_labels", cfg.test_labels);
  p.get_bool("normalize", cfg.normalize);
  p.get_int("K", cfg.K);
  p.get_double("box_radius", cfg.box_radius);
  p.get_double("rho", cfg.rho);

  p.get_int("N", cfg.N);
  p.get_int("m", cfg.m);
  p.get_int("R", cfg.R);
  p.get_int("S", cfg.S);
  p.get_u64("seed", cfg.seed);
  p.get("partition", cfg.partition_mode, [](const std::string& v) {
    if (v == "iid") return PartitionSpec::Mode::iid;
    if (v == "dirichlet") return PartitionSpec::Mode::dirichlet;
    throw std::invalid_argument("unknown partition mode: " + v);
  });
  p.get_double("alpha", cfg.alpha);
  p.get("weights", cfg.uniform_omegas, [](const std::string& v) {
    if (v == "uniform") return true;
    if (v == "data") return false;
    throw std::invalid_argument("weights must be `data` or `uniform`");
  });
  p.get_int("epochs", cfg.epochs);
  p.get("hlu", cfg.hlu, [](const std::string& v) {
    if (v == "uniform") return true;
    if (v == "fixed") return false;
    throw std::invalid_argument("hlu must be `fixed` or `uniform`");
  });
  p.get_int("hlu_lo", cfg.hlu_lo);
  p.get_int("hlu_hi", cfg.hlu_hi);
  p.get("batch_mode", cfg.batch_mode, [](const std::string& v) {
    if (v == "iid") return BatchMode::iid;
    if (v == "shuffle") return BatchMode::shuffle;
    throw std::invalid_argument("batch_mode must be `iid` or `shuffle`");
  });

  p.get_string("algorithm", cfg.algorithm);
  p.get_double("a", cfg.a);
  if (p.has("d")) {
    const std::string v = p.kv["d"];
    if (v == "inv_p") {
      cfg.d_inv_p = true;
      p.kv.erase("d");
    } else {
      p.get_double("d", cfg.d);
    }
  }
  p.get_double("gamma", cfg.gamma);
  p.get_double("eta", cfg.eta);
  p.get_bool("suggest", cfg.suggest);
  p.get_double("eta_y", cfg.eta_y);
  p.get_int("Q_y", cfg.Q_y);

  p.get_string("output", cfg.output);
  p.get_bool("diagnostics", cfg.diagnostics);
  p.get("acc_thresholds", cfg.acc_thresholds, [](const std::string& v) {
    std::vector<double> out;
    std::istringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(detail::trim(tok)));
    return out;
  });

  for (const auto& [key, value] : p.kv) p.errors.push_back("unknown key: " + key);

  // range validation
  auto check = [&p](bool ok, const std::string& msg) {
    if (!ok) p.errors.push_back(msg);
  };
  check(cfg.N >= 1, "N out of range (need N >= 1)");
  check(cfg.m >= 1 && cfg.m <= cfg.N, "m out of range (need 1 <= m <= N)");
  check(cfg.R >= 0, "R out of range (need R >= 0)");
  check(cfg.S >= 0, "S out of range (need S >= 0; 0 means full gradients)");
  check(cfg.epochs >= 1, "epochs out of range (need >= 1)");
  check(!cfg.hlu || (cfg.hlu_lo >= 1 && cfg.hlu_lo <= cfg.hlu_hi),
        "hlu range invalid (need 1 <= hlu_lo <= hlu_hi)");
  check(cfg.partition_mode != PartitionSpec::Mode::dirichlet || cfg.alpha > 0.0,
        "alpha must be positive in dirichlet mode");
  check(cfg.a >= 0.0, "a must be >= 0");
  check(cfg.d_inv_p || cfg.d > 0.0, "d must be positive (or `inv_p`)");
  check(cfg.gamma >= 0.0, "gamma must be >= 0");
  check(cfg.eta >= 0.0, "eta must be >= 0");
  check(cfg.Q_y >= 0, "Q_y must be >= 0");
  check(cfg.K >= 1, "K must be >= 1");
  check(cfg.holdout >= 0.0 && cfg.holdout < 1.0, "holdout must lie in [0,1)");
  if (cfg.problem == ProblemKind::mlp_mnist) {
    check(!cfg.images.empty() && !cfg.labels.empty(),
          "mlp_mnist requires `images` and `labels` paths");
  }
  try {
    preset_from_string(cfg.algorithm);
  } catch (const std::exception& e) {
    p.errors.push_back(e.what());
  }

  if (!p.errors.empty()) throw ConfigError(p.errors);
  return cfg;
}

}  // namespace fedvra
