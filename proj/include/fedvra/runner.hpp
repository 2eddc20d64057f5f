#pragma once

#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fedvra/analysis.hpp"
#include "fedvra/config.hpp"
#include "fedvra/fedcore.hpp"
#include "fedvra/fedvra_u.hpp"
#include "fedvra/idx.hpp"
#include "fedvra/metrics.hpp"
#include "fedvra/partition.hpp"
#include "fedvra/presets.hpp"

namespace fedvra {

struct RunSummary {
  std::vector<MetricsRow> rows;
  bool diverged = false;
  std::string divergence_info;
  std::optional<double> final_accuracy;
  std::vector<std::pair<double, int>> rounds_to;  // threshold -> first round index, -1 if never
  double final_grad_norm_sq = 0.0;
  std::optional<double> final_gap;
};

namespace detail {

struct BuiltProblem {
  std::vector<ObjectivePtr> objectives;        // one-block problems
  std::vector<BlockObjectivePtr> block_objectives;  // soft clustering
  std::vector<double> omegas;
  std::vector<int> shard_sizes;
  std::optional<Shard> test_shard;
  Vec x0;
  BoxSet box = BoxSet::unbounded(0);
};

inline std::pair<Shard, Shard> split_holdout(const Shard& data, double holdout) {
  const int n_test = static_cast<int>(data.n() * holdout);
  const int n_train = data.n() - n_test;
  Shard train, test;
  train.features = data.features.topRows(n_train);
  test.features = data.features.bottomRows(n_test);
  train.num_classes = test.num_classes = data.num_classes;
  if (data.labeled()) {
    train.labels.assign(data.labels.begin(), data.labels.begin() + n_train);
    test.labels.assign(data.labels.begin() + n_train, data.labels.end());
  }
  return {std::move(train), std::move(test)};
}

inline BuiltProblem build_problem(const ExperimentConfig& cfg) {
  BuiltProblem built;
  PartitionSpec pspec;
  pspec.mode = cfg.partition_mode;
  pspec.alpha = cfg.alpha;
  pspec.N = cfg.N;
  pspec.seed = cfg.seed;

  switch (cfg.problem) {
    case ProblemKind::quadratic_family: {
      built.objectives = synth_quadratic_family(cfg.N, cfg.dim, cfg.heterogeneity, cfg.seed);
      built.omegas = uniform_weights(cfg.N);
      built.shard_sizes.assign(static_cast<std::size_t>(cfg.N), cfg.dim);
      RngStream init(stream_seed(cfg.seed, 0, 0x696e6974ULL));
      built.x0 = Vec::NullaryExpr(cfg.dim, [&](Eigen::Index) { return init.gaussian(); });
      break;
    }
    case ProblemKind::logistic: {
      const Shard data =
          make_gaussian_blobs(cfg.samples, cfg.classes, 2, cfg.spread, cfg.seed, cfg.noise);
      auto [train, test] = split_holdout(data, cfg.holdout);
      built.test_shard = std::move(test);
      const auto shards = partition(train, pspec);
      for (const auto& s : shards) {
        built.objectives.push_back(make_logistic(s, cfg.l2_mu));
        built.shard_sizes.push_back(s.n());
      }
      built.omegas = cfg.uniform_omegas ? uniform_weights(cfg.N) : data_weights(shards);
      built.x0 = Vec::Zero(built.objectives.front()->dim());
      break;
    }
    case ProblemKind::mlp_mnist: {
      IdxNormalization norm;
      norm.enabled = cfg.normalize;
      Shard train = load_idx(cfg.images, cfg.labels, norm);
      if (!cfg.test_images.empty()) {
        built.test_shard = load_idx(cfg.test_images, cfg.test_labels, norm);
        built.test_shard->num_classes = train.num_classes =
            std::max(built.test_shard->num_classes, train.num_classes);
      } else {
        auto [tr, te] = split_holdout(train, cfg.holdout);
        train = std::move(tr);
        built.test_shard = std::move(te);
      }
      const auto shards = partition(train, pspec);
      for (const auto& s : shards) {
        Shard labeled = s;
        labeled.num_classes = train.num_classes;
        built.shard_sizes.push_back(labeled.n());
        built.objectives.push_back(make_mlp(std::move(labeled), cfg.hidden, train.num_classes));
      }
      built.omegas = cfg.uniform_omegas ? uniform_weights(cfg.N) : data_weights(shards);
      RngStream init(stream_seed(cfg.seed, 0, 0x696e6974ULL));
      built.x0 = built.objectives.front()->initial_point(init);
      break;
    }
    case ProblemKind::soft_clustering: {
      const Shard data =
          make_gaussian_blobs(cfg.samples, cfg.classes, 2, cfg.spread, cfg.seed, cfg.noise);
      const auto shards = partition(data, pspec);
      for (const auto& s : shards) {
        built.block_objectives.push_back(make_soft_clustering(s, cfg.K, cfg.box_radius, cfg.rho));
        built.shard_sizes.push_back(s.n());
      }
      built.omegas = cfg.uniform_omegas ? uniform_weights(cfg.N) : data_weights(shards);
      built.box = BoxSet::uniform(built.block_objectives.front()->dim_x(), -cfg.box_radius,
                                  cfg.box_radius);
      RngStream init(stream_seed(cfg.seed, 0, 0x696e6974ULL));
      built.x0 = Vec::NullaryExpr(built.block_objectives.front()->dim_x(),
                                  [&](Eigen::Index) { return cfg.spread * init.uniform(-1.0, 1.0); });
      break;
    }
  }
  return built;
}

// epochs -> local steps: Q_i^r = epochs * ceil(n_i / S); with exact full
// gradients (S = 0) one step per epoch.
inline int epochs_to_steps(int epochs, int n, int S) {
  if (S <= 0) return epochs;
  return epochs * ((n + S - 1) / S);
}

inline void finalize_summary(RunSummary& summary, const ExperimentConfig& cfg) {
  if (!summary.rows.empty()) {
    summary.final_grad_norm_sq = summary.rows.back().grad_norm_sq;
    if (summary.rows.back().test_accuracy) {
      summary.final_accuracy = summary.rows.back().test_accuracy;
    }
    if (summary.rows.back().gap) summary.final_gap = summary.rows.back().gap;
  }
  for (double thr : cfg.acc_thresholds) {
    int at = -1;
    for (const auto& row : summary.rows) {
      if (row.test_accuracy && *row.test_accuracy >= thr) {
        at = row.round;
        break;
      }
    }
    summary.rounds_to.emplace_back(thr, at);
  }
}

}  // namespace detail

// Full config-driven experiment. Writes one CSV row per completed round to
// `csv` as it happens; a diverging run keeps everything flushed so far.
inline RunSummary run_experiment_config(const ExperimentConfig& cfg, std::ostream* csv = nullptr) {
  detail::BuiltProblem built = detail::build_problem(cfg);
  RunSummary summary;
  if (csv) *csv << csv_header(cfg.diagnostics) << "\n";

  HluSpec hlu;
  if (cfg.hlu) {
    hlu.mode = HluSpec::Mode::uniform_range;
    hlu.lo = cfg.hlu_lo;
    hlu.hi = cfg.hlu_hi;
  } else {
    hlu.mode = HluSpec::Mode::fixed;
    hlu.fixed_value = cfg.epochs;
  }
  const auto epoch_table = hlu_schedule(cfg.N, std::max(cfg.R, 1), hlu, cfg.seed);
  std::vector<std::vector<int>> q_table(epoch_table.size(),
                                        std::vector<int>(static_cast<std::size_t>(cfg.N)));
  for (std::size_t r = 0; r < epoch_table.size(); ++r) {
    for (int i = 0; i < cfg.N; ++i) {
      q_table[r][static_cast<std::size_t>(i)] = detail::epochs_to_steps(
          epoch_table[r][static_cast<std::size_t>(i)],
          built.shard_sizes[static_cast<std::size_t>(i)], cfg.S);
    }
  }

  SamplingScheme sampling;
  sampling.kind = SamplingScheme::Kind::uniform_m;
  sampling.m = cfg.m;
  RoundOptions ropt;
  ropt.S = cfg.S;
  ropt.batch = cfg.batch_mode;

  auto emit = [&](MetricsRow row) {
    if (csv) {
      *csv << csv_row(row, cfg.diagnostics) << "\n";
      csv->flush();
    }
    summary.rows.push_back(std::move(row));
  };

  try {
    if (cfg.problem == ProblemKind::soft_clustering) {
      std::vector<BlockClientState> clients;
      for (int i = 0; i < cfg.N; ++i) {
        BlockClientState c;
        c.objective = built.block_objectives[static_cast<std::size_t>(i)];
        c.y = c.objective->initial_y();
        c.lambda = Vec::Zero(built.x0.size());
        c.omega = built.omegas[static_cast<std::size_t>(i)];
        c.gamma = cfg.gamma;
        c.eta = cfg.eta;
        c.eta_y = cfg.eta_y;
        c.Q_y = cfg.Q_y;
        c.Q_hat = 0;  // per-round below
        clients.push_back(std::move(c));
      }
      ServerState server;
      server.x0 = project_box(built.x0, built.box);
      server.lambda = Vec::Zero(built.x0.size());
      server.beta = compute_beta_u(clients);

      for (int r = 0; r < cfg.R; ++r) {
        RngStream server_rng = RngStream::server(cfg.seed, static_cast<std::uint64_t>(r), cfg.N);
        const SampleResult sample = sample_clients(cfg.N, sampling, server_rng);
        RoundPlan plan;
        plan.active = sample.active;
        plan.p = sample.p;
        plan.a.assign(static_cast<std::size_t>(cfg.N), cfg.a);
        plan.d.resize(static_cast<std::size_t>(cfg.N));
        plan.Q = q_table[std::min<std::size_t>(static_cast<std::size_t>(r), q_table.size() - 1)];
        for (int i = 0; i < cfg.N; ++i) {
          plan.d[static_cast<std::size_t>(i)] =
              cfg.d_inv_p ? 1.0 / plan.p[static_cast<std::size_t>(i)] : cfg.d;
          clients[static_cast<std::size_t>(i)].Q_hat =
              clients[static_cast<std::size_t>(i)].Q_y + plan.Q[static_cast<std::size_t>(i)];
        }

        MetricsRow row;
        row.round = r;
        Vec gx = Vec::Zero(server.x0.size());
        double loss = 0.0;
        for (const auto& c : clients) {
          gx += c.omega * c.objective->grad_x(server.x0, c.y);
          loss += c.omega * c.objective->loss(server.x0, c.y);
        }
        row.grad_norm_sq = gx.squaredNorm();
        row.train_loss = loss;
        row.gap = optimality_gap(server, clients, built.box);

        const RoundOutputU out = run_round_u(server, clients, plan, built.box, ropt, cfg.seed);
        row.consensus_err = out.consensus_err;
        emit(std::move(row));
      }
      detail::finalize_summary(summary, cfg);
      return summary;
    }

    // one-block problems through a preset
    const PresetName preset = preset_from_string(cfg.algorithm);
    PresetContext ctx;
    ctx.N = cfg.N;
    ctx.m = cfg.m;
    ctx.omegas = built.omegas;
    ctx.Q_table = q_table;
    ctx.gamma = cfg.gamma;
    ctx.eta = cfg.eta;
    ctx.a = cfg.a;
    ctx.d = cfg.d;
    ctx.d_inv_p = cfg.d_inv_p;
    const PresetRule rule = apply_preset(preset, ctx);

    std::vector<ClientState> clients;
    for (int i = 0; i < cfg.N; ++i) {
      ClientState c;
      c.objective = built.objectives[static_cast<std::size_t>(i)];
      c.lambda = Vec::Zero(built.x0.size());
      c.omega = built.omegas[static_cast<std::size_t>(i)];
      c.gamma = rule.client_gamma();
      c.eta = rule.client_eta();
      if (cfg.suggest && preset == PresetName::fedvra) {
        double q_mean = 0.0;
        for (const auto& qrow : q_table) q_mean += qrow[static_cast<std::size_t>(i)];
        q_mean /= static_cast<double>(q_table.size());
        const double d_for_suggest =
            cfg.d_inv_p ? static_cast<double>(cfg.N) / cfg.m : cfg.d;
        const auto sp =
            suggest_params(c.objective->smoothness(), static_cast<double>(cfg.m) / cfg.N, cfg.a,
                           d_for_suggest, std::max(1, static_cast<int>(std::lround(q_mean))));
        c.gamma = sp.gamma;
        c.eta = sp.eta;
      }
      clients.push_back(std::move(c));
    }
    ServerState server = ServerState::init(built.x0, clients);

    for (int r = 0; r < cfg.R; ++r) {
      RngStream server_rng = RngStream::server(cfg.seed, static_cast<std::uint64_t>(r), cfg.N);
      const SampleResult sample = sample_clients(cfg.N, sampling, server_rng);
      const RoundPlan plan = rule.plan(r, sample.active, sample.p);

      MetricsRow row;
      row.round = r;
      row.grad_norm_sq = global_grad(clients, server.x0).squaredNorm();
      row.train_loss = global_loss(clients, server.x0);
      if (built.test_shard) {
        row.test_accuracy = clients.front().objective->accuracy(server.x0, *built.test_shard);
      }
      if (cfg.diagnostics && !gamma_zero_mode(clients)) {
        const DiagnosticsRow diag = diagnostics(server, clients, plan);
        double xi_mean = 0.0;
        for (double xi : diag.Xi) xi_mean += xi;
        row.xi_mean = xi_mean / static_cast<double>(diag.Xi.size());
        row.potential = diag.P;
        row.remark1_d_ok = diag.remark1_d_ok ? 1 : 0;
        row.remark1_c_ok = diag.remark1_c_ok ? 1 : 0;
      }

      const RoundOutput out = run_round(server, clients, plan, ropt, cfg.seed);
      row.consensus_err = out.consensus_err;
      emit(std::move(row));
    }
  } catch (const DivergenceError& e) {
    summary.diverged = true;
    summary.divergence_info = e.what();
  }
  detail::finalize_summary(summary, cfg);
  return summary;
}

// CLI face: CSV to cfg.output, summary lines to stdout. Exit status 0 on
// success, 2 on divergence (partial CSV already flushed).
inline int run(const ExperimentConfig& cfg) {
  std::ofstream csv(cfg.output);
  if (!csv) {
    std::cerr << "cannot open output file: " << cfg.output << "\n";
    return 1;
  }
  const RunSummary summary = run_experiment_config(cfg, &csv);
  std::cout << "rounds_completed=" << summary.rows.size() << "\n";
  if (!summary.rows.empty()) {
    std::cout << "final_grad_norm_sq=" << summary.final_grad_norm_sq << "\n";
    if (summary.final_accuracy) std::cout << "final_accuracy=" << *summary.final_accuracy << "\n";
    if (summary.final_gap) std::cout << "final_gap=" << *summary.final_gap << "\n";
  }
  for (const auto& [thr, at] : summary.rounds_to) {
    if (summary.rows.empty() || !summary.rows.front().test_accuracy) break;
    std::cout << "rounds_to_" << thr << "=" << at << "\n";
  }
  if (summary.diverged) {
    std::cerr << "run aborted: " << summary.divergence_info << "\n";
    return 2;
  }
  return 0;
}

}  // namespace fedvra
