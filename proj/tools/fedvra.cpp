#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedvra/config.hpp"
#include "fedvra/runner.hpp"
#include "fedvra/verify.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json suite_to_json(const fedvra::SuiteResult& r) {
  return {{"suite", r.name},
          {"pass", r.pass},
          {"max_deviation", r.max_deviation},
          {"elapsed_seconds", r.elapsed_seconds},
          {"details", r.details}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FedVRA federated-optimization simulation engine"};
  app.require_subcommand(1);

  // run
  std::string config_path;
  std::uint64_t seed_override = 0;
  int rounds_override = -1;
  std::string output_override;
  auto* run_cmd = app.add_subcommand("run", "run an experiment from a config file");
  run_cmd->add_option("--config", config_path, "flat key-value config file")->required();
  auto* seed_opt = run_cmd->add_option("--seed", seed_override, "override the seed");
  auto* rounds_opt = run_cmd->add_option("--rounds", rounds_override, "override round count");
  auto* output_opt = run_cmd->add_option("--output", output_override, "override the CSV path");

  // verify
  std::string suite;
  bool as_json = false;
  auto* verify_cmd = app.add_subcommand("verify", "run a named verification suite");
  verify_cmd
      ->add_option("suite", suite,
                   "one of: lemma1, qtilde, aggregation, feasibility, presets, unbiasedness")
      ->required();
  verify_cmd->add_flag("--json", as_json, "emit a JSON report");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      fedvra::ExperimentConfig cfg = fedvra::parse_config(read_file(config_path));
      if (seed_opt->count()) cfg.seed = seed_override;
      if (rounds_opt->count()) cfg.R = rounds_override;
      if (output_opt->count()) cfg.output = output_override;
      return fedvra::run(cfg);
    }
    if (*verify_cmd) {
      const fedvra::SuiteResult result = fedvra::run_verify_suite(suite);
      if (as_json) {
        std::cout << suite_to_json(result).dump(2) << "\n";
      } else {
        std::cout << (result.pass ? "PASS" : "FAIL") << " " << result.name
                  << " max_deviation=" << result.max_deviation
                  << " elapsed=" << result.elapsed_seconds << "s\n";
        for (const auto& d : result.details) std::cout << "  " << d << "\n";
      }
      return result.pass ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
