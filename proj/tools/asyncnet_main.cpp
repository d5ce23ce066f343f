// asyncnet — simulate and predict adaptation over asynchronous networks.
//
// Subcommands:
//   theory          closed-form predictions for a scenario
//   simulate        run one strategy and dump its learning curve
//   compare         theory vs simulation for all enabled strategies
//   validate        property suite over random models
//   sample-moments  compute and cache the combination-matrix moments

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "asyncnet/compare.hpp"
#include "asyncnet/config.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::string preset_name;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  auto* config = cmd->add_option("--config", opts.config_path, "experiment config (JSON)");
  auto* preset = cmd->add_option("--preset", opts.preset_name, "built-in preset: paper-fig3 | desk");
  config->excludes(preset);
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&opts](std::uint64_t s) { opts.seed = s; },
      "override the config seed");
}

asyncnet::ExperimentConfig resolve_config(const CommonOptions& opts) {
  if (!opts.preset_name.empty()) {
    nlohmann::json doc = asyncnet::preset_document(opts.preset_name);
    return asyncnet::config_from_json(doc, opts.seed);
  }
  if (opts.config_path.empty())
    throw asyncnet::ConfigError("validation error: provide --config or --preset");
  return asyncnet::load_config(opts.config_path, opts.seed);
}

// -1 when the variable is unset (leave the config value alone).
int env_threads() {
  const char* value = std::getenv("ASYNCNET_THREADS");
  if (!value) return -1;
  return std::atoi(value);
}

void write_or_print(const nlohmann::ordered_json& doc, const std::string& path) {
  if (path.empty()) {
    std::cout << doc.dump(2) << "\n";
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << doc.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"asynchronous adaptive network simulator and predictor"};
  app.require_subcommand(1);

  CommonOptions theory_opts, sim_opts, compare_opts, moments_opts;
  std::string out_path, csv_path, strategy_name, sweep_spec;
  bool quick = false;
  std::uint64_t validate_seed = 1;

  auto* theory_cmd = app.add_subcommand("theory", "closed-form predictions only");
  add_common(theory_cmd, theory_opts);
  theory_cmd->add_option("--out", out_path, "write the report here instead of stdout");

  auto* sim_cmd = app.add_subcommand("simulate", "run a single strategy");
  add_common(sim_cmd, sim_opts);
  sim_cmd->add_option("--strategy", strategy_name,
                      "dist_async | dist_sync | cent_async | cent_sync")
      ->required();
  sim_cmd->add_option("--csv", csv_path, "learning-curve CSV path")->required();

  auto* compare_cmd = app.add_subcommand("compare", "theory vs simulation report");
  add_common(compare_cmd, compare_opts);
  compare_cmd->add_option("--out", out_path, "report JSON path");
  compare_cmd->add_option("--csv", csv_path, "learning-curve CSV path");
  compare_cmd->add_option("--mu-sweep", sweep_spec,
                          "comma-separated step-sizes for the scaling check");

  auto* validate_cmd = app.add_subcommand("validate", "run the property suite");
  validate_cmd->add_flag("--quick", quick, "fewer random models");
  validate_cmd->add_option("--seed", validate_seed, "suite seed");

  auto* moments_cmd = app.add_subcommand("sample-moments", "cache combination moments");
  add_common(moments_cmd, moments_opts);
  moments_cmd->add_option("--out", out_path, "moments JSON path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (theory_cmd->parsed()) {
      asyncnet::ExperimentConfig config = resolve_config(theory_opts);
      if (env_threads() >= 0) config.threads = env_threads();
      const asyncnet::BernoulliAsyncModel model = config.make_model();
      const asyncnet::MomentSet moments =
          asyncnet::compute_moments(model, config.second_moment);
      const asyncnet::TheoryReport report = asyncnet::build_theory_report(
          moments, model, config.make_profiles(), config.alpha);
      write_or_print(asyncnet::theory_to_json(report), out_path);
      if (config.alpha == 0.0)
        std::cerr << "note: alpha = 0, the stability gates are necessary-only\n";
      return 0;
    }

    if (sim_cmd->parsed()) {
      asyncnet::ExperimentConfig config = resolve_config(sim_opts);
      if (env_threads() >= 0) config.threads = env_threads();
      config.strategies = {false, false, false, false};
      bool found = false;
      for (int s = 0; s < asyncnet::kNumStrategies; ++s) {
        if (strategy_name == asyncnet::strategy_name(static_cast<asyncnet::Strategy>(s))) {
          config.strategies[s] = true;
          found = true;
        }
      }
      if (!found) throw asyncnet::ConfigError("validation error: unknown strategy '" + strategy_name + "'");
      const asyncnet::BernoulliAsyncModel model = config.make_model();
      const asyncnet::MomentSet moments =
          asyncnet::compute_moments(model, config.second_moment);
      const asyncnet::SimulationResult sim = asyncnet::run_simulation(
          model, config.make_truth(), moments.a_bar, moments.p_bar,
          config.make_sim_options());
      asyncnet::emit_csv(sim, csv_path);
      for (int s = 0; s < asyncnet::kNumStrategies; ++s)
        if (sim.steady[s])
          std::cout << asyncnet::strategy_name(static_cast<asyncnet::Strategy>(s))
                    << " steady-state: " << sim.steady[s]->msd_db << " dB (+- "
                    << sim.steady[s]->std_err_db << ")\n";
      return 0;
    }

    if (compare_cmd->parsed()) {
      asyncnet::ExperimentConfig config = resolve_config(compare_opts);
      if (env_threads() >= 0) config.threads = env_threads();
      std::vector<double> sweep;
      if (!sweep_spec.empty()) {
        std::stringstream ss(sweep_spec);
        std::string token;
        while (std::getline(ss, token, ',')) sweep.push_back(std::stod(token));
      }
      const asyncnet::ComparisonReport report = asyncnet::run_compare(config, sweep);
      if (!out_path.empty()) asyncnet::emit_report(report, out_path);
      if (!csv_path.empty()) asyncnet::emit_csv(report.sim, csv_path);
      if (out_path.empty()) std::cout << asyncnet::report_to_json(report).dump(2) << "\n";
      for (const auto& check : report.lemma_checks)
        std::cerr << (check.pass ? "PASS " : "FAIL ") << check.name
                  << " (measured " << check.measured << ", threshold "
                  << check.threshold << ")\n";
      if (!report.divergence.empty()) {
        std::cerr << "error: " << report.divergence << "\n";
        return 2;
      }
      return report.all_checks_pass() ? 0 : 1;
    }

    if (validate_cmd->parsed()) {
      const auto checks = asyncnet::run_validation_suite(quick, validate_seed);
      bool ok = true;
      for (const auto& check : checks) {
        std::cout << (check.pass ? "PASS " : "FAIL ") << check.name
                  << " (measured " << check.measured << ", threshold "
                  << check.threshold << ") — " << check.detail << "\n";
        ok = ok && check.pass;
      }
      return ok ? 0 : 1;
    }

    if (moments_cmd->parsed()) {
      asyncnet::ExperimentConfig config = resolve_config(moments_opts);
      const asyncnet::BernoulliAsyncModel model = config.make_model();
      const asyncnet::MomentSet moments =
          asyncnet::compute_moments(model, config.second_moment);
      write_or_print(asyncnet::moments_to_json(moments), out_path);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
