#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "asyncnet/compare.hpp"
#include "asyncnet/config.hpp"

using namespace asyncnet;

namespace {

nlohmann::json minimal_doc() {
  return nlohmann::json::parse(R"({
    "topology": {"type": "full", "n": 2},
    "m": 1,
    "mu": 0.01,
    "q": 1.0,
    "eta": 1.0
  })");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json small_compare_doc() {
  return nlohmann::json::parse(R"({
    "topology": {"type": "ring", "n": 4},
    "seed": 11,
    "m": 2,
    "mu": 0.02,
    "q": {"choices": [0.5, 0.9]},
    "eta": {"uniform": [0.5, 0.9]},
    "sigma_u2": 1.0,
    "sigma_xi2": 0.01,
    "simulation": {"trials": 3, "iterations": 700, "fusion_t": 50, "threads": 1}
  })");
}

}  // namespace

TEST_CASE("minimal config gets the documented defaults") {
  const ExperimentConfig cfg = config_from_json(minimal_doc());
  CHECK(cfg.trials == 100);
  CHECK(cfg.iterations == 6000);
  CHECK(cfg.tail_fraction == 0.1);
  CHECK(cfg.fusion_t == 100);
  CHECK(cfg.fusion_pool == 0);
  CHECK(cfg.topology.n_agents == 2);
  CHECK(cfg.m == 1);
  CHECK(cfg.q[0] == 1.0);
  CHECK(cfg.sigma_u2[0] == 1.0);
  CHECK(cfg.sigma_xi2[0] == 0.01);
  CHECK(std::abs(cfg.w_o.norm() - 1.0) <= 1e-12);
}

TEST_CASE("invalid configs are rejected with named errors") {
  auto bad_q = minimal_doc();
  bad_q["q"] = 1.5;
  CHECK_THROWS_AS(config_from_json(bad_q), ConfigError);

  auto no_topo = minimal_doc();
  no_topo.erase("topology");
  CHECK_THROWS_WITH_AS(config_from_json(no_topo),
                       "validation error: missing field 'topology'", ConfigError);

  auto unknown = minimal_doc();
  unknown["surprise"] = 1;
  CHECK_THROWS_WITH_AS(config_from_json(unknown),
                       "validation error: unknown key 'surprise' in config",
                       ConfigError);

  auto bad_eta = minimal_doc();
  bad_eta["eta"] = 0.0;
  CHECK_THROWS_AS(config_from_json(bad_eta), ConfigError);

  auto bad_frac = minimal_doc();
  bad_frac["simulation"] = {{"tail_fraction", 1.5}};
  CHECK_THROWS_AS(config_from_json(bad_frac), ConfigError);
}

TEST_CASE("broken documents surface parse errors") {
  const std::string path = "broken_config.json";
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  bool threw = false;
  try {
    load_config(path);
  } catch (const ConfigError& e) {
    threw = true;
    CHECK(std::string(e.what()).rfind("parse error", 0) == 0);
  }
  CHECK(threw);
  std::remove(path.c_str());
}

TEST_CASE("presets carry the reference scenario parameters") {
  const ExperimentConfig fig3 = preset("paper-fig3");
  CHECK(fig3.mu == 0.002);
  CHECK(fig3.fusion_t == 100);
  CHECK(fig3.topology.n_agents == 100);
  CHECK(fig3.trials == 100);
  CHECK(fig3.iterations == 6000);
  CHECK(fig3.m == 2);

  const ExperimentConfig desk = preset("desk");
  CHECK(desk.topology.n_agents == 20);
  CHECK(desk.mu == 0.005);
  CHECK(desk.trials == 50);
  CHECK(desk.iterations == 3000);
  for (int k = 0; k < 20; ++k) {
    const double q = desk.q[k];
    CHECK((q == 0.3 || q == 0.5 || q == 0.7 || q == 0.9));
  }

  CHECK_THROWS_WITH_AS(preset("nope"), "unknown preset 'nope'", ConfigError);
}

TEST_CASE("materialization is frozen by the seed") {
  const ExperimentConfig a = config_from_json(small_compare_doc());
  const ExperimentConfig b = config_from_json(small_compare_doc());
  CHECK((a.eta - b.eta).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((a.q - b.q).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((a.w_o - b.w_o).lpNorm<Eigen::Infinity>() == 0.0);

  const ExperimentConfig c = config_from_json(small_compare_doc(), 999);
  CHECK(c.seed == 999);
  CHECK((a.eta - c.eta).lpNorm<Eigen::Infinity>() > 0.0);
}

TEST_CASE("materialized configs round-trip through JSON") {
  const ExperimentConfig a = config_from_json(small_compare_doc());
  const nlohmann::ordered_json doc = config_to_json(a);
  const ExperimentConfig b =
      config_from_json(nlohmann::json::parse(doc.dump()));
  CHECK(b.topology.edges == a.topology.edges);
  CHECK((a.eta - b.eta).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((a.q - b.q).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((a.sigma_xi2 - b.sigma_xi2).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((a.w_o - b.w_o).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("CSV layout: header, one row per iteration, empty disabled columns") {
  ExperimentConfig cfg = config_from_json(minimal_doc());
  cfg.trials = 1;
  cfg.iterations = 3;
  cfg.strategies = {true, true, false, false};
  const BernoulliAsyncModel model = cfg.make_model();
  const MomentSet moments = compute_moments(model, cfg.second_moment);
  const SimulationResult sim = run_simulation(
      model, cfg.make_truth(), moments.a_bar, moments.p_bar, cfg.make_sim_options());
  emit_csv(sim, "tiny_curves.csv");
  const std::string text = slurp("tiny_curves.csv");
  std::stringstream ss(text);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(ss, line)) lines.push_back(line);
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] ==
        "iter,msd_db_dist_async,msd_db_dist_sync,msd_db_cent_async,msd_db_cent_sync");
  CHECK(lines[1].rfind("1,", 0) == 0);
  CHECK(lines[3].substr(lines[3].size() - 2) == ",,");
  // Byte-stable across emissions.
  emit_csv(sim, "tiny_curves_b.csv");
  CHECK(slurp("tiny_curves_b.csv") == text);
  std::remove("tiny_curves.csv");
  std::remove("tiny_curves_b.csv");
}

TEST_CASE("compare pipeline: checks, deltas, byte-stable artifacts") {
  const ExperimentConfig cfg = config_from_json(small_compare_doc());
  const ComparisonReport report = run_compare(cfg, {0.02, 0.04});
  CHECK(report.divergence.empty());
  REQUIRE(!report.lemma_checks.empty());
  const auto find = [&](const std::string& name) -> const LemmaCheck& {
    for (const auto& check : report.lemma_checks)
      if (check.name == name) return check;
    static LemmaCheck missing;
    FAIL("missing check ", name);
    return missing;
  };
  CHECK(find("fusion_moment_sums").pass);
  CHECK(find("fusion_covariance_psd").pass);
  CHECK(find("perron_residuals").pass);
  CHECK(find("theory_match_dist_cent").pass);
  CHECK(find("theory_ordering_async_sync").pass);
  CHECK(find("sweep_theory_gap_linearity").pass);
  for (int s = 0; s < kNumStrategies; ++s) {
    CHECK(report.sim.steady[s].has_value());
    CHECK(report.delta_db[s].has_value());
  }
  // dB convention inside the serialized report.
  const nlohmann::ordered_json doc = report_to_json(report);
  const double lin = doc["theory"]["msd_linear"]["dist_async"].get<double>();
  const double db = doc["theory"]["msd_db"]["dist_async"].get<double>();
  CHECK(std::abs(db - 10.0 * std::log10(lin)) <= 1e-12);

  emit_report(report, "report_a.json");
  emit_report(report, "report_b.json");
  CHECK(slurp("report_a.json") == slurp("report_b.json"));
  CHECK(!slurp("report_a.json").empty());
  std::remove("report_a.json");
  std::remove("report_b.json");

  // End-to-end determinism: a fresh run writes identical artifacts.
  const ComparisonReport again = run_compare(cfg, {0.02, 0.04});
  emit_report(again, "report_c.json");
  emit_csv(again.sim, "curves_c.csv");
  emit_csv(report.sim, "curves_a.csv");
  CHECK(slurp("report_c.json") == report_to_json(report).dump(2) + "\n");
  CHECK(slurp("curves_c.csv") == slurp("curves_a.csv"));
  std::remove("report_c.json");
  std::remove("curves_a.csv");
  std::remove("curves_c.csv");
}

TEST_CASE("deterministic model: four strategies coincide") {
  const nlohmann::json doc = nlohmann::json::parse(R"({
    "topology": {"type": "full", "n": 4},
    "seed": 2,
    "m": 2,
    "mu": 0.02,
    "q": 1.0,
    "eta": 1.0,
    "simulation": {"trials": 4, "iterations": 600, "fusion_t": 20, "threads": 1}
  })");
  const ComparisonReport report = run_compare(config_from_json(doc));
  // Predictions collapse: async equals sync exactly.
  CHECK(report.theory.msd_dist_async == report.theory.msd_dist_sync);
  CHECK(report.theory.msd_cent_async == report.theory.msd_cent_sync);
  CHECK(report.theory.rho_ms_async ==
        doctest::Approx(report.theory.rho_ms_sync).epsilon(1e-14));
  // Simulated steady states agree pairwise within statistical error.
  const auto& steady = report.sim.steady;
  for (int a = 0; a < kNumStrategies; ++a)
    for (int b = a + 1; b < kNumStrategies; ++b) {
      REQUIRE(steady[a].has_value());
      const double band = 4.0 * (steady[a]->std_err_db + steady[b]->std_err_db) + 0.1;
      CHECK(std::abs(steady[a]->msd_db - steady[b]->msd_db) <= band);
    }
}

TEST_CASE("quick validation suite passes") {
  const auto checks = run_validation_suite(true, 1);
  for (const auto& check : checks) {
    INFO(check.name, " measured=", check.measured, " threshold=", check.threshold);
    CHECK(check.pass);
  }
}
