#pragma once

#include <optional>
#include <string>
#include <vector>

#include "asyncnet/config.hpp"
#include "asyncnet/moments.hpp"
#include "asyncnet/simulator.hpp"
#include "asyncnet/theory.hpp"

namespace asyncnet {

// One named pass/fail record with the measured quantity and the
// threshold it was held against.
struct LemmaCheck {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct SweepPoint {
  double mu = 0.0;
  int iterations = 0;
  double theory_dist_async = 0.0;  // linear
  double theory_dist_sync = 0.0;
  std::optional<double> sim_dist_async;
  std::optional<double> sim_dist_sync;
};

struct ComparisonReport {
  nlohmann::ordered_json config_doc;
  TheoryReport theory;
  SimulationResult sim;
  std::array<std::optional<double>, kNumStrategies> delta_db;  // theory - sim
  std::vector<LemmaCheck> lemma_checks;
  std::vector<SweepPoint> sweep;
  std::string divergence;  // empty when the run completed

  bool all_checks_pass() const;
};

// Full pipeline: moments -> theory -> enabled strategies -> checks.
// Divergence aborts the simulation but still yields a partial report
// with the failure recorded.
ComparisonReport run_compare(const ExperimentConfig& config,
                             const std::vector<double>& mu_sweep = {});

double theory_msd_linear(const TheoryReport& theory, Strategy s);

nlohmann::ordered_json report_to_json(const ComparisonReport& report);

// CSV with header iter,msd_db_dist_async,msd_db_dist_sync,
// msd_db_cent_async,msd_db_cent_sync; one row per iteration, empty
// fields for strategies that did not run. Byte-stable for fixed inputs.
void emit_csv(const SimulationResult& sim, const std::string& path);
void emit_report(const ComparisonReport& report, const std::string& path);

// Empirical moments of the fusion sampler against the Perron targets.
struct FusionSamplerCheck {
  double mean_err_inf = 0.0;    // || mean(phi) - p_bar ||_inf
  double second_err_inf = 0.0;  // || mean(phi phi^T) - P_p ||_inf
  long samples = 0;
};
FusionSamplerCheck check_fusion_sampler(const BernoulliAsyncModel& model,
                                        const MomentSet& moments, int t,
                                        long samples, std::uint64_t seed);

// Property suite over randomly generated Bernoulli models: covariance
// validity, Perron residuals, closed-form cross-checks, ordering and
// rate relations. quick mode trims the model count.
std::vector<LemmaCheck> run_validation_suite(bool quick, std::uint64_t seed);

}  // namespace asyncnet
