#include "asyncnet/compare.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace asyncnet {

namespace {

double rel_diff(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale > 0.0 ? std::abs(a - b) / scale : 0.0;
}

bool model_has_randomness(const ExperimentConfig& config) {
  for (int k = 0; k < config.q.size(); ++k)
    if (config.q[k] < 1.0) return true;
  for (int k = 0; k < config.topology.n_agents; ++k)
    for (int l : config.topology.neighbors[k])
      if (l != k && config.eta(l, k) < 1.0) return true;
  return false;
}

}  // namespace

bool ComparisonReport::all_checks_pass() const {
  for (const auto& check : lemma_checks)
    if (!check.pass) return false;
  return divergence.empty();
}

double theory_msd_linear(const TheoryReport& theory, Strategy s) {
  switch (s) {
    case Strategy::kDistAsync: return theory.msd_dist_async;
    case Strategy::kDistSync: return theory.msd_dist_sync;
    case Strategy::kCentAsync: return theory.msd_cent_async;
    case Strategy::kCentSync: return theory.msd_cent_sync;
  }
  return 0.0;
}

ComparisonReport run_compare(const ExperimentConfig& config,
                             const std::vector<double>& mu_sweep) {
  ComparisonReport report;
  report.config_doc = config_to_json(config);

  const BernoulliAsyncModel model = config.make_model();
  const MomentSet moments = compute_moments(model, config.second_moment);
  const ScenarioTruth truth = config.make_truth();
  report.theory = build_theory_report(moments, model, truth.profiles, config.alpha);

  bool have_sim = false;
  try {
    report.sim = run_simulation(model, truth, moments.a_bar, moments.p_bar,
                                config.make_sim_options());
    have_sim = true;
  } catch (const std::runtime_error& e) {
    report.divergence = e.what();
  }

  for (int s = 0; s < kNumStrategies; ++s) {
    if (have_sim && report.sim.steady[s]) {
      const double theory_db =
          to_db(theory_msd_linear(report.theory, static_cast<Strategy>(s)));
      report.delta_db[s] = theory_db - report.sim.steady[s]->msd_db;
    }
  }

  auto& checks = report.lemma_checks;

  {
    const double sum_err = std::abs(moments.fusion.pi_bar.sum() - 1.0);
    const double row_err =
        (moments.fusion.C_pi * Eigen::VectorXd::Ones(moments.fusion.pi_bar.size()))
            .lpNorm<Eigen::Infinity>();
    const double measured = std::max(sum_err, row_err);
    checks.push_back({"fusion_moment_sums", measured <= 1e-9, measured, 1e-9,
                      "fusion weights sum to one and covariance rows sum to zero"});
  }
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(moments.C_p);
    const double min_eig = eig.eigenvalues().minCoeff();
    checks.push_back({"fusion_covariance_psd", min_eig >= -1e-9, min_eig, -1e-9,
                      "smallest eigenvalue of the fusion covariance"});
  }
  {
    const double r1 =
        (moments.a_bar * moments.p_bar - moments.p_bar).lpNorm<Eigen::Infinity>();
    const double r2 = (moments.s.apply(moments.p) - moments.p).lpNorm<Eigen::Infinity>();
    const double measured = std::max(r1, r2);
    checks.push_back({"perron_residuals", measured <= 1e-10, measured, 1e-10,
                      "fixed-point residuals of the two Perron vectors"});
  }
  {
    const double measured =
        std::max(rel_diff(report.theory.msd_dist_async, report.theory.msd_cent_async),
                 rel_diff(report.theory.msd_dist_sync, report.theory.msd_cent_sync));
    checks.push_back({"theory_match_dist_cent", measured <= 1e-13, measured, 1e-13,
                      "predicted distributed and centralized MSD coincide"});
  }
  {
    const double gap = report.theory.rho_ms_async - report.theory.rho_ms_sync;
    const double bound = 0.05 * (1.0 - report.theory.rho_ms_sync);
    checks.push_back({"rate_gap", gap >= -1e-12 && gap <= bound, gap, bound,
                      "async minus sync mean-square convergence rate"});
  }
  {
    const double gap = report.theory.msd_dist_async - report.theory.msd_dist_sync;
    const bool random = model_has_randomness(config);
    const bool pass = random ? gap > 0.0 : std::abs(gap) <= 1e-15;
    checks.push_back({"theory_ordering_async_sync", pass, gap, 0.0,
                      random ? "async prediction strictly above sync"
                             : "deterministic model: predictions coincide"});
  }
  if (have_sim) {
    const auto& steady = report.sim.steady;
    const auto pair_gap = [&](Strategy a, Strategy b) -> std::optional<double> {
      const auto& sa = steady[static_cast<int>(a)];
      const auto& sb = steady[static_cast<int>(b)];
      if (!sa || !sb) return std::nullopt;
      return sa->msd_db - sb->msd_db;
    };
    const auto g_async = pair_gap(Strategy::kDistAsync, Strategy::kCentAsync);
    const auto g_sync = pair_gap(Strategy::kDistSync, Strategy::kCentSync);
    if (g_async || g_sync) {
      double measured = 0.0;
      if (g_async) measured = std::max(measured, std::abs(*g_async));
      if (g_sync) measured = std::max(measured, std::abs(*g_sync));
      checks.push_back({"sim_match_dist_cent", measured <= 0.5, measured, 0.5,
                        "simulated distributed vs centralized steady-state gap (dB)"});
    }
    const auto o_dist = pair_gap(Strategy::kDistAsync, Strategy::kDistSync);
    const auto o_cent = pair_gap(Strategy::kCentAsync, Strategy::kCentSync);
    if (o_dist || o_cent) {
      double measured = std::numeric_limits<double>::infinity();
      if (o_dist) measured = std::min(measured, *o_dist);
      if (o_cent) measured = std::min(measured, *o_cent);
      checks.push_back({"sim_ordering_async_sync", measured >= -0.2, measured, -0.2,
                        "simulated async at or above sync (dB margin)"});
    }
  }

  if (!mu_sweep.empty()) {
    for (double mu_s : mu_sweep) {
      SweepPoint point;
      point.mu = mu_s;
      // Keep the adaptation horizon constant: smaller steps converge
      // proportionally slower, so the iteration count scales inversely.
      point.iterations = static_cast<int>(
          std::llround(config.iterations * (config.mu / mu_s)));
      BernoulliAsyncModel model_s(
          config.topology, config.q, config.eta,
          Eigen::VectorXd::Constant(config.topology.n_agents, mu_s));
      point.theory_dist_async =
          msd_lms_async(moments.p_bar, moments.P_p, model_s, truth.profiles);
      point.theory_dist_sync = msd_lms_sync(moments.p_bar, model_s, truth.profiles);
      SimOptions opts = config.make_sim_options();
      opts.iterations = point.iterations;
      opts.enabled = {true, true, false, false};
      try {
        const SimulationResult sim =
            run_simulation(model_s, truth, moments.a_bar, moments.p_bar, opts);
        point.sim_dist_async = sim.steady[0]->msd_linear;
        point.sim_dist_sync = sim.steady[1]->msd_linear;
      } catch (const std::runtime_error& e) {
        if (report.divergence.empty()) report.divergence = e.what();
      }
      report.sweep.push_back(point);
    }
    if (report.sweep.size() >= 2) {
      const auto& lo = report.sweep.front();
      const auto& hi = report.sweep.back();
      const double mu_ratio = hi.mu / lo.mu;
      const double theory_ratio = (hi.theory_dist_async - hi.theory_dist_sync) /
                                  (lo.theory_dist_async - lo.theory_dist_sync);
      const double measured = rel_diff(theory_ratio, mu_ratio);
      checks.push_back({"sweep_theory_gap_linearity", measured <= 1e-12, measured,
                        1e-12, "predicted async-sync gap scales linearly with mu"});
      if (lo.sim_dist_async && hi.sim_dist_async) {
        const double sim_ratio = (*hi.sim_dist_async - *hi.sim_dist_sync) /
                                 (*lo.sim_dist_async - *lo.sim_dist_sync);
        const double rel = sim_ratio / mu_ratio;
        checks.push_back({"sweep_sim_gap_ratio", rel >= 0.75 && rel <= 1.25,
                          sim_ratio, mu_ratio,
                          "simulated gap ratio within 25% of the mu ratio"});
      }
    }
  }
  return report;
}

nlohmann::ordered_json report_to_json(const ComparisonReport& report) {
  nlohmann::ordered_json j;
  j["config"] = report.config_doc;
  j["theory"] = theory_to_json(report.theory);
  nlohmann::ordered_json sim = nlohmann::ordered_json::object();
  for (int s = 0; s < kNumStrategies; ++s) {
    const auto& steady = report.sim.steady[s];
    if (!steady) continue;
    sim[strategy_name(static_cast<Strategy>(s))] = nlohmann::ordered_json{
        {"msd_linear", steady->msd_linear},
        {"msd_db", steady->msd_db},
        {"tail_window", steady->tail_window},
        {"stderr_linear", steady->std_err_linear},
        {"stderr_db", steady->std_err_db}};
  }
  j["simulated"] = sim;
  nlohmann::ordered_json deltas = nlohmann::ordered_json::object();
  for (int s = 0; s < kNumStrategies; ++s)
    if (report.delta_db[s])
      deltas[strategy_name(static_cast<Strategy>(s))] = *report.delta_db[s];
  j["deltas_db"] = deltas;
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const auto& check : report.lemma_checks) {
    checks.push_back(nlohmann::ordered_json{{"name", check.name},
                                            {"pass", check.pass},
                                            {"measured", check.measured},
                                            {"threshold", check.threshold},
                                            {"detail", check.detail}});
  }
  j["lemma_checks"] = checks;
  if (!report.sweep.empty()) {
    nlohmann::ordered_json sweep = nlohmann::ordered_json::array();
    for (const auto& point : report.sweep) {
      nlohmann::ordered_json p{{"mu", point.mu},
                               {"iterations", point.iterations},
                               {"theory_dist_async", point.theory_dist_async},
                               {"theory_dist_sync", point.theory_dist_sync}};
      if (point.sim_dist_async) p["sim_dist_async"] = *point.sim_dist_async;
      if (point.sim_dist_sync) p["sim_dist_sync"] = *point.sim_dist_sync;
      sweep.push_back(p);
    }
    j["mu_sweep"] = sweep;
  }
  if (!report.divergence.empty()) j["divergence"] = report.divergence;
  return j;
}

void emit_csv(const SimulationResult& sim, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "iter,msd_db_dist_async,msd_db_dist_sync,msd_db_cent_async,msd_db_cent_sync\n";
  int iters = 0;
  for (const auto& curve : sim.curves)
    if (curve) iters = std::max(iters, curve->n_iters);
  char buf[64];
  for (int i = 0; i < iters; ++i) {
    out << (i + 1);
    for (int s = 0; s < kNumStrategies; ++s) {
      out << ',';
      if (sim.curves[s] && i < sim.curves[s]->n_iters) {
        std::snprintf(buf, sizeof(buf), "%.6f", to_db(sim.curves[s]->msd[i]));
        out << buf;
      }
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

void emit_report(const ComparisonReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << report_to_json(report).dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

FusionSamplerCheck check_fusion_sampler(const BernoulliAsyncModel& model,
                                        const MomentSet& moments, int t,
                                        long samples, std::uint64_t seed) {
  const int n = model.n_agents();
  Rng rng(seed, streams::kValidation);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(n, n);
  for (long s = 0; s < samples; ++s) {
    const Eigen::VectorXd phi = sample_fusion_vector(model, t, rng);
    mean += phi;
    second.noalias() += phi * phi.transpose();
  }
  mean /= static_cast<double>(samples);
  second /= static_cast<double>(samples);
  FusionSamplerCheck check;
  check.samples = samples;
  check.mean_err_inf = (mean - moments.p_bar).lpNorm<Eigen::Infinity>();
  check.second_err_inf = (second - moments.P_p).lpNorm<Eigen::Infinity>();
  return check;
}

namespace {

struct WorstCase {
  double value = 0.0;
  bool initialized = false;
  void track_max(double v) {
    if (!initialized || v > value) value = v;
    initialized = true;
  }
  void track_min(double v) {
    if (!initialized || v < value) value = v;
    initialized = true;
  }
};

}  // namespace

std::vector<LemmaCheck> run_validation_suite(bool quick, std::uint64_t seed) {
  const int n_models = quick ? 25 : 100;
  WorstCase min_eig, row_sum, resid_mean, resid_second, min_perron_entry,
      diag_margin, crosscheck, ordering_gap, rate_gap_margin, sync_radius_err,
      fusion_sums, linearity_err;

  for (int i = 0; i < n_models; ++i) {
    Rng rng(seed, streams::kValidation + 977 * (i + 1));
    const int n = 3 + static_cast<int>(rng.index(10));  // N in [3, 12]
    Topology topo;
    switch (i % 3) {
      case 0: topo = ring_topology(n); break;
      case 1: topo = full_topology(n); break;
      default:
        topo = random_geometric_topology(n, 0.8, seed + 31 * i);
        break;
    }
    Eigen::MatrixXd eta = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < n; ++k)
      for (int l : topo.neighbors[k])
        if (l != k) eta(l, k) = rng.uniform(0.4, 0.8);
    Eigen::VectorXd q(n);
    const double q_choices[4] = {0.3, 0.5, 0.7, 0.9};
    for (int k = 0; k < n; ++k) q[k] = q_choices[rng.index(4)];
    const double mu = rng.uniform(0.001, 0.005);
    const BernoulliAsyncModel model(topo, q, eta,
                                    Eigen::VectorXd::Constant(n, mu));

    const int m = 1 + (i % 3);
    std::vector<AgentDataProfile> profiles(n);
    for (int k = 0; k < n; ++k) {
      Eigen::VectorXd diag(m);
      for (int d = 0; d < m; ++d) diag[d] = rng.uniform(0.5, 2.0);
      profiles[k].r_u = diag.cast<std::complex<double>>().asDiagonal();
      profiles[k].sigma_xi2 = rng.uniform(0.005, 0.05);
    }

    const MomentSet moments = compute_moments(model);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(moments.C_p);
    min_eig.track_min(eig.eigenvalues().minCoeff());
    row_sum.track_max((moments.C_p * Eigen::VectorXd::Ones(n)).lpNorm<Eigen::Infinity>());
    resid_mean.track_max(
        (moments.a_bar * moments.p_bar - moments.p_bar).lpNorm<Eigen::Infinity>());
    resid_second.track_max(
        (moments.s.apply(moments.p) - moments.p).lpNorm<Eigen::Infinity>());
    min_perron_entry.track_min(
        std::min(moments.p_bar.minCoeff(), moments.p.minCoeff()));
    for (int k = 0; k < n; ++k)
      diag_margin.track_min(moments.P_p(k, k) -
                            moments.p_bar[k] * moments.p_bar[k]);
    fusion_sums.track_max(std::max(
        std::abs(moments.fusion.pi_bar.sum() - 1.0),
        (moments.fusion.C_pi * Eigen::VectorXd::Ones(n)).lpNorm<Eigen::Infinity>()));

    const TheoryReport theory =
        build_theory_report(moments, model, profiles, 0.0);
    const double lms_async = msd_lms_async(moments.p_bar, moments.P_p, model, profiles);
    const double lms_sync = msd_lms_sync(moments.p_bar, model, profiles);
    crosscheck.track_max(rel_diff(theory.msd_dist_async, lms_async));
    crosscheck.track_max(rel_diff(theory.msd_dist_sync, lms_sync));
    ordering_gap.track_min(lms_async - lms_sync);
    const double gap = theory.rho_ms_async - theory.rho_ms_sync;
    rate_gap_margin.track_min(gap);
    rate_gap_margin.track_min(100.0 * theory.nu * theory.nu - gap);
    sync_radius_err.track_max(
        std::abs(theory.rho_ms_sync - theory.rho_mean * theory.rho_mean));

    // Exact linear scaling of every prediction in mu.
    const BernoulliAsyncModel doubled(topo, q, eta,
                                      Eigen::VectorXd::Constant(n, 2.0 * mu));
    linearity_err.track_max(rel_diff(
        msd_lms_async(moments.p_bar, moments.P_p, doubled, profiles), 2.0 * lms_async));
    linearity_err.track_max(
        rel_diff(msd_lms_sync(moments.p_bar, doubled, profiles), 2.0 * lms_sync));
  }

  // Quadratic scaling of the rate gap, on one fixed model.
  double slope = 0.0;
  {
    Rng rng(seed, streams::kValidation);
    const int n = 6;
    Topology topo = ring_topology(n);
    Eigen::MatrixXd eta = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < n; ++k)
      for (int l : topo.neighbors[k])
        if (l != k) eta(l, k) = rng.uniform(0.4, 0.8);
    Eigen::VectorXd q(n);
    const double q_choices[4] = {0.3, 0.5, 0.7, 0.9};
    for (int k = 0; k < n; ++k) q[k] = q_choices[rng.index(4)];
    std::vector<AgentDataProfile> profiles(n);
    for (int k = 0; k < n; ++k) {
      profiles[k].r_u = rng.uniform(0.5, 2.0) * Eigen::MatrixXcd::Identity(2, 2);
      profiles[k].sigma_xi2 = 0.01;
    }
    double gaps[2];
    const double mus[2] = {0.001, 0.004};
    for (int j = 0; j < 2; ++j) {
      const BernoulliAsyncModel model(topo, q, eta,
                                      Eigen::VectorXd::Constant(n, mus[j]));
      const MomentSet moments = compute_moments(model);
      const TheoryReport theory = build_theory_report(moments, model, profiles, 0.0);
      gaps[j] = theory.rho_ms_async - theory.rho_ms_sync;
    }
    slope = std::log(gaps[1] / gaps[0]) / std::log(mus[1] / mus[0]);
  }

  std::vector<LemmaCheck> checks;
  checks.push_back({"covariance_psd", min_eig.value >= -1e-9, min_eig.value, -1e-9,
                    "smallest eigenvalue of P_p - p_bar p_bar^T over all models"});
  checks.push_back({"covariance_zero_row_sums", row_sum.value <= 1e-9, row_sum.value,
                    1e-9, "worst row-sum norm of the fusion covariance"});
  checks.push_back({"perron_residual_mean", resid_mean.value <= 1e-10,
                    resid_mean.value, 1e-10, "worst ||Abar p - p||_inf"});
  checks.push_back({"perron_residual_second", resid_second.value <= 1e-10,
                    resid_second.value, 1e-10, "worst ||S p - p||_inf"});
  checks.push_back({"perron_positive", min_perron_entry.value > 0.0,
                    min_perron_entry.value, 0.0, "smallest Perron entry"});
  checks.push_back({"diag_dominates_square", diag_margin.value >= -1e-12,
                    diag_margin.value, -1e-12, "min of p_kk - pbar_k^2"});
  checks.push_back({"fusion_moment_sums", fusion_sums.value <= 1e-9,
                    fusion_sums.value, 1e-9,
                    "fusion mean sums to one, covariance rows to zero"});
  checks.push_back({"closed_form_crosscheck", crosscheck.value <= 1e-12,
                    crosscheck.value, 1e-12,
                    "trace predictor vs closed form, relative"});
  checks.push_back({"theory_ordering_async_sync", ordering_gap.value > 0.0,
                    ordering_gap.value, 0.0, "smallest async-sync prediction gap"});
  checks.push_back({"rate_gap_bounds", rate_gap_margin.value >= -1e-12,
                    rate_gap_margin.value, -1e-12,
                    "rate gap nonnegative and below 100 nu^2"});
  checks.push_back({"sync_radius_identity", sync_radius_err.value <= 1e-10,
                    sync_radius_err.value, 1e-10,
                    "rho(F_sync) equals the squared mean rate"});
  checks.push_back({"mu_linear_scaling", linearity_err.value <= 1e-12,
                    linearity_err.value, 1e-12,
                    "doubling mu doubles every MSD prediction"});
  checks.push_back({"rate_gap_quadratic_slope", std::abs(slope - 2.0) <= 0.5, slope,
                    2.0, "log-log slope of the rate gap vs mu"});
  return checks;
}

}  // namespace asyncnet
