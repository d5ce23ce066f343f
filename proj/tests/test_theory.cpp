#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "asyncnet/moments.hpp"
#include "asyncnet/theory.hpp"

using namespace asyncnet;

namespace {

Topology line3() { return topology_from_edges(3, {{0, 1}, {1, 2}}); }

BernoulliAsyncModel make_model(const Topology& topo, Eigen::VectorXd q,
                               double eta, double mu) {
  const int n = topo.n_agents;
  Eigen::MatrixXd eta_mat = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k)
    for (int l : topo.neighbors[k])
      if (l != k) eta_mat(l, k) = eta;
  return BernoulliAsyncModel(topo, std::move(q), eta_mat,
                             Eigen::VectorXd::Constant(n, mu));
}

BernoulliAsyncModel uniform_model(const Topology& topo, double q, double eta,
                                  double mu) {
  return make_model(topo, Eigen::VectorXd::Constant(topo.n_agents, q), eta, mu);
}

std::vector<AgentDataProfile> white_profiles(int n, int m, double sigma_u2,
                                             double sigma_xi2) {
  std::vector<AgentDataProfile> profiles(n);
  for (int k = 0; k < n; ++k) {
    profiles[k].r_u = sigma_u2 * Eigen::MatrixXcd::Identity(m, m);
    profiles[k].sigma_xi2 = sigma_xi2;
  }
  return profiles;
}

// Heterogeneous three-agent scenario used by several cross-checks.
struct Line3Case {
  BernoulliAsyncModel model;
  MomentSet moments;
  std::vector<AgentDataProfile> profiles;
  StepSizeMoments ssm;
};

Line3Case line3_case() {
  Eigen::VectorXd q(3);
  q << 0.3, 0.5, 0.9;
  BernoulliAsyncModel model = make_model(line3(), q, 0.5, 0.002);
  MomentSet moments = compute_moments(model);
  std::vector<AgentDataProfile> profiles(3);
  const double sigma_xi[3] = {0.01, 0.02, 0.005};
  for (int k = 0; k < 3; ++k) {
    profiles[k].r_u = Eigen::MatrixXcd::Identity(2, 2);
    profiles[k].sigma_xi2 = sigma_xi[k];
  }
  StepSizeMoments ssm = step_size_moments(model);
  return {std::move(model), std::move(moments), std::move(profiles), std::move(ssm)};
}

}  // namespace

TEST_CASE("step-size moments of the on/off process") {
  const BernoulliAsyncModel sure = uniform_model(ring_topology(3), 1.0, 1.0, 0.002);
  const StepSizeMoments m1 = step_size_moments(sure);
  CHECK(m1.mu_bar[0] == 0.002);
  CHECK(m1.c_mu_diag[0] == 0.0);

  const BernoulliAsyncModel half = uniform_model(ring_topology(3), 0.5, 1.0, 0.01);
  const StepSizeMoments m2 = step_size_moments(half);
  CHECK(m2.mu_bar[0] == doctest::Approx(0.005).epsilon(1e-15));
  CHECK(m2.mu2_bar[0] == doctest::Approx(5e-5).epsilon(1e-15));
  CHECK(m2.c_mu_diag[0] == doctest::Approx(2.5e-5).epsilon(1e-12));

  const BernoulliAsyncModel quarter = uniform_model(ring_topology(3), 0.25, 1.0, 0.002);
  CHECK(nu_parameter(step_size_moments(quarter)) ==
        doctest::Approx(0.004).epsilon(1e-12));
}

TEST_CASE("stability gates") {
  const auto profiles = white_profiles(1, 2, 1.0, 0.01);
  const BernoulliAsyncModel ok = uniform_model(ring_topology(1), 1.0, 1.0, 0.002);
  CHECK(stability_check(step_size_moments(ok), profiles, 0.0).ms_stable);

  const BernoulliAsyncModel hot = uniform_model(ring_topology(1), 1.0, 1.0, 1.5);
  CHECK_FALSE(stability_check(step_size_moments(hot), profiles, 0.0).ms_stable);

  // lambda_min/lambda_max^2 = 1/16; mu2/mu1 = mu = 0.002 clears it.
  std::vector<AgentDataProfile> skew(1);
  Eigen::VectorXcd diag(2);
  diag << 1.0, 4.0;
  skew[0].r_u = diag.asDiagonal();
  skew[0].sigma_xi2 = 0.01;
  const BernoulliAsyncModel half = uniform_model(ring_topology(1), 0.5, 1.0, 0.002);
  const StabilityReport rep = stability_check(step_size_moments(half), skew, 0.0);
  CHECK(rep.ms_stable);
  CHECK(rep.fourth_stable);
  CHECK(rep.nu == doctest::Approx(0.002 / std::sqrt(0.5)).epsilon(1e-12));
}

TEST_CASE("H for a single agent is the scaled augmented identity") {
  const auto profiles = white_profiles(1, 2, 1.0, 0.01);
  const StepSizeMoments ssm =
      step_size_moments(uniform_model(ring_topology(1), 1.0, 1.0, 0.002));
  const Eigen::VectorXd p_bar = Eigen::VectorXd::Ones(1);
  const Eigen::MatrixXcd h = build_H(p_bar, ssm, profiles);
  CHECK((h - 0.002 * Eigen::MatrixXcd::Identity(4, 4)).lpNorm<Eigen::Infinity>() <=
        1e-18);
}

TEST_CASE("H for identical agents is the common augmented Hessian") {
  const auto profiles = white_profiles(2, 2, 1.5, 0.01);
  const BernoulliAsyncModel model = uniform_model(full_topology(2), 1.0, 1.0, 0.004);
  const StepSizeMoments ssm = step_size_moments(model);
  Eigen::VectorXd p_bar(2);
  p_bar << 0.5, 0.5;
  const Eigen::MatrixXcd h = build_H(p_bar, ssm, profiles);
  const Eigen::MatrixXcd expected = 0.004 * augmented_hessian(profiles[0].r_u);
  CHECK((h - expected).lpNorm<Eigen::Infinity>() <= 1e-16);
}

TEST_CASE("H matches a brute-force summation oracle") {
  const Line3Case c = line3_case();
  const Eigen::MatrixXcd h = build_H(c.moments.p_bar, c.ssm, c.profiles);
  Eigen::MatrixXcd oracle = Eigen::MatrixXcd::Zero(4, 4);
  for (int k = 0; k < 3; ++k) {
    const double w = c.moments.p_bar[k] * c.model.q(k) * c.model.mu(k);
    oracle.topLeftCorner(2, 2) += w * c.profiles[k].r_u;
    oracle.bottomRightCorner(2, 2) += w * c.profiles[k].r_u.transpose();
  }
  CHECK((h - oracle).lpNorm<Eigen::Infinity>() <= 1e-14);
}

TEST_CASE("noise aggregates: single agent and Bernoulli inflation") {
  const auto profiles = white_profiles(1, 2, 1.0, 0.01);
  const Eigen::VectorXd p_bar = Eigen::VectorXd::Ones(1);
  const Eigen::MatrixXd P_p = Eigen::MatrixXd::Ones(1, 1);

  const StepSizeMoments on =
      step_size_moments(uniform_model(ring_topology(1), 1.0, 1.0, 0.002));
  const Eigen::MatrixXcd r_sync = build_R_sync(p_bar, on, profiles);
  const Eigen::MatrixXcd r_async = build_R_async(P_p, on, profiles);
  const Eigen::MatrixXcd expected =
      0.002 * 0.002 * 0.01 * Eigen::MatrixXcd::Identity(4, 4);
  CHECK((r_sync - expected).lpNorm<Eigen::Infinity>() <= 1e-20);
  CHECK((r_async - r_sync).lpNorm<Eigen::Infinity>() <= 1e-20);

  // q = 1/2: E(mu^2) = q mu^2 versus (q mu)^2 doubles the async noise.
  const StepSizeMoments half =
      step_size_moments(uniform_model(ring_topology(1), 0.5, 1.0, 0.002));
  const Eigen::MatrixXcd r_sync_half = build_R_sync(p_bar, half, profiles);
  const Eigen::MatrixXcd r_async_half = build_R_async(P_p, half, profiles);
  CHECK((r_async_half - 2.0 * r_sync_half).lpNorm<Eigen::Infinity>() <= 1e-20);
}

TEST_CASE("async noise dominates sync noise (PSD difference)") {
  const Line3Case c = line3_case();
  const Eigen::MatrixXcd diff =
      build_R_async(c.moments.P_p, c.ssm, c.profiles) -
      build_R_sync(c.moments.p_bar, c.ssm, c.profiles);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(diff);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-15);
  CHECK(diff.trace().real() > 0.0);
}

TEST_CASE("sync operator radius is the squared mean rate") {
  const Line3Case c = line3_case();
  const Eigen::MatrixXcd h = build_H(c.moments.p_bar, c.ssm, c.profiles);
  const Eigen::MatrixXcd f_sync = build_F_sync(c.moments.p_bar, c.ssm, c.profiles);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(h);
  const double rho0 = 1.0 - eig.eigenvalues().minCoeff();
  CHECK(std::abs(spectral_radius_hermitian(f_sync) - rho0 * rho0) <= 1e-10);
  // Brute-force double-sum oracle for the factored construction.
  Eigen::MatrixXcd oracle = Eigen::MatrixXcd::Zero(16, 16);
  std::vector<Eigen::MatrixXcd> dk(3);
  for (int k = 0; k < 3; ++k)
    dk[k] = Eigen::MatrixXcd::Identity(4, 4) -
            c.ssm.mu_bar[k] * augmented_hessian(c.profiles[k].r_u);
  for (int l = 0; l < 3; ++l)
    for (int k = 0; k < 3; ++k) {
      const double w = c.moments.p_bar[l] * c.moments.p_bar[k];
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
          oracle.block(i * 4, j * 4, 4, 4) += w * dk[l].transpose()(i, j) * dk[k];
    }
  CHECK((f_sync - oracle).lpNorm<Eigen::Infinity>() <= 1e-15);
}

TEST_CASE("deterministic models collapse the async operator onto the sync one") {
  const BernoulliAsyncModel model = uniform_model(line3(), 1.0, 1.0, 0.002);
  const MomentSet moments = compute_moments(model);
  const StepSizeMoments ssm = step_size_moments(model);
  const auto profiles = white_profiles(3, 2, 1.0, 0.01);
  const Eigen::MatrixXcd f_sync = build_F_sync(moments.p_bar, ssm, profiles);
  const Eigen::MatrixXcd f_async = build_F_async(moments.P_p, ssm, profiles);
  CHECK((f_async - f_sync).lpNorm<Eigen::Infinity>() <= 1e-14);
}

TEST_CASE("async rate gap is positive and quadratically small") {
  const Line3Case c = line3_case();
  const double rho_sync = spectral_radius_hermitian(
      build_F_sync(c.moments.p_bar, c.ssm, c.profiles));
  const double rho_async = spectral_radius_hermitian(
      build_F_async(c.moments.P_p, c.ssm, c.profiles));
  const double nu = nu_parameter(c.ssm);
  CHECK(rho_async - rho_sync > 0.0);
  CHECK(rho_async - rho_sync <= 100.0 * nu * nu);
}

TEST_CASE("trace predictor closed forms") {
  // H = cI, R = rI in dimension 2M: prediction is 2M r / (4c).
  const Eigen::MatrixXcd h = 0.002 * Eigen::MatrixXcd::Identity(4, 4);
  const Eigen::MatrixXcd r = 4e-8 * Eigen::MatrixXcd::Identity(4, 4);
  CHECK(msd_general(h, r) == doctest::Approx(2e-5).epsilon(1e-12));
  CHECK(to_db(msd_general(h, r)) == doctest::Approx(-46.9897).epsilon(1e-5));
  CHECK_THROWS_WITH_AS(msd_general(Eigen::MatrixXcd::Zero(4, 4), r), "singular H",
                       std::runtime_error);
}

TEST_CASE("degenerate aggregate covariance is reported") {
  std::vector<AgentDataProfile> flat(2);
  flat[0].r_u = Eigen::MatrixXcd::Zero(2, 2);
  flat[0].sigma_xi2 = 0.01;
  flat[1] = flat[0];
  Eigen::VectorXd p_bar(2);
  p_bar << 0.5, 0.5;
  const BernoulliAsyncModel model = uniform_model(full_topology(2), 1.0, 1.0, 0.002);
  CHECK_THROWS_WITH_AS(msd_lms_sync(p_bar, model, flat),
                       "singular aggregate covariance", std::runtime_error);
}

TEST_CASE("single-agent closed forms and their q dependence") {
  const auto profiles = white_profiles(1, 2, 1.0, 0.01);
  const Eigen::VectorXd p_bar = Eigen::VectorXd::Ones(1);
  const Eigen::MatrixXd P_p = Eigen::MatrixXd::Ones(1, 1);
  const BernoulliAsyncModel half = uniform_model(ring_topology(1), 0.5, 1.0, 0.002);
  CHECK(msd_lms_async(p_bar, P_p, half, profiles) ==
        doctest::Approx(2e-5).epsilon(1e-12));
  CHECK(msd_lms_sync(p_bar, half, profiles) == doctest::Approx(1e-5).epsilon(1e-12));
  const BernoulliAsyncModel on = uniform_model(ring_topology(1), 1.0, 1.0, 0.002);
  CHECK(msd_lms_async(p_bar, P_p, on, profiles) ==
        doctest::Approx(2e-5).epsilon(1e-12));
  CHECK(msd_lms_sync(p_bar, on, profiles) == doctest::Approx(2e-5).epsilon(1e-12));
}

TEST_CASE("closed forms agree with the trace predictor route") {
  const Line3Case c = line3_case();
  const TheoryReport report =
      build_theory_report(c.moments, c.model, c.profiles, 0.0);
  const double lms_async =
      msd_lms_async(c.moments.p_bar, c.moments.P_p, c.model, c.profiles);
  const double lms_sync = msd_lms_sync(c.moments.p_bar, c.model, c.profiles);
  CHECK(std::abs(report.msd_dist_async - lms_async) <= 1e-12 * lms_async);
  CHECK(std::abs(report.msd_dist_sync - lms_sync) <= 1e-12 * lms_sync);
  // Matched fusion moments: centralized route reproduces the values.
  CHECK(std::abs(report.msd_cent_async - report.msd_dist_async) <=
        1e-13 * report.msd_dist_async);
  CHECK(std::abs(report.msd_cent_sync - report.msd_dist_sync) <=
        1e-13 * report.msd_dist_sync);
}

TEST_CASE("every prediction is exactly linear in mu") {
  const Line3Case c = line3_case();
  Eigen::VectorXd q(3);
  q << 0.3, 0.5, 0.9;
  const BernoulliAsyncModel doubled = make_model(line3(), q, 0.5, 0.004);
  const TheoryReport a = build_theory_report(c.moments, c.model, c.profiles, 0.0);
  const TheoryReport b = build_theory_report(c.moments, doubled, c.profiles, 0.0);
  CHECK(b.msd_dist_async == doctest::Approx(2.0 * a.msd_dist_async).epsilon(1e-12));
  CHECK(b.msd_dist_sync == doctest::Approx(2.0 * a.msd_dist_sync).epsilon(1e-12));
  CHECK(b.msd_cent_async == doctest::Approx(2.0 * a.msd_cent_async).epsilon(1e-12));
  CHECK(b.msd_cent_sync == doctest::Approx(2.0 * a.msd_cent_sync).epsilon(1e-12));
}

TEST_CASE("full-network operator estimate: deterministic case is exact") {
  const BernoulliAsyncModel model = uniform_model(ring_topology(3), 1.0, 1.0, 0.01);
  const auto profiles = white_profiles(3, 1, 1.0, 0.01);
  const FullOperatorEstimate est = estimate_full_f_mc(model, profiles, 1000, 5);
  CHECK(est.std_err <= 1e-14);
  // Oracle: build the constant realized operator directly.
  Rng rng(99);
  const CombinationRealization real = model.sample_realization(rng);
  Eigen::MatrixXcd bmat(6, 6);
  for (int c = 0; c < 3; ++c) {
    const Eigen::MatrixXcd dc = Eigen::MatrixXcd::Identity(2, 2) -
                                real.step_sizes[c] * augmented_hessian(profiles[c].r_u);
    for (int r = 0; r < 3; ++r) bmat.block(r * 2, c * 2, 2, 2) = real.matrix(c, r) * dc;
  }
  const double rho_b = spectral_radius(bmat);
  CHECK(est.rho_hat == doctest::Approx(rho_b * rho_b).epsilon(1e-10));
}

TEST_CASE("full-network operator estimate: self-consistency and proximity") {
  Eigen::VectorXd q(3);
  q << 0.5, 0.7, 0.9;
  const BernoulliAsyncModel model = make_model(ring_topology(3), q, 0.6, 0.01);
  const auto profiles = white_profiles(3, 1, 1.0, 0.01);
  const FullOperatorEstimate small = estimate_full_f_mc(model, profiles, 1000, 2);
  const FullOperatorEstimate big = estimate_full_f_mc(model, profiles, 10000, 3);
  CHECK(std::abs(small.rho_hat - big.rho_hat) <= 3.0 * small.std_err);

  const MomentSet moments = compute_moments(model);
  const StepSizeMoments ssm = step_size_moments(model);
  const double rho_async =
      spectral_radius_hermitian(build_F_async(moments.P_p, ssm, profiles));
  CHECK(std::abs(big.rho_hat - rho_async) <= 0.1 * (1.0 - rho_async));
}

TEST_CASE("full-network operator estimate guards its inputs") {
  const BernoulliAsyncModel model = uniform_model(ring_topology(40), 1.0, 1.0, 0.01);
  const auto profiles = white_profiles(40, 1, 1.0, 0.01);
  CHECK_THROWS_WITH_AS(estimate_full_f_mc(model, profiles, 2000, 1),
                       "dimension guard exceeded", std::runtime_error);
  const BernoulliAsyncModel ok = uniform_model(ring_topology(3), 1.0, 1.0, 0.01);
  CHECK_THROWS_AS(estimate_full_f_mc(ok, white_profiles(3, 1, 1.0, 0.01), 100, 1),
                  std::invalid_argument);
}
