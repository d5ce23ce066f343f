#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "asyncnet/model.hpp"
#include "asyncnet/moments.hpp"

namespace asyncnet {

// Per-agent data statistics for the MSE estimation task: regressor
// covariance (Hermitian positive definite) and observation-noise power.
struct AgentDataProfile {
  Eigen::MatrixXcd r_u;
  double sigma_xi2 = 0.0;
};

// Augmented 2M x 2M form diag{R_u, R_u^T} used by all second-order
// predictors; its eigenvalues are those of R_u, duplicated.
Eigen::MatrixXcd augmented_hessian(const Eigen::MatrixXcd& r_u);

// Moments of the Bernoulli step-size process: the m-th moment of a
// {0, mu_k} variable with on-probability q_k is q_k mu_k^m.
struct StepSizeMoments {
  Eigen::VectorXd mu_bar;     // q mu
  Eigen::VectorXd mu2_bar;    // q mu^2
  Eigen::VectorXd mu4_bar;    // q mu^4
  Eigen::VectorXd c_mu_diag;  // q(1-q) mu^2; cross-covariances vanish
};

StepSizeMoments step_size_moments(const BernoulliAsyncModel& model);

// Step-size smallness parameter max_k sqrt(mu4_bar_k) / mu_bar_k.
double nu_parameter(const StepSizeMoments& moments);

struct StabilityReport {
  bool ms_stable = false;      // mu2/mu1 < lambda_min/(lambda_max^2 + alpha)
  bool fourth_stable = false;  // sqrt(mu4)/mu1 < lambda_min/(3 lambda_max^2 + 4 alpha)
  double nu = 0.0;
};

StabilityReport stability_check(const StepSizeMoments& moments,
                                const std::vector<AgentDataProfile>& profiles,
                                double alpha);

// H = sum_k pbar_k mubar_k diag{R_uk, R_uk^T}. Throws
// std::runtime_error("singular H") when the result is not positive
// definite (impossible for valid inputs).
Eigen::MatrixXcd build_H(const Eigen::VectorXd& p_bar,
                         const StepSizeMoments& moments,
                         const std::vector<AgentDataProfile>& profiles);

// Noise-power aggregates R_k = sigma_xi2_k diag{R_uk, R_uk^T}:
//   R_sync  = sum_k pbar_k^2 mubar_k^2 R_k
//   R_async = sum_k p_kk (mubar_k^2 + c_mu_kk) R_k
Eigen::MatrixXcd build_R_sync(const Eigen::VectorXd& p_bar,
                              const StepSizeMoments& moments,
                              const std::vector<AgentDataProfile>& profiles);
Eigen::MatrixXcd build_R_async(const Eigen::MatrixXd& P_p,
                               const StepSizeMoments& moments,
                               const std::vector<AgentDataProfile>& profiles);

// Mean-square error operators on the (2M)^2-dimensional vectorized
// covariance, with Dbar_k = I - mubar_k H_k:
//   F_sync  = sum_{l,k} pbar_l pbar_k (Dbar_l^T (x) Dbar_k)
//           = Bbar^T (x) Bbar,  Bbar = I - H
//   F_async = sum_{l,k} p_lk (Dbar_l^T (x) Dbar_k)
//           + sum_k p_kk c_mu_kk (H_k^T (x) H_k)
Eigen::MatrixXcd build_F_sync(const Eigen::VectorXd& p_bar,
                              const StepSizeMoments& moments,
                              const std::vector<AgentDataProfile>& profiles);
Eigen::MatrixXcd build_F_async(const Eigen::MatrixXd& P_p,
                               const StepSizeMoments& moments,
                               const std::vector<AgentDataProfile>& profiles);

// Steady-state MSD predictor (1/4) Tr(H^-1 R), linear scale.
double msd_general(const Eigen::MatrixXcd& h, const Eigen::MatrixXcd& r);

// Closed forms for the uniform-step-size MSE case:
//   async: (mu/2) Tr[(sum pbar_k q_k R_uk)^-1 (sum p_kk q_k sigma_k^2 R_uk)]
//   sync:  (mu/2) Tr[(sum pbar_k q_k R_uk)^-1 (sum pbar_k^2 q_k^2 sigma_k^2 R_uk)]
double msd_lms_async(const Eigen::VectorXd& p_bar, const Eigen::MatrixXd& P_p,
                     const BernoulliAsyncModel& model,
                     const std::vector<AgentDataProfile>& profiles);
double msd_lms_sync(const Eigen::VectorXd& p_bar,
                    const BernoulliAsyncModel& model,
                    const std::vector<AgentDataProfile>& profiles);

double spectral_radius_hermitian(const Eigen::MatrixXcd& m);
double spectral_radius(const Eigen::MatrixXcd& m);

double to_db(double linear);

struct TheoryReport {
  double nu = 0.0;
  bool ms_stable = false;
  bool fourth_stable = false;
  double lambda_min_h = 0.0;
  double rho_mean = 0.0;      // 1 - lambda_min(H)
  double rho_ms_sync = 0.0;   // spectral radius of F_sync
  double rho_ms_async = 0.0;  // spectral radius of F_async
  bool f_sync_stable = false;   // rho(F_sync) < 1
  bool f_async_stable = false;  // rho(F_async) < 1
  // The four steady-state predictions, linear scale. Under matched
  // fusion moments the centralized values coincide with the distributed
  // ones; they are computed through the fusion-moment route anyway so
  // the match is observable rather than assumed.
  double msd_dist_sync = 0.0;
  double msd_dist_async = 0.0;
  double msd_cent_sync = 0.0;
  double msd_cent_async = 0.0;
  Eigen::MatrixXcd h, r_sync, r_async, f_sync, f_async;
};

TheoryReport build_theory_report(const MomentSet& moments,
                                 const BernoulliAsyncModel& model,
                                 const std::vector<AgentDataProfile>& profiles,
                                 double alpha);

nlohmann::ordered_json theory_to_json(const TheoryReport& report);

struct FullOperatorEstimate {
  double rho_hat = 0.0;
  double std_err = 0.0;
  long samples = 0;
};

// Monte Carlo estimate of the spectral radius of the full-network
// mean-square operator E[(B_s^T (x) B_s^*)], where
// B_s = (A_s^T (x) I_2M)(I - M_s Hcal) is the realized error operator.
// Guarded to N*2M <= 64; needs samples >= 1000.
FullOperatorEstimate estimate_full_f_mc(
    const BernoulliAsyncModel& model,
    const std::vector<AgentDataProfile>& profiles, long samples,
    std::uint64_t seed);

}  // namespace asyncnet
