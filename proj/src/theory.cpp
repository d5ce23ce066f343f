#include "asyncnet/theory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace asyncnet {

namespace {

using Eigen::MatrixXcd;
using Eigen::VectorXd;

MatrixXcd kron(const MatrixXcd& a, const MatrixXcd& b) {
  MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

void check_profiles(const std::vector<AgentDataProfile>& profiles) {
  if (profiles.empty()) throw std::invalid_argument("no agent profiles");
  const Eigen::Index m = profiles.front().r_u.rows();
  for (const auto& p : profiles) {
    if (p.r_u.rows() != m || p.r_u.cols() != m)
      throw std::invalid_argument("agent covariance dimensions disagree");
    if ((p.r_u - p.r_u.adjoint()).lpNorm<Eigen::Infinity>() > 1e-10)
      throw std::invalid_argument("regressor covariance is not Hermitian");
    if (!(p.sigma_xi2 > 0.0))
      throw std::invalid_argument("noise variance must be positive");
  }
}

// Extreme eigenvalues of R_u (equivalently of the augmented Hessian).
std::pair<double, double> eigen_range(const Eigen::MatrixXcd& r_u) {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(r_u);
  return {eig.eigenvalues().minCoeff(), eig.eigenvalues().maxCoeff()};
}

double hermitian_trace_of_solve(const MatrixXcd& h, const MatrixXcd& r,
                                const char* singular_message) {
  Eigen::LLT<MatrixXcd> llt(h);
  if (llt.info() != Eigen::Success) throw std::runtime_error(singular_message);
  const std::complex<double> tr = llt.solve(r).trace();
  return tr.real();
}

}  // namespace

Eigen::MatrixXcd augmented_hessian(const Eigen::MatrixXcd& r_u) {
  const Eigen::Index m = r_u.rows();
  MatrixXcd h = MatrixXcd::Zero(2 * m, 2 * m);
  h.topLeftCorner(m, m) = r_u;
  h.bottomRightCorner(m, m) = r_u.transpose();
  return h;
}

StepSizeMoments step_size_moments(const BernoulliAsyncModel& model) {
  const int n = model.n_agents();
  StepSizeMoments out;
  out.mu_bar.resize(n);
  out.mu2_bar.resize(n);
  out.mu4_bar.resize(n);
  out.c_mu_diag.resize(n);
  for (int k = 0; k < n; ++k) {
    const double q = model.q(k);
    const double mu = model.mu(k);
    out.mu_bar[k] = q * mu;
    out.mu2_bar[k] = q * mu * mu;
    out.mu4_bar[k] = q * mu * mu * mu * mu;
    out.c_mu_diag[k] = out.mu2_bar[k] - out.mu_bar[k] * out.mu_bar[k];
  }
  return out;
}

double nu_parameter(const StepSizeMoments& moments) {
  double nu = 0.0;
  for (Eigen::Index k = 0; k < moments.mu_bar.size(); ++k)
    nu = std::max(nu, std::sqrt(moments.mu4_bar[k]) / moments.mu_bar[k]);
  return nu;
}

StabilityReport stability_check(const StepSizeMoments& moments,
                                const std::vector<AgentDataProfile>& profiles,
                                double alpha) {
  check_profiles(profiles);
  StabilityReport report;
  report.nu = nu_parameter(moments);
  report.ms_stable = true;
  report.fourth_stable = true;
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    const auto [lo, hi] = eigen_range(profiles[k].r_u);
    const double ms_ratio = moments.mu2_bar[k] / moments.mu_bar[k];
    const double fourth_ratio = std::sqrt(moments.mu4_bar[k]) / moments.mu_bar[k];
    if (!(ms_ratio < lo / (hi * hi + alpha))) report.ms_stable = false;
    if (!(fourth_ratio < lo / (3.0 * hi * hi + 4.0 * alpha)))
      report.fourth_stable = false;
  }
  return report;
}

Eigen::MatrixXcd build_H(const Eigen::VectorXd& p_bar,
                         const StepSizeMoments& moments,
                         const std::vector<AgentDataProfile>& profiles) {
  check_profiles(profiles);
  const Eigen::Index two_m = 2 * profiles.front().r_u.rows();
  MatrixXcd h = MatrixXcd::Zero(two_m, two_m);
  for (std::size_t k = 0; k < profiles.size(); ++k)
    h += p_bar[k] * moments.mu_bar[k] * augmented_hessian(profiles[k].r_u);
  Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(h);
  if (eig.eigenvalues().minCoeff() <= 0.0)
    throw std::runtime_error("singular H");
  return h;
}

Eigen::MatrixXcd build_R_sync(const Eigen::VectorXd& p_bar,
                              const StepSizeMoments& moments,
                              const std::vector<AgentDataProfile>& profiles) {
  check_profiles(profiles);
  const Eigen::Index two_m = 2 * profiles.front().r_u.rows();
  MatrixXcd r = MatrixXcd::Zero(two_m, two_m);
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    const double w = p_bar[k] * p_bar[k] * moments.mu_bar[k] * moments.mu_bar[k];
    r += w * profiles[k].sigma_xi2 * augmented_hessian(profiles[k].r_u);
  }
  return r;
}

Eigen::MatrixXcd build_R_async(const Eigen::MatrixXd& P_p,
                               const StepSizeMoments& moments,
                               const std::vector<AgentDataProfile>& profiles) {
  check_profiles(profiles);
  const Eigen::Index two_m = 2 * profiles.front().r_u.rows();
  MatrixXcd r = MatrixXcd::Zero(two_m, two_m);
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    const double mu2 =
        moments.mu_bar[k] * moments.mu_bar[k] + moments.c_mu_diag[k];
    r += P_p(k, k) * mu2 * profiles[k].sigma_xi2 *
         augmented_hessian(profiles[k].r_u);
  }
  return r;
}

Eigen::MatrixXcd build_F_sync(const Eigen::VectorXd& p_bar,
                              const StepSizeMoments& moments,
                              const std::vector<AgentDataProfile>& profiles) {
  // The double sum over (l,k) with weights pbar_l pbar_k factors exactly
  // into Bbar^T (x) Bbar with Bbar = I - H.
  const MatrixXcd h = build_H(p_bar, moments, profiles);
  const MatrixXcd b_bar =
      MatrixXcd::Identity(h.rows(), h.cols()) - h;
  return kron(b_bar.transpose(), b_bar);
}

Eigen::MatrixXcd build_F_async(const Eigen::MatrixXd& P_p,
                               const StepSizeMoments& moments,
                               const std::vector<AgentDataProfile>& profiles) {
  check_profiles(profiles);
  const std::size_t n = profiles.size();
  const Eigen::Index two_m = 2 * profiles.front().r_u.rows();
  std::vector<MatrixXcd> hk(n), dk(n);
  for (std::size_t k = 0; k < n; ++k) {
    hk[k] = augmented_hessian(profiles[k].r_u);
    dk[k] = MatrixXcd::Identity(two_m, two_m) - moments.mu_bar[k] * hk[k];
  }
  MatrixXcd f = MatrixXcd::Zero(two_m * two_m, two_m * two_m);
  for (std::size_t l = 0; l < n; ++l)
    for (std::size_t k = 0; k < n; ++k)
      f += P_p(l, k) * kron(dk[l].transpose(), dk[k]);
  for (std::size_t k = 0; k < n; ++k)
    f += P_p(k, k) * moments.c_mu_diag[k] * kron(hk[k].transpose(), hk[k]);
  return f;
}

double msd_general(const Eigen::MatrixXcd& h, const Eigen::MatrixXcd& r) {
  return 0.25 * hermitian_trace_of_solve(h, r, "singular H");
}

namespace {

double uniform_mu(const BernoulliAsyncModel& model) {
  const double mu = model.mu(0);
  for (int k = 1; k < model.n_agents(); ++k)
    if (model.mu(k) != mu)
      throw std::invalid_argument("closed form requires a uniform nominal step-size");
  return mu;
}

}  // namespace

double msd_lms_async(const Eigen::VectorXd& p_bar, const Eigen::MatrixXd& P_p,
                     const BernoulliAsyncModel& model,
                     const std::vector<AgentDataProfile>& profiles) {
  check_profiles(profiles);
  const double mu = uniform_mu(model);
  const Eigen::Index m = profiles.front().r_u.rows();
  MatrixXcd g = MatrixXcd::Zero(m, m);
  MatrixXcd t = MatrixXcd::Zero(m, m);
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    g += p_bar[k] * model.q(static_cast<int>(k)) * profiles[k].r_u;
    t += P_p(k, k) * model.q(static_cast<int>(k)) * profiles[k].sigma_xi2 *
         profiles[k].r_u;
  }
  return 0.5 * mu *
         hermitian_trace_of_solve(g, t, "singular aggregate covariance");
}

double msd_lms_sync(const Eigen::VectorXd& p_bar,
                    const BernoulliAsyncModel& model,
                    const std::vector<AgentDataProfile>& profiles) {
  check_profiles(profiles);
  const double mu = uniform_mu(model);
  const Eigen::Index m = profiles.front().r_u.rows();
  MatrixXcd g = MatrixXcd::Zero(m, m);
  MatrixXcd t = MatrixXcd::Zero(m, m);
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    const double q = model.q(static_cast<int>(k));
    g += p_bar[k] * q * profiles[k].r_u;
    t += p_bar[k] * p_bar[k] * q * q * profiles[k].sigma_xi2 * profiles[k].r_u;
  }
  return 0.5 * mu *
         hermitian_trace_of_solve(g, t, "singular aggregate covariance");
}

double spectral_radius_hermitian(const Eigen::MatrixXcd& m) {
  const double scale = m.lpNorm<Eigen::Infinity>();
  if ((m - m.adjoint()).lpNorm<Eigen::Infinity>() > 1e-10 * (1.0 + scale))
    throw std::logic_error("matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(
      MatrixXcd(0.5 * (m + m.adjoint())));
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

double spectral_radius(const Eigen::MatrixXcd& m) {
  if (m.rows() <= 600) {
    Eigen::ComplexEigenSolver<MatrixXcd> eig(m, false);
    return eig.eigenvalues().cwiseAbs().maxCoeff();
  }
  // Large operators: power iteration on a fixed pseudo-random start.
  Rng rng(0x726164ULL, 0);
  Eigen::VectorXcd v(m.rows());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.cgaussian();
  v.normalize();
  double rho = 0.0;
  for (int it = 0; it < 4000; ++it) {
    Eigen::VectorXcd w = m * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    rho = norm;
    v = w / norm;
  }
  return rho;
}

double to_db(double linear) {
  return 10.0 * std::log10(std::max(linear, 1e-300));
}

TheoryReport build_theory_report(const MomentSet& moments,
                                 const BernoulliAsyncModel& model,
                                 const std::vector<AgentDataProfile>& profiles,
                                 double alpha) {
  TheoryReport report;
  const StepSizeMoments ssm = step_size_moments(model);
  const StabilityReport stab = stability_check(ssm, profiles, alpha);
  report.nu = stab.nu;
  report.ms_stable = stab.ms_stable;
  report.fourth_stable = stab.fourth_stable;

  report.h = build_H(moments.p_bar, ssm, profiles);
  Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(report.h);
  report.lambda_min_h = eig.eigenvalues().minCoeff();
  report.rho_mean = 1.0 - report.lambda_min_h;

  report.r_sync = build_R_sync(moments.p_bar, ssm, profiles);
  report.r_async = build_R_async(moments.P_p, ssm, profiles);
  report.f_sync = build_F_sync(moments.p_bar, ssm, profiles);
  report.f_async = build_F_async(moments.P_p, ssm, profiles);
  report.rho_ms_sync = spectral_radius_hermitian(report.f_sync);
  report.rho_ms_async = spectral_radius_hermitian(report.f_async);
  report.f_sync_stable = report.rho_ms_sync < 1.0;
  report.f_async_stable = report.rho_ms_async < 1.0;

  report.msd_dist_sync = msd_general(report.h, report.r_sync);
  report.msd_dist_async = msd_general(report.h, report.r_async);

  // Centralized predictions through the fusion moments (pi_bar, C_pi):
  // under matching these reproduce the distributed values.
  const Eigen::VectorXd& pi_bar = moments.fusion.pi_bar;
  const Eigen::MatrixXd& c_pi = moments.fusion.C_pi;
  const Eigen::Index two_m = report.h.rows();
  MatrixXcd h_c = MatrixXcd::Zero(two_m, two_m);
  MatrixXcd r_c_sync = MatrixXcd::Zero(two_m, two_m);
  MatrixXcd r_c_async = MatrixXcd::Zero(two_m, two_m);
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    const MatrixXcd hk = augmented_hessian(profiles[k].r_u);
    const double pi2 = pi_bar[k] * pi_bar[k] + c_pi(k, k);
    const double mu2 = ssm.mu_bar[k] * ssm.mu_bar[k] + ssm.c_mu_diag[k];
    h_c += pi_bar[k] * ssm.mu_bar[k] * hk;
    r_c_sync += pi_bar[k] * pi_bar[k] * ssm.mu_bar[k] * ssm.mu_bar[k] *
                profiles[k].sigma_xi2 * hk;
    r_c_async += pi2 * mu2 * profiles[k].sigma_xi2 * hk;
  }
  report.msd_cent_sync = msd_general(h_c, r_c_sync);
  report.msd_cent_async = msd_general(h_c, r_c_async);
  return report;
}

nlohmann::ordered_json theory_to_json(const TheoryReport& report) {
  nlohmann::ordered_json j;
  j["nu"] = report.nu;
  j["rho_mean"] = report.rho_mean;
  j["rho_ms_sync"] = report.rho_ms_sync;
  j["rho_ms_async"] = report.rho_ms_async;
  j["msd_db"] = nlohmann::ordered_json{
      {"dist_sync", to_db(report.msd_dist_sync)},
      {"dist_async", to_db(report.msd_dist_async)},
      {"cent_sync", to_db(report.msd_cent_sync)},
      {"cent_async", to_db(report.msd_cent_async)}};
  j["msd_linear"] = nlohmann::ordered_json{
      {"dist_sync", report.msd_dist_sync},
      {"dist_async", report.msd_dist_async},
      {"cent_sync", report.msd_cent_sync},
      {"cent_async", report.msd_cent_async}};
  j["stability"] = nlohmann::ordered_json{{"ms_stable", report.ms_stable},
                                          {"fourth_stable", report.fourth_stable},
                                          {"f_sync_stable", report.f_sync_stable},
                                          {"f_async_stable", report.f_async_stable}};
  j["lambda_min_h"] = report.lambda_min_h;
  return j;
}

FullOperatorEstimate estimate_full_f_mc(
    const BernoulliAsyncModel& model,
    const std::vector<AgentDataProfile>& profiles, long samples,
    std::uint64_t seed) {
  check_profiles(profiles);
  const int n = model.n_agents();
  const Eigen::Index two_m = 2 * profiles.front().r_u.rows();
  const Eigen::Index dim = n * two_m;
  if (dim > 64) throw std::runtime_error("dimension guard exceeded");
  if (samples < 1000) throw std::invalid_argument("samples must be at least 1000");

  std::vector<MatrixXcd> hk(n);
  for (int k = 0; k < n; ++k) hk[k] = augmented_hessian(profiles[k].r_u);
  const MatrixXcd eye = MatrixXcd::Identity(two_m, two_m);

  const Eigen::Index fdim = dim * dim;
  const int n_blocks = 16;
  const bool keep_blocks = fdim <= 512;
  MatrixXcd total = MatrixXcd::Zero(fdim, fdim);
  MatrixXcd block_sum = MatrixXcd::Zero(fdim, fdim);
  std::vector<MatrixXcd> block_means;
  std::vector<double> block_rhos;
  long block_count = 0;
  int block_index = 0;

  Rng rng(seed, streams::kFullOperatorMc);
  MatrixXcd bmat(dim, dim);
  for (long s = 0; s < samples; ++s) {
    const CombinationRealization real = model.sample_realization(rng);
    for (int c = 0; c < n; ++c) {
      const MatrixXcd dc = eye - real.step_sizes[c] * hk[c];
      for (int r = 0; r < n; ++r)
        bmat.block(r * two_m, c * two_m, two_m, two_m) = real.matrix(c, r) * dc;
    }
    const MatrixXcd term = kron(bmat.transpose(), bmat.conjugate());
    total += term;
    block_sum += term;
    ++block_count;
    const int next_block = static_cast<int>((s + 1) * n_blocks / samples);
    if (next_block != block_index || s + 1 == samples) {
      const MatrixXcd mean = block_sum / static_cast<double>(block_count);
      if (keep_blocks)
        block_means.push_back(mean);
      else
        block_rhos.push_back(spectral_radius(mean));
      block_sum.setZero();
      block_count = 0;
      block_index = next_block;
    }
  }

  FullOperatorEstimate est;
  est.samples = samples;
  est.rho_hat = spectral_radius(total / static_cast<double>(samples));

  if (keep_blocks) {
    // Bootstrap over block means.
    const int n_boot = 64;
    Rng boot(seed, streams::kFullOperatorBoot);
    const int nb = static_cast<int>(block_means.size());
    std::vector<double> rhos(n_boot);
    MatrixXcd resampled(fdim, fdim);
    for (int b = 0; b < n_boot; ++b) {
      resampled.setZero();
      for (int i = 0; i < nb; ++i)
        resampled += block_means[boot.index(nb)];
      rhos[b] = spectral_radius(resampled / static_cast<double>(nb));
    }
    double mean = 0.0;
    for (double r : rhos) mean += r;
    mean /= n_boot;
    double var = 0.0;
    for (double r : rhos) var += (r - mean) * (r - mean);
    est.std_err = std::sqrt(var / (n_boot - 1));
  } else {
    // Batch-means fallback when block matrices are too large to keep.
    double mean = 0.0;
    for (double r : block_rhos) mean += r;
    mean /= static_cast<double>(block_rhos.size());
    double var = 0.0;
    for (double r : block_rhos) var += (r - mean) * (r - mean);
    var /= static_cast<double>(block_rhos.size() - 1);
    est.std_err = std::sqrt(var / static_cast<double>(block_rhos.size()));
  }
  return est;
}

}  // namespace asyncnet
