#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "asyncnet/model.hpp"

#include "json.hpp"

namespace asyncnet {

// Exact mean of the random combination matrix:
//   abar(l,k) = eta(l,k)/|N_k| off the diagonal,
//   abar(k,k) = 1 - sum of the column's off-diagonal means.
Eigen::MatrixXd mean_matrix(const BernoulliAsyncModel& model);

struct SecondMomentOptions {
  enum class Mode { kAuto, kExact, kMonteCarlo };
  Mode mode = Mode::kAuto;
  // Exact mode enumerates the 2^(|N_k|-1) link patterns of each column;
  // beyond this many links per column it is refused (kExact) or replaced
  // by Monte Carlo (kAuto).
  int enumeration_threshold = 20;
  long mc_samples = 200000;
  std::uint64_t mc_seed = 1;
};

// Second moment S = E(A (x) A) kept in factored form: the Kronecker
// square of the mean plus same-column corrections. Distinct columns of
// A are independent, so E(a_lk a_nm) = abar_lk * abar_nm whenever
// k != m; only the N same-column joint blocks deviate from the product
// of means. This is what makes S applicable at N = 100 (dimension 10^4)
// without ever materializing an N^2 x N^2 matrix.
class SecondMoment {
 public:
  SecondMoment(Eigen::MatrixXd a_bar, std::vector<std::vector<int>> support,
               std::vector<Eigen::MatrixXd> column_joint, bool monte_carlo,
               long sample_count);

  int n() const { return static_cast<int>(a_bar_.rows()); }
  const Eigen::MatrixXd& a_bar() const { return a_bar_; }
  const std::vector<std::vector<int>>& support() const { return support_; }
  // Joint block of column k: entry (i,j) is E[a_{support[k][i],k} *
  // a_{support[k][j],k}].
  const std::vector<Eigen::MatrixXd>& column_joint() const {
    return column_joint_;
  }
  bool monte_carlo() const { return monte_carlo_; }
  long sample_count() const { return sample_count_; }

  // y = S x with x indexed as x[l*N + n] ~ E(a_lk-block row l, inner n).
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;

  // Materialized N^2 x N^2 matrix; intended for small N and tests.
  Eigen::MatrixXd dense() const;

 private:
  Eigen::MatrixXd a_bar_;
  std::vector<std::vector<int>> support_;
  std::vector<Eigen::MatrixXd> column_joint_;
  std::vector<Eigen::MatrixXd> column_correction_;  // joint - outer(means)
  bool monte_carlo_ = false;
  long sample_count_ = 0;
};

// Throws std::runtime_error("enumeration overflow") when exact mode is
// requested for a column with more links than the threshold.
SecondMoment second_moment(const BernoulliAsyncModel& model,
                           const SecondMomentOptions& options = {});

struct PerronOptions {
  double tol = 1e-12;
  int max_iter = 100000;
  double positivity_floor = 1e-12;
};

// Positive sum-one fixed point x of a left-stochastic matrix, via power
// iteration started from the first basis vector. Throws
// std::runtime_error("not primitive / no unique Perron vector") when the
// iteration stalls without converging or the fixed point touches the
// nonnegativity boundary (reducible or periodic inputs).
Eigen::VectorXd perron(const Eigen::MatrixXd& matrix,
                       const PerronOptions& options = {});

// Same, but for an operator given only through its action.
Eigen::VectorXd perron_apply(
    int dim, const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& apply,
    const PerronOptions& options = {});

struct JointPerron {
  Eigen::VectorXd p;    // length N^2, Perron vector of S
  Eigen::MatrixXd P_p;  // unvec(p), symmetrized by (P + P^T)/2
  double symmetry_deviation = 0.0;
};

JointPerron joint_perron(const SecondMoment& s, const PerronOptions& options = {});

struct FusionMoments {
  Eigen::VectorXd pi_bar;  // mean fusion weights, sums to one
  Eigen::MatrixXd C_pi;    // fusion covariance, symmetric PSD, C_pi 1 = 0
};

// Matched fusion moments pi_bar = p_bar, C_pi = P_p - p_bar p_bar^T.
// Throws std::runtime_error("matching violated ...") if the result is
// not a valid covariance (signals a moment-computation bug upstream).
FusionMoments fusion_moments(const Eigen::VectorXd& p_bar,
                             const Eigen::MatrixXd& P_p);

struct MomentSet {
  Eigen::MatrixXd a_bar;
  SecondMoment s;
  Eigen::VectorXd p_bar;  // Perron vector of a_bar
  Eigen::VectorXd p;      // Perron vector of S
  Eigen::MatrixXd P_p;
  Eigen::MatrixXd C_p;    // P_p - p_bar p_bar^T
  double p_symmetry_deviation = 0.0;
  FusionMoments fusion;
};

MomentSet compute_moments(const BernoulliAsyncModel& model,
                          const SecondMomentOptions& options = {});

nlohmann::ordered_json moments_to_json(const MomentSet& m);
MomentSet moments_from_json(const nlohmann::json& j);

}  // namespace asyncnet
