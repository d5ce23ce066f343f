#include "asyncnet/model.hpp"

#include <stdexcept>

namespace asyncnet {

BernoulliAsyncModel::BernoulliAsyncModel(Topology topology, Eigen::VectorXd q,
                                         Eigen::MatrixXd eta,
                                         Eigen::VectorXd mu_nominal)
    : topology_(std::move(topology)),
      q_(std::move(q)),
      eta_(std::move(eta)),
      mu_(std::move(mu_nominal)) {
  const int n = topology_.n_agents;
  if (q_.size() != n || mu_.size() != n || eta_.rows() != n || eta_.cols() != n)
    throw std::invalid_argument("model parameter dimensions do not match topology");
  for (int k = 0; k < n; ++k) {
    if (!(q_[k] > 0.0 && q_[k] <= 1.0))
      throw std::invalid_argument("update probability q out of (0,1]");
    if (!(mu_[k] >= 0.0))
      throw std::invalid_argument("nominal step-size must be nonnegative");
    for (int l : topology_.neighbors[k]) {
      if (l == k) continue;
      if (!(eta_(l, k) > 0.0 && eta_(l, k) <= 1.0))
        throw std::invalid_argument("link probability eta out of (0,1]");
    }
  }
  inv_degree_.resize(n);
  for (int k = 0; k < n; ++k) inv_degree_[k] = 1.0 / topology_.degree(k);
}

CombinationRealization BernoulliAsyncModel::sample_realization(Rng& rng) const {
  CombinationRealization real;
  real.matrix = sample_matrix(rng);
  real.step_sizes = sample_step_sizes(rng);
  return real;
}

Eigen::MatrixXd BernoulliAsyncModel::sample_matrix(Rng& rng) const {
  const int n = topology_.n_agents;
  Eigen::MatrixXd matrix = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    const double w = inv_degree_[k];
    int active = 0;
    for (int l : topology_.neighbors[k]) {
      if (l == k) continue;
      if (rng.bernoulli(eta_(l, k))) {
        matrix(l, k) = w;
        ++active;
      }
    }
    matrix(k, k) = 1.0 - active * w;
  }
  return matrix;
}

void BernoulliAsyncModel::sample_combination_apply(Rng& rng, Eigen::VectorXd& v,
                                                   Eigen::VectorXd& scratch) const {
  const int n = topology_.n_agents;
  scratch.setZero();
  for (int k = 0; k < n; ++k) {
    const double w = inv_degree_[k];
    const double vk = v[k];
    int active = 0;
    for (int l : topology_.neighbors[k]) {
      if (l == k) continue;
      if (rng.bernoulli(eta_(l, k))) {
        scratch[l] += w * vk;
        ++active;
      }
    }
    scratch[k] += (1.0 - active * w) * vk;
  }
  v.swap(scratch);
}

Eigen::VectorXd BernoulliAsyncModel::sample_step_sizes(Rng& rng) const {
  const int n = topology_.n_agents;
  Eigen::VectorXd steps(n);
  for (int k = 0; k < n; ++k) steps[k] = rng.bernoulli(q_[k]) ? mu_[k] : 0.0;
  return steps;
}

}  // namespace asyncnet
