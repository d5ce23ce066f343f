#pragma once

#include <Eigen/Dense>

#include "asyncnet/rng.hpp"
#include "asyncnet/topology.hpp"

namespace asyncnet {

// One draw of the random combination matrix and the random step-sizes.
// matrix is left-stochastic by construction: active off-diagonal links
// carry the nominal weight 1/|N_k| and the diagonal absorbs the weight
// of inactive links.
struct CombinationRealization {
  Eigen::MatrixXd matrix;      // N x N, sparsity contained in the topology
  Eigen::VectorXd step_sizes;  // entry k is mu_k or 0
};

// Bernoulli activity model over a fixed topology. Each iteration every
// directed link (l,k), l != k, is on independently with probability
// eta(l,k); every agent updates independently with probability q(k),
// using step-size mu(k) when it does. Link and step randomness are
// mutually independent and i.i.d. across iterations.
class BernoulliAsyncModel {
 public:
  BernoulliAsyncModel(Topology topology, Eigen::VectorXd q, Eigen::MatrixXd eta,
                      Eigen::VectorXd mu_nominal);

  const Topology& topology() const { return topology_; }
  int n_agents() const { return topology_.n_agents; }
  double q(int k) const { return q_[k]; }
  double eta(int l, int k) const { return eta_(l, k); }
  double mu(int k) const { return mu_[k]; }
  const Eigen::VectorXd& q() const { return q_; }
  const Eigen::MatrixXd& eta() const { return eta_; }
  const Eigen::VectorXd& mu() const { return mu_; }

  // Nominal off-diagonal weight in column k: 1/|N_k|.
  double nominal_weight(int k) const { return inv_degree_[k]; }

  CombinationRealization sample_realization(Rng& rng) const;

  // Matrix part only (link draws, no step draws).
  Eigen::MatrixXd sample_matrix(Rng& rng) const;

  // v <- A_i * v for a fresh realization, without forming the matrix.
  // scratch must have length N.
  void sample_combination_apply(Rng& rng, Eigen::VectorXd& v,
                                Eigen::VectorXd& scratch) const;

  Eigen::VectorXd sample_step_sizes(Rng& rng) const;

 private:
  Topology topology_;
  Eigen::VectorXd q_;
  Eigen::MatrixXd eta_;
  Eigen::VectorXd mu_;
  Eigen::VectorXd inv_degree_;
};

}  // namespace asyncnet
