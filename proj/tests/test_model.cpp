#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "asyncnet/model.hpp"
#include "asyncnet/moments.hpp"
#include "asyncnet/topology.hpp"

using namespace asyncnet;

namespace {

// Line graph 0 - 1 - 2.
Topology line3() { return topology_from_edges(3, {{0, 1}, {1, 2}}); }

BernoulliAsyncModel make_model(const Topology& topo, double q, double eta,
                               double mu) {
  const int n = topo.n_agents;
  Eigen::MatrixXd eta_mat = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k)
    for (int l : topo.neighbors[k])
      if (l != k) eta_mat(l, k) = eta;
  return BernoulliAsyncModel(topo, Eigen::VectorXd::Constant(n, q), eta_mat,
                             Eigen::VectorXd::Constant(n, mu));
}

}  // namespace

TEST_CASE("ring of three equals the triangle") {
  const Topology topo = ring_topology(3);
  for (int k = 0; k < 3; ++k)
    CHECK(topo.neighbors[k] == std::vector<int>{0, 1, 2});
}

TEST_CASE("full graph neighborhoods contain everyone") {
  const Topology topo = full_topology(4);
  for (int k = 0; k < 4; ++k) {
    CHECK(topo.degree(k) == 4);
    CHECK(topo.neighbors[k] == std::vector<int>{0, 1, 2, 3});
  }
}

TEST_CASE("edge list builds self-inclusive symmetric neighborhoods") {
  const Topology topo = line3();
  CHECK(topo.neighbors[0] == std::vector<int>{0, 1});
  CHECK(topo.neighbors[1] == std::vector<int>{0, 1, 2});
  CHECK(topo.neighbors[2] == std::vector<int>{1, 2});
  for (int k = 0; k < 3; ++k)
    for (int l : topo.neighbors[k]) CHECK(topo.contains_link(k, l));
}

TEST_CASE("degenerate topologies are rejected") {
  CHECK_THROWS_WITH_AS(ring_topology(0), "empty network", std::invalid_argument);
  CHECK_THROWS_WITH_AS(topology_from_edges(4, {{0, 1}, {2, 3}}),
                       "unconnected topology", std::runtime_error);
  // Radius too small to ever connect 30 points.
  CHECK_THROWS_WITH_AS(random_geometric_topology(30, 1e-6, 1, 5),
                       "unconnected topology", std::runtime_error);
}

TEST_CASE("random geometric graphs are connected and reproducible") {
  const Topology a = random_geometric_topology(20, 0.35, 42);
  const Topology b = random_geometric_topology(20, 0.35, 42);
  CHECK(is_connected(a));
  CHECK(a.edges == b.edges);
  const Topology c = random_geometric_topology(20, 0.35, 43);
  CHECK(a.edges != c.edges);
}

TEST_CASE("nominal weights are inverse neighborhood sizes") {
  const Topology line = line3();
  const BernoulliAsyncModel model = make_model(line, 1.0, 1.0, 0.01);
  CHECK(model.nominal_weight(1) == 1.0 / 3.0);
  CHECK(model.nominal_weight(0) == 0.5);
  const BernoulliAsyncModel full = make_model(full_topology(4), 1.0, 1.0, 0.01);
  for (int k = 0; k < 4; ++k) CHECK(full.nominal_weight(k) == 0.25);
}

TEST_CASE("all links on reproduces the deterministic combination matrix") {
  const BernoulliAsyncModel model = make_model(line3(), 1.0, 1.0, 0.01);
  Rng rng(7);
  const CombinationRealization real = model.sample_realization(rng);
  CHECK(real.matrix(0, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(real.matrix(1, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(real.matrix(2, 1) == doctest::Approx(1.0 / 3.0));
  // q = 1: every agent updates every iteration.
  for (int k = 0; k < 3; ++k) CHECK(real.step_sizes[k] == 0.01);
  // Each column carries exactly degree-1 off-diagonal entries.
  for (int k = 0; k < 3; ++k) {
    int off = 0;
    for (int l = 0; l < 3; ++l)
      if (l != k && real.matrix(l, k) != 0.0) ++off;
    CHECK(off == model.topology().degree(k) - 1);
  }
}

TEST_CASE("realizations are left-stochastic with contained sparsity") {
  const BernoulliAsyncModel model = make_model(line3(), 0.5, 0.6, 0.01);
  Rng rng(123);
  for (int draw = 0; draw < 2000; ++draw) {
    const CombinationRealization real = model.sample_realization(rng);
    for (int k = 0; k < 3; ++k) {
      CHECK(std::abs(real.matrix.col(k).sum() - 1.0) <= 1e-12);
      CHECK(real.matrix.col(k).minCoeff() >= 0.0);
      for (int l = 0; l < 3; ++l)
        if (real.matrix(l, k) != 0.0)
          CHECK(model.topology().contains_link(l, k));
      const double mu = real.step_sizes[k];
      CHECK((mu == 0.0 || mu == 0.01));
    }
  }
}

TEST_CASE("identical model and seed give identical realization sequences") {
  const BernoulliAsyncModel model = make_model(line3(), 0.5, 0.6, 0.01);
  Rng a(99, 5), b(99, 5);
  for (int draw = 0; draw < 50; ++draw) {
    const CombinationRealization ra = model.sample_realization(a);
    const CombinationRealization rb = model.sample_realization(b);
    CHECK(ra.matrix == rb.matrix);
    CHECK(ra.step_sizes == rb.step_sizes);
  }
}

TEST_CASE("empirical link activation frequencies match eta") {
  const double eta = 0.6;
  const BernoulliAsyncModel model = make_model(line3(), 1.0, eta, 0.01);
  const int samples = 20000;
  Rng rng(2024);
  Eigen::MatrixXd active = Eigen::MatrixXd::Zero(3, 3);
  for (int s = 0; s < samples; ++s) {
    const CombinationRealization real = model.sample_realization(rng);
    for (int k = 0; k < 3; ++k)
      for (int l : model.topology().neighbors[k])
        if (l != k && real.matrix(l, k) > 0.0) active(l, k) += 1.0;
  }
  const double band = 4.0 * std::sqrt(eta * (1.0 - eta) / samples);
  for (int k = 0; k < 3; ++k)
    for (int l : model.topology().neighbors[k])
      if (l != k) CHECK(std::abs(active(l, k) / samples - eta) <= band);
}

TEST_CASE("empirical mean matrix matches the exact mean") {
  const BernoulliAsyncModel model = make_model(line3(), 1.0, 0.5, 0.01);
  const Eigen::MatrixXd exact = mean_matrix(model);
  const int samples = 100000;
  Rng rng(31);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(3, 3);
  for (int s = 0; s < samples; ++s) sum += model.sample_realization(rng).matrix;
  sum /= samples;
  CHECK((sum - exact).lpNorm<Eigen::Infinity>() <= 0.01);
}

TEST_CASE("sample_combination_apply agrees with the sampled matrix") {
  const BernoulliAsyncModel model = make_model(line3(), 0.7, 0.5, 0.01);
  Rng a(5, 1), b(5, 1);
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(3, 1.0, 3.0);
  Eigen::VectorXd scratch(3), direct = v;
  model.sample_combination_apply(a, v, scratch);
  // The same stream drives the matrix draw, so the two paths coincide.
  const CombinationRealization real = model.sample_realization(b);
  CHECK((v - real.matrix * direct).lpNorm<Eigen::Infinity>() <= 1e-15);
}

TEST_CASE("invalid model parameters are rejected") {
  const Topology topo = line3();
  CHECK_THROWS_AS(make_model(topo, 1.5, 0.5, 0.01), std::invalid_argument);
  CHECK_THROWS_AS(make_model(topo, 0.0, 0.5, 0.01), std::invalid_argument);
  CHECK_THROWS_AS(make_model(topo, 0.5, 1.5, 0.01), std::invalid_argument);
  CHECK_THROWS_AS(make_model(topo, 0.5, 0.5, -1.0), std::invalid_argument);
}
