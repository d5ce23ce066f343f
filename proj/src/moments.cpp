#include "asyncnet/moments.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace asyncnet {

Eigen::MatrixXd mean_matrix(const BernoulliAsyncModel& model) {
  const int n = model.n_agents();
  const Topology& topo = model.topology();
  Eigen::MatrixXd a_bar = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    const double w = model.nominal_weight(k);
    double off_sum = 0.0;
    for (int l : topo.neighbors[k]) {
      if (l == k) continue;
      a_bar(l, k) = model.eta(l, k) * w;
      off_sum += a_bar(l, k);
    }
    a_bar(k, k) = 1.0 - off_sum;
  }
  return a_bar;
}

SecondMoment::SecondMoment(Eigen::MatrixXd a_bar,
                           std::vector<std::vector<int>> support,
                           std::vector<Eigen::MatrixXd> column_joint,
                           bool monte_carlo, long sample_count)
    : a_bar_(std::move(a_bar)),
      support_(std::move(support)),
      column_joint_(std::move(column_joint)),
      monte_carlo_(monte_carlo),
      sample_count_(sample_count) {
  const int n = this->n();
  column_correction_.resize(n);
  for (int k = 0; k < n; ++k) {
    const auto& nb = support_[k];
    const int d = static_cast<int>(nb.size());
    Eigen::VectorXd means(d);
    for (int i = 0; i < d; ++i) means[i] = a_bar_(nb[i], k);
    column_correction_[k] = column_joint_[k] - means * means.transpose();
  }
}

Eigen::VectorXd SecondMoment::apply(const Eigen::VectorXd& x) const {
  const int n = this->n();
  // x[l*N + n] laid out column-major as Y(n, l): (Abar (x) Abar) x is then
  // vec(Abar * Y * Abar^T).
  Eigen::Map<const Eigen::MatrixXd> y(x.data(), n, n);
  Eigen::MatrixXd out = a_bar_ * y * a_bar_.transpose();
  // Same-column corrections read the diagonal of Y and scatter the
  // covariance block of each column.
  for (int k = 0; k < n; ++k) {
    const double s = y(k, k);
    if (s == 0.0) continue;
    const auto& nb = support_[k];
    const auto& corr = column_correction_[k];
    const int d = static_cast<int>(nb.size());
    for (int j = 0; j < d; ++j) {
      const int l = nb[j];
      for (int i = 0; i < d; ++i) out(nb[i], l) += corr(j, i) * s;
    }
  }
  return Eigen::Map<const Eigen::VectorXd>(out.data(), n * n);
}

Eigen::MatrixXd SecondMoment::dense() const {
  const int n = this->n();
  Eigen::MatrixXd s(n * n, n * n);
  for (int l = 0; l < n; ++l)
    for (int k = 0; k < n; ++k)
      s.block(l * n, k * n, n, n) = a_bar_(l, k) * a_bar_;
  for (int k = 0; k < n; ++k) {
    const auto& nb = support_[k];
    const int d = static_cast<int>(nb.size());
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        s(nb[i] * n + nb[j], k * n + k) = column_joint_[k](i, j);
  }
  return s;
}

namespace {

// Exact joint moments of one column by enumerating its link patterns.
// Entries of the column are affine in the independent link indicators:
// a_lk = w * on_l for l != k and a_kk = 1 - (#on) * w.
Eigen::MatrixXd enumerate_column_joint(const BernoulliAsyncModel& model, int k) {
  const auto& nb = model.topology().neighbors[k];
  const int d = static_cast<int>(nb.size());
  const double w = model.nominal_weight(k);
  std::vector<int> links;  // indices into nb, excluding self
  std::vector<double> eta;
  for (int i = 0; i < d; ++i) {
    if (nb[i] != k) {
      links.push_back(i);
      eta.push_back(model.eta(nb[i], k));
    }
  }
  const int self_pos =
      static_cast<int>(std::lower_bound(nb.begin(), nb.end(), k) - nb.begin());
  const int m = static_cast<int>(links.size());
  Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd col(d);
  for (std::uint64_t pattern = 0; pattern < (1ULL << m); ++pattern) {
    double prob = 1.0;
    int active = 0;
    col.setZero();
    for (int b = 0; b < m; ++b) {
      if (pattern & (1ULL << b)) {
        prob *= eta[b];
        col[links[b]] = w;
        ++active;
      } else {
        prob *= 1.0 - eta[b];
      }
    }
    col[self_pos] = 1.0 - active * w;
    joint.noalias() += prob * (col * col.transpose());
  }
  return joint;
}

std::vector<Eigen::MatrixXd> monte_carlo_column_joints(
    const BernoulliAsyncModel& model, long samples, std::uint64_t seed) {
  const int n = model.n_agents();
  const Topology& topo = model.topology();
  std::vector<Eigen::MatrixXd> joints(n);
  for (int k = 0; k < n; ++k) {
    const int d = topo.degree(k);
    joints[k] = Eigen::MatrixXd::Zero(d, d);
  }
  Rng rng(seed, streams::kSecondMomentMc);
  std::vector<Eigen::VectorXd> col(n);
  for (int k = 0; k < n; ++k) col[k].resize(topo.degree(k));
  for (long s = 0; s < samples; ++s) {
    for (int k = 0; k < n; ++k) {
      const auto& nb = topo.neighbors[k];
      const double w = model.nominal_weight(k);
      int active = 0;
      int self_pos = 0;
      for (int i = 0; i < static_cast<int>(nb.size()); ++i) {
        if (nb[i] == k) {
          self_pos = i;
          col[k][i] = 0.0;
          continue;
        }
        if (rng.bernoulli(model.eta(nb[i], k))) {
          col[k][i] = w;
          ++active;
        } else {
          col[k][i] = 0.0;
        }
      }
      col[k][self_pos] = 1.0 - active * w;
      joints[k].noalias() += col[k] * col[k].transpose();
    }
  }
  for (int k = 0; k < n; ++k) joints[k] /= static_cast<double>(samples);
  return joints;
}

}  // namespace

SecondMoment second_moment(const BernoulliAsyncModel& model,
                           const SecondMomentOptions& options) {
  const int n = model.n_agents();
  const Topology& topo = model.topology();
  int max_links = 0;
  for (int k = 0; k < n; ++k) max_links = std::max(max_links, topo.degree(k) - 1);

  using Mode = SecondMomentOptions::Mode;
  bool exact = true;
  if (options.mode == Mode::kExact) {
    if (max_links > options.enumeration_threshold)
      throw std::runtime_error("enumeration overflow");
  } else if (options.mode == Mode::kMonteCarlo) {
    exact = false;
  } else {
    exact = max_links <= options.enumeration_threshold;
  }

  Eigen::MatrixXd a_bar = mean_matrix(model);
  std::vector<std::vector<int>> support = topo.neighbors;
  std::vector<Eigen::MatrixXd> joints;
  long count = 0;
  if (exact) {
    joints.resize(n);
    for (int k = 0; k < n; ++k) joints[k] = enumerate_column_joint(model, k);
  } else {
    count = options.mc_samples;
    joints = monte_carlo_column_joints(model, count, options.mc_seed);
  }
  return SecondMoment(std::move(a_bar), std::move(support), std::move(joints),
                      !exact, count);
}

Eigen::VectorXd perron_apply(
    int dim,
    const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& apply,
    const PerronOptions& options) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
  x[0] = 1.0;  // basis start: reducible inputs leave mass stuck and get caught
               // by the positivity test below
  Eigen::VectorXd y(dim);
  double prev_resid = -1.0;
  for (int it = 0; it < options.max_iter; ++it) {
    apply(x, y);
    const double sum = y.sum();
    if (!(sum > 0.0) || !y.allFinite())
      throw std::runtime_error("not primitive / no unique Perron vector");
    y /= sum;
    const double resid = (y - x).lpNorm<Eigen::Infinity>();
    x.swap(y);
    // The distance to the fixed point is about resid/(1 - lambda_2), so
    // the stopping residual is tightened by the observed contraction
    // ratio; the floor keeps the target reachable above rounding noise.
    double gap = 1.0;
    if (prev_resid > 0.0 && resid < prev_resid)
      gap = std::max(1.0 - resid / prev_resid, 0.01);
    prev_resid = resid;
    if (resid <= options.tol * gap) {
      if (x.minCoeff() <= options.positivity_floor)
        throw std::runtime_error("not primitive / no unique Perron vector");
      return x;
    }
  }
  throw std::runtime_error("not primitive / no unique Perron vector");
}

Eigen::VectorXd perron(const Eigen::MatrixXd& matrix, const PerronOptions& options) {
  const int dim = static_cast<int>(matrix.rows());
  if (matrix.cols() != dim) throw std::invalid_argument("matrix must be square");
  if (matrix.minCoeff() < 0.0)
    throw std::invalid_argument("matrix is not left-stochastic");
  for (int k = 0; k < dim; ++k) {
    if (std::abs(matrix.col(k).sum() - 1.0) > 1e-9)
      throw std::invalid_argument("matrix is not left-stochastic");
  }
  return perron_apply(
      dim,
      [&](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
        out.noalias() = matrix * in;
      },
      options);
}

JointPerron joint_perron(const SecondMoment& s, const PerronOptions& options) {
  const int n = s.n();
  JointPerron jp;
  jp.p = perron_apply(
      n * n,
      [&](const Eigen::VectorXd& in, Eigen::VectorXd& out) { out = s.apply(in); },
      options);
  Eigen::Map<const Eigen::MatrixXd> raw(jp.p.data(), n, n);
  jp.symmetry_deviation = (raw - raw.transpose()).lpNorm<Eigen::Infinity>();
  if (jp.symmetry_deviation > 1e-10)
    throw std::runtime_error("joint Perron matrix is not symmetric");
  jp.P_p = 0.5 * (raw + raw.transpose());
  return jp;
}

FusionMoments fusion_moments(const Eigen::VectorXd& p_bar,
                             const Eigen::MatrixXd& P_p) {
  FusionMoments fm;
  fm.pi_bar = p_bar;
  fm.C_pi = P_p - p_bar * p_bar.transpose();
  const double row_sum = (fm.C_pi * Eigen::VectorXd::Ones(p_bar.size()))
                             .lpNorm<Eigen::Infinity>();
  if (row_sum > 1e-10)
    throw std::runtime_error("matching violated: fusion covariance rows do not sum to zero");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fm.C_pi);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() < -1e-9)
    throw std::runtime_error("matching violated: fusion covariance is not positive semi-definite");
  return fm;
}

MomentSet compute_moments(const BernoulliAsyncModel& model,
                          const SecondMomentOptions& options) {
  SecondMoment s = second_moment(model, options);
  Eigen::MatrixXd a_bar = s.a_bar();
  Eigen::VectorXd p_bar = perron(a_bar);
  JointPerron jp = joint_perron(s);
  Eigen::MatrixXd c_p = jp.P_p - p_bar * p_bar.transpose();
  FusionMoments fusion = fusion_moments(p_bar, jp.P_p);
  return MomentSet{std::move(a_bar), std::move(s),   std::move(p_bar),
                   std::move(jp.p),  std::move(jp.P_p), std::move(c_p),
                   jp.symmetry_deviation, std::move(fusion)};
}

namespace {

nlohmann::ordered_json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> flat;
  flat.reserve(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  return nlohmann::ordered_json{
      {"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw std::runtime_error("matrix payload size mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[r * cols + c];
  return m;
}

std::vector<double> vector_to_std(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

}  // namespace

nlohmann::ordered_json moments_to_json(const MomentSet& m) {
  nlohmann::ordered_json j;
  j["n_agents"] = m.a_bar.rows();
  j["a_bar"] = matrix_to_json(m.a_bar);
  j["p_bar"] = vector_to_std(m.p_bar);
  j["P_p"] = matrix_to_json(m.P_p);
  j["C_p"] = matrix_to_json(m.C_p);
  j["p_symmetry_deviation"] = m.p_symmetry_deviation;
  j["pi_bar"] = vector_to_std(m.fusion.pi_bar);
  j["C_pi"] = matrix_to_json(m.fusion.C_pi);
  nlohmann::ordered_json second;
  second["monte_carlo"] = m.s.monte_carlo();
  second["sample_count"] = m.s.sample_count();
  nlohmann::ordered_json cols = nlohmann::ordered_json::array();
  for (int k = 0; k < m.s.n(); ++k) {
    cols.push_back(nlohmann::ordered_json{
        {"agent", k},
        {"support", m.s.support()[k]},
        {"joint", matrix_to_json(m.s.column_joint()[k])}});
  }
  second["columns"] = cols;
  j["second_moment"] = second;
  return j;
}

MomentSet moments_from_json(const nlohmann::json& j) {
  Eigen::MatrixXd a_bar = matrix_from_json(j.at("a_bar"));
  const auto& second = j.at("second_moment");
  std::vector<std::vector<int>> support;
  std::vector<Eigen::MatrixXd> joints;
  for (const auto& col : second.at("columns")) {
    support.push_back(col.at("support").get<std::vector<int>>());
    joints.push_back(matrix_from_json(col.at("joint")));
  }
  SecondMoment s(a_bar, std::move(support), std::move(joints),
                 second.at("monte_carlo").get<bool>(),
                 second.at("sample_count").get<long>());
  const auto p_bar_std = j.at("p_bar").get<std::vector<double>>();
  Eigen::VectorXd p_bar =
      Eigen::Map<const Eigen::VectorXd>(p_bar_std.data(), p_bar_std.size());
  Eigen::MatrixXd P_p = matrix_from_json(j.at("P_p"));
  Eigen::MatrixXd C_p = matrix_from_json(j.at("C_p"));
  const int n = static_cast<int>(a_bar.rows());
  Eigen::VectorXd p(n * n);
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i) p[l * n + i] = P_p(i, l);
  FusionMoments fusion{p_bar, matrix_from_json(j.at("C_pi"))};
  return MomentSet{std::move(a_bar), std::move(s),   std::move(p_bar),
                   std::move(p),     std::move(P_p), std::move(C_p),
                   j.at("p_symmetry_deviation").get<double>(), std::move(fusion)};
}

}  // namespace asyncnet
