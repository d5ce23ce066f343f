#include "asyncnet/simulator.hpp"

#include <cmath>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace asyncnet {

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kDistAsync: return "dist_async";
    case Strategy::kDistSync: return "dist_sync";
    case Strategy::kCentAsync: return "cent_async";
    case Strategy::kCentSync: return "cent_sync";
  }
  return "?";
}

DataGenerator::DataGenerator(const ScenarioTruth& truth, bool real_data)
    : truth_(&truth), real_data_(real_data) {
  chol_.reserve(truth.profiles.size());
  for (const auto& p : truth.profiles) {
    Eigen::LLT<Eigen::MatrixXcd> llt(p.r_u);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("regressor covariance is not positive definite");
    chol_.push_back(llt.matrixL());
  }
}

void DataGenerator::sample(int agent, Rng& rng, Eigen::RowVectorXcd& u,
                           std::complex<double>& d) const {
  const int m = dim();
  Eigen::VectorXcd z(m);
  if (real_data_) {
    for (int i = 0; i < m; ++i) z[i] = rng.gaussian();
  } else {
    for (int i = 0; i < m; ++i) z[i] = rng.cgaussian();
  }
  const Eigen::VectorXcd x = chol_[agent] * z;
  u = x.adjoint();
  const double sigma = std::sqrt(truth_->profiles[agent].sigma_xi2);
  std::complex<double> noise;
  if (real_data_)
    noise = sigma * rng.gaussian();
  else
    noise = sigma * rng.cgaussian();
  d = (u * truth_->w_o).value() + noise;
}

Eigen::VectorXd sample_fusion_vector(const BernoulliAsyncModel& model, int t,
                                     Rng& rng) {
  const int n = model.n_agents();
  Eigen::VectorXd v = Eigen::VectorXd::Constant(n, 1.0 / n);
  Eigen::VectorXd scratch(n);
  for (int j = 0; j < t; ++j) model.sample_combination_apply(rng, v, scratch);
  return v;
}

namespace {

struct StrategyState {
  std::vector<Eigen::VectorXcd> w;  // per agent (dist) or single entry (cent)
  std::vector<Eigen::VectorXcd> psi;
};

double network_msd(const std::vector<Eigen::VectorXcd>& w,
                   const Eigen::VectorXcd& w_o) {
  double acc = 0.0;
  for (const auto& wk : w) acc += (w_o - wk).squaredNorm();
  return acc / static_cast<double>(w.size());
}

}  // namespace

void run_trial(const BernoulliAsyncModel& model, const ScenarioTruth& truth,
               const Eigen::MatrixXd& a_bar, const Eigen::VectorXd& p_bar,
               const SimOptions& opts, int trial,
               std::array<Eigen::VectorXd, kNumStrategies>& curves) {
  const int n = model.n_agents();
  const int m = static_cast<int>(truth.w_o.size());
  const int iters = opts.iterations;
  const Topology& topo = model.topology();
  const DataGenerator data(truth, opts.real_data);
  const StepSizeMoments ssm = step_size_moments(model);

  Rng data_rng(opts.base_seed, streams::trial(trial, streams::kData));
  Rng dist_rng(opts.base_seed, streams::trial(trial, streams::kDistAsync));
  Rng fusion_rng(opts.base_seed, streams::trial(trial, streams::kCentFusion));
  Rng step_rng(opts.base_seed, streams::trial(trial, streams::kCentStep));

  const Eigen::VectorXcd w_init =
      opts.initial_w ? *opts.initial_w : Eigen::VectorXcd::Zero(m);
  if (w_init.size() != m)
    throw std::invalid_argument("initial weight dimension mismatch");

  std::vector<Eigen::VectorXcd> w_da(n, w_init), w_ds(n, w_init);
  std::vector<Eigen::VectorXcd> psi(n, Eigen::VectorXcd::Zero(m));
  Eigen::VectorXcd w_ca = w_init, w_cs = w_init;

  for (int s = 0; s < kNumStrategies; ++s)
    if (opts.enabled[s]) curves[s].resize(iters);

  // Optional pre-sampled pool of fusion vectors.
  std::vector<Eigen::VectorXd> pool;
  if (opts.enabled[static_cast<int>(Strategy::kCentAsync)] &&
      opts.fusion_pool > 0) {
    pool.reserve(opts.fusion_pool);
    for (int i = 0; i < opts.fusion_pool; ++i)
      pool.push_back(sample_fusion_vector(model, opts.fusion_t, fusion_rng));
  }

  std::vector<Eigen::RowVectorXcd> u(n, Eigen::RowVectorXcd::Zero(m));
  Eigen::VectorXcd d(n);

  const auto check = [&](double msd, Strategy s, int iter) {
    if (!(msd < opts.divergence_threshold) || !std::isfinite(msd))
      throw std::runtime_error(std::string("numerical divergence in ") +
                               strategy_name(s) + " at iteration " +
                               std::to_string(iter));
  };

  for (int i = 0; i < iters; ++i) {
    // Shared data stream: one fresh (u, d) pair per agent, consumed by
    // every enabled strategy (common random numbers). The step-size
    // realizations are shared between the two asynchronous strategies
    // the same way, which cancels step noise from their comparison
    // without touching either marginal law.
    for (int k = 0; k < n; ++k) {
      std::complex<double> dk;
      data.sample(k, data_rng, u[k], dk);
      d[k] = dk;
    }
    const Eigen::VectorXd steps = model.sample_step_sizes(step_rng);

    if (opts.enabled[static_cast<int>(Strategy::kDistAsync)]) {
      const Eigen::MatrixXd a_real = model.sample_matrix(dist_rng);
      for (int k = 0; k < n; ++k) {
        const std::complex<double> e = d[k] - (u[k] * w_da[k]).value();
        psi[k] = w_da[k] + steps[k] * (u[k].adjoint() * e);
      }
      for (int k = 0; k < n; ++k) {
        w_da[k].setZero();
        for (int l : topo.neighbors[k]) w_da[k] += a_real(l, k) * psi[l];
      }
      const double msd = network_msd(w_da, truth.w_o);
      check(msd, Strategy::kDistAsync, i);
      curves[static_cast<int>(Strategy::kDistAsync)][i] = msd;
    }

    if (opts.enabled[static_cast<int>(Strategy::kDistSync)]) {
      for (int k = 0; k < n; ++k) {
        const std::complex<double> e = d[k] - (u[k] * w_ds[k]).value();
        psi[k] = w_ds[k] + ssm.mu_bar[k] * (u[k].adjoint() * e);
      }
      for (int k = 0; k < n; ++k) {
        w_ds[k].setZero();
        for (int l : topo.neighbors[k]) w_ds[k] += a_bar(l, k) * psi[l];
      }
      const double msd = network_msd(w_ds, truth.w_o);
      check(msd, Strategy::kDistSync, i);
      curves[static_cast<int>(Strategy::kDistSync)][i] = msd;
    }

    if (opts.enabled[static_cast<int>(Strategy::kCentAsync)]) {
      Eigen::VectorXd phi;
      if (opts.fusion_pool > 0)
        phi = pool[fusion_rng.index(pool.size())];
      else
        phi = sample_fusion_vector(model, opts.fusion_t, fusion_rng);
      Eigen::VectorXcd update = Eigen::VectorXcd::Zero(m);
      for (int k = 0; k < n; ++k) {
        const std::complex<double> e = d[k] - (u[k] * w_ca).value();
        update += (phi[k] * steps[k]) * (u[k].adjoint() * e);
      }
      w_ca += update;
      const double msd = (truth.w_o - w_ca).squaredNorm();
      check(msd, Strategy::kCentAsync, i);
      curves[static_cast<int>(Strategy::kCentAsync)][i] = msd;
    }

    if (opts.enabled[static_cast<int>(Strategy::kCentSync)]) {
      Eigen::VectorXcd update = Eigen::VectorXcd::Zero(m);
      for (int k = 0; k < n; ++k) {
        const std::complex<double> e = d[k] - (u[k] * w_cs).value();
        update += (p_bar[k] * ssm.mu_bar[k]) * (u[k].adjoint() * e);
      }
      w_cs += update;
      const double msd = (truth.w_o - w_cs).squaredNorm();
      check(msd, Strategy::kCentSync, i);
      curves[static_cast<int>(Strategy::kCentSync)][i] = msd;
    }
  }
}

SimulationResult run_simulation(const BernoulliAsyncModel& model,
                                const ScenarioTruth& truth,
                                const Eigen::MatrixXd& a_bar,
                                const Eigen::VectorXd& p_bar,
                                const SimOptions& opts) {
  if (opts.trials < 1) throw std::invalid_argument("trials must be at least 1");
  if (opts.iterations < 1)
    throw std::invalid_argument("iterations must be at least 1");

  std::vector<std::array<Eigen::VectorXd, kNumStrategies>> per_trial(opts.trials);
  unsigned threads = opts.threads > 0
                         ? static_cast<unsigned>(opts.threads)
                         : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(opts.trials));

  std::exception_ptr first_error;
  std::mutex error_mutex;
  const auto worker = [&](unsigned offset) {
    for (int t = static_cast<int>(offset); t < opts.trials;
         t += static_cast<int>(threads)) {
      try {
        run_trial(model, truth, a_bar, p_bar, opts, t, per_trial[t]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  if (threads <= 1) {
    worker(0);
  } else {
    std::vector<std::thread> group;
    group.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) group.emplace_back(worker, w);
    for (auto& th : group) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  SimulationResult result;
  for (int s = 0; s < kNumStrategies; ++s) {
    if (!opts.enabled[s]) continue;
    std::vector<Eigen::VectorXd> curves;
    curves.reserve(opts.trials);
    for (auto& trial : per_trial) curves.push_back(std::move(trial[s]));
    result.curves[s] = average_curves(static_cast<Strategy>(s), curves);
    try {
      result.steady[s] =
          steady_state(curves, opts.tail_fraction, &result.trial_tails[s]);
    } catch (const std::runtime_error&) {
      // Runs too short for a steady-state estimate still produce curves.
    }
  }
  return result;
}

LearningCurve average_curves(Strategy strategy,
                             const std::vector<Eigen::VectorXd>& trial_curves) {
  if (trial_curves.empty()) throw std::invalid_argument("no trials to average");
  const Eigen::Index iters = trial_curves.front().size();
  LearningCurve curve;
  curve.strategy = strategy;
  curve.n_trials = static_cast<int>(trial_curves.size());
  curve.n_iters = static_cast<int>(iters);
  curve.msd = Eigen::VectorXd::Zero(iters);
  // Fixed summation order over trials keeps the result bit-stable no
  // matter how the trials were scheduled.
  for (const auto& c : trial_curves) {
    if (c.size() != iters) throw std::invalid_argument("ragged trial curves");
    curve.msd += c;
  }
  curve.msd /= static_cast<double>(trial_curves.size());
  return curve;
}

SteadyStateEstimate steady_state(const std::vector<Eigen::VectorXd>& trial_curves,
                                 double tail_fraction,
                                 std::vector<double>* tail_means) {
  if (trial_curves.empty()) throw std::invalid_argument("no trials");
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0))
    throw std::invalid_argument("tail_fraction must lie in (0,1]");
  const int iters = static_cast<int>(trial_curves.front().size());
  int window = std::max(static_cast<int>(std::llround(tail_fraction * iters)), 200);
  window = std::min(window, iters);
  if (window < 50) throw std::runtime_error("insufficient iterations");

  const int trials = static_cast<int>(trial_curves.size());
  std::vector<double> means(trials);
  for (int t = 0; t < trials; ++t)
    means[t] = trial_curves[t].tail(window).mean();

  double mean = 0.0;
  for (double v : means) mean += v;
  mean /= trials;
  double var = 0.0;
  for (double v : means) var += (v - mean) * (v - mean);
  const double std_err =
      trials > 1 ? std::sqrt(var / (trials - 1) / trials) : 0.0;

  SteadyStateEstimate est;
  est.msd_linear = mean;
  est.msd_db = to_db(mean);
  est.tail_window = window;
  est.std_err_linear = std_err;
  est.std_err_db = mean > 0.0 ? 10.0 / std::log(10.0) * std_err / mean : 0.0;
  if (tail_means) *tail_means = std::move(means);
  return est;
}

}  // namespace asyncnet
