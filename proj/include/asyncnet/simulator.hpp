#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "asyncnet/model.hpp"
#include "asyncnet/theory.hpp"

namespace asyncnet {

enum class Strategy : int {
  kDistAsync = 0,
  kDistSync = 1,
  kCentAsync = 2,
  kCentSync = 3,
};
inline constexpr int kNumStrategies = 4;
const char* strategy_name(Strategy s);

struct ScenarioTruth {
  Eigen::VectorXcd w_o;                    // shared by all agents
  std::vector<AgentDataProfile> profiles;  // one per agent
};

struct LearningCurve {
  Strategy strategy{};
  Eigen::VectorXd msd;  // trial-averaged network MSD per iteration, linear
  int n_trials = 0;
  int n_iters = 0;
};

struct SteadyStateEstimate {
  double msd_linear = 0.0;
  double msd_db = 0.0;
  int tail_window = 0;
  double std_err_linear = 0.0;  // trial-level standard error of tail means
  double std_err_db = 0.0;
};

struct SimOptions {
  int iterations = 6000;
  int trials = 100;
  double tail_fraction = 0.1;
  int fusion_t = 100;    // matrix products per fusion draw
  int fusion_pool = 0;   // 0 = fresh fusion vector every iteration
  bool real_data = false;
  std::uint64_t base_seed = 1;
  std::array<bool, kNumStrategies> enabled{true, true, true, true};
  int threads = 0;  // 0 = hardware concurrency
  // Test hook; the default start is the zero vector.
  std::optional<Eigen::VectorXcd> initial_w;
  double divergence_threshold = 1e12;
};

struct SimulationResult {
  std::array<std::optional<LearningCurve>, kNumStrategies> curves;
  std::array<std::optional<SteadyStateEstimate>, kNumStrategies> steady;
  std::array<std::vector<double>, kNumStrategies> trial_tails;
};

// Streaming data source for the linear regression task. Regressors are
// circular complex Gaussian with per-agent covariance (real Gaussian in
// real_data mode); observations are d = u w_o + noise.
class DataGenerator {
 public:
  DataGenerator(const ScenarioTruth& truth, bool real_data);
  void sample(int agent, Rng& rng, Eigen::RowVectorXcd& u,
              std::complex<double>& d) const;
  int dim() const { return static_cast<int>(truth_->w_o.size()); }

 private:
  const ScenarioTruth* truth_;
  std::vector<Eigen::MatrixXcd> chol_;
  bool real_data_;
};

// phi = (1/N) A'_t ... A'_1 1 for t independent realizations: a random
// vector on the probability simplex whose first two moments match the
// Perron vectors of the combination-matrix moments.
Eigen::VectorXd sample_fusion_vector(const BernoulliAsyncModel& model, int t,
                                     Rng& rng);

// All four strategies on a common per-trial data stream; each strategy
// draws its parameter randomness from its own stream so results do not
// depend on which strategies are enabled. Throws
// std::runtime_error("numerical divergence ...") when a curve blows up.
void run_trial(const BernoulliAsyncModel& model, const ScenarioTruth& truth,
               const Eigen::MatrixXd& a_bar, const Eigen::VectorXd& p_bar,
               const SimOptions& opts, int trial,
               std::array<Eigen::VectorXd, kNumStrategies>& curves);

SimulationResult run_simulation(const BernoulliAsyncModel& model,
                                const ScenarioTruth& truth,
                                const Eigen::MatrixXd& a_bar,
                                const Eigen::VectorXd& p_bar,
                                const SimOptions& opts);

LearningCurve average_curves(Strategy strategy,
                             const std::vector<Eigen::VectorXd>& trial_curves);

// Tail window is tail_fraction of the run, at least 200 iterations but
// never more than the run itself; throws
// std::runtime_error("insufficient iterations") below 50 samples.
SteadyStateEstimate steady_state(const std::vector<Eigen::VectorXd>& trial_curves,
                                 double tail_fraction,
                                 std::vector<double>* tail_means = nullptr);

}  // namespace asyncnet
