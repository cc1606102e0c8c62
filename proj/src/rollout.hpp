#ifndef CALM_ROLLOUT_HPP_
#define CALM_ROLLOUT_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "estimator.hpp"
#include "rng.hpp"
#include "scheduler.hpp"
#include "systems.hpp"

namespace calm {

// Communication cost weight lambda, discount gamma and the error weight
// Gamma (empty = identity).
struct CostSettings {
  double lambda = 0.0;
  double gamma = 0.99;
  Eigen::MatrixXd cost_weight;
};

double weighted_sq_norm(const Eigen::VectorXd& e, const Eigen::MatrixXd& weight);

struct RolloutSettings {
  int horizon = 80;
  CostSettings cost;
  // Defaults to a draw from Uniform[-1, 1]^n (taken before any noise).
  std::optional<Eigen::VectorXd> initial_state;
};

// Time series of one closed-loop run. Column t of each matrix is time t.
// `estimates` / `errors` are taken after a possible transmission at t;
// `lookahead` is e_t before it. noise_components[t] is the mixture
// component of the draw that produced x_t (-1 at t = 0).
struct TrajectoryRecord {
  Eigen::MatrixXd states;
  Eigen::MatrixXd estimates;
  Eigen::MatrixXd errors;
  Eigen::MatrixXd lookahead;
  std::vector<int> deltas;
  std::vector<std::int64_t> ages;
  std::vector<int> noise_components;
  Eigen::VectorXd log_probs;
  Eigen::VectorXd costs;          // ||e_t||^2_Gamma + lambda delta_t
  double discounted_cost = 0.0;   // sum gamma^t costs_t
  double estimation_cost = 0.0;   // sum gamma^t ||e_t||^2_Gamma
  int transmissions = 0;

  int horizon() const { return static_cast<int>(deltas.size()); }
};

// Scheduling rule: (lookahead error, time, rng) -> (delta, log prob).
using Decider =
    std::function<ActionSample(const Eigen::VectorXd&, int, Rng&)>;

Decider learned_decider(const PolicyNet& policy);

// Runs the plant, scheduler and receiver for `horizon` steps:
//   e_t = x_t - xhat_t; delta_t ~ rule; on delta_t = 1 xhat_t <- x_t;
//   cost_t = ||x_t - xhat_t||^2 + lambda delta_t;
//   x_{t+1} = f(x_t, w_t); xhat_{t+1} = f(xhat_t, 0) + xi(xhat_t, AoI_t).
// `estimator == nullptr` gives the piecewise-linear receiver. Throws
// NumericError naming the step on a non-finite state.
TrajectoryRecord simulate(const SystemModel& model, const GmmSpec& gmm,
                          const EstimatorNet* estimator, const Decider& decide,
                          const RolloutSettings& settings, Rng& rng);

// simulate() with the learned policy, packaged as PPO data. Rewards are the
// unscaled -cost_t; values come from `value` (zeros when null). Advantages
// and returns are left empty.
std::pair<RolloutBuffer, TrajectoryRecord> collect_rollout(
    const PolicyNet& policy, const EstimatorNet* estimator,
    const ValueNet* value, const SystemModel& model, const GmmSpec& gmm,
    const RolloutSettings& settings, Rng& rng);

// Runs fn(i) for i in [0, n) on up to `threads` workers; results are stored
// by index so the output is independent of the thread count.
template <typename Result>
std::vector<Result> parallel_map(int n, int threads,
                                 const std::function<Result(int)>& fn);

}  // namespace calm

#include "rollout_inl.hpp"

#endif  // CALM_ROLLOUT_HPP_
