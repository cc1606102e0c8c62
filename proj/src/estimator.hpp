#ifndef CALM_ESTIMATOR_HPP_
#define CALM_ESTIMATOR_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

#include "nn.hpp"
#include "systems.hpp"

namespace calm {

// Receiver-side estimate. AoI = t - last_transmit.
struct EstimatorState {
  Eigen::VectorXd estimate;
  std::int64_t last_transmit = 0;
  std::int64_t time = 0;

  std::int64_t age() const { return time - last_transmit; }
};

EstimatorState initial_estimator_state(int state_dim);

// Residual network: input (estimate, AoI) of size n + 1, output n. The AoI
// feature is the raw step count.
struct EstimatorNet {
  Mlp params;
};

EstimatorNet make_estimator_net(int state_dim, const std::vector<int>& hidden,
                                std::uint64_t seed);
void check_estimator_net(const EstimatorNet& net, const SystemModel& model);

Eigen::VectorXd estimator_features(const Eigen::VectorXd& estimate,
                                   std::int64_t age);

// One receiver step, t -> t + 1.
//   delta = 1: estimate <- x_true, last_transmit <- t + 1 (AoI resets to 0)
//   delta = 0: estimate <- f(estimate, 0) + xi(estimate, AoI), AoI taken
//              before the update.
// `net == nullptr` is the zero network.
EstimatorState estimator_update(const EstimatorState& state,
                                const EstimatorNet* net,
                                const SystemModel& model, int delta,
                                const std::optional<Eigen::VectorXd>& x_true);

// Piecewise-linear baseline: the same recursion with xi == 0.
EstimatorState linear_baseline_update(
    const EstimatorState& state, const SystemModel& model, int delta,
    const std::optional<Eigen::VectorXd>& x_true);

}  // namespace calm

#endif  // CALM_ESTIMATOR_HPP_
