#include "estimator.hpp"

#include "errors.hpp"

namespace calm {

EstimatorState initial_estimator_state(int state_dim) {
  // x0 ~ Uniform[-1, 1]^n, so E[x0] = 0.
  return {Eigen::VectorXd::Zero(state_dim), 0, 0};
}

EstimatorNet make_estimator_net(int state_dim, const std::vector<int>& hidden,
                                std::uint64_t seed) {
  std::vector<int> sizes{state_dim + 1};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(state_dim);
  // Small output layer: xi starts near zero, i.e. near the linear receiver.
  return {init_mlp(sizes, seed, 0.01)};
}

void check_estimator_net(const EstimatorNet& net, const SystemModel& model) {
  if (net.params.input_dim() != model.state_dim + 1 ||
      net.params.output_dim() != model.state_dim)
    throw InvalidArgument("estimator network shape does not match system '" +
                          model.name + "'");
}

Eigen::VectorXd estimator_features(const Eigen::VectorXd& estimate,
                                   std::int64_t age) {
  Eigen::VectorXd in(estimate.size() + 1);
  in.head(estimate.size()) = estimate;
  in(estimate.size()) = static_cast<double>(age);
  return in;
}

EstimatorState estimator_update(const EstimatorState& state,
                                const EstimatorNet* net,
                                const SystemModel& model, int delta,
                                const std::optional<Eigen::VectorXd>& x_true) {
  EstimatorState next;
  next.time = state.time + 1;
  if (delta == 1) {
    if (!x_true)
      throw InvalidArgument("estimator_update: transmission without a state");
    if (x_true->size() != model.state_dim)
      throw InvalidArgument("estimator_update: transmitted state has wrong size");
    next.estimate = *x_true;
    next.last_transmit = next.time;
    return next;
  }
  if (delta != 0) throw InvalidArgument("estimator_update: delta must be 0 or 1");
  next.last_transmit = state.last_transmit;
  next.estimate = predict(model, state.estimate);
  if (net)
    next.estimate +=
        forward(net->params, estimator_features(state.estimate, state.age()));
  return next;
}

EstimatorState linear_baseline_update(
    const EstimatorState& state, const SystemModel& model, int delta,
    const std::optional<Eigen::VectorXd>& x_true) {
  return estimator_update(state, nullptr, model, delta, x_true);
}

}  // namespace calm
