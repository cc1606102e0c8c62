#include "rollout.hpp"

#include <string>

#include "errors.hpp"

namespace calm {

double weighted_sq_norm(const Eigen::VectorXd& e, const Eigen::MatrixXd& weight) {
  if (weight.size() == 0) return e.squaredNorm();
  return e.dot(weight * e);
}

Decider learned_decider(const PolicyNet& policy) {
  return [&policy](const Eigen::VectorXd& e, int, Rng& rng) {
    return policy_sample(policy, e, rng);
  };
}

TrajectoryRecord simulate(const SystemModel& model, const GmmSpec& gmm,
                          const EstimatorNet* estimator, const Decider& decide,
                          const RolloutSettings& settings, Rng& rng) {
  const int n = model.state_dim;
  const int horizon = settings.horizon;
  if (horizon < 1) throw InvalidArgument("rollout: horizon must be >= 1");
  if (gmm.dim() != model.noise_dim)
    throw InvalidArgument("rollout: noise dimension does not match system");
  if (estimator) check_estimator_net(*estimator, model);
  const CostSettings& cost = settings.cost;

  Eigen::VectorXd x(n);
  if (settings.initial_state) {
    if (settings.initial_state->size() != n)
      throw InvalidArgument("rollout: initial state has wrong size");
    x = *settings.initial_state;
  } else {
    for (int i = 0; i < n; ++i) x(i) = rng.uniform(-1.0, 1.0);
  }
  EstimatorState receiver = initial_estimator_state(n);

  TrajectoryRecord rec;
  rec.states.resize(n, horizon);
  rec.estimates.resize(n, horizon);
  rec.errors.resize(n, horizon);
  rec.lookahead.resize(n, horizon);
  rec.deltas.resize(horizon);
  rec.ages.resize(horizon);
  rec.noise_components.resize(horizon);
  rec.log_probs.resize(horizon);
  rec.costs.resize(horizon);

  int component = -1;
  double discount = 1.0;
  for (int t = 0; t < horizon; ++t) {
    const Eigen::VectorXd lookahead = x - receiver.estimate;
    const ActionSample action = decide(lookahead, t, rng);
    if (action.delta == 1) {
      receiver.estimate = x;
      receiver.last_transmit = receiver.time;
    }
    const Eigen::VectorXd error = x - receiver.estimate;
    const double err_cost = weighted_sq_norm(error, cost.cost_weight);
    const double step_cost = err_cost + cost.lambda * action.delta;

    rec.states.col(t) = x;
    rec.estimates.col(t) = receiver.estimate;
    rec.errors.col(t) = error;
    rec.lookahead.col(t) = lookahead;
    rec.deltas[t] = action.delta;
    rec.ages[t] = receiver.age();
    rec.noise_components[t] = component;
    rec.log_probs(t) = action.log_prob;
    rec.costs(t) = step_cost;
    rec.discounted_cost += discount * step_cost;
    rec.estimation_cost += discount * err_cost;
    rec.transmissions += action.delta;
    discount *= cost.gamma;

    if (t + 1 == horizon) break;
    try {
      const GmmDraw w = sample_gmm(gmm, rng);
      component = w.component;
      x = step(model, x, w.value);
      receiver = estimator_update(receiver, estimator, model, 0, std::nullopt);
      if (!receiver.estimate.allFinite())
        throw NumericError("non-finite estimate");
    } catch (const NumericError& e) {
      throw NumericError("rollout diverged at step " + std::to_string(t + 1) +
                         ": " + e.what());
    }
  }
  return rec;
}

std::pair<RolloutBuffer, TrajectoryRecord> collect_rollout(
    const PolicyNet& policy, const EstimatorNet* estimator,
    const ValueNet* value, const SystemModel& model, const GmmSpec& gmm,
    const RolloutSettings& settings, Rng& rng) {
  if (policy.params.input_dim() != model.state_dim ||
      policy.params.output_dim() != 2)
    throw InvalidArgument("policy network shape does not match system '" +
                          model.name + "'");
  TrajectoryRecord rec =
      simulate(model, gmm, estimator, learned_decider(policy), settings, rng);
  RolloutBuffer buf;
  buf.errors = rec.lookahead;
  buf.actions = rec.deltas;
  buf.log_probs = rec.log_probs;
  buf.rewards = -rec.costs;
  if (value) {
    buf.values = forward_batch(value->params, buf.errors).row(0).transpose();
  } else {
    buf.values = Eigen::VectorXd::Zero(rec.horizon());
  }
  return {std::move(buf), std::move(rec)};
}

}  // namespace calm
