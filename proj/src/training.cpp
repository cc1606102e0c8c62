#include "training.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "errors.hpp"

namespace calm {
namespace {

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw InvalidArgument(field + ": " + what);
}

void append(std::vector<EpochLogRow>& log, const std::vector<EpochLogRow>& rows) {
  log.insert(log.end(), rows.begin(), rows.end());
}

}  // namespace

double TrainConfig::effective_reward_scale() const {
  return reward_scale > 0.0 ? reward_scale : 1.0 / std::max(1.0, lambda);
}

void validate(const TrainConfig& c) {
  const SystemKind kind = parse_system_kind(c.system);
  const int n = system_state_dim(kind);
  require(c.gmm.num_components() > 0, "gmm", "missing");
  require(c.gmm.dim() == n, "gmm",
          "dimension " + std::to_string(c.gmm.dim()) + " does not match system '" +
              c.system + "' (" + std::to_string(n) + ")");
  require(std::isfinite(c.lambda) && c.lambda >= 0.0, "lambda", "must be finite and >= 0");
  require(c.gamma > 0.0 && c.gamma < 1.0, "gamma", "must lie in (0, 1)");
  require(c.lqr_gamma > 0.0 && c.lqr_gamma <= 1.0, "lqr_gamma", "must lie in (0, 1]");
  if (c.cost_weight.size() != 0) {
    require(c.cost_weight.rows() == n && c.cost_weight.cols() == n, "cost_weight",
            "must be " + std::to_string(n) + "x" + std::to_string(n));
    require((c.cost_weight - c.cost_weight.transpose()).cwiseAbs().maxCoeff() <= 1e-12,
            "cost_weight", "must be symmetric");
    require(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(c.cost_weight)
                    .eigenvalues()
                    .minCoeff() >= -1e-12,
            "cost_weight", "must be positive semi-definite");
  }
  require(c.horizon >= 1, "horizon", "must be >= 1");
  require(c.outer_iterations >= 1, "outer_iterations", "must be >= 1");
  require(c.ppo_epochs >= 1, "ppo_epochs", "must be >= 1");
  require(c.estimator_epochs >= 1, "estimator_epochs", "must be >= 1");
  require(c.linear_baseline_epochs >= 1, "linear_baseline_epochs", "must be >= 1");
  require(c.rollouts_per_epoch >= 1, "rollouts_per_epoch", "must be >= 1");
  require(c.estimator_rollouts >= 1, "estimator_rollouts", "must be >= 1");
  require(c.estimator_minibatch >= 1, "estimator_minibatch", "must be >= 1");
  for (int h : c.hidden_layers) require(h >= 1, "hidden_layers", "sizes must be >= 1");
  require(c.policy_lr > 0.0, "policy_lr", "must be > 0");
  require(c.value_lr > 0.0, "value_lr", "must be > 0");
  require(c.estimator_lr > 0.0, "estimator_lr", "must be > 0");
  require(c.weight_decay >= 0.0, "weight_decay", "must be >= 0");
  require(c.ppo.clip_epsilon > 0.0 && c.ppo.clip_epsilon < 1.0, "clip_epsilon",
          "must lie in (0, 1)");
  require(c.ppo.entropy_coef >= 0.0, "entropy_coef", "must be >= 0");
  require(c.ppo.update_iters >= 1, "ppo_update_iters", "must be >= 1");
  require(c.gae_lambda >= 0.0 && c.gae_lambda <= 1.0, "gae_lambda", "must lie in [0, 1]");
  require(c.threads >= 1, "threads", "must be >= 1");
}

SystemModel model_for(const TrainConfig& config) {
  return build_system_lqr(config.system, config.gmm, config.lqr_gamma);
}

EstimatorLoss estimator_loss(const EstimatorNet& net,
                             const std::vector<TrajectoryRecord>& rollouts,
                             const CostSettings& cost, LossRecursion recursion) {
  EstimatorLoss out;
  out.gradient = zero_gradients(net.params);
  if (rollouts.empty()) return out;
  const int n = net.params.output_dim();
  const double inv_r = 1.0 / static_cast<double>(rollouts.size());
  const Eigen::MatrixXd sym =
      cost.cost_weight.size() == 0
          ? Eigen::MatrixXd(2.0 * Eigen::MatrixXd::Identity(n, n))
          : Eigen::MatrixXd(cost.cost_weight + cost.cost_weight.transpose());

  int silent = 0;
  for (const auto& r : rollouts)
    for (int t = 1; t < r.horizon(); ++t) silent += r.deltas[t] == 0;
  Eigen::MatrixXd inputs(n + 1, silent);
  Eigen::MatrixXd upstream(n, silent);

  int col = 0;
  for (const auto& r : rollouts) {
    const int horizon = r.horizon();
    std::vector<double> weights(horizon);
    double w = 1.0;
    for (int t = 0; t < horizon; ++t) {
      const int idx = recursion == LossRecursion::kForward ? t : horizon - 1 - t;
      weights[idx] = w;
      w *= cost.gamma;
    }
    double total = 0.0;
    for (int t = 0; t < horizon; ++t) total += weights[t] * r.costs(t);
    out.loss += inv_r * total;
    for (int t = 1; t < horizon; ++t) {
      if (r.deltas[t] != 0) continue;
      inputs.col(col) = estimator_features(r.estimates.col(t - 1), r.ages[t - 1]);
      // d/dxi of w_t (x_t - xhat_t)' Gamma (x_t - xhat_t)
      upstream.col(col) = -inv_r * weights[t] * (sym * r.errors.col(t));
      ++col;
    }
  }
  out.silent_steps = silent;
  if (!std::isfinite(out.loss))
    throw NumericError("estimator: non-finite loss over " +
                       std::to_string(rollouts.size()) + " rollouts");
  if (silent > 0) {
    ForwardCache cache;
    forward_batch(net.params, inputs, &cache);
    out.gradient = backward_batch(net.params, cache, upstream);
  }
  return out;
}

EstimatorTrainResult train_estimator(const EstimatorNet& net,
                                     const AdamState& optimizer,
                                     const PolicyNet& policy,
                                     const SystemModel& model,
                                     const GmmSpec& gmm,
                                     const TrainConfig& config,
                                     int outer_iter) {
  check_estimator_net(net, model);
  EstimatorTrainResult out{net, optimizer, {}};
  const RolloutSettings settings = config.rollout_settings();
  const Decider decide = learned_decider(policy);
  for (int epoch = 1; epoch <= config.estimator_epochs; ++epoch) {
    const EstimatorNet& current = out.net;
    auto rollouts = parallel_map<TrajectoryRecord>(
        config.estimator_rollouts, config.threads, [&](int k) {
          Rng rng(derive_seed(config.seed,
                              {static_cast<std::uint64_t>(Stream::kEstimatorRollout),
                               static_cast<std::uint64_t>(outer_iter),
                               static_cast<std::uint64_t>(epoch),
                               static_cast<std::uint64_t>(k)}));
          return simulate(model, gmm, &current, decide, settings, rng);
        });
    // One Adam step per minibatch of trajectories, in rollout order.
    const int total = static_cast<int>(rollouts.size());
    const int batch = std::min(config.estimator_minibatch, total);
    double loss_sum = 0.0;
    for (int first = 0; first < total; first += batch) {
      const int count = std::min(batch, total - first);
      const std::vector<TrajectoryRecord> chunk(rollouts.begin() + first,
                                                rollouts.begin() + first + count);
      EstimatorLoss loss;
      try {
        loss = estimator_loss(out.net, chunk, config.cost(), config.loss_recursion);
        auto [params, opt] = adam_step(out.net.params, out.optimizer, loss.gradient);
        out.net.params = std::move(params);
        out.optimizer = std::move(opt);
      } catch (const NumericError& e) {
        throw NumericError("estimator epoch " + std::to_string(epoch) +
                           " of outer iteration " + std::to_string(outer_iter) +
                           ": " + e.what());
      }
      loss_sum += loss.loss * count;
    }

    EpochLogRow row;
    row.outer_iter = outer_iter;
    row.phase = "estimator";
    row.epoch = epoch;
    double ret = 0.0, tx = 0.0;
    for (const auto& r : rollouts) {
      ret -= r.discounted_cost;
      tx += r.transmissions;
    }
    row.mean_return = ret / rollouts.size();
    row.tx_rate = tx / (static_cast<double>(rollouts.size()) * config.horizon);
    row.estimator_loss = loss_sum / total;
    out.log.push_back(row);
  }
  return out;
}

PpoEpochResult ppo_epoch(const PolicyNet& policy, const ValueNet& value,
                         const AdamState& policy_opt, const AdamState& value_opt,
                         const EstimatorNet* estimator, const SystemModel& model,
                         const TrainConfig& config, std::uint64_t stream,
                         int outer_iter, int epoch) {
  const RolloutSettings settings = config.rollout_settings();
  const double scale = config.effective_reward_scale();
  using Collected = std::pair<RolloutBuffer, TrajectoryRecord>;
  auto collected = parallel_map<Collected>(
      config.rollouts_per_epoch, config.threads, [&](int k) {
        Rng rng(derive_seed(config.seed, {stream, static_cast<std::uint64_t>(outer_iter),
                                          static_cast<std::uint64_t>(epoch),
                                          static_cast<std::uint64_t>(k)}));
        Collected c = collect_rollout(policy, estimator, &value, model,
                                      config.gmm, settings, rng);
        const Eigen::VectorXd scaled = scale * c.first.rewards;
        GaeResult gae = compute_gae(
            std::span<const double>(scaled.data(), scaled.size()),
            std::span<const double>(c.first.values.data(), c.first.values.size()),
            0.0, config.gamma, config.gae_lambda);
        c.first.advantages = std::move(gae.advantages);
        c.first.returns = std::move(gae.returns);
        return c;
      });

  std::vector<RolloutBuffer> buffers;
  buffers.reserve(collected.size());
  double ret = 0.0, tx = 0.0;
  for (auto& [buf, rec] : collected) {
    ret -= rec.discounted_cost;
    tx += rec.transmissions;
    buffers.push_back(std::move(buf));
  }

  PpoEpochResult out;
  try {
    out.update = ppo_update(policy, value, policy_opt, value_opt, buffers, config.ppo);
  } catch (const NumericError& e) {
    throw NumericError("ppo epoch " + std::to_string(epoch) + " of outer iteration " +
                       std::to_string(outer_iter) + ": " + e.what());
  }
  out.log.outer_iter = outer_iter;
  out.log.phase = "ppo";
  out.log.epoch = epoch;
  out.log.mean_return = ret / collected.size();
  out.log.tx_rate = tx / (static_cast<double>(collected.size()) * config.horizon);
  out.log.surrogate = out.update.stats.surrogate;
  out.log.value_loss = out.update.stats.value_loss;
  out.log.entropy = out.update.stats.entropy;
  return out;
}

InitialNetworks initial_networks(const TrainConfig& config, int n) {
  return {make_policy_net(n, config.hidden_layers, derive_seed(config.seed, {1})),
          make_value_net(n, config.hidden_layers, derive_seed(config.seed, {2})),
          make_estimator_net(n, config.hidden_layers, derive_seed(config.seed, {3}))};
}

TrainResult calm_train(const TrainConfig& config,
                       const IterationCallback& on_iteration) {
  validate(config);
  const SystemModel model = model_for(config);
  InitialNetworks nets = initial_networks(config, model.state_dim);
  AdamState policy_opt = make_adam(nets.policy.params, config.policy_lr);
  AdamState value_opt = make_adam(nets.value.params, config.value_lr);
  AdamState est_opt =
      make_adam(nets.estimator.params, config.estimator_lr, config.weight_decay);

  TrainResult result;
  for (int iter = 1; iter <= config.outer_iterations; ++iter) {
    IterationSummary summary;
    summary.outer_iter = iter;
    for (int epoch = 1; epoch <= config.ppo_epochs; ++epoch) {
      PpoEpochResult r = ppo_epoch(
          nets.policy, nets.value, policy_opt, value_opt, &nets.estimator, model,
          config, static_cast<std::uint64_t>(Stream::kPpoRollout), iter, epoch);
      nets.policy = std::move(r.update.policy);
      nets.value = std::move(r.update.value);
      policy_opt = std::move(r.update.policy_optimizer);
      value_opt = std::move(r.update.value_optimizer);
      result.log.push_back(r.log);
      summary.mean_return = r.log.mean_return;
      summary.tx_rate = r.log.tx_rate;
    }
    EstimatorTrainResult est = train_estimator(nets.estimator, est_opt, nets.policy,
                                               model, config.gmm, config, iter);
    nets.estimator = std::move(est.net);
    est_opt = std::move(est.optimizer);
    summary.estimator_loss = est.log.back().estimator_loss;
    append(result.log, est.log);
    result.iterations.push_back(summary);
    if (on_iteration) on_iteration(iter, nets.policy, nets.value, nets.estimator);
  }
  result.policy = std::move(nets.policy);
  result.value = std::move(nets.value);
  result.estimator = std::move(nets.estimator);
  return result;
}

LinearBaselineResult pretrain_linear_baseline(const TrainConfig& config) {
  validate(config);
  const SystemModel model = model_for(config);
  InitialNetworks nets = initial_networks(config, model.state_dim);
  AdamState policy_opt = make_adam(nets.policy.params, config.policy_lr);
  AdamState value_opt = make_adam(nets.value.params, config.value_lr);
  LinearBaselineResult result;
  for (int epoch = 1; epoch <= config.linear_baseline_epochs; ++epoch) {
    PpoEpochResult r = ppo_epoch(
        nets.policy, nets.value, policy_opt, value_opt, nullptr, model, config,
        static_cast<std::uint64_t>(Stream::kLinearBaseline), 0, epoch);
    nets.policy = std::move(r.update.policy);
    nets.value = std::move(r.update.value);
    policy_opt = std::move(r.update.policy_optimizer);
    value_opt = std::move(r.update.value_optimizer);
    r.log.phase = "linear_ppo";
    result.log.push_back(r.log);
  }
  result.policy = std::move(nets.policy);
  result.value = std::move(nets.value);
  return result;
}

}  // namespace calm
