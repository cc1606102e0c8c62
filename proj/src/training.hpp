#ifndef CALM_TRAINING_HPP_
#define CALM_TRAINING_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "estimator.hpp"
#include "nn.hpp"
#include "rollout.hpp"
#include "scheduler.hpp"
#include "systems.hpp"

namespace calm {

// How the estimator loss weights step t of a length-T rollout.
enum class LossRecursion {
  kForward,    // gamma^t
  kAsPrinted,  // L <- gamma L + c_t, i.e. gamma^(T-1-t)
};

struct TrainConfig {
  std::string system = "pendulum";
  GmmSpec gmm;
  double lambda = 0.0;
  double gamma = 0.99;
  Eigen::MatrixXd cost_weight;  // empty = identity
  double lqr_gamma = 0.9999;

  int horizon = 80;
  int outer_iterations = 10;
  int ppo_epochs = 80;
  int estimator_epochs = 150;
  int linear_baseline_epochs = 1000;
  int rollouts_per_epoch = 32;
  int estimator_rollouts = 32;
  // Trajectories per estimator Adam step within an epoch.
  int estimator_minibatch = 4;

  std::vector<int> hidden_layers{64, 64};
  double policy_lr = 1e-3;
  double value_lr = 1e-3;
  double estimator_lr = 1e-3;
  double weight_decay = 1e-4;
  PpoConfig ppo;
  double gae_lambda = 0.9;
  // Multiplies rewards before GAE / value fitting; <= 0 selects
  // 1 / max(1, lambda).
  double reward_scale = 0.0;
  LossRecursion loss_recursion = LossRecursion::kForward;

  std::uint64_t seed = 1;
  int threads = 1;

  CostSettings cost() const { return {lambda, gamma, cost_weight}; }
  RolloutSettings rollout_settings() const { return {horizon, cost(), {}}; }
  double effective_reward_scale() const;
};

// Throws InvalidArgument naming the offending field.
void validate(const TrainConfig& config);

struct EpochLogRow {
  int outer_iter = 0;
  std::string phase;  // "ppo", "estimator" or "linear_ppo"
  int epoch = 0;
  double mean_return = 0.0;
  double tx_rate = 0.0;
  double estimator_loss = 0.0;  // estimator rows only
  double surrogate = 0.0;       // PPO rows only
  double value_loss = 0.0;      // PPO rows only
  double entropy = 0.0;         // PPO rows only
};

struct IterationSummary {
  int outer_iter = 0;
  double mean_return = 0.0;
  double tx_rate = 0.0;
  double estimator_loss = 0.0;
};

struct EstimatorTrainResult {
  EstimatorNet net;
  AdamState optimizer;
  std::vector<EpochLogRow> log;
};

// Estimator regression against a frozen policy (one outer iteration's
// worth, `estimator_epochs` Adam-with-weight-decay steps). Each silent
// transition contributes the gradient of w_t ||x_t - xhat_t||^2_Gamma
// through xi only; the previous estimate is treated as a constant.
EstimatorTrainResult train_estimator(const EstimatorNet& net,
                                     const AdamState& optimizer,
                                     const PolicyNet& policy,
                                     const SystemModel& model,
                                     const GmmSpec& gmm,
                                     const TrainConfig& config,
                                     int outer_iter = 0);

// Loss and gradient of one epoch's batch of trajectories; exposed for tests.
struct EstimatorLoss {
  double loss = 0.0;  // mean over rollouts of sum_t w_t cost_t
  Gradients gradient;
  int silent_steps = 0;
};
EstimatorLoss estimator_loss(const EstimatorNet& net,
                             const std::vector<TrajectoryRecord>& rollouts,
                             const CostSettings& cost, LossRecursion recursion);

// The policy/value PPO phase for one epoch: collect rollouts, GAE, update.
struct PpoEpochResult {
  PpoResult update;
  EpochLogRow log;
};
PpoEpochResult ppo_epoch(const PolicyNet& policy, const ValueNet& value,
                         const AdamState& policy_opt, const AdamState& value_opt,
                         const EstimatorNet* estimator, const SystemModel& model,
                         const TrainConfig& config,
                         std::uint64_t stream, int outer_iter, int epoch);

struct TrainResult {
  PolicyNet policy;
  ValueNet value;
  EstimatorNet estimator;
  std::vector<EpochLogRow> log;
  std::vector<IterationSummary> iterations;
};

using IterationCallback = std::function<void(
    int outer_iter, const PolicyNet&, const ValueNet&, const EstimatorNet&)>;

// Alternating training: per outer iteration, ppo_epochs PPO epochs with the
// estimator frozen, then estimator_epochs estimator epochs with policy and
// value frozen. Deterministic in config.seed for any thread count.
TrainResult calm_train(const TrainConfig& config,
                       const IterationCallback& on_iteration = {});

struct LinearBaselineResult {
  PolicyNet policy;
  ValueNet value;
  std::vector<EpochLogRow> log;
};

// PPO for linear_baseline_epochs epochs against the piecewise-linear receiver.
LinearBaselineResult pretrain_linear_baseline(const TrainConfig& config);

// The model a config describes (LQR synthesised with Q = R = I).
SystemModel model_for(const TrainConfig& config);

// Networks every training run starts from (seeded from config.seed).
struct InitialNetworks {
  PolicyNet policy;
  ValueNet value;
  EstimatorNet estimator;
};
InitialNetworks initial_networks(const TrainConfig& config, int state_dim);

}  // namespace calm

#endif  // CALM_TRAINING_HPP_
