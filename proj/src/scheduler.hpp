#ifndef CALM_SCHEDULER_HPP_
#define CALM_SCHEDULER_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

#include "nn.hpp"
#include "rng.hpp"

namespace calm {

// pi_theta(delta | e): two logits, softmax over {0 = silent, 1 = transmit}.
struct PolicyNet {
  Mlp params;
};

// V_phi(e), scalar output.
struct ValueNet {
  Mlp params;
};

PolicyNet make_policy_net(int state_dim, const std::vector<int>& hidden,
                          std::uint64_t seed);
ValueNet make_value_net(int state_dim, const std::vector<int>& hidden,
                        std::uint64_t seed);

// One trajectory of PPO data. Column t of `errors` is the policy input e_t.
struct RolloutBuffer {
  Eigen::MatrixXd errors;
  std::vector<int> actions;
  Eigen::VectorXd log_probs;
  Eigen::VectorXd rewards;
  Eigen::VectorXd values;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;

  int size() const { return static_cast<int>(actions.size()); }
};

// Numerically stable softmax of a two-logit vector; returns (p0, p1).
Eigen::Vector2d softmax2(const Eigen::Vector2d& logits);
Eigen::Vector2d action_probabilities(const PolicyNet& policy,
                                     const Eigen::VectorXd& error);

struct ActionSample {
  int delta = 0;
  double log_prob = 0.0;
};

// Draws delta with one uniform variate; NumericError on non-finite logits.
ActionSample policy_sample(const PolicyNet& policy, const Eigen::VectorXd& error,
                           Rng& rng);

struct GaeResult {
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
};

// Backward recursion A_t = d_t + gamma * lam * A_{t+1} with
// d_t = r_t + gamma v_{t+1} - v_t and v_T = bootstrap; returns = A + v.
GaeResult compute_gae(std::span<const double> rewards,
                      std::span<const double> values, double bootstrap_value,
                      double gamma, double gae_lambda);

// Flattened PPO batch.
struct PpoBatch {
  Eigen::MatrixXd errors;
  std::vector<int> actions;
  Eigen::VectorXd old_log_probs;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;

  int size() const { return static_cast<int>(actions.size()); }
};

PpoBatch flatten_buffers(std::span<const RolloutBuffer> buffers,
                         bool normalize_advantages);

struct SurrogateResult {
  double surrogate = 0.0;   // mean of min(z A, clip(z, 1 +- eps) A)
  double entropy = 0.0;     // mean policy entropy
  double objective = 0.0;   // surrogate + entropy_coef * entropy
  double clip_fraction = 0.0;
  Gradients gradient;       // d objective / d theta (ascent direction)
};

SurrogateResult clipped_surrogate(const PolicyNet& policy, const PpoBatch& batch,
                                  double clip_epsilon, double entropy_coef,
                                  bool want_gradient = true);

struct ValueLoss {
  double mse = 0.0;
  Gradients gradient;  // d mse / d phi
};

ValueLoss value_loss(const ValueNet& value, const Eigen::MatrixXd& errors,
                     const Eigen::VectorXd& targets, bool want_gradient = true);

// `epochs` full-batch Adam steps on the value MSE; returns the MSE measured
// before each step plus the final one (epochs + 1 entries).
std::vector<double> fit_value(ValueNet& value, AdamState& optimizer,
                              const Eigen::MatrixXd& errors,
                              const Eigen::VectorXd& targets, int epochs);

struct PpoConfig {
  double clip_epsilon = 0.2;
  double entropy_coef = 0.01;
  int update_iters = 10;
  bool normalize_advantages = true;
};

struct PpoStats {
  double surrogate = 0.0;
  double entropy = 0.0;
  double value_loss = 0.0;
  double clip_fraction = 0.0;
};

struct PpoResult {
  PolicyNet policy;
  ValueNet value;
  AdamState policy_optimizer;
  AdamState value_optimizer;
  PpoStats stats;  // measured at the start of the update (theta = theta_old)
};

// Maximises the clipped surrogate (plus entropy bonus) on theta and fits
// V_phi to the stored returns, `update_iters` full-batch steps each.
// Advantages must already be filled in.
PpoResult ppo_update(const PolicyNet& policy, const ValueNet& value,
                     const AdamState& policy_optimizer,
                     const AdamState& value_optimizer,
                     std::span<const RolloutBuffer> buffers,
                     const PpoConfig& config);

}  // namespace calm

#endif  // CALM_SCHEDULER_HPP_
