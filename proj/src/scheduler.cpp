#include "scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "errors.hpp"

namespace calm {
namespace {

std::vector<int> sizes_with(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

}  // namespace

PolicyNet make_policy_net(int state_dim, const std::vector<int>& hidden,
                          std::uint64_t seed) {
  // Small output layer so the initial policy is close to a fair coin.
  return {init_mlp(sizes_with(state_dim, hidden, 2), seed, 0.01)};
}

ValueNet make_value_net(int state_dim, const std::vector<int>& hidden,
                        std::uint64_t seed) {
  return {init_mlp(sizes_with(state_dim, hidden, 1), seed)};
}

Eigen::Vector2d softmax2(const Eigen::Vector2d& logits) {
  const double m = logits.maxCoeff();
  const Eigen::Vector2d e = (logits.array() - m).exp();
  return e / e.sum();
}

Eigen::Vector2d action_probabilities(const PolicyNet& policy,
                                     const Eigen::VectorXd& error) {
  const Eigen::VectorXd logits = forward(policy.params, error);
  if (!logits.allFinite()) throw NumericError("policy: non-finite logits");
  return softmax2(logits);
}

ActionSample policy_sample(const PolicyNet& policy, const Eigen::VectorXd& error,
                           Rng& rng) {
  if (!error.allFinite()) throw NumericError("policy: non-finite error input");
  const Eigen::VectorXd logits = forward(policy.params, error);
  if (!logits.allFinite()) throw NumericError("policy: non-finite logits");
  const double m = logits.maxCoeff();
  const double lse = m + std::log(std::exp(logits(0) - m) + std::exp(logits(1) - m));
  const double p1 = std::exp(logits(1) - lse);
  ActionSample s;
  s.delta = rng.uniform() < p1 ? 1 : 0;
  s.log_prob = logits(s.delta) - lse;
  return s;
}

GaeResult compute_gae(std::span<const double> rewards,
                      std::span<const double> values, double bootstrap_value,
                      double gamma, double gae_lambda) {
  if (rewards.size() != values.size())
    throw InvalidArgument("gae: rewards and values differ in length");
  const Eigen::Index n = static_cast<Eigen::Index>(rewards.size());
  GaeResult out{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  double running = 0.0;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const double next_value = (t + 1 < n) ? values[t + 1] : bootstrap_value;
    const double td = rewards[t] + gamma * next_value - values[t];
    running = td + gamma * gae_lambda * running;
    out.advantages(t) = running;
    out.returns(t) = running + values[t];
  }
  return out;
}

PpoBatch flatten_buffers(std::span<const RolloutBuffer> buffers,
                         bool normalize_advantages) {
  if (buffers.empty()) throw InvalidArgument("ppo: no rollout buffers");
  int total = 0;
  for (const auto& b : buffers) total += b.size();
  if (total == 0) throw InvalidArgument("ppo: empty rollout buffers");
  const Eigen::Index dim = buffers[0].errors.rows();
  PpoBatch batch;
  batch.errors.resize(dim, total);
  batch.old_log_probs.resize(total);
  batch.advantages.resize(total);
  batch.returns.resize(total);
  batch.actions.reserve(total);
  Eigen::Index col = 0;
  for (const auto& b : buffers) {
    const int n = b.size();
    if (b.errors.rows() != dim || b.errors.cols() != n ||
        b.log_probs.size() != n || b.advantages.size() != n ||
        b.returns.size() != n)
      throw InvalidArgument("ppo: inconsistent rollout buffer");
    batch.errors.middleCols(col, n) = b.errors;
    batch.old_log_probs.segment(col, n) = b.log_probs;
    batch.advantages.segment(col, n) = b.advantages;
    batch.returns.segment(col, n) = b.returns;
    batch.actions.insert(batch.actions.end(), b.actions.begin(), b.actions.end());
    col += n;
  }
  if (normalize_advantages) {
    const double mean = batch.advantages.mean();
    const double var = (batch.advantages.array() - mean).square().mean();
    batch.advantages =
        (batch.advantages.array() - mean) / (std::sqrt(var) + 1e-8);
  }
  return batch;
}

SurrogateResult clipped_surrogate(const PolicyNet& policy, const PpoBatch& batch,
                                  double clip_epsilon, double entropy_coef,
                                  bool want_gradient) {
  const int n = batch.size();
  ForwardCache cache;
  const Eigen::MatrixXd logits =
      forward_batch(policy.params, batch.errors, want_gradient ? &cache : nullptr);
  if (!logits.allFinite()) throw NumericError("ppo: non-finite policy logits");

  SurrogateResult out;
  Eigen::MatrixXd upstream(2, n);
  const double inv_n = 1.0 / n;
  double clipped = 0.0;
  for (int i = 0; i < n; ++i) {
    const double m = logits.col(i).maxCoeff();
    const double lse =
        m + std::log(std::exp(logits(0, i) - m) + std::exp(logits(1, i) - m));
    const Eigen::Vector2d logp(logits(0, i) - lse, logits(1, i) - lse);
    const Eigen::Vector2d p = logp.array().exp();
    const int a = batch.actions[i];
    const double adv = batch.advantages(i);
    const double ratio = std::exp(logp(a) - batch.old_log_probs(i));
    const double bounded =
        std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
    const double unclipped_term = ratio * adv;
    const double clipped_term = bounded * adv;
    const bool unclipped_active = unclipped_term <= clipped_term;
    out.surrogate += unclipped_active ? unclipped_term : clipped_term;
    if (bounded != ratio) clipped += 1.0;
    const double entropy = -(p.array() * logp.array()).sum();
    out.entropy += entropy;

    if (want_gradient) {
      Eigen::Vector2d g = Eigen::Vector2d::Zero();
      if (unclipped_active) {
        Eigen::Vector2d dlogp = -p;
        dlogp(a) += 1.0;
        g += adv * ratio * dlogp;
      }
      g += entropy_coef * (-(p.array() * (logp.array() + entropy))).matrix();
      upstream.col(i) = g * inv_n;
    }
  }
  out.surrogate *= inv_n;
  out.entropy *= inv_n;
  out.clip_fraction = clipped * inv_n;
  out.objective = out.surrogate + entropy_coef * out.entropy;
  if (!std::isfinite(out.objective))
    throw NumericError("ppo: non-finite surrogate over batch of " +
                       std::to_string(n));
  if (want_gradient) out.gradient = backward_batch(policy.params, cache, upstream);
  return out;
}

ValueLoss value_loss(const ValueNet& value, const Eigen::MatrixXd& errors,
                     const Eigen::VectorXd& targets, bool want_gradient) {
  if (errors.cols() != targets.size())
    throw InvalidArgument("value loss: input/target count mismatch");
  ForwardCache cache;
  const Eigen::MatrixXd pred =
      forward_batch(value.params, errors, want_gradient ? &cache : nullptr);
  const Eigen::RowVectorXd diff = pred.row(0) - targets.transpose();
  ValueLoss out;
  out.mse = diff.squaredNorm() / static_cast<double>(diff.size());
  if (!std::isfinite(out.mse)) throw NumericError("value loss: non-finite");
  if (want_gradient) {
    const Eigen::MatrixXd upstream = (2.0 / diff.size()) * diff;
    out.gradient = backward_batch(value.params, cache, upstream);
  }
  return out;
}

std::vector<double> fit_value(ValueNet& value, AdamState& optimizer,
                              const Eigen::MatrixXd& errors,
                              const Eigen::VectorXd& targets, int epochs) {
  std::vector<double> history;
  for (int e = 0; e < epochs; ++e) {
    ValueLoss loss = value_loss(value, errors, targets);
    history.push_back(loss.mse);
    auto [params, opt] = adam_step(value.params, optimizer, loss.gradient);
    value.params = std::move(params);
    optimizer = std::move(opt);
  }
  history.push_back(value_loss(value, errors, targets, false).mse);
  return history;
}

PpoResult ppo_update(const PolicyNet& policy, const ValueNet& value,
                     const AdamState& policy_optimizer,
                     const AdamState& value_optimizer,
                     std::span<const RolloutBuffer> buffers,
                     const PpoConfig& config) {
  if (config.update_iters < 1)
    throw InvalidArgument("ppo: update_iters must be >= 1");
  const PpoBatch batch = flatten_buffers(buffers, config.normalize_advantages);
  PpoResult out{policy, value, policy_optimizer, value_optimizer, {}};
  for (int it = 0; it < config.update_iters; ++it) {
    SurrogateResult sur = clipped_surrogate(out.policy, batch, config.clip_epsilon,
                                            config.entropy_coef);
    ValueLoss vl = value_loss(out.value, batch.errors, batch.returns);
    if (it == 0) {
      out.stats.surrogate = sur.surrogate;
      out.stats.entropy = sur.entropy;
      out.stats.value_loss = vl.mse;
      out.stats.clip_fraction = sur.clip_fraction;
    }
    sur.gradient.scale(-1.0);  // ascent
    auto [p, popt] = adam_step(out.policy.params, out.policy_optimizer, sur.gradient);
    out.policy.params = std::move(p);
    out.policy_optimizer = std::move(popt);
    auto [v, vopt] = adam_step(out.value.params, out.value_optimizer, vl.gradient);
    out.value.params = std::move(v);
    out.value_optimizer = std::move(vopt);
  }
  return out;
}

}  // namespace calm
