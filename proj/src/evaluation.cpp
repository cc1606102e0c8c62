#include "evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"

namespace calm {
namespace {

void mean_std(const std::vector<double>& xs, double& mean, double& sd) {
  mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  sd = 0.0;
  if (xs.size() < 2) return;
  for (double x : xs) sd += (x - mean) * (x - mean);
  sd = std::sqrt(sd / static_cast<double>(xs.size() - 1));
}

}  // namespace

SchedulePolicy SchedulePolicy::learned(PolicyNet policy) {
  SchedulePolicy p;
  p.kind_ = Kind::kLearned;
  p.policy_ = std::make_shared<const PolicyNet>(std::move(policy));
  return p;
}

SchedulePolicy SchedulePolicy::periodic(int period) {
  if (period < 1) throw InvalidArgument("periodic policy: period must be >= 1");
  SchedulePolicy p;
  p.kind_ = Kind::kPeriodic;
  p.period_ = period;
  return p;
}

SchedulePolicy SchedulePolicy::event_triggered(double threshold) {
  if (!(threshold > 0.0))
    throw InvalidArgument("event-triggered policy: threshold must be > 0");
  SchedulePolicy p;
  p.kind_ = Kind::kEventTriggered;
  p.threshold_ = threshold;
  return p;
}

SchedulePolicy SchedulePolicy::always() {
  SchedulePolicy p;
  p.kind_ = Kind::kAlways;
  return p;
}

SchedulePolicy SchedulePolicy::never() { return SchedulePolicy{}; }

std::string SchedulePolicy::id() const {
  switch (kind_) {
    case Kind::kLearned: return "learned";
    case Kind::kPeriodic: return "periodic";
    case Kind::kEventTriggered: return "event";
    case Kind::kAlways: return "always";
    case Kind::kNever: return "never";
  }
  return "unknown";
}

double SchedulePolicy::param() const {
  if (kind_ == Kind::kPeriodic) return period_;
  if (kind_ == Kind::kEventTriggered) return threshold_;
  return 0.0;
}

Decider SchedulePolicy::decider() const {
  switch (kind_) {
    case Kind::kLearned: {
      auto net = policy_;
      return [net](const Eigen::VectorXd& e, int, Rng& rng) {
        return policy_sample(*net, e, rng);
      };
    }
    case Kind::kPeriodic: {
      const int p = period_;
      return [p](const Eigen::VectorXd&, int t, Rng&) {
        return ActionSample{t % p == 0 ? 1 : 0, 0.0};
      };
    }
    case Kind::kEventTriggered: {
      const double tau = threshold_;
      return [tau](const Eigen::VectorXd& e, int, Rng&) {
        return ActionSample{e.squaredNorm() >= tau ? 1 : 0, 0.0};
      };
    }
    case Kind::kAlways:
      return [](const Eigen::VectorXd&, int, Rng&) { return ActionSample{1, 0.0}; };
    case Kind::kNever:
      break;
  }
  return [](const Eigen::VectorXd&, int, Rng&) { return ActionSample{0, 0.0}; };
}

Rng evaluation_rng(std::uint64_t seed) {
  return Rng(derive_seed(seed, {static_cast<std::uint64_t>(Stream::kEvaluation)}));
}

EvalReport evaluate(const SchedulePolicy& policy, const EstimatorNet* estimator,
                    const SystemModel& model, const GmmSpec& gmm,
                    const RolloutSettings& settings,
                    const std::vector<std::uint64_t>& seeds, int threads,
                    std::vector<TrajectoryRecord>* trajectories) {
  if (seeds.empty()) throw InvalidArgument("evaluate: at least one seed required");
  if (settings.horizon < 1) throw InvalidArgument("evaluate: horizon must be >= 1");
  if (policy.network() && policy.network()->params.input_dim() != model.state_dim)
    throw InvalidArgument("evaluate: policy network does not match system");
  const Decider decide = policy.decider();
  auto records = parallel_map<TrajectoryRecord>(
      static_cast<int>(seeds.size()), threads, [&](int i) {
        Rng rng = evaluation_rng(seeds[i]);
        try {
          return simulate(model, gmm, estimator, decide, settings, rng);
        } catch (const NumericError& e) {
          throw NumericError("seed " + std::to_string(seeds[i]) + ": " + e.what());
        }
      });

  EvalReport report;
  report.horizon = settings.horizon;
  std::vector<double> cost, est, tx;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto& r = records[i];
    report.per_seed.push_back({seeds[i], r.discounted_cost, r.estimation_cost,
                               r.transmissions});
    cost.push_back(r.discounted_cost);
    est.push_back(r.estimation_cost);
    tx.push_back(r.transmissions);
  }
  mean_std(cost, report.mean_cost, report.std_cost);
  mean_std(est, report.mean_estimation_cost, report.std_estimation_cost);
  mean_std(tx, report.mean_transmissions, report.std_transmissions);
  if (trajectories) *trajectories = std::move(records);
  return report;
}

std::vector<LandscapePoint> landscape_scan(const SchedulePolicy& policy,
                                           const EstimatorNet* estimator,
                                           const SystemModel& model,
                                           const GmmSpec& gmm,
                                           const RolloutSettings& settings,
                                           int num_points,
                                           std::uint64_t first_seed) {
  if (num_points < 0) throw InvalidArgument("landscape: num_points must be >= 0");
  if (settings.horizon < 2)
    throw InvalidArgument("landscape: horizon must be >= 2 to produce points");
  const Decider decide = policy.decider();
  std::vector<LandscapePoint> points;
  points.reserve(num_points);
  for (std::uint64_t seed = first_seed; static_cast<int>(points.size()) < num_points;
       ++seed) {
    Rng rng = evaluation_rng(seed);
    const TrajectoryRecord r = simulate(model, gmm, estimator, decide, settings, rng);
    for (int t = 1; t < r.horizon() && static_cast<int>(points.size()) < num_points;
         ++t)
      points.push_back({r.lookahead.col(t), r.deltas[t], r.noise_components[t]});
  }
  return points;
}

double mode_separation_accuracy(const std::vector<LandscapePoint>& points,
                                int num_components) {
  if (points.empty() || num_components < 2) return 0.0;
  // counts[delta][component]
  std::vector<std::vector<double>> counts(2, std::vector<double>(num_components, 0.0));
  for (const auto& p : points)
    if (p.component >= 0 && p.component < num_components) counts[p.delta][p.component] += 1;
  double best = 0.0;
  for (int silent = 0; silent < num_components; ++silent)
    for (int transmit = 0; transmit < num_components; ++transmit)
      if (silent != transmit)
        best = std::max(best, counts[0][silent] + counts[1][transmit]);
  return best / static_cast<double>(points.size());
}

int majority_silent_component(const std::vector<LandscapePoint>& points,
                              int num_components) {
  std::vector<double> silent(num_components, 0.0), total(num_components, 0.0);
  for (const auto& p : points) {
    if (p.component < 0 || p.component >= num_components) continue;
    total[p.component] += 1;
    silent[p.component] += p.delta == 0;
  }
  int best = -1;
  double best_rate = -1.0;
  for (int c = 0; c < num_components; ++c) {
    if (total[c] == 0) continue;
    const double rate = silent[c] / total[c];
    if (rate > best_rate) {
      best_rate = rate;
      best = c;
    }
  }
  return best;
}

std::vector<ParetoPoint> pareto_sweep(const SystemModel& model, const GmmSpec& gmm,
                                      const EstimatorNet* estimator,
                                      const PolicyNet& learned,
                                      const std::vector<int>& periods,
                                      const std::vector<double>& thresholds,
                                      const RolloutSettings& settings,
                                      const std::vector<std::uint64_t>& seeds,
                                      int threads) {
  std::vector<SchedulePolicy> policies;
  for (int p : periods) policies.push_back(SchedulePolicy::periodic(p));
  for (double tau : thresholds) policies.push_back(SchedulePolicy::event_triggered(tau));
  policies.push_back(SchedulePolicy::learned(learned));

  std::vector<ParetoPoint> out;
  for (const auto& policy : policies) {
    const EvalReport r = evaluate(policy, estimator, model, gmm, settings, seeds, threads);
    out.push_back({policy.id(), policy.param(), r.mean_transmissions,
                   r.mean_estimation_cost, r.std_estimation_cost});
  }
  return out;
}

bool dominates(const ParetoPoint& other, const ParetoPoint& point) {
  const double pooled =
      std::sqrt(0.5 * (other.std_cost * other.std_cost + point.std_cost * point.std_cost));
  return other.mean_tx <= point.mean_tx && other.mean_cost < point.mean_cost - pooled;
}

}  // namespace calm
