#ifndef CALM_EVALUATION_HPP_
#define CALM_EVALUATION_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rollout.hpp"
#include "scheduler.hpp"

namespace calm {

// Scheduling rules compared in the experiments.
class SchedulePolicy {
 public:
  enum class Kind { kLearned, kPeriodic, kEventTriggered, kAlways, kNever };

  static SchedulePolicy learned(PolicyNet policy);
  // Fires at t = 0, p, 2p, ...
  static SchedulePolicy periodic(int period);
  // Fires iff ||e||^2 >= threshold.
  static SchedulePolicy event_triggered(double threshold);
  static SchedulePolicy always();
  static SchedulePolicy never();

  Kind kind() const { return kind_; }
  int period() const { return period_; }
  double threshold() const { return threshold_; }
  const PolicyNet* network() const { return policy_.get(); }
  std::string id() const;    // learned | periodic | event | always | never
  double param() const;      // period, threshold, or 0

  Decider decider() const;

 private:
  Kind kind_ = Kind::kNever;
  int period_ = 0;
  double threshold_ = 0.0;
  std::shared_ptr<const PolicyNet> policy_;
};

struct SeedResult {
  std::uint64_t seed = 0;
  double cost = 0.0;             // discounted (1-d)||e°||^2 + lambda d
  double estimation_cost = 0.0;  // discounted error term alone
  int transmissions = 0;
};

struct EvalReport {
  int horizon = 0;
  std::vector<SeedResult> per_seed;
  double mean_cost = 0.0, std_cost = 0.0;
  double mean_estimation_cost = 0.0, std_estimation_cost = 0.0;
  double mean_transmissions = 0.0, std_transmissions = 0.0;
};

// Per-seed generator used by every evaluation routine.
Rng evaluation_rng(std::uint64_t seed);

// One rollout per seed, no learning. `estimator == nullptr` selects the
// piecewise-linear receiver. `trajectories`, when given, receives the
// per-seed records.
EvalReport evaluate(const SchedulePolicy& policy, const EstimatorNet* estimator,
                    const SystemModel& model, const GmmSpec& gmm,
                    const RolloutSettings& settings,
                    const std::vector<std::uint64_t>& seeds, int threads = 1,
                    std::vector<TrajectoryRecord>* trajectories = nullptr);

struct LandscapePoint {
  Eigen::VectorXd lookahead;
  int delta = 0;
  int component = -1;
};

// (e°_t, delta_t, component of w_{t-1}) for t >= 1 from evaluation rollouts
// with seeds first_seed, first_seed + 1, ... until num_points are gathered.
std::vector<LandscapePoint> landscape_scan(const SchedulePolicy& policy,
                                           const EstimatorNet* estimator,
                                           const SystemModel& model,
                                           const GmmSpec& gmm,
                                           const RolloutSettings& settings,
                                           int num_points,
                                           std::uint64_t first_seed);

// Fraction of points whose mixture component is predicted by the decision
// under the best one-to-one assignment {silent, transmit} -> two components.
double mode_separation_accuracy(const std::vector<LandscapePoint>& points,
                                int num_components);

// Component with the highest conditional silence rate P(delta = 0 | c).
int majority_silent_component(const std::vector<LandscapePoint>& points,
                              int num_components);

struct ParetoPoint {
  std::string policy_id;
  double param = 0.0;
  double mean_tx = 0.0;
  double mean_cost = 0.0;  // discounted estimation error only
  double std_cost = 0.0;
};

// Periodic p in `periods`, event-triggered tau in `thresholds`, then the
// learned policy (last row), all with the same frozen estimator.
std::vector<ParetoPoint> pareto_sweep(const SystemModel& model, const GmmSpec& gmm,
                                      const EstimatorNet* estimator,
                                      const PolicyNet& learned,
                                      const std::vector<int>& periods,
                                      const std::vector<double>& thresholds,
                                      const RolloutSettings& settings,
                                      const std::vector<std::uint64_t>& seeds,
                                      int threads = 1);

// True iff `other` uses no more transmissions than `point` and has a lower
// cost by more than the pooled standard deviation of the two.
bool dominates(const ParetoPoint& other, const ParetoPoint& point);

}  // namespace calm

#endif  // CALM_EVALUATION_HPP_
