#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "errors.hpp"
#include "evaluation.hpp"
#include "systems.hpp"

namespace calm {
namespace {

RolloutSettings settings(int T, double lambda = 45.0, double gamma = 0.99) {
  RolloutSettings s;
  s.horizon = T;
  s.cost.lambda = lambda;
  s.cost.gamma = gamma;
  return s;
}

SystemModel pendulum() { return build_system_lqr("pendulum", gmm_preset("pendulum_2mode")); }

std::vector<std::uint64_t> seeds(int n) {
  std::vector<std::uint64_t> s(n);
  std::iota(s.begin(), s.end(), 1000);
  return s;
}

TEST(SchedulePolicy, Rules) {
  Rng rng(1);
  const Decider periodic = SchedulePolicy::periodic(3).decider();
  for (int t = 0; t < 12; ++t)
    EXPECT_EQ(periodic(Eigen::Vector2d::Zero(), t, rng).delta, t % 3 == 0 ? 1 : 0);
  const Decider event = SchedulePolicy::event_triggered(2.0).decider();
  EXPECT_EQ(event(Eigen::Vector2d(1.0, 1.0), 0, rng).delta, 1);  // ||e||^2 = 2
  EXPECT_EQ(event(Eigen::Vector2d(1.0, 0.99), 0, rng).delta, 0);
  EXPECT_EQ(SchedulePolicy::always().decider()(Eigen::Vector2d::Zero(), 5, rng).delta, 1);
  EXPECT_EQ(SchedulePolicy::never().decider()(Eigen::Vector2d(9, 9), 5, rng).delta, 0);
  EXPECT_THROW(SchedulePolicy::periodic(0), InvalidArgument);
  EXPECT_THROW(SchedulePolicy::event_triggered(0.0), InvalidArgument);
  EXPECT_EQ(SchedulePolicy::periodic(2).id(), "periodic");
  EXPECT_EQ(SchedulePolicy::event_triggered(4.0).param(), 4.0);
}

TEST(Evaluate, AlwaysTransmit) {
  const EvalReport r = evaluate(SchedulePolicy::always(), nullptr, pendulum(),
                                gmm_preset("pendulum_2mode"), settings(500), seeds(5));
  for (const auto& s : r.per_seed) {
    EXPECT_NEAR(s.cost, 45.0 * (1.0 - std::pow(0.99, 500)) / 0.01, 1e-9);
    EXPECT_EQ(s.transmissions, 500);
    EXPECT_EQ(s.estimation_cost, 0.0);
  }
  EXPECT_EQ(r.horizon, 500);
}

TEST(Evaluate, NeverTransmitNoiseFree) {
  const GmmSpec zero({Eigen::Vector2d::Zero()}, {Eigen::MatrixXd::Zero(2, 2)}, {1.0});
  EstimatorNet net = make_estimator_net(2, {8}, 1);
  for (auto& w : net.params.weights) w.setZero();
  RolloutSettings s = settings(100);
  s.initial_state = Eigen::Vector2d::Zero();
  const EvalReport r = evaluate(SchedulePolicy::never(), &net, pendulum(), zero, s, seeds(3));
  EXPECT_EQ(r.mean_cost, 0.0);
  EXPECT_EQ(r.mean_transmissions, 0.0);
}

TEST(Evaluate, PeriodOneIsAlways) {
  const EstimatorNet net = make_estimator_net(2, {8}, 1);
  const auto a = evaluate(SchedulePolicy::periodic(1), &net, pendulum(),
                          gmm_preset("pendulum_2mode"), settings(200), seeds(4));
  const auto b = evaluate(SchedulePolicy::always(), &net, pendulum(),
                          gmm_preset("pendulum_2mode"), settings(200), seeds(4));
  for (std::size_t i = 0; i < a.per_seed.size(); ++i) {
    EXPECT_EQ(a.per_seed[i].cost, b.per_seed[i].cost);
    EXPECT_EQ(a.per_seed[i].transmissions, b.per_seed[i].transmissions);
  }
}

TEST(Evaluate, AggregationAndThreads) {
  const EstimatorNet net = make_estimator_net(2, {8}, 1);
  const PolicyNet policy = make_policy_net(2, {8}, 2);
  const auto r = evaluate(SchedulePolicy::learned(policy), &net, pendulum(),
                          gmm_preset("pendulum_2mode"), settings(300), seeds(9), 1);
  double mean = 0.0;
  for (const auto& s : r.per_seed) {
    EXPECT_GE(s.cost, 0.0);
    EXPECT_GE(s.transmissions, 0);
    EXPECT_LE(s.transmissions, 300);
    mean += s.cost;
  }
  EXPECT_NEAR(r.mean_cost, mean / 9, 1e-12 * r.mean_cost);
  const auto threaded = evaluate(SchedulePolicy::learned(policy), &net, pendulum(),
                                 gmm_preset("pendulum_2mode"), settings(300), seeds(9), 3);
  EXPECT_EQ(threaded.mean_cost, r.mean_cost);
  EXPECT_THROW(evaluate(SchedulePolicy::always(), nullptr, pendulum(),
                        gmm_preset("pendulum_2mode"), settings(10), {}),
               InvalidArgument);
}

TEST(Landscape, AlwaysTransmitLabels) {
  const auto pts = landscape_scan(SchedulePolicy::always(), nullptr, pendulum(),
                                  gmm_preset("pendulum_2mode"), settings(50), 300, 1);
  ASSERT_EQ(pts.size(), 300u);
  for (const auto& p : pts) {
    EXPECT_EQ(p.delta, 1);
    EXPECT_GE(p.component, 0);
  }
}

TEST(Landscape, EventTriggeredRule) {
  const double tau = 20.0;
  const auto pts = landscape_scan(SchedulePolicy::event_triggered(tau), nullptr, pendulum(),
                                  gmm_preset("pendulum_2mode"), settings(100), 1000, 3);
  ASSERT_EQ(pts.size(), 1000u);
  for (const auto& p : pts) EXPECT_EQ(p.delta == 1, p.lookahead.squaredNorm() >= tau);
}

TEST(Landscape, UntrainedPolicyStillFills) {
  const PolicyNet policy = make_policy_net(2, {8}, 2);
  const auto pts = landscape_scan(SchedulePolicy::learned(policy), nullptr, pendulum(),
                                  gmm_preset("pendulum_2mode"), settings(7), 101, 1);
  EXPECT_EQ(pts.size(), 101u);
}

LandscapePoint point(int delta, int component) {
  return {Eigen::Vector2d::Zero(), delta, component};
}

TEST(ModeSeparation, BestAssignment) {
  std::vector<LandscapePoint> pts;
  for (int i = 0; i < 70; ++i) pts.push_back(point(0, 1));
  for (int i = 0; i < 25; ++i) pts.push_back(point(1, 0));
  for (int i = 0; i < 5; ++i) pts.push_back(point(0, 0));
  EXPECT_NEAR(mode_separation_accuracy(pts, 2), 0.95, 1e-12);
  EXPECT_EQ(majority_silent_component(pts, 2), 1);
  // Flipped labels: the other assignment wins.
  for (auto& p : pts) p.delta = 1 - p.delta;
  EXPECT_NEAR(mode_separation_accuracy(pts, 2), 0.95, 1e-12);
  EXPECT_EQ(majority_silent_component(pts, 2), 0);
}

TEST(ModeSeparation, ThreeComponentsUsesBestPair) {
  std::vector<LandscapePoint> pts;
  for (int i = 0; i < 10; ++i) pts.push_back(point(0, 2));
  for (int i = 0; i < 10; ++i) pts.push_back(point(1, 0));
  for (int i = 0; i < 5; ++i) pts.push_back(point(1, 1));
  EXPECT_NEAR(mode_separation_accuracy(pts, 3), 20.0 / 25.0, 1e-12);
}

TEST(Pareto, RowsAndOrdering) {
  const EstimatorNet net = make_estimator_net(2, {8}, 1);
  const PolicyNet policy = make_policy_net(2, {8}, 2);
  const std::vector<double> taus{1e-3, 1.0, 10.0, 1e9};
  const auto pts = pareto_sweep(pendulum(), gmm_preset("pendulum_2mode"), &net, policy,
                                {1, 2, 3}, taus, settings(200), seeds(5));
  ASSERT_EQ(pts.size(), 3u + taus.size() + 1u);
  EXPECT_EQ(pts[0].policy_id, "periodic");
  EXPECT_EQ(pts[3].policy_id, "event");
  EXPECT_EQ(pts.back().policy_id, "learned");
  EXPECT_GE(pts[0].mean_tx, pts[1].mean_tx);
  EXPECT_GE(pts[1].mean_tx, pts[2].mean_tx);
  // tau -> 0 is always-transmit, tau -> infinity never transmits.
  EXPECT_EQ(pts[3].mean_tx, 200.0);
  EXPECT_EQ(pts[3].mean_cost, 0.0);
  EXPECT_EQ(pts[6].mean_tx, 0.0);
}

TEST(Pareto, Dominance) {
  const ParetoPoint learned{"learned", 0, 100, 50, 5};
  EXPECT_TRUE(dominates({"event", 1, 90, 30, 5}, learned));
  EXPECT_FALSE(dominates({"event", 1, 90, 45, 5}, learned));   // within pooled std
  EXPECT_FALSE(dominates({"event", 1, 110, 10, 5}, learned));  // more transmissions
}

}  // namespace
}  // namespace calm
