#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"
#include "systems.hpp"

namespace calm {
namespace {

Eigen::MatrixXd diag2(double a, double b) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

TEST(Gmm, SingleComponentMean) {
  const GmmSpec spec({Eigen::Vector2d(3, 3)}, {diag2(0.5, 0.5)}, {1.0});
  Rng rng(42);
  const int n = 100000;
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  for (int i = 0; i < n; ++i) sum += sample_gmm(spec, rng).value;
  const Eigen::Vector2d mean = sum / n;
  const double tol = 3.0 * std::sqrt(0.5 / n);
  EXPECT_NEAR(mean(0), 3.0, tol);
  EXPECT_NEAR(mean(1), 3.0, tol);
}

TEST(Gmm, DegenerateCovarianceGivesExactMean) {
  const GmmSpec spec({Eigen::Vector2d::Zero()}, {Eigen::MatrixXd::Zero(2, 2)}, {1.0});
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) EXPECT_TRUE(sample_gmm(spec, rng).value.isZero(0.0));
}

TEST(Gmm, ComponentFrequency) {
  const GmmSpec spec = gmm_preset("pendulum_2mode");
  ASSERT_EQ(spec.weights()[0], 0.3);
  Rng rng(7);
  const int n = 100000;
  int first = 0;
  for (int i = 0; i < n; ++i) first += sample_gmm(spec, rng).component == 0;
  EXPECT_NEAR(static_cast<double>(first) / n, 0.3, 3.0 * std::sqrt(0.3 * 0.7 / n));
}

TEST(Gmm, CorrelatedCovarianceRecovered) {
  Eigen::MatrixXd cov(2, 2);
  cov << 1.0, 0.8, 0.8, 1.0;
  const GmmSpec spec({Eigen::Vector2d(-5, 4)}, {cov}, {1.0});
  EXPECT_LT((spec.factors()[0] * spec.factors()[0].transpose() - cov).norm(), 1e-14);
  Rng rng(3);
  const int n = 100000;
  Eigen::Matrix2d acc = Eigen::Matrix2d::Zero();
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d d = sample_gmm(spec, rng).value - Eigen::Vector2d(-5, 4);
    acc += d * d.transpose();
  }
  EXPECT_LT((acc / n - cov).cwiseAbs().maxCoeff(), 0.03);
}

TEST(Gmm, MixtureMean) {
  EXPECT_LT((gmm_preset("pendulum_2mode").mixture_mean() - Eigen::Vector2d(1.2, 1.2)).norm(),
            1e-14);
}

TEST(Gmm, ValidationErrors) {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
  EXPECT_THROW(GmmSpec({Eigen::Vector2d::Zero()}, {I}, {0.9}), InvalidArgument);
  EXPECT_THROW(GmmSpec({Eigen::Vector2d::Zero()}, {I}, {-1.0}), InvalidArgument);
  EXPECT_THROW(GmmSpec({Eigen::Vector2d::Zero()}, {-I}, {1.0}), InvalidArgument);
  Eigen::MatrixXd asym = I;
  asym(0, 1) = 0.5;
  EXPECT_THROW(GmmSpec({Eigen::Vector2d::Zero()}, {asym}, {1.0}), InvalidArgument);
  EXPECT_THROW(GmmSpec({Eigen::Vector3d::Zero()}, {I}, {1.0}), InvalidArgument);
  EXPECT_THROW(GmmSpec({}, {}, {}), InvalidArgument);
  EXPECT_THROW(gmm_preset("nope"), InvalidArgument);
}

TEST(Gmm, PresetsAreValid) {
  for (const auto& name : gmm_preset_names()) {
    const GmmSpec spec = gmm_preset(name);
    double total = 0.0;
    for (double w : spec.weights()) total += w;
    EXPECT_NEAR(total, 1.0, 1e-12) << name;
  }
}

TEST(Systems, PendulumOpenLoop) {
  const auto [A, B] = open_loop_matrices(SystemKind::kPendulum);
  Eigen::Matrix2d a;
  a << 1.0, 0.05, 0.981, 1.0 - 0.05 * 0.1 / (0.15 * 0.5 * 0.5);
  EXPECT_LT((A - a).norm(), 1e-12);
  EXPECT_NEAR(a(1, 1), 0.866667, 1e-6);
  EXPECT_NEAR(B(0, 0), 0.0, 0.0);
  EXPECT_NEAR(B(1, 0), 0.05 / (0.15 * 0.5 * 0.5), 1e-12);
  EXPECT_NEAR(B(1, 0), 1.333333, 1e-6);
}

TEST(Systems, TrackingOpenLoop) {
  const auto [A, B] = open_loop_matrices(SystemKind::kTracking);
  Eigen::Matrix2d a;
  a << 1.0, 2.0, 0.0, 0.998;
  EXPECT_LT((A - a).norm(), 1e-12);
  EXPECT_LT((B - Eigen::Vector2d(0.0, 0.05)).norm(), 1e-12);
}

TEST(Systems, VdpStep) {
  const SystemModel m = build_system("vdp", gmm_preset("vdp_2mode"), std::nullopt);
  const Eigen::VectorXd x = step(m, Eigen::Vector2d(1, 1), Eigen::Vector2d::Zero());
  EXPECT_NEAR(x(0), 1.05, 1e-15);
  EXPECT_NEAR(x(1), 0.95, 1e-15);
}

TEST(Systems, LinearZeroFixedPoint) {
  for (const char* name : {"pendulum", "tracking", "boeing747"}) {
    const SystemModel m = build_system_lqr(name, gmm_preset(name == std::string("pendulum")
                                                                 ? "pendulum_2mode"
                                                             : name == std::string("tracking")
                                                                 ? "tracking_4mode"
                                                                 : "boeing_2mode"));
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m.state_dim);
    EXPECT_TRUE(step(m, zero, zero).isZero(0.0)) << name;
  }
}

TEST(Systems, AdditiveNoise) {
  const SystemModel m = build_system_lqr("pendulum", gmm_preset("pendulum_2mode"));
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector2d x(rng.normal(), rng.normal());
    const Eigen::Vector2d w(rng.normal(), rng.normal());
    EXPECT_LT((step(m, x, w) - predict(m, x) - w).norm(), 1e-12);
  }
}

TEST(Systems, BoeingClosedLoopIsLinear) {
  const SystemModel m = build_system_lqr("boeing747", gmm_preset("boeing_2mode"));
  ASSERT_EQ(m.state_dim, 4);
  Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    Eigen::Vector4d a, b;
    for (int k = 0; k < 4; ++k) {
      a(k) = rng.normal();
      b(k) = rng.normal();
    }
    EXPECT_LT((predict(m, a + b) - predict(m, a) - predict(m, b)).norm(), 1e-12);
  }
}

TEST(Systems, ClosedLoopIsStable) {
  for (const char* name : {"pendulum", "tracking", "boeing747"}) {
    const SystemKind kind = parse_system_kind(name);
    const auto [A, B] = open_loop_matrices(kind);
    const LqrSolution s = solve_dare(A, B, Eigen::MatrixXd::Identity(A.rows(), A.rows()),
                                     Eigen::MatrixXd::Identity(B.cols(), B.cols()), 0.9999);
    const Eigen::MatrixXd cl = A + B * s.K;
    EXPECT_LT(cl.eigenvalues().cwiseAbs().maxCoeff(), 1.0) << name;
  }
}

TEST(Systems, Errors) {
  EXPECT_THROW(parse_system_kind("cartpole"), InvalidArgument);
  const SystemModel m = build_system_lqr("pendulum", gmm_preset("pendulum_2mode"));
  EXPECT_THROW(step(m, Eigen::Vector3d::Zero(), Eigen::Vector2d::Zero()), InvalidArgument);
  EXPECT_THROW(step(m, Eigen::Vector2d(1e308, 1e308), Eigen::Vector2d(1e308, 1e308)),
               NumericError);
  EXPECT_THROW(build_system_lqr("boeing747", gmm_preset("pendulum_2mode")), InvalidArgument);
}

TEST(Dare, ScalarWithoutInput) {
  Eigen::MatrixXd A(1, 1), B(1, 1), Q(1, 1), R(1, 1);
  A << 0.5;
  B << 0.0;
  Q << 1.0;
  R << 1.0;
  const LqrSolution s = solve_dare(A, B, Q, R, 1.0);
  EXPECT_NEAR(s.P(0, 0), 4.0 / 3.0, 1e-12);
  EXPECT_EQ(s.K(0, 0), 0.0);
}

TEST(Dare, ZeroDynamicsGivesQ) {
  const Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3, 3);
  Eigen::MatrixXd B(3, 2);
  B << 1, 2, 3, 4, 5, 6;
  Eigen::MatrixXd Q(3, 3);
  Q << 2, 0.5, 0, 0.5, 1, 0, 0, 0, 3;
  const LqrSolution s = solve_dare(A, B, Q, Eigen::MatrixXd::Identity(2, 2), 0.7);
  EXPECT_LT((s.P - Q).norm(), 1e-14);
}

// Scalar closed form: p solves g b^2 p^2 + (r (1 - g a^2) - g b^2 q) p - q r = 0.
TEST(Dare, ScalarClosedForm) {
  for (double a : {0.5, 1.0, 1.3}) {
    const double b = 0.7, q = 2.0, r = 0.5, g = 0.95;
    const double qa = g * b * b, qb = r * (1 - g * a * a) - g * b * b * q, qc = -q * r;
    const double p = (-qb + std::sqrt(qb * qb - 4 * qa * qc)) / (2 * qa);
    Eigen::MatrixXd A(1, 1), B(1, 1), Q(1, 1), R(1, 1);
    A << a;
    B << b;
    Q << q;
    R << r;
    const LqrSolution s = solve_dare(A, B, Q, R, g);
    EXPECT_NEAR(s.P(0, 0), p, 1e-10 * p);
    EXPECT_NEAR(s.K(0, 0), -g * b * p * a / (r + g * b * b * p), 1e-10);
  }
}

TEST(Dare, BenchmarksConverge) {
  for (const char* name : {"pendulum", "tracking", "boeing747"}) {
    const auto [A, B] = open_loop_matrices(parse_system_kind(name));
    const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(A.rows(), A.rows());
    const Eigen::MatrixXd R = Eigen::MatrixXd::Identity(B.cols(), B.cols());
    const LqrSolution s = solve_dare(A, B, Q, R, 0.9999);
    EXPECT_LT(riccati_residual(A, B, Q, R, 0.9999, s.P), 1e-8) << name;
    EXPECT_LT((s.P - s.P.transpose()).norm(), 1e-8) << name;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.P);
    EXPECT_GT(eig.eigenvalues().minCoeff(), -1e-10) << name;
  }
}

TEST(Dare, NonStabilizableFails) {
  Eigen::MatrixXd A(1, 1), B(1, 1), Q(1, 1), R(1, 1);
  A << 2.0;
  B << 0.0;
  Q << 1.0;
  R << 1.0;
  DareOptions opts;
  opts.max_iterations = 2000;
  EXPECT_THROW(solve_dare(A, B, Q, R, 1.0, opts), NumericError);
}

TEST(Dare, BadArguments) {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
  EXPECT_THROW(solve_dare(I, Eigen::MatrixXd::Identity(3, 1), I, I.topLeftCorner(1, 1), 0.9),
               InvalidArgument);
  EXPECT_THROW(solve_dare(I, I, I, I, 0.0), InvalidArgument);
  EXPECT_THROW(solve_dare(I, I, I, I, 1.5), InvalidArgument);
}

}  // namespace
}  // namespace calm
