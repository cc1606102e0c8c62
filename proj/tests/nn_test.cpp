#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "errors.hpp"
#include "nn.hpp"
#include "test_util.hpp"

namespace calm {
namespace {

using testing::flatten;
using testing::parameter;
using testing::random_vector;
using testing::relative_error;

TEST(InitMlp, SameSeedIsBitIdentical) {
  const std::vector<int> sizes{2, 4, 2};
  const Mlp a = init_mlp(sizes, 7);
  const Mlp b = init_mlp(sizes, 7);
  EXPECT_EQ(mlp_to_json(a).dump(), mlp_to_json(b).dump());
  const Mlp c = init_mlp(sizes, 8);
  EXPECT_NE(mlp_to_json(a).dump(), mlp_to_json(c).dump());
}

TEST(InitMlp, ShapeRule) {
  const std::vector<int> sizes{3, 1};
  const Mlp net = init_mlp(sizes, 1);
  ASSERT_EQ(net.num_layers(), 1);
  EXPECT_EQ(net.weights[0].rows(), 1);
  EXPECT_EQ(net.weights[0].cols(), 3);
  EXPECT_EQ(net.biases[0].size(), 1);
  EXPECT_TRUE(net.biases[0].isZero(0.0));
}

TEST(InitMlp, RejectsDegenerateSizes) {
  EXPECT_THROW(init_mlp(std::vector<int>{2}, 1), InvalidArgument);
  EXPECT_THROW(init_mlp(std::vector<int>{}, 1), InvalidArgument);
  EXPECT_THROW(init_mlp(std::vector<int>{2, 0, 1}, 1), InvalidArgument);
}

TEST(InitMlp, FanInScaledUniform) {
  const std::vector<int> sizes{16, 64, 3};
  const Mlp net = init_mlp(sizes, 3, 0.5);
  EXPECT_LE(net.weights[0].cwiseAbs().maxCoeff(), 1.0 / std::sqrt(16.0));
  EXPECT_LE(net.weights[1].cwiseAbs().maxCoeff(), 0.5 / std::sqrt(64.0));
}

TEST(Forward, ZeroNetworkGivesZero) {
  Mlp net = init_mlp(std::vector<int>{3, 5, 2}, 1);
  for (auto& w : net.weights) w.setZero();
  EXPECT_TRUE(forward(net, Eigen::Vector3d(1, -2, 3)).isZero(0.0));
}

TEST(Forward, IdentityLayer) {
  Mlp net = init_mlp(std::vector<int>{2, 2}, 1);
  net.weights[0].setIdentity();
  const Eigen::VectorXd y = forward(net, Eigen::Vector2d(1, -1));
  EXPECT_EQ(y, Eigen::Vector2d(1, -1));
}

TEST(Forward, ReluKillsNegative) {
  Mlp net = init_mlp(std::vector<int>{1, 1, 1}, 1);
  net.weights[0](0, 0) = 1.0;
  net.weights[1](0, 0) = 1.0;
  EXPECT_EQ(forward(net, Eigen::VectorXd::Constant(1, -3.0))(0), 0.0);
  EXPECT_EQ(forward(net, Eigen::VectorXd::Constant(1, 3.0))(0), 3.0);
}

TEST(Forward, DimensionMismatch) {
  const Mlp net = init_mlp(std::vector<int>{2, 3, 1}, 1);
  EXPECT_THROW(forward(net, Eigen::Vector3d(1, 2, 3)), InvalidArgument);
  EXPECT_THROW(backward(net, Eigen::Vector2d(1, 2), Eigen::Vector2d(1, 1)),
               InvalidArgument);
}

TEST(Forward, BatchMatchesSingle) {
  std::mt19937_64 gen(3);
  const Mlp net = init_mlp(std::vector<int>{3, 8, 8, 2}, 5);
  Eigen::MatrixXd inputs(3, 6);
  for (int c = 0; c < 6; ++c) inputs.col(c) = random_vector(3, gen);
  const Eigen::MatrixXd out = forward_batch(net, inputs);
  for (int c = 0; c < 6; ++c) EXPECT_EQ(out.col(c), forward(net, inputs.col(c)));
}

TEST(Backward, LinearScalar) {
  Mlp net = init_mlp(std::vector<int>{1, 1}, 1);
  net.weights[0](0, 0) = 2.5;
  net.biases[0](0) = -1.0;
  const Gradients g =
      backward(net, Eigen::VectorXd::Constant(1, 0.7), Eigen::VectorXd::Constant(1, 1.0));
  EXPECT_DOUBLE_EQ(g.weights[0](0, 0), 0.7);
  EXPECT_DOUBLE_EQ(g.biases[0](0), 1.0);
  EXPECT_DOUBLE_EQ(g.input(0, 0), 2.5);
}

TEST(Backward, ZeroUpstreamGivesZeroBundle) {
  const Mlp net = init_mlp(std::vector<int>{3, 4, 2}, 2);
  const Gradients g = backward(net, Eigen::Vector3d(1, 2, 3), Eigen::Vector2d::Zero());
  EXPECT_TRUE(flatten(g).isZero(0.0));
  EXPECT_TRUE(g.input.isZero(0.0));
}

TEST(Backward, BatchIsSumOfSingles) {
  std::mt19937_64 gen(4);
  const Mlp net = init_mlp(std::vector<int>{2, 6, 3}, 9);
  Eigen::MatrixXd inputs(2, 4), upstream(3, 4);
  for (int c = 0; c < 4; ++c) {
    inputs.col(c) = random_vector(2, gen);
    upstream.col(c) = random_vector(3, gen);
  }
  ForwardCache cache;
  forward_batch(net, inputs, &cache);
  const Gradients batch = backward_batch(net, cache, upstream, true);
  Gradients sum = zero_gradients(net);
  for (int c = 0; c < 4; ++c) {
    const Gradients g = backward(net, inputs.col(c), upstream.col(c));
    sum.add(g);
    EXPECT_LT((batch.input.col(c) - g.input.col(0)).norm(), 1e-14);
  }
  EXPECT_LT((flatten(batch) - flatten(sum)).norm(), 1e-12);
}

// Central differences of <u, f(x)> w.r.t. every parameter and the input.
void check_gradients(const std::vector<int>& sizes, std::uint64_t seed, double output_scale) {
  std::mt19937_64 gen(seed);
  Mlp net = init_mlp(sizes, seed, output_scale);
  for (auto& b : net.biases) b = random_vector(static_cast<int>(b.size()), gen, 0.1);
  const Eigen::VectorXd x = random_vector(sizes.front(), gen);
  const Eigen::VectorXd u = random_vector(sizes.back(), gen);
  const Gradients g = backward(net, x, u);

  const double h = 1e-5;
  const Eigen::VectorXd analytic = flatten(g);
  Eigen::VectorXd numeric(analytic.size());
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    double& p = parameter(net, i);
    const double saved = p;
    p = saved + h;
    const double up = u.dot(forward(net, x));
    p = saved - h;
    const double down = u.dot(forward(net, x));
    p = saved;
    numeric(i) = (up - down) / (2 * h);
  }
  EXPECT_LT(relative_error(analytic, numeric), 1e-4) << "seed " << seed;

  Eigen::VectorXd input_numeric(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    input_numeric(i) = (u.dot(forward(net, xp)) - u.dot(forward(net, xm))) / (2 * h);
  }
  EXPECT_LT(relative_error(g.input.col(0), input_numeric), 1e-4) << "seed " << seed;
}

TEST(Backward, MatchesFiniteDifferencesSmallNets) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    check_gradients({2, 5, 3}, seed, 1.0);
    check_gradients({4, 3, 3, 1}, seed, 1.0);
  }
}

TEST(Backward, MatchesFiniteDifferencesRepoArchitectures) {
  // policy (n -> 2), value (n -> 1), estimator (n + 1 -> n), n in {2, 4}
  for (std::uint64_t seed = 100; seed < 104; ++seed) {
    check_gradients({2, 64, 64, 2}, seed, 0.01);
    check_gradients({4, 64, 64, 1}, seed, 1.0);
    check_gradients({3, 64, 64, 2}, seed, 0.01);
  }
}

TEST(Adam, ZeroGradientIsFixedPoint) {
  const Mlp net = init_mlp(std::vector<int>{2, 3, 1}, 1);
  const AdamState state = make_adam(net, 1e-3, 0.0);
  const auto [next, next_state] = adam_step(net, state, zero_gradients(net));
  EXPECT_EQ(flatten(next), flatten(net));
  EXPECT_EQ(next_state.step, 1);
}

TEST(Adam, FirstStepIsLearningRateTimesSign) {
  Mlp net = init_mlp(std::vector<int>{1, 1}, 1);
  net.weights[0](0, 0) = 0.0;
  Gradients g = zero_gradients(net);
  g.weights[0](0, 0) = 1.0;
  g.biases[0](0) = -3.0;
  const auto [next, state] = adam_step(net, make_adam(net, 1e-3), g);
  EXPECT_NEAR(next.weights[0](0, 0), -1e-3, 1e-11);
  EXPECT_NEAR(next.biases[0](0), 1e-3, 1e-11);
}

TEST(Adam, QuadraticDecreases) {
  Mlp net = init_mlp(std::vector<int>{1, 1}, 1);
  net.weights[0](0, 0) = 1.0;
  AdamState state = make_adam(net, 1e-2);
  for (int i = 0; i < 100; ++i) {
    Gradients g = zero_gradients(net);
    g.weights[0](0, 0) = 2.0 * net.weights[0](0, 0);
    std::tie(net, state) = adam_step(net, state, g);
  }
  const double w = net.weights[0](0, 0);
  EXPECT_LT(w * w, 1.0);
  EXPECT_EQ(state.step, 100);
}

TEST(Adam, WeightDecayTouchesWeightsOnly) {
  Mlp net = init_mlp(std::vector<int>{1, 1}, 1);
  net.weights[0](0, 0) = 2.0;
  net.biases[0](0) = 2.0;
  const auto [next, state] = adam_step(net, make_adam(net, 0.1, 0.5), zero_gradients(net));
  EXPECT_DOUBLE_EQ(next.weights[0](0, 0), 2.0 * (1.0 - 0.1 * 0.5));
  EXPECT_EQ(next.biases[0](0), 2.0);
}

TEST(Adam, NonFiniteGradientThrowsAndLeavesInputs) {
  const Mlp net = init_mlp(std::vector<int>{2, 2}, 1);
  const AdamState state = make_adam(net, 1e-3);
  Gradients g = zero_gradients(net);
  g.biases[0](1) = std::nan("");
  const Eigen::VectorXd before = flatten(net);
  EXPECT_THROW(adam_step(net, state, g), NumericError);
  EXPECT_EQ(flatten(net), before);
  EXPECT_EQ(state.step, 0);
}

TEST(Adam, ShapesAreClosed) {
  const Mlp net = init_mlp(std::vector<int>{3, 7, 2}, 1);
  Gradients g = backward(net, Eigen::Vector3d(1, 1, 1), Eigen::Vector2d(1, -1));
  const auto [next, state] = adam_step(net, make_adam(net, 1e-3, 1e-4), g);
  for (int l = 0; l < net.num_layers(); ++l) {
    EXPECT_EQ(next.weights[l].rows(), net.weights[l].rows());
    EXPECT_EQ(next.weights[l].cols(), net.weights[l].cols());
    EXPECT_EQ(state.m_weights[l].rows(), net.weights[l].rows());
    EXPECT_EQ(state.v_biases[l].size(), net.biases[l].size());
  }
}

TEST(Checkpoint, RoundTripIsExact) {
  const auto dir = testing::scratch_dir("nn_ckpt");
  const Mlp net = init_mlp(std::vector<int>{3, 5, 2}, 11);
  save_checkpoint(dir / "a.ckpt", net, {{"role", "test"}});
  nlohmann::json meta;
  const Mlp back = load_checkpoint(dir / "a.ckpt", &meta);
  EXPECT_EQ(back.layer_sizes, net.layer_sizes);
  EXPECT_EQ(flatten(back), flatten(net));
  EXPECT_EQ(meta["role"], "test");
  save_checkpoint(dir / "b.ckpt", back, {{"role", "test"}});
  EXPECT_EQ(testing::read_file(dir / "a.ckpt"), testing::read_file(dir / "b.ckpt"));
}

TEST(Checkpoint, RejectsWrongFormatAndShapes) {
  nlohmann::json doc = mlp_to_json(init_mlp(std::vector<int>{2, 2}, 1));
  nlohmann::json bad = doc;
  bad["version"] = 99;
  EXPECT_THROW(mlp_from_json(bad), InvalidArgument);
  bad = doc;
  bad["weights"][0].push_back(1.0);
  EXPECT_THROW(mlp_from_json(bad), InvalidArgument);
  bad = doc;
  bad["format"] = "other";
  EXPECT_THROW(mlp_from_json(bad), InvalidArgument);
}

}  // namespace
}  // namespace calm
