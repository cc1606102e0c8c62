#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include "calm/calm.h"
#include "test_util.hpp"

namespace {

TEST(CApi, ConfigErrors) {
  calm_config* cfg = nullptr;
  EXPECT_EQ(calm_config_parse("{\"system\": \"pendulum\"}", &cfg), CALM_ERR_INVALID);
  EXPECT_NE(std::string(calm_last_error()).find("lambda"), std::string::npos);
  EXPECT_EQ(cfg, nullptr);
  EXPECT_EQ(calm_config_parse("{nope", &cfg), CALM_ERR_INVALID);
  EXPECT_EQ(calm_config_parse(nullptr, &cfg), CALM_ERR_INVALID);
  EXPECT_EQ(calm_config_load("/nonexistent/run.json", &cfg), CALM_ERR_INVALID);
}

TEST(CApi, ConfigRoundTrip) {
  calm_config* cfg = nullptr;
  ASSERT_EQ(calm_config_parse("{\"system\": \"vdp\", \"lambda\": 45}", &cfg), CALM_OK);
  ASSERT_EQ(calm_config_set_seed(cfg, 17), CALM_OK);
  EXPECT_EQ(calm_config_set_threads(cfg, 0), CALM_ERR_INVALID);
  const char* text = nullptr;
  ASSERT_EQ(calm_config_to_json(cfg, &text), CALM_OK);
  EXPECT_NE(std::string(text).find("\"seed\": 17"), std::string::npos);
  calm_config* again = nullptr;
  ASSERT_EQ(calm_config_parse(text, &again), CALM_OK);
  calm_config_free(again);
  calm_config_free(cfg);
}

TEST(CApi, EvaluateAlwaysTransmit) {
  const auto dir = calm::testing::scratch_dir("capi_eval");
  calm_config* cfg = nullptr;
  ASSERT_EQ(calm_config_parse("{\"system\": \"pendulum\", \"lambda\": 45}", &cfg), CALM_OK);
  ASSERT_EQ(calm_config_set_output_dir(cfg, dir.string().c_str()), CALM_OK);
  calm_run* run = nullptr;
  ASSERT_EQ(calm_run_create(cfg, &run), CALM_OK);
  EXPECT_EQ(std::filesystem::path(calm_run_path(run)), dir / "pendulum_calm");

  calm_policy policy{};
  ASSERT_EQ(calm_policy_parse("always", &policy), CALM_OK);
  calm_eval_summary summary{};
  ASSERT_EQ(calm_evaluate(run, policy, CALM_ESTIMATOR_DEFAULT, nullptr, &summary), CALM_OK);
  EXPECT_NEAR(summary.mean_cost, 45.0 * (1.0 - std::pow(0.99, 500)) / 0.01, 1e-9);
  EXPECT_EQ(summary.mean_transmissions, 500.0);
  EXPECT_EQ(summary.seeds, 20);

  EXPECT_EQ(calm_policy_parse("periodic:x", &policy), CALM_ERR_INVALID);
  policy = {CALM_POLICY_PERIODIC, 0.0};
  EXPECT_EQ(calm_evaluate(run, policy, CALM_ESTIMATOR_DEFAULT, nullptr, &summary),
            CALM_ERR_INVALID);
  policy = {CALM_POLICY_LINEAR, 0.0};
  EXPECT_EQ(calm_evaluate(run, policy, CALM_ESTIMATOR_DEFAULT, nullptr, &summary),
            CALM_ERR_INVALID);
  calm_run_free(run);
  calm_config_free(cfg);
  EXPECT_EQ(calm_run_open((dir / "missing").string().c_str(), &run), CALM_ERR_INVALID);
}

TEST(CApi, MlpForwardAndCheckpoint) {
  const auto dir = calm::testing::scratch_dir("capi_mlp");
  const int sizes[] = {3, 8, 2};
  calm_mlp* net = nullptr;
  ASSERT_EQ(calm_mlp_create(sizes, 3, 7, &net), CALM_OK);
  EXPECT_EQ(calm_mlp_input_dim(net), 3);
  EXPECT_EQ(calm_mlp_output_dim(net), 2);
  const double x[] = {0.5, -1.0, 2.0};
  double y[2], z[2];
  ASSERT_EQ(calm_mlp_forward(net, x, y), CALM_OK);
  const std::string path = (dir / "net.ckpt").string();
  ASSERT_EQ(calm_mlp_save(net, path.c_str()), CALM_OK);
  calm_mlp* loaded = nullptr;
  ASSERT_EQ(calm_mlp_load(path.c_str(), &loaded), CALM_OK);
  ASSERT_EQ(calm_mlp_forward(loaded, x, z), CALM_OK);
  EXPECT_EQ(y[0], z[0]);
  EXPECT_EQ(y[1], z[1]);
  EXPECT_EQ(calm_mlp_create(sizes, 1, 7, &net), CALM_ERR_INVALID);
  calm_mlp_free(loaded);
  calm_mlp_free(net);
}

TEST(CApi, DareAndSystems) {
  // Scalar a = 0.5, b = 0, q = r = 1, gamma = 1: P = 4/3, K = 0.
  const double a = 0.5, b = 0.0, q = 1.0, r = 1.0;
  double P = 0, K = 1, residual = 1;
  ASSERT_EQ(calm_solve_dare(1, 1, &a, &b, &q, &r, 1.0, &P, &K, &residual), CALM_OK);
  EXPECT_NEAR(P, 4.0 / 3.0, 1e-12);
  EXPECT_EQ(K, 0.0);
  EXPECT_LT(residual, 1e-8);
  EXPECT_EQ(calm_solve_dare(1, 1, &a, &b, &q, &r, 0.0, &P, &K, nullptr), CALM_ERR_INVALID);

  calm_system* vdp = nullptr;
  ASSERT_EQ(calm_system_create("vdp", nullptr, &vdp), CALM_OK);
  EXPECT_EQ(calm_system_state_dim(vdp), 2);
  const double x[] = {1.0, 1.0}, w[] = {0.0, 0.0};
  double next[2];
  ASSERT_EQ(calm_system_step(vdp, x, w, next), CALM_OK);
  EXPECT_NEAR(next[0], 1.05, 1e-15);
  EXPECT_NEAR(next[1], 0.95, 1e-15);
  const double huge[] = {1e200, 1e200};
  EXPECT_EQ(calm_system_step(vdp, huge, huge, next), CALM_ERR_NUMERIC);
  calm_system_free(vdp);

  calm_system* sys = nullptr;
  EXPECT_EQ(calm_system_create("cartpole", nullptr, &sys), CALM_ERR_INVALID);
  EXPECT_EQ(calm_system_create("boeing747", "pendulum_2mode", &sys), CALM_ERR_INVALID);
}

}  // namespace
