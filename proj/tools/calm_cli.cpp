// calm: command-line front end over the C API.
//
//   calm train     --config run.json [--out DIR] [--seed S] [--threads N]
//   calm evaluate  (--run DIR | --config run.json) [--policy P] [--estimator E]
//   calm landscape (--run DIR | --config run.json) [--policy P] [--estimator E]
//   calm pareto    (--run DIR | --config run.json)
//   calm baseline  (--run DIR | --config run.json)
//
// Exit codes: 0 success, 2 invalid input, 3 numeric failure.
#include <cstdio>
#include <cstdlib>
#include <string>

#include <CLI11.hpp>

#include "calm/calm.h"

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string run;
  std::string policy = "learned";
  std::string estimator = "default";
  uint64_t seed = 0;
  bool has_seed = false;
  int threads = 0;
};

int report(calm_status status) {
  if (status == CALM_OK) return 0;
  std::fprintf(stderr, "error: %s\n", calm_last_error());
  return status == CALM_ERR_NUMERIC ? 3 : status == CALM_ERR_INVALID ? 2 : 1;
}

// Owns whichever handles a command acquired.
struct Session {
  calm_config* config = nullptr;
  calm_run* run = nullptr;
  ~Session() {
    calm_run_free(run);
    calm_config_free(config);
  }
};

calm_status load_config(const Options& o, Session& s) {
  calm_status st = calm_config_load(o.config.c_str(), &s.config);
  if (st != CALM_OK) return st;
  if ((st = calm_config_apply_environment(s.config)) != CALM_OK) return st;
  if (!o.out.empty() && (st = calm_config_set_output_dir(s.config, o.out.c_str())) != CALM_OK)
    return st;
  if (o.has_seed && (st = calm_config_set_seed(s.config, o.seed)) != CALM_OK) return st;
  if (o.threads > 0 && (st = calm_config_set_threads(s.config, o.threads)) != CALM_OK)
    return st;
  return CALM_OK;
}

// --run opens an existing directory; otherwise --config starts a fresh one.
calm_status acquire_run(const Options& o, Session& s) {
  calm_status st;
  if (!o.run.empty()) {
    if ((st = calm_run_open(o.run.c_str(), &s.run)) != CALM_OK) return st;
    if (o.threads > 0) return calm_run_set_threads(s.run, o.threads);
    if (const char* env = std::getenv("CALM_THREADS")) {
      const int t = std::atoi(env);
      if (t > 0) return calm_run_set_threads(s.run, t);
    }
    return CALM_OK;
  }
  if (o.config.empty()) {
    std::fprintf(stderr, "error: need --run DIR or --config FILE\n");
    return CALM_ERR_INVALID;
  }
  if ((st = load_config(o, s)) != CALM_OK) return st;
  return calm_run_create(s.config, &s.run);
}

calm_status parse_estimator(const std::string& text, calm_estimator_kind* out) {
  if (text == "default") *out = CALM_ESTIMATOR_DEFAULT;
  else if (text == "calm") *out = CALM_ESTIMATOR_CALM;
  else if (text == "linear") *out = CALM_ESTIMATOR_LINEAR;
  else {
    std::fprintf(stderr, "error: --estimator must be default, calm or linear\n");
    return CALM_ERR_INVALID;
  }
  return CALM_OK;
}

int run_train(const Options& o) {
  if (o.config.empty()) {
    std::fprintf(stderr, "error: train needs --config FILE\n");
    return 2;
  }
  Session s;
  calm_status st = load_config(o, s);
  if (st == CALM_OK) st = calm_train(s.config, &s.run);
  if (st == CALM_OK) std::printf("run=%s\n", calm_run_path(s.run));
  return report(st);
}

int run_evaluate(const Options& o, bool landscape) {
  Session s;
  calm_policy policy{};
  calm_estimator_kind est{};
  calm_status st = calm_policy_parse(o.policy.c_str(), &policy);
  if (st == CALM_OK) st = parse_estimator(o.estimator, &est);
  if (st == CALM_OK) st = acquire_run(o, s);
  if (st != CALM_OK) return report(st);
  std::printf("run=%s\n", calm_run_path(s.run));
  std::fflush(stdout);
  if (landscape) return report(calm_landscape(s.run, policy, est, stdout, nullptr));
  return report(calm_evaluate(s.run, policy, est, stdout, nullptr));
}

int run_pareto(const Options& o) {
  Session s;
  calm_status st = acquire_run(o, s);
  if (st != CALM_OK) return report(st);
  std::printf("run=%s\n", calm_run_path(s.run));
  std::fflush(stdout);
  return report(calm_pareto(s.run, stdout, nullptr));
}

int run_baseline(const Options& o) {
  Session s;
  calm_status st = acquire_run(o, s);
  if (st != CALM_OK) return report(st);
  std::printf("run=%s\n", calm_run_path(s.run));
  std::fflush(stdout);
  return report(calm_baseline(s.run, stdout, nullptr));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned transmission scheduling and estimation for remote state estimation"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config, "Run configuration (JSON)");
  app.add_option("--out", o.out, "Output directory (overrides config and CALM_OUTPUT_DIR)");
  app.add_option_function<uint64_t>(
      "--seed", [&](uint64_t s) { o.seed = s; o.has_seed = true; }, "Root seed");
  app.add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train", "Alternating scheduler/estimator training");
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a scheduler over the seed list");
  auto* landscape = app.add_subcommand("landscape", "Decision landscape and mode accuracy");
  auto* pareto = app.add_subcommand("pareto", "Periodic / event-triggered / learned sweep");
  auto* baseline = app.add_subcommand("baseline", "Train and evaluate the linear-receiver baseline");

  for (auto* sub : {evaluate, landscape, pareto, baseline})
    sub->add_option("--run", o.run, "Existing run directory");
  for (auto* sub : {evaluate, landscape}) {
    sub->add_option("--policy", o.policy,
                    "learned | linear | always | never | periodic:<p> | event:<tau>");
    sub->add_option("--estimator", o.estimator, "default | calm | linear");
  }
  for (auto* sub : {train, evaluate, landscape, pareto, baseline}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*train) return run_train(o);
  if (*evaluate) return run_evaluate(o, false);
  if (*landscape) return run_evaluate(o, true);
  if (*pareto) return run_pareto(o);
  return run_baseline(o);
}
