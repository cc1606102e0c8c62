#include "calm/calm.h"

#include <cstdio>
#include <exception>
#include <memory>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "config.hpp"
#include "errors.hpp"
#include "nn.hpp"
#include "systems.hpp"

struct calm_config {
  calm::RunConfig config;
  std::string json_text;
};

struct calm_run {
  calm::RunDirectory run;
  std::string path;
};

struct calm_mlp {
  calm::Mlp net;
};

struct calm_system {
  calm::SystemModel model;
};

namespace {

thread_local std::string g_last_error;

template <typename Fn>
calm_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return CALM_OK;
  } catch (const calm::InvalidArgument& e) {
    g_last_error = e.what();
    return CALM_ERR_INVALID;
  } catch (const calm::NumericError& e) {
    g_last_error = e.what();
    return CALM_ERR_NUMERIC;
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return CALM_ERR_INVALID;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return CALM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CALM_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return CALM_ERR_INTERNAL;
  }
}

template <typename T>
void require(const T* p, const char* what) {
  if (p == nullptr) throw calm::InvalidArgument(std::string(what) + " is NULL");
}

// Buffers command output and forwards it to a FILE* (if any) afterwards.
class LogSink {
 public:
  explicit LogSink(void* file) : file_(static_cast<std::FILE*>(file)) {}
  ~LogSink() {
    if (file_ == nullptr) return;
    const std::string text = buffer_.str();
    std::fwrite(text.data(), 1, text.size(), file_);
    std::fflush(file_);
  }
  std::ostream& stream() { return buffer_; }

 private:
  std::FILE* file_;
  std::ostringstream buffer_;
};

calm::PolicySpec to_spec(calm_policy p) {
  calm::PolicySpec spec;
  switch (p.kind) {
    case CALM_POLICY_LEARNED: spec.kind = calm::PolicySpec::Kind::kLearned; break;
    case CALM_POLICY_LINEAR: spec.kind = calm::PolicySpec::Kind::kLinear; break;
    case CALM_POLICY_ALWAYS: spec.kind = calm::PolicySpec::Kind::kAlways; break;
    case CALM_POLICY_NEVER: spec.kind = calm::PolicySpec::Kind::kNever; break;
    case CALM_POLICY_PERIODIC:
      spec.kind = calm::PolicySpec::Kind::kPeriodic;
      spec.period = static_cast<int>(p.param);
      if (spec.period < 1 || spec.period != p.param)
        throw calm::InvalidArgument("policy: period must be a positive integer");
      break;
    case CALM_POLICY_EVENT:
      spec.kind = calm::PolicySpec::Kind::kEvent;
      spec.threshold = p.param;
      if (!(p.param > 0.0)) throw calm::InvalidArgument("policy: threshold must be > 0");
      break;
    default: throw calm::InvalidArgument("policy: unknown kind");
  }
  return spec;
}

calm::EstimatorChoice to_choice(calm_estimator_kind e) {
  switch (e) {
    case CALM_ESTIMATOR_DEFAULT: return calm::EstimatorChoice::kDefault;
    case CALM_ESTIMATOR_CALM: return calm::EstimatorChoice::kCalm;
    case CALM_ESTIMATOR_LINEAR: return calm::EstimatorChoice::kLinear;
  }
  throw calm::InvalidArgument("estimator: unknown kind");
}

void fill(const calm::EvalReport& r, calm_eval_summary* out) {
  if (out == nullptr) return;
  out->seeds = static_cast<int>(r.per_seed.size());
  out->horizon = r.horizon;
  out->mean_cost = r.mean_cost;
  out->std_cost = r.std_cost;
  out->mean_estimation_cost = r.mean_estimation_cost;
  out->std_estimation_cost = r.std_estimation_cost;
  out->mean_transmissions = r.mean_transmissions;
  out->std_transmissions = r.std_transmissions;
}

calm_run* wrap(calm::RunDirectory run) {
  auto* handle = new calm_run{std::move(run), {}};
  handle->path = handle->run.path().string();
  return handle;
}

}  // namespace

extern "C" {

const char* calm_last_error(void) { return g_last_error.c_str(); }
const char* calm_version(void) { return "1.0.0"; }

calm_status calm_config_load(const char* path, calm_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new calm_config{calm::load_run_config(path), {}};
  });
}

calm_status calm_config_parse(const char* json_text, calm_config** out) {
  return guarded([&] {
    require(json_text, "json_text");
    require(out, "out");
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
      throw calm::InvalidArgument(std::string("config: not valid JSON: ") + e.what());
    }
    *out = new calm_config{calm::parse_run_config(doc), {}};
  });
}

calm_status calm_config_apply_environment(calm_config* config) {
  return guarded([&] {
    require(config, "config");
    calm::apply_environment(config->config);
  });
}

calm_status calm_config_set_output_dir(calm_config* config, const char* dir) {
  return guarded([&] {
    require(config, "config");
    require(dir, "dir");
    config->config.output_dir = dir;
  });
}

calm_status calm_config_set_seed(calm_config* config, uint64_t seed) {
  return guarded([&] {
    require(config, "config");
    config->config.train.seed = seed;
  });
}

calm_status calm_config_set_threads(calm_config* config, int threads) {
  return guarded([&] {
    require(config, "config");
    if (threads < 1) throw calm::InvalidArgument("threads must be >= 1");
    config->config.train.threads = threads;
  });
}

calm_status calm_config_to_json(calm_config* config, const char** json_text) {
  return guarded([&] {
    require(config, "config");
    require(json_text, "json_text");
    config->json_text = calm::to_json(config->config).dump(2);
    *json_text = config->json_text.c_str();
  });
}

void calm_config_free(calm_config* config) { delete config; }

calm_status calm_train(const calm_config* config, calm_run** out) {
  return guarded([&] {
    require(config, "config");
    require(out, "out");
    std::ostringstream sink;
    *out = wrap(calm::cmd_train(config->config, sink));
  });
}

calm_status calm_run_create(const calm_config* config, calm_run** out) {
  return guarded([&] {
    require(config, "config");
    require(out, "out");
    *out = wrap(calm::RunDirectory::create(config->config));
  });
}

calm_status calm_run_open(const char* dir, calm_run** out) {
  return guarded([&] {
    require(dir, "dir");
    require(out, "out");
    *out = wrap(calm::RunDirectory::open(dir));
  });
}

const char* calm_run_path(const calm_run* run) {
  return run == nullptr ? "" : run->path.c_str();
}

calm_status calm_run_set_threads(calm_run* run, int threads) {
  return guarded([&] {
    require(run, "run");
    if (threads < 1) throw calm::InvalidArgument("threads must be >= 1");
    run->run.set_threads(threads);
  });
}

void calm_run_free(calm_run* run) { delete run; }

calm_status calm_policy_parse(const char* text, calm_policy* out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    const calm::PolicySpec spec = calm::PolicySpec::parse(text);
    using Kind = calm::PolicySpec::Kind;
    switch (spec.kind) {
      case Kind::kLearned: *out = {CALM_POLICY_LEARNED, 0.0}; break;
      case Kind::kLinear: *out = {CALM_POLICY_LINEAR, 0.0}; break;
      case Kind::kAlways: *out = {CALM_POLICY_ALWAYS, 0.0}; break;
      case Kind::kNever: *out = {CALM_POLICY_NEVER, 0.0}; break;
      case Kind::kPeriodic: *out = {CALM_POLICY_PERIODIC, double(spec.period)}; break;
      case Kind::kEvent: *out = {CALM_POLICY_EVENT, spec.threshold}; break;
    }
  });
}

calm_status calm_evaluate(const calm_run* run, calm_policy policy,
                          calm_estimator_kind estimator, void* log,
                          calm_eval_summary* out) {
  return guarded([&] {
    require(run, "run");
    LogSink sink(log);
    fill(calm::cmd_evaluate(run->run, to_spec(policy), to_choice(estimator), sink.stream()),
         out);
  });
}

calm_status calm_landscape(const calm_run* run, calm_policy policy,
                           calm_estimator_kind estimator, void* log,
                           calm_landscape_summary* out) {
  return guarded([&] {
    require(run, "run");
    LogSink sink(log);
    const calm::LandscapeSummary s = calm::cmd_landscape(
        run->run, to_spec(policy), to_choice(estimator), sink.stream());
    if (out != nullptr) *out = {s.points, s.accuracy, s.silent_component};
  });
}

calm_status calm_pareto(const calm_run* run, void* log, int* rows) {
  return guarded([&] {
    require(run, "run");
    LogSink sink(log);
    const auto points = calm::cmd_pareto(run->run, sink.stream());
    if (rows != nullptr) *rows = static_cast<int>(points.size());
  });
}

calm_status calm_baseline(calm_run* run, void* log, calm_eval_summary* out) {
  return guarded([&] {
    require(run, "run");
    LogSink sink(log);
    fill(calm::cmd_baseline(run->run, sink.stream()), out);
  });
}

calm_status calm_mlp_create(const int* sizes, size_t count, uint64_t seed, calm_mlp** out) {
  return guarded([&] {
    require(sizes, "sizes");
    require(out, "out");
    if (count < 2) throw calm::InvalidArgument("an MLP needs at least two layer sizes");
    const std::vector<int> layers(sizes, sizes + count);
    *out = new calm_mlp{calm::init_mlp(layers, seed)};
  });
}

calm_status calm_mlp_load(const char* path, calm_mlp** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new calm_mlp{calm::load_checkpoint(path)};
  });
}

calm_status calm_mlp_save(const calm_mlp* net, const char* path) {
  return guarded([&] {
    require(net, "net");
    require(path, "path");
    calm::save_checkpoint(path, net->net);
  });
}

int calm_mlp_input_dim(const calm_mlp* net) { return net ? net->net.input_dim() : 0; }
int calm_mlp_output_dim(const calm_mlp* net) { return net ? net->net.output_dim() : 0; }

calm_status calm_mlp_forward(const calm_mlp* net, const double* input, double* output) {
  return guarded([&] {
    require(net, "net");
    require(input, "input");
    require(output, "output");
    const Eigen::VectorXd y = calm::forward(
        net->net, Eigen::Map<const Eigen::VectorXd>(input, net->net.input_dim()));
    Eigen::Map<Eigen::VectorXd>(output, y.size()) = y;
  });
}

void calm_mlp_free(calm_mlp* net) { delete net; }

calm_status calm_solve_dare(int n, int m, const double* A, const double* B, const double* Q,
                            const double* R, double gamma, double* P, double* K,
                            double* residual) {
  return guarded([&] {
    for (const double* p : {A, B, Q, R}) require(p, "matrix");
    require(P, "P");
    require(K, "K");
    if (n < 1 || m < 1) throw calm::InvalidArgument("dimensions must be positive");
    using Map = Eigen::Map<const Eigen::MatrixXd>;
    const calm::LqrSolution s = calm::solve_dare(Map(A, n, n), Map(B, n, m), Map(Q, n, n),
                                                 Map(R, m, m), gamma);
    Eigen::Map<Eigen::MatrixXd>(P, n, n) = s.P;
    Eigen::Map<Eigen::MatrixXd>(K, m, n) = s.K;
    if (residual != nullptr) *residual = s.residual;
  });
}

calm_status calm_system_create(const char* name, const char* gmm_preset, calm_system** out) {
  return guarded([&] {
    require(name, "name");
    require(out, "out");
    const std::string preset =
        gmm_preset != nullptr ? std::string(gmm_preset) : calm::default_gmm_preset(name);
    *out = new calm_system{calm::build_system_lqr(name, calm::gmm_preset(preset))};
  });
}

int calm_system_state_dim(const calm_system* sys) { return sys ? sys->model.state_dim : 0; }

calm_status calm_system_step(const calm_system* sys, const double* x, const double* w,
                             double* x_next) {
  return guarded([&] {
    require(sys, "sys");
    require(x, "x");
    require(w, "w");
    require(x_next, "x_next");
    const int n = sys->model.state_dim;
    const Eigen::VectorXd next =
        calm::step(sys->model, Eigen::Map<const Eigen::VectorXd>(x, n),
                   Eigen::Map<const Eigen::VectorXd>(w, sys->model.noise_dim));
    Eigen::Map<Eigen::VectorXd>(x_next, n) = next;
  });
}

void calm_system_free(calm_system* sys) { delete sys; }

}  // extern "C"
