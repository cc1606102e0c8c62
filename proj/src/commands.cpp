#include "commands.hpp"

#include <fstream>
#include <regex>

#include "csv.hpp"
#include "errors.hpp"

namespace calm {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kConfigFile = "config.json";

json checkpoint_meta(const RunConfig& config, const std::string& role, int iter) {
  json meta = {{"role", role}, {"system", config.train.system}, {"outer_iter", iter}};
  if (role == "estimator")
    meta["input"] = "estimate (n) followed by age of information as a raw step count";
  else
    meta["input"] = "lookahead estimation error (n)";
  return meta;
}

void check_shape(const Mlp& net, int in, int out, const std::string& what) {
  if (net.input_dim() != in || net.output_dim() != out)
    throw InvalidArgument(what + " checkpoint is " + std::to_string(net.input_dim()) +
                          "->" + std::to_string(net.output_dim()) + ", system needs " +
                          std::to_string(in) + "->" + std::to_string(out));
}

std::string estimator_label(EstimatorChoice e) {
  return e == EstimatorChoice::kLinear ? "linear" : "calm";
}

EstimatorChoice resolve(EstimatorChoice e, const PolicySpec& p) {
  if (e != EstimatorChoice::kDefault) return e;
  return p.kind == PolicySpec::Kind::kLinear ? EstimatorChoice::kLinear
                                             : EstimatorChoice::kCalm;
}

SchedulePolicy schedule_for(const RunDirectory& run, const PolicySpec& spec) {
  switch (spec.kind) {
    case PolicySpec::Kind::kLearned: return SchedulePolicy::learned(run.policy());
    case PolicySpec::Kind::kLinear:
      if (!run.linear_policy())
        throw InvalidArgument("run has no linear baseline policy; run `baseline` first");
      return SchedulePolicy::learned(*run.linear_policy());
    case PolicySpec::Kind::kAlways: return SchedulePolicy::always();
    case PolicySpec::Kind::kNever: return SchedulePolicy::never();
    case PolicySpec::Kind::kPeriodic: return SchedulePolicy::periodic(spec.period);
    case PolicySpec::Kind::kEvent: return SchedulePolicy::event_triggered(spec.threshold);
  }
  throw InvalidArgument("unknown policy");
}

RolloutSettings eval_settings(const RunConfig& config) {
  return {config.eval.horizon, config.train.cost(), {}};
}

void write_epoch_logs(const RunDirectory& run, const std::vector<EpochLogRow>& rows,
                      const std::string& stem) {
  CsvWriter log(run.artifact(stem, ".csv"),
                {"outer_iter", "phase", "epoch", "mean_return", "tx_rate",
                 "estimator_loss", "entropy"});
  for (const auto& r : rows) {
    const bool est = r.phase == "estimator";
    log.row({std::to_string(r.outer_iter), r.phase, std::to_string(r.epoch),
             format_double(r.mean_return), format_double(r.tx_rate),
             est ? format_double(r.estimator_loss) : "",
             est ? "" : format_double(r.entropy)});
  }
}

void write_ppo_log(const RunDirectory& run, const std::vector<EpochLogRow>& rows,
                   const std::string& stem) {
  CsvWriter log(run.artifact(stem, ".csv"),
                {"outer_iter", "epoch", "mean_reward", "surrogate", "value_loss",
                 "entropy"});
  for (const auto& r : rows) {
    if (r.phase == "estimator") continue;
    log.row({std::to_string(r.outer_iter), std::to_string(r.epoch),
             format_double(r.mean_return), format_double(r.surrogate),
             format_double(r.value_loss), format_double(r.entropy)});
  }
}

void write_trajectory(const fs::path& path, const TrajectoryRecord& r) {
  const int n = static_cast<int>(r.states.rows());
  std::vector<std::string> header{"t"};
  for (int i = 1; i <= n; ++i) header.push_back("x_" + std::to_string(i));
  for (int i = 1; i <= n; ++i) header.push_back("xhat_" + std::to_string(i));
  for (const char* h : {"e_norm", "delta", "aoi"}) header.push_back(h);
  CsvWriter csv(path, header);
  for (int t = 0; t < r.horizon(); ++t) {
    std::vector<std::string> row{std::to_string(t)};
    for (int i = 0; i < n; ++i) row.push_back(format_double(r.states(i, t)));
    for (int i = 0; i < n; ++i) row.push_back(format_double(r.estimates(i, t)));
    row.push_back(format_double(r.errors.col(t).norm()));
    row.push_back(std::to_string(r.deltas[t]));
    row.push_back(std::to_string(r.ages[t]));
    csv.row(row);
  }
}

void print_report(std::ostream& log, const EvalReport& r, const std::string& policy,
                  const std::string& estimator) {
  log << "policy=" << policy << " estimator=" << estimator
      << " cost=" << format_double(r.mean_cost)
      << " count=" << format_double(r.mean_transmissions)
      << " std_cost=" << format_double(r.std_cost)
      << " estimation_cost=" << format_double(r.mean_estimation_cost)
      << " horizon=" << r.horizon << " seeds=" << r.per_seed.size() << '\n';
}

}  // namespace

PolicySpec PolicySpec::parse(const std::string& text) {
  PolicySpec p;
  static const std::regex periodic(R"(periodic:([0-9]+))");
  static const std::regex event(R"(event:([0-9.eE+\-]+))");
  std::smatch m;
  if (text == "learned") {
    p.kind = Kind::kLearned;
  } else if (text == "linear") {
    p.kind = Kind::kLinear;
  } else if (text == "always") {
    p.kind = Kind::kAlways;
  } else if (text == "never") {
    p.kind = Kind::kNever;
  } else if (std::regex_match(text, m, periodic)) {
    p.kind = Kind::kPeriodic;
    p.period = std::stoi(m[1]);
    if (p.period < 1) throw InvalidArgument("policy: period must be >= 1");
  } else if (std::regex_match(text, m, event)) {
    p.kind = Kind::kEvent;
    try {
      p.threshold = std::stod(m[1]);
    } catch (const std::exception&) {
      throw InvalidArgument("policy: bad threshold in '" + text + "'");
    }
    if (!(p.threshold > 0.0)) throw InvalidArgument("policy: threshold must be > 0");
  } else {
    throw InvalidArgument("policy: expected learned|linear|always|never|periodic:<p>|"
                          "event:<tau>, got '" + text + "'");
  }
  return p;
}

std::string PolicySpec::label() const {
  switch (kind) {
    case Kind::kLearned: return "learned";
    case Kind::kLinear: return "linear";
    case Kind::kAlways: return "always";
    case Kind::kNever: return "never";
    case Kind::kPeriodic: return "periodic" + std::to_string(period);
    case Kind::kEvent: return "event" + format_double(threshold);
  }
  return "unknown";
}

EstimatorChoice parse_estimator_choice(const std::string& text) {
  if (text.empty() || text == "default") return EstimatorChoice::kDefault;
  if (text == "calm") return EstimatorChoice::kCalm;
  if (text == "linear") return EstimatorChoice::kLinear;
  throw InvalidArgument("estimator: expected calm|linear, got '" + text + "'");
}

RunDirectory RunDirectory::create(const RunConfig& config) {
  RunDirectory run;
  run.config_ = config;
  run.model_ = model_for(config.train);
  const fs::path base = fs::path(config.output_dir);
  fs::create_directories(base);
  fs::path dir = base / config.experiment;
  for (int k = 2; fs::exists(dir); ++k)
    dir = base / (config.experiment + "-" + std::to_string(k));
  fs::create_directory(dir);
  run.path_ = dir;
  std::ofstream(dir / kConfigFile, std::ios::binary) << to_json(config).dump(2) << '\n';

  InitialNetworks nets = initial_networks(config.train, run.model_.state_dim);
  run.policy_ = std::move(nets.policy);
  run.value_ = std::move(nets.value);
  run.estimator_ = std::move(nets.estimator);
  return run;
}

RunDirectory RunDirectory::open(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InvalidArgument("run directory " + dir.string() + " not found");
  RunDirectory run;
  run.path_ = dir;
  run.config_ = load_run_config(dir / kConfigFile);
  run.model_ = model_for(run.config_.train);
  const int n = run.model_.state_dim;

  InitialNetworks nets = initial_networks(run.config_.train, n);
  run.policy_ = std::move(nets.policy);
  run.value_ = std::move(nets.value);
  run.estimator_ = std::move(nets.estimator);

  static const std::regex policy_file(R"(policy_([0-9]+)\.ckpt)");
  int latest = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, policy_file)) latest = std::max(latest, std::stoi(m[1]));
  }
  if (latest > 0) {
    const std::string suffix = "_" + std::to_string(latest) + ".ckpt";
    run.policy_.params = load_checkpoint(dir / ("policy" + suffix));
    run.value_.params = load_checkpoint(dir / ("value" + suffix));
    run.estimator_.params = load_checkpoint(dir / ("estimator" + suffix));
    check_shape(run.policy_.params, n, 2, "policy");
    check_shape(run.value_.params, n, 1, "value");
    check_shape(run.estimator_.params, n + 1, n, "estimator");
    run.trained_iterations_ = latest;
  }
  if (fs::exists(dir / "linear_policy.ckpt")) {
    PolicyNet linear{load_checkpoint(dir / "linear_policy.ckpt")};
    check_shape(linear.params, n, 2, "linear policy");
    run.linear_policy_ = std::move(linear);
  }
  return run;
}

fs::path RunDirectory::artifact(const std::string& stem, const std::string& ext) const {
  fs::path p = path_ / (stem + ext);
  for (int k = 2; fs::exists(p); ++k) p = path_ / (stem + "-" + std::to_string(k) + ext);
  return p;
}

void RunDirectory::set_trained(const PolicyNet& policy, const ValueNet& value,
                               const EstimatorNet& estimator, int iterations) {
  policy_ = policy;
  value_ = value;
  estimator_ = estimator;
  trained_iterations_ = iterations;
}

RunDirectory cmd_train(const RunConfig& config, std::ostream& log) {
  RunDirectory run = RunDirectory::create(config);
  log << "run directory: " << run.path().string() << '\n';
  TrainResult result = calm_train(
      config.train, [&](int iter, const PolicyNet& p, const ValueNet& v, const EstimatorNet& e) {
        const std::string suffix = "_" + std::to_string(iter) + ".ckpt";
        save_checkpoint(run.path() / ("policy" + suffix), p.params,
                        checkpoint_meta(config, "policy", iter));
        save_checkpoint(run.path() / ("value" + suffix), v.params,
                        checkpoint_meta(config, "value", iter));
        save_checkpoint(run.path() / ("estimator" + suffix), e.params,
                        checkpoint_meta(config, "estimator", iter));
      });
  write_epoch_logs(run, result.log, "train_log");
  write_ppo_log(run, result.log, "ppo_log");
  CsvWriter it(run.artifact("iterations", ".csv"),
               {"outer_iter", "mean_return", "tx_rate", "estimator_loss"});
  for (const auto& s : result.iterations) {
    it.row({std::to_string(s.outer_iter), format_double(s.mean_return),
            format_double(s.tx_rate), format_double(s.estimator_loss)});
    log << "outer_iter=" << s.outer_iter << " mean_return=" << format_double(s.mean_return)
        << " tx_rate=" << format_double(s.tx_rate)
        << " estimator_loss=" << format_double(s.estimator_loss) << '\n';
  }
  run.set_trained(result.policy, result.value, result.estimator,
                  config.train.outer_iterations);
  return run;
}

EvalReport cmd_evaluate(const RunDirectory& run, const PolicySpec& spec,
                        EstimatorChoice choice, std::ostream& log) {
  const RunConfig& config = run.config();
  const EstimatorChoice est = resolve(choice, spec);
  const SchedulePolicy policy = schedule_for(run, spec);
  std::vector<TrajectoryRecord> records;
  const EvalReport report =
      evaluate(policy, est == EstimatorChoice::kCalm ? &run.estimator() : nullptr,
               run.model(), config.train.gmm, eval_settings(config), config.eval.seeds,
               config.train.threads, &records);

  const std::string tag = spec.label() + "_" + estimator_label(est);
  CsvWriter csv(run.artifact("eval_" + tag, ".csv"),
                {"seed", "cost", "estimation_cost", "transmissions"});
  for (const auto& s : report.per_seed)
    csv.row({std::to_string(s.seed), format_double(s.cost),
             format_double(s.estimation_cost), std::to_string(s.transmissions)});
  if (config.exports.trajectories)
    write_trajectory(run.artifact("trajectory_" + tag + "_seed" +
                                      std::to_string(config.eval.seeds.front()),
                                  ".csv"),
                     records.front());
  print_report(log, report, spec.label(), estimator_label(est));
  return report;
}

LandscapeSummary cmd_landscape(const RunDirectory& run, const PolicySpec& spec,
                               EstimatorChoice choice, std::ostream& log) {
  const RunConfig& config = run.config();
  const EstimatorChoice est = resolve(choice, spec);
  const auto points = landscape_scan(
      schedule_for(run, spec), est == EstimatorChoice::kCalm ? &run.estimator() : nullptr,
      run.model(), config.train.gmm, eval_settings(config), config.landscape.num_points,
      config.landscape.first_seed);

  LandscapeSummary summary;
  summary.csv = run.artifact("landscape_" + spec.label() + "_" + estimator_label(est), ".csv");
  const int n = run.model().state_dim;
  std::vector<std::string> header;
  for (int i = 1; i <= n; ++i) header.push_back("e_" + std::to_string(i));
  header.push_back("delta");
  header.push_back("gmm_component");
  CsvWriter csv(summary.csv, header);
  for (const auto& p : points) {
    std::vector<std::string> row;
    for (int i = 0; i < n; ++i) row.push_back(format_double(p.lookahead(i)));
    row.push_back(std::to_string(p.delta));
    row.push_back(std::to_string(p.component));
    csv.row(row);
  }
  const int k = config.train.gmm.num_components();
  summary.points = static_cast<int>(points.size());
  summary.accuracy = mode_separation_accuracy(points, k);
  summary.silent_component = majority_silent_component(points, k);
  log << "points=" << summary.points << " mode_accuracy=" << format_double(summary.accuracy)
      << " silent_component=" << summary.silent_component << '\n';
  return summary;
}

std::vector<ParetoPoint> cmd_pareto(const RunDirectory& run, std::ostream& log) {
  const RunConfig& config = run.config();
  const auto points = pareto_sweep(run.model(), config.train.gmm, &run.estimator(),
                                   run.policy(), config.sweep.periods,
                                   config.sweep.thresholds, eval_settings(config),
                                   config.eval.seeds, config.train.threads);
  CsvWriter csv(run.artifact("pareto", ".csv"),
                {"policy_id", "param", "mean_tx", "mean_cost", "std_cost"});
  for (const auto& p : points) {
    csv.row({p.policy_id, format_double(p.param), format_double(p.mean_tx),
             format_double(p.mean_cost), format_double(p.std_cost)});
    log << p.policy_id << '(' << format_double(p.param) << ") tx=" << format_double(p.mean_tx)
        << " cost=" << format_double(p.mean_cost) << '\n';
  }
  return points;
}

EvalReport cmd_baseline(RunDirectory& run, std::ostream& log) {
  const RunConfig& config = run.config();
  if (!run.linear_policy()) {
    LinearBaselineResult result = pretrain_linear_baseline(config.train);
    save_checkpoint(run.path() / "linear_policy.ckpt", result.policy.params,
                    checkpoint_meta(config, "linear_policy", 0));
    save_checkpoint(run.path() / "linear_value.ckpt", result.value.params,
                    checkpoint_meta(config, "linear_value", 0));
    write_epoch_logs(run, result.log, "linear_log");
    run.set_linear_policy(result.policy);
  } else {
    log << "reusing linear_policy.ckpt\n";
  }
  PolicySpec spec;
  spec.kind = PolicySpec::Kind::kLinear;
  return cmd_evaluate(run, spec, EstimatorChoice::kLinear, log);
}

}  // namespace calm
