#ifndef CALM_COMMANDS_HPP_
#define CALM_COMMANDS_HPP_

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "config.hpp"
#include "evaluation.hpp"

namespace calm {

// Which scheduler a command runs. Text form: learned | linear | always |
// never | periodic:<p> | event:<tau>. "linear" is the policy trained by the
// baseline command against the piecewise-linear receiver.
struct PolicySpec {
  enum class Kind { kLearned, kLinear, kAlways, kNever, kPeriodic, kEvent };
  Kind kind = Kind::kLearned;
  int period = 1;
  double threshold = 1.0;

  static PolicySpec parse(const std::string& text);
  std::string label() const;
};

// Receiver used with the scheduler. kDefault: linear for the "linear"
// policy, the CALM-trained network otherwise.
enum class EstimatorChoice { kDefault, kCalm, kLinear };
EstimatorChoice parse_estimator_choice(const std::string& text);

// A run directory: resolved config.json, checkpoints and CSV artifacts.
// Existing files are never overwritten; repeated artifacts get -2, -3, ...
class RunDirectory {
 public:
  // New directory {output_dir}/{experiment}[-k] holding the resolved config.
  // Networks start from their seeded initial values.
  static RunDirectory create(const RunConfig& config);
  // Loads config.json and the newest checkpoints. InvalidArgument when a
  // checkpoint does not match the configured system.
  static RunDirectory open(const std::filesystem::path& dir);

  const std::filesystem::path& path() const { return path_; }
  const RunConfig& config() const { return config_; }
  const SystemModel& model() const { return model_; }
  const PolicyNet& policy() const { return policy_; }
  const ValueNet& value() const { return value_; }
  const EstimatorNet& estimator() const { return estimator_; }
  const std::optional<PolicyNet>& linear_policy() const { return linear_policy_; }
  int trained_iterations() const { return trained_iterations_; }

  // First unused path {dir}/{stem}{ext}, {stem}-2{ext}, ...
  std::filesystem::path artifact(const std::string& stem, const std::string& ext) const;

  void set_threads(int threads) { config_.train.threads = threads; }
  void set_trained(const PolicyNet& policy, const ValueNet& value,
                   const EstimatorNet& estimator, int iterations);
  void set_linear_policy(const PolicyNet& policy) { linear_policy_ = policy; }

 private:
  RunDirectory() = default;

  std::filesystem::path path_;
  RunConfig config_;
  SystemModel model_;
  PolicyNet policy_;
  ValueNet value_;
  EstimatorNet estimator_;
  std::optional<PolicyNet> linear_policy_;
  int trained_iterations_ = 0;
};

// train: calm_train, checkpoints per outer iteration, train_log.csv,
// ppo_log.csv, iterations.csv.
RunDirectory cmd_train(const RunConfig& config, std::ostream& log);

// evaluate: eval_<policy>_<estimator>.csv plus (if enabled) the trajectory
// of the first seed. Prints the summary line.
EvalReport cmd_evaluate(const RunDirectory& run, const PolicySpec& policy,
                        EstimatorChoice estimator, std::ostream& log);

struct LandscapeSummary {
  int points = 0;
  double accuracy = 0.0;
  int silent_component = -1;
  std::filesystem::path csv;
};

// landscape: landscape_<policy>_<estimator>.csv (e_1..e_n, delta, gmm_component).
LandscapeSummary cmd_landscape(const RunDirectory& run, const PolicySpec& policy,
                               EstimatorChoice estimator, std::ostream& log);

// pareto: pareto.csv, |periods| + |thresholds| + 1 rows.
std::vector<ParetoPoint> cmd_pareto(const RunDirectory& run, std::ostream& log);

// baseline: trains (or reuses) the linear-receiver scheduler, saves
// linear_policy.ckpt / linear_value.ckpt / linear_log.csv, then evaluates it.
EvalReport cmd_baseline(RunDirectory& run, std::ostream& log);

}  // namespace calm

#endif  // CALM_COMMANDS_HPP_
