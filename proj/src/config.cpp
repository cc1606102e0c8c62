#include "config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>

#include "errors.hpp"

namespace calm {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw InvalidArgument("config: " + path + ": " + what);
}

std::string join(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

// Reads typed fields out of one JSON object and rejects unknown keys.
class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return obj_.contains(key);
  }
  const json& raw(const std::string& key) { return obj_.at(key); }
  std::string path(const std::string& key) const { return join(path_, key); }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    return number_at(obj_.at(key), path(key));
  }
  double required_number(const std::string& key) {
    if (!has(key)) fail(path(key), "required field is missing");
    return number_at(obj_.at(key), path(key));
  }
  int integer(const std::string& key, int fallback) {
    if (!has(key)) return fallback;
    return integer_at(obj_.at(key), path(key));
  }
  std::uint64_t uint64(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    return uint64_at(obj_.at(key), path(key));
  }
  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    if (!obj_.at(key).is_boolean()) fail(path(key), "expected true or false");
    return obj_.at(key).get<bool>();
  }
  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    if (!obj_.at(key).is_string()) fail(path(key), "expected a string");
    return obj_.at(key).get<std::string>();
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) fail(path(it.key()), "unknown field");
  }

  static double number_at(const json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(path, "must be finite");
    return d;
  }
  static int integer_at(const json& v, const std::string& path) {
    if (!v.is_number_integer()) fail(path, "expected an integer");
    return v.get<int>();
  }
  static std::uint64_t uint64_at(const json& v, const std::string& path) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                   v.get<std::int64_t>() < 0))
      fail(path, "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<double> number_list(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(Reader::number_at(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

Eigen::VectorXd vector_at(const json& v, const std::string& path) {
  const auto xs = number_list(v, path);
  return Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

Eigen::MatrixXd matrix_at(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) fail(path, "expected a non-empty array of rows");
  const std::size_t rows = v.size();
  Eigen::MatrixXd m;
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = number_list(v[r], path + "[" + std::to_string(r) + "]");
    if (r == 0) m.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(row.size()));
    if (static_cast<Eigen::Index>(row.size()) != m.cols())
      fail(path, "rows have different lengths");
    for (std::size_t c = 0; c < row.size(); ++c) m(r, c) = row[c];
  }
  return m;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

json vector_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

GmmSpec parse_gmm(const json& v, const std::string& path, std::string& source) {
  try {
    if (v.is_string()) {
      source = v.get<std::string>();
      return gmm_preset(source);
    }
    Reader r(v, path);
    if (r.has("preset")) {
      source = r.string("preset", "");
      GmmSpec base = gmm_preset(source);
      std::vector<double> weights = base.weights();
      if (r.has("weights")) weights = number_list(r.raw("weights"), r.path("weights"));
      r.finish();
      return GmmSpec(base.means(), base.covariances(), weights);
    }
    source = "explicit";
    for (const char* key : {"means", "covariances", "weights"})
      if (!r.has(key)) fail(r.path(key), "required field is missing");
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> covs;
    const json& jm = r.raw("means");
    const json& jc = r.raw("covariances");
    if (!jm.is_array()) fail(r.path("means"), "expected an array");
    if (!jc.is_array()) fail(r.path("covariances"), "expected an array");
    for (std::size_t i = 0; i < jm.size(); ++i)
      means.push_back(vector_at(jm[i], r.path("means") + "[" + std::to_string(i) + "]"));
    for (std::size_t i = 0; i < jc.size(); ++i)
      covs.push_back(matrix_at(jc[i], r.path("covariances") + "[" + std::to_string(i) + "]"));
    auto weights = number_list(r.raw("weights"), r.path("weights"));
    r.finish();
    return GmmSpec(std::move(means), std::move(covs), std::move(weights));
  } catch (const InvalidArgument& e) {
    const std::string msg = e.what();
    if (msg.rfind("config:", 0) == 0) throw;
    const std::string prefix = path + ": ";
    fail(path, msg.rfind(prefix, 0) == 0 ? msg.substr(prefix.size()) : msg);
  }
}

}  // namespace

std::vector<double> default_thresholds() {
  // 10-point geometric grid 1, 2, 4, ..., 512.
  std::vector<double> out;
  for (int k = 0; k < 10; ++k) out.push_back(std::ldexp(1.0, k));
  return out;
}

std::string default_gmm_preset(const std::string& system) {
  if (system == "pendulum") return "pendulum_2mode";
  if (system == "vdp") return "vdp_2mode";
  if (system == "tracking") return "tracking_4mode";
  if (system == "boeing747") return "boeing_2mode";
  fail("system", "unknown system '" + system + "' (expected pendulum|vdp|tracking|boeing747)");
}

RunConfig parse_run_config(const json& doc) {
  Reader r(doc, "");
  RunConfig rc;
  TrainConfig& t = rc.train;

  if (!r.has("system")) fail("system", "required field is missing");
  t.system = r.string("system", "");
  const std::string preset = default_gmm_preset(t.system);
  rc.experiment = r.string("experiment", t.system + "_calm");
  if (rc.experiment.empty() || rc.experiment.find('/') != std::string::npos)
    fail("experiment", "must be a non-empty name without '/'");
  rc.output_dir = r.string("output_dir", rc.output_dir);

  if (r.has("gmm")) {
    t.gmm = parse_gmm(r.raw("gmm"), "gmm", rc.gmm_source);
  } else {
    rc.gmm_source = preset;
    t.gmm = gmm_preset(preset);
  }
  // Informational; written by to_json next to the expanded mixture.
  rc.gmm_source = r.string("gmm_source", rc.gmm_source);

  t.lambda = r.required_number("lambda");
  t.gamma = r.number("gamma", t.gamma);
  t.lqr_gamma = r.number("lqr_gamma", t.lqr_gamma);
  if (r.has("cost_weight")) t.cost_weight = matrix_at(r.raw("cost_weight"), "cost_weight");

  t.horizon = r.integer("horizon", t.horizon);
  t.outer_iterations = r.integer("outer_iterations", t.outer_iterations);
  t.ppo_epochs = r.integer("ppo_epochs", t.ppo_epochs);
  t.estimator_epochs = r.integer("estimator_epochs", t.estimator_epochs);
  t.linear_baseline_epochs = r.integer("linear_baseline_epochs", t.linear_baseline_epochs);
  t.rollouts_per_epoch = r.integer("rollouts_per_epoch", t.rollouts_per_epoch);
  t.estimator_rollouts = r.integer("estimator_rollouts", t.estimator_rollouts);
  t.estimator_minibatch = r.integer("estimator_minibatch", t.estimator_minibatch);
  if (r.has("hidden_layers")) {
    const json& h = r.raw("hidden_layers");
    if (!h.is_array()) fail("hidden_layers", "expected an array of integers");
    t.hidden_layers.clear();
    for (std::size_t i = 0; i < h.size(); ++i)
      t.hidden_layers.push_back(
          Reader::integer_at(h[i], "hidden_layers[" + std::to_string(i) + "]"));
  }
  t.policy_lr = r.number("policy_lr", t.policy_lr);
  t.value_lr = r.number("value_lr", t.value_lr);
  t.estimator_lr = r.number("estimator_lr", t.estimator_lr);
  t.weight_decay = r.number("weight_decay", t.weight_decay);
  t.ppo.clip_epsilon = r.number("clip_epsilon", t.ppo.clip_epsilon);
  t.ppo.entropy_coef = r.number("entropy_coef", t.ppo.entropy_coef);
  t.ppo.update_iters = r.integer("ppo_update_iters", t.ppo.update_iters);
  t.ppo.normalize_advantages = r.boolean("normalize_advantages", t.ppo.normalize_advantages);
  t.gae_lambda = r.number("gae_lambda", t.gae_lambda);
  t.reward_scale = r.number("reward_scale", 0.0);
  const std::string recursion = r.string("loss_recursion", "forward");
  if (recursion == "forward") {
    t.loss_recursion = LossRecursion::kForward;
  } else if (recursion == "as_printed") {
    t.loss_recursion = LossRecursion::kAsPrinted;
  } else {
    fail("loss_recursion", "expected \"forward\" or \"as_printed\"");
  }
  t.seed = r.uint64("seed", t.seed);
  t.threads = r.integer("threads", t.threads);

  if (r.has("evaluation")) {
    Reader e(r.raw("evaluation"), "evaluation");
    rc.eval.horizon = e.integer("horizon", rc.eval.horizon);
    if (e.has("seeds")) {
      const json& s = e.raw("seeds");
      if (!s.is_array() || s.empty()) fail("evaluation.seeds", "expected a non-empty array");
      for (std::size_t i = 0; i < s.size(); ++i)
        rc.eval.seeds.push_back(
            Reader::uint64_at(s[i], "evaluation.seeds[" + std::to_string(i) + "]"));
    }
    e.finish();
  }
  if (rc.eval.seeds.empty())
    for (std::uint64_t s = 1000; s < 1020; ++s) rc.eval.seeds.push_back(s);
  if (rc.eval.horizon < 1) fail("evaluation.horizon", "must be >= 1");

  rc.sweep.thresholds = default_thresholds();
  if (r.has("sweep")) {
    Reader s(r.raw("sweep"), "sweep");
    if (s.has("periods")) {
      const json& p = s.raw("periods");
      if (!p.is_array()) fail("sweep.periods", "expected an array of integers");
      rc.sweep.periods.clear();
      for (std::size_t i = 0; i < p.size(); ++i) {
        const int period = Reader::integer_at(p[i], "sweep.periods[" + std::to_string(i) + "]");
        if (period < 1) fail("sweep.periods[" + std::to_string(i) + "]", "must be >= 1");
        rc.sweep.periods.push_back(period);
      }
    }
    if (s.has("thresholds")) {
      rc.sweep.thresholds = number_list(s.raw("thresholds"), "sweep.thresholds");
      for (std::size_t i = 0; i < rc.sweep.thresholds.size(); ++i)
        if (!(rc.sweep.thresholds[i] > 0.0))
          fail("sweep.thresholds[" + std::to_string(i) + "]", "must be > 0");
    }
    s.finish();
  }

  if (r.has("landscape")) {
    Reader l(r.raw("landscape"), "landscape");
    rc.landscape.num_points = l.integer("num_points", rc.landscape.num_points);
    rc.landscape.first_seed = l.uint64("first_seed", rc.landscape.first_seed);
    l.finish();
    if (rc.landscape.num_points < 0) fail("landscape.num_points", "must be >= 0");
  }
  if (r.has("export")) {
    Reader x(r.raw("export"), "export");
    rc.exports.trajectories = x.boolean("trajectories", rc.exports.trajectories);
    x.finish();
  }
  r.finish();

  validate(t);
  if (t.reward_scale <= 0.0) t.reward_scale = t.effective_reward_scale();
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("config: cannot read " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw InvalidArgument("config: " + path.string() + ": malformed JSON: " + e.what());
  }
  return parse_run_config(doc);
}

json to_json(const RunConfig& rc) {
  const TrainConfig& t = rc.train;
  json j;
  j["experiment"] = rc.experiment;
  j["output_dir"] = rc.output_dir;
  j["system"] = t.system;
  json means = json::array(), covs = json::array();
  for (int k = 0; k < t.gmm.num_components(); ++k) {
    means.push_back(vector_json(t.gmm.means()[k]));
    covs.push_back(matrix_json(t.gmm.covariances()[k]));
  }
  j["gmm"] = {{"means", means}, {"covariances", covs}, {"weights", t.gmm.weights()}};
  j["gmm_source"] = rc.gmm_source;
  j["lambda"] = t.lambda;
  j["gamma"] = t.gamma;
  j["lqr_gamma"] = t.lqr_gamma;
  const int n = t.gmm.dim();
  j["cost_weight"] = matrix_json(t.cost_weight.size() == 0
                                     ? Eigen::MatrixXd(Eigen::MatrixXd::Identity(n, n))
                                     : t.cost_weight);
  j["horizon"] = t.horizon;
  j["outer_iterations"] = t.outer_iterations;
  j["ppo_epochs"] = t.ppo_epochs;
  j["estimator_epochs"] = t.estimator_epochs;
  j["linear_baseline_epochs"] = t.linear_baseline_epochs;
  j["rollouts_per_epoch"] = t.rollouts_per_epoch;
  j["estimator_rollouts"] = t.estimator_rollouts;
  j["estimator_minibatch"] = t.estimator_minibatch;
  j["hidden_layers"] = t.hidden_layers;
  j["policy_lr"] = t.policy_lr;
  j["value_lr"] = t.value_lr;
  j["estimator_lr"] = t.estimator_lr;
  j["weight_decay"] = t.weight_decay;
  j["clip_epsilon"] = t.ppo.clip_epsilon;
  j["entropy_coef"] = t.ppo.entropy_coef;
  j["ppo_update_iters"] = t.ppo.update_iters;
  j["normalize_advantages"] = t.ppo.normalize_advantages;
  j["gae_lambda"] = t.gae_lambda;
  j["reward_scale"] = t.effective_reward_scale();
  j["loss_recursion"] = t.loss_recursion == LossRecursion::kForward ? "forward" : "as_printed";
  j["seed"] = t.seed;
  j["threads"] = t.threads;
  j["evaluation"] = {{"horizon", rc.eval.horizon}, {"seeds", rc.eval.seeds}};
  j["sweep"] = {{"periods", rc.sweep.periods}, {"thresholds", rc.sweep.thresholds}};
  j["landscape"] = {{"num_points", rc.landscape.num_points},
                    {"first_seed", rc.landscape.first_seed}};
  j["export"] = {{"trajectories", rc.exports.trajectories}};
  return j;
}

void apply_environment(RunConfig& config) {
  if (const char* out = std::getenv("CALM_OUTPUT_DIR"); out && *out)
    config.output_dir = out;
  if (const char* threads = std::getenv("CALM_THREADS"); threads && *threads) {
    char* end = nullptr;
    const long v = std::strtol(threads, &end, 10);
    if (*end != '\0' || v < 1 || v > 1024)
      throw InvalidArgument("CALM_THREADS must be a positive integer");
    config.train.threads = static_cast<int>(v);
  }
}

}  // namespace calm
