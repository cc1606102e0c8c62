#ifndef CALM_CONFIG_HPP_
#define CALM_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "training.hpp"

namespace calm {

struct EvalConfig {
  int horizon = 500;
  std::vector<std::uint64_t> seeds;  // default: 20 seeds from 1000
};

struct SweepConfig {
  std::vector<int> periods{1, 2, 3};
  std::vector<double> thresholds;  // default: 10-point log grid
};

struct LandscapeConfig {
  int num_points = 2000;
  std::uint64_t first_seed = 5000;
};

struct ExportConfig {
  bool trajectories = true;
};

// Everything one experiment needs. Parsed from JSON; to_json() writes the
// fully resolved form (every default materialised, mixture written out).
struct RunConfig {
  std::string experiment;
  std::string output_dir = "runs";
  std::string gmm_source;  // preset name, or "explicit"
  TrainConfig train;
  EvalConfig eval;
  SweepConfig sweep;
  LandscapeConfig landscape;
  ExportConfig exports;
};

std::vector<double> default_thresholds();
std::string default_gmm_preset(const std::string& system);

// Throws InvalidArgument("config: <field path>: <problem>").
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

// CALM_OUTPUT_DIR and CALM_THREADS, when set, override the file.
void apply_environment(RunConfig& config);

}  // namespace calm

#endif  // CALM_CONFIG_HPP_
