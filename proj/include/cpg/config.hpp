// Experiment configuration: a strict JSON schema (unknown keys rejected,
// every field validated with a path diagnostic), construction of
// environments and run configurations from it, and canonical
// serialization so that configs round-trip.

#pragma once

#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <string>
#include <vector>

#include "cpg/envs.hpp"
#include "cpg/optimizer.hpp"

namespace cpg {

struct WrapperConfig {
  double a_min = -1.0;
  double a_max = 1.0;
  double threshold = 50.0;
};

struct EnvironmentConfig {
  std::string kind;  // "dgww" | "cost_lqr" | "robot_world"
  DgwwConfig dgww;
  LqrConfig lqr;
  RobotWorldConfig robot_world;
  std::optional<WrapperConfig> wrapper;  // energy-cost wrapper
};

struct SweepConfig {
  std::string parameter;  // "omega" | "sigma"
  std::vector<double> values;
};

struct DeploymentStudyConfig {
  std::vector<double> sigma_grid;
  int rollouts = 10000;
  // Optional Lipschitz constant of the performance functions; when given,
  // gap tables also carry the analytic envelope (1 + |lambda|_1) L1 sigma
  // sqrt(d).
  std::optional<double> lipschitz_l1;
};

// Optional reporting block: translates a user-supplied accuracy estimate
// and unregularized-multiplier norm into objective-gap / violation bounds
// and conservative thresholds, included in the run summary.
struct BoundReportConfig {
  double epsilon = 0.0;
  double lambda0_norm = 0.0;
};

struct ExperimentConfig {
  std::string name;
  EnvironmentConfig environment;

  // Algorithm section (sweep-independent defaults).
  ExplorationMode mode = ExplorationMode::kActionBased;
  PolicyFamily family = PolicyFamily::kLinear;
  double sigma = 0.0;
  double temperature = 1.0;
  double omega = 1e-4;
  double lambda_cap = 1e4;
  int iterations = 100;
  int batch_size = 10;
  StepSchedule primal_schedule;
  StepSchedule dual_schedule;
  int eval_interval = 10;
  int eval_rollouts = 0;  // 0 -> batch_size
  int avg_window = 100;
  double param_init = 0.0;
  std::optional<std::pair<double, double>> primal_box;

  // Run section.
  int num_seeds = 1;
  std::uint64_t master_seed = 0;
  std::string output_dir;

  std::optional<SweepConfig> sweep;
  std::optional<DeploymentStudyConfig> deployment_study;
  std::optional<BoundReportConfig> bound_report;

  int sweep_size() const { return sweep ? static_cast<int>(sweep->values.size()) : 1; }
};

// Parse + validate. Throws std::invalid_argument with a field path on any
// unknown key, type mismatch, or inconsistent mode/policy pairing.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const nlohmann::json& j);

// Canonical form with every field (defaults included); parse_config of the
// result reproduces the config.
nlohmann::json serialize(const ExperimentConfig& cfg);

std::unique_ptr<Environment> build_environment(const EnvironmentConfig& cfg);

// Run seed derived from (master_seed, sweep_index, seed_index); the sweep
// value overrides omega or sigma.
RunConfig build_run_config(const ExperimentConfig& cfg, int sweep_index,
                           int seed_index);

}  // namespace cpg
