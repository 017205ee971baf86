// The primal-dual optimization core: constant / Adam step schedules, the
// projected descent (primal) and ascent (dual) updates, the full training
// loop with alternate updates and periodic deterministic-deployment
// evaluation, and the sigma-sweep study measuring the gap between a
// stochastic (hyper)policy and its deterministic counterpart.

#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cpg/estimators.hpp"
#include "cpg/lagrangian.hpp"

namespace cpg {

struct StepSchedule {
  enum class Kind { kConstant, kAdam };
  Kind kind = Kind::kConstant;
  double rate = 0.01;  // zeta for constant, zeta_0 for Adam
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Per-variable optimizer state (Adam moments). A fresh instance per run and
// per variable; the constant schedule keeps it empty.
struct ScheduleState {
  VectorXd m, v;
  long step_count = 0;
};

// The update step to apply for gradient `grad` (sign-free; callers subtract
// it for descent or add it for ascent). Constant: rate * grad. Adam: the
// standard bias-corrected recursion.
VectorXd schedule_step(const StepSchedule& schedule, ScheduleState& state,
                       const VectorXd& grad);

// params' = Pi_V(params - step), with V the whole space unless a coordinate
// box is given. Throws on non-finite gradients.
VectorXd primal_update(const VectorXd& params, const VectorXd& grad,
                       const StepSchedule& schedule, ScheduleState& state,
                       const std::optional<std::pair<double, double>>& box =
                           std::nullopt);

// lambda' = Pi_Lambda(lambda + step); note the ascent sign.
Multipliers dual_update(const Multipliers& multipliers, const VectorXd& grad,
                        const StepSchedule& schedule, ScheduleState& state);

enum class PolicyFamily { kTabularSoftmax, kLinear };

struct RunConfig {
  ExplorationMode mode = ExplorationMode::kActionBased;
  PolicyFamily family = PolicyFamily::kLinear;
  double sigma = 0.0;        // (hyper)policy noise level; > 0 unless tabular
  double temperature = 1.0;  // tabular softmax only
  double omega = 1e-4;
  double lambda_cap = 1e4;   // Lambda radius when omega == 0
  int iterations = 100;      // K
  int batch_size = 10;       // N
  StepSchedule primal_schedule;
  StepSchedule dual_schedule;
  int eval_interval = 10;    // deterministic deployment cadence
  int eval_rollouts = 0;     // 0 -> batch_size
  int avg_window = 100;      // trailing iterates averaged into avg_params
  double param_init = 0.0;   // initial fill value of theta / rho
  std::optional<std::pair<double, double>> primal_box;
  std::uint64_t seed = 0;
};

struct IterationLog {
  int k = 0;
  VectorXd j_hat;   // length U + 1, estimated at the iteration's start
  VectorXd lambda;  // multipliers after this iteration's dual update
  double lagrangian = 0.0;  // L_omega(j_hat, lambda before the update)
  double primal_step_norm = 0.0;
  double dual_step_norm = 0.0;
  long rollouts = 0;  // cumulative training rollouts (both batches)
  double dual_variance = 0.0;        // estimated variance of the dual estimator
  double dual_variance_bound = 0.0;  // U * J_max_agg^2 / N
};

struct EvalLog {
  int k = 0;
  VectorXd j_det;  // length U + 1, deterministic-deployment estimates
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::vector<IterationLog> iterations;
  std::vector<EvalLog> evals;
  VectorXd final_params;
  VectorXd avg_params;  // mean of the trailing avg_window primal iterates
  // Shape of the flattened parameter vectors: (states x actions) for the
  // tabular family, (action_dim x state_dim) for the linear families.
  int param_rows = 0;
  int param_cols = 0;
  std::string status = "ok";  // "ok" or "nan_abort"
  int abort_iteration = -1;
  long total_rollouts = 0;
  long total_eval_rollouts = 0;
};

// Runs the alternate descent-ascent loop: sample a batch under the current
// (hyper)policy, update the primal variable, sample a fresh batch under the
// updated primal, update the dual variable. Any non-finite estimate aborts
// the run and marks the record.
RunRecord run_cpg(const Environment& env, const RunConfig& cfg);

// One row of the deployment study table.
struct GapRow {
  double sigma = 0.0;
  VectorXd j_stochastic;    // length U + 1
  VectorXd j_deterministic; // length U + 1
  VectorXd gap;             // |j_stochastic - j_deterministic|
  VectorXd standard_error;  // combined MC standard error of the gap
  // Analytic envelope (1 + |lambda|_1) L1 sigma sqrt(d), filled only when a
  // Lipschitz constant is supplied in the configuration; reporting only.
  double envelope = std::numeric_limits<double>::quiet_NaN();
};

// Fills the envelope column of a gap table from a user-supplied Lipschitz
// constant; d is the exploration dimension (action dim for AB, parameter
// dim for PB).
void apply_gap_envelope(std::vector<GapRow>& table, double lambda_l1_norm,
                        double lipschitz_l1, int dimension);

// For each sigma in the grid, Monte-Carlo estimates of the stochastic
// performance/costs at that noise level and of the deterministic
// counterpart with the same parameters, plus their absolute differences.
std::vector<GapRow> deterministic_gap(const Environment& env,
                                      ExplorationMode mode,
                                      const VectorXd& params,
                                      const std::vector<double>& sigma_grid,
                                      int eval_rollouts, std::uint64_t seed);

}  // namespace cpg
