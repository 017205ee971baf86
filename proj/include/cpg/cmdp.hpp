// Constrained-MDP core: problem spec, environment interface, trajectory
// storage and the discounted return/cost functionals everything else
// consumes.

#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <vector>

#include "cpg/rng.hpp"

namespace cpg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// How a constraint cost C_i(tau), i >= 1, aggregates per-step costs.
// The objective index i = 0 always uses the discounted cumulative form
// C_0(tau) = -R(tau).
enum class CostAggregation {
  kCumulativeDiscounted,  // sum_t gamma^t c_t
  kPerStepMean,           // (1/T) sum_t c_t
};

struct CmdpSpec {
  int state_dim = 0;
  int action_dim = 0;
  int num_constraints = 0;     // U
  VectorXd thresholds;         // b, length U
  double gamma = 1.0;          // gamma = 1 allowed only with finite horizon
  int horizon = 0;             // T
  CostAggregation cost_aggregation = CostAggregation::kCumulativeDiscounted;
  // Whether per-step costs are known to lie in [0, 1]. This is configuration
  // metadata: when set, thresholds are validated against [0, J_max] and the
  // variance bound of the dual-gradient estimator applies. Environments with
  // unbounded quadratic signals leave it unset.
  bool unit_cost_range = true;
};

// Throws std::invalid_argument on an inconsistent spec.
void validate_spec(const CmdpSpec& spec);

// Maximum discounted cumulative cost (1 - gamma^T) / (1 - gamma), with the
// continuity limit T at gamma = 1. horizon <= 0 stands for an unbounded
// horizon and is rejected.
double j_max(double gamma, long horizon);

// Upper bound of the aggregated constraint cost: j_max under cumulative
// aggregation, 1 under per-step mean (per-step costs live in [0, 1]).
double j_max_aggregated(double gamma, long horizon, CostAggregation agg);

struct StepResult {
  VectorXd next_state;
  double reward = 0.0;
  VectorXd costs;  // length U
};

// A CMDP simulator. Instances are immutable; all randomness flows through
// the RngStream arguments, so a single instance can serve concurrent
// rollouts that own distinct streams.
class Environment {
 public:
  virtual ~Environment() = default;

  const CmdpSpec& spec() const { return spec_; }

  virtual VectorXd initial_state(RngStream& rng) const = 0;
  virtual StepResult step(const VectorXd& state, const VectorXd& action,
                          RngStream& rng) const = 0;

  // Tabular metadata; zero means "not a discrete environment".
  virtual int num_discrete_states() const { return 0; }
  virtual int num_discrete_actions() const { return 0; }
  virtual int state_index(const VectorXd& state) const;

 protected:
  explicit Environment(CmdpSpec spec);
  CmdpSpec spec_;
};

// One environment rollout. Immutable after construction.
struct Trajectory {
  MatrixXd states;   // T x state_dim
  MatrixXd actions;  // T x action_dim
  VectorXd rewards;  // T
  MatrixXd costs;    // T x U

  int length() const { return static_cast<int>(rewards.size()); }
};

// sum_t gamma^t r_t
double discounted_return(const Trajectory& traj, double gamma);

// Aggregated i-th cost, i in 1..U (index 0 is reserved for cost0).
double discounted_cost(const Trajectory& traj, int i, double gamma,
                       CostAggregation agg);

// C_0(tau) = -R(tau)
double cost0(const Trajectory& traj, double gamma);

// Dispatch: i = 0 -> cost0, i in 1..U -> discounted_cost.
double trajectory_cost(const Trajectory& traj, int i, double gamma,
                       CostAggregation agg);

using ActionSource = std::function<VectorXd(const VectorXd& state, int step)>;

// Runs the environment for exactly spec().horizon steps from a fresh
// initial state. The action source must return vectors of spec().action_dim.
Trajectory rollout(const Environment& env, const ActionSource& actions,
                   RngStream& rng);

}  // namespace cpg
