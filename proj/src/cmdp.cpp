#include "cpg/cmdp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cpg {

void validate_spec(const CmdpSpec& spec) {
  if (spec.state_dim < 1) throw std::invalid_argument("state_dim must be positive");
  if (spec.action_dim < 1) throw std::invalid_argument("action_dim must be positive");
  if (spec.num_constraints < 0) throw std::invalid_argument("num_constraints must be non-negative");
  if (spec.thresholds.size() != spec.num_constraints)
    throw std::invalid_argument("thresholds length must equal num_constraints");
  if (spec.gamma < 0.0 || spec.gamma > 1.0)
    throw std::invalid_argument("gamma must lie in [0, 1]");
  if (spec.horizon < 1)
    throw std::invalid_argument(spec.gamma == 1.0 ? "unbounded horizon"
                                                  : "horizon must be positive");
  const double jm = j_max_aggregated(spec.gamma, spec.horizon, spec.cost_aggregation);
  for (int i = 0; i < spec.thresholds.size(); ++i) {
    const double b = spec.thresholds[i];
    if (spec.unit_cost_range && (!(b >= 0.0) || !(b <= jm)))
      throw std::invalid_argument("threshold b[" + std::to_string(i) +
                                  "] outside [0, J_max]");
    if (!std::isfinite(b)) throw std::invalid_argument("threshold must be finite");
  }
}

double j_max(double gamma, long horizon) {
  if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("gamma must lie in [0, 1]");
  if (horizon < 1)
    throw std::invalid_argument(gamma == 1.0 ? "unbounded horizon"
                                             : "horizon must be positive");
  if (gamma == 1.0) return static_cast<double>(horizon);
  return (1.0 - std::pow(gamma, static_cast<double>(horizon))) / (1.0 - gamma);
}

double j_max_aggregated(double gamma, long horizon, CostAggregation agg) {
  if (agg == CostAggregation::kPerStepMean) {
    if (horizon < 1) throw std::invalid_argument("horizon must be positive");
    return 1.0;
  }
  return j_max(gamma, horizon);
}

Environment::Environment(CmdpSpec spec) : spec_(std::move(spec)) {
  validate_spec(spec_);
}

int Environment::state_index(const VectorXd&) const {
  throw std::logic_error("state_index: not a discrete environment");
}

double discounted_return(const Trajectory& traj, double gamma) {
  double sum = 0.0;
  double g = 1.0;
  for (int t = 0; t < traj.length(); ++t) {
    sum += g * traj.rewards[t];
    g *= gamma;
  }
  return sum;
}

double discounted_cost(const Trajectory& traj, int i, double gamma,
                       CostAggregation agg) {
  if (i < 1 || i > traj.costs.cols())
    throw std::out_of_range("constraint index out of range");
  const int col = i - 1;
  double sum = 0.0;
  if (agg == CostAggregation::kPerStepMean) {
    for (int t = 0; t < traj.length(); ++t) sum += traj.costs(t, col);
    return sum / static_cast<double>(traj.length());
  }
  double g = 1.0;
  for (int t = 0; t < traj.length(); ++t) {
    sum += g * traj.costs(t, col);
    g *= gamma;
  }
  return sum;
}

double cost0(const Trajectory& traj, double gamma) {
  return -discounted_return(traj, gamma);
}

double trajectory_cost(const Trajectory& traj, int i, double gamma,
                       CostAggregation agg) {
  if (i == 0) return cost0(traj, gamma);
  return discounted_cost(traj, i, gamma, agg);
}

Trajectory rollout(const Environment& env, const ActionSource& actions,
                   RngStream& rng) {
  const CmdpSpec& spec = env.spec();
  const int T = spec.horizon;
  const int U = spec.num_constraints;

  Trajectory traj;
  traj.states.resize(T, spec.state_dim);
  traj.actions.resize(T, spec.action_dim);
  traj.rewards.resize(T);
  traj.costs.resize(T, U);

  VectorXd state = env.initial_state(rng);
  for (int t = 0; t < T; ++t) {
    VectorXd action = actions(state, t);
    if (action.size() != spec.action_dim)
      throw std::invalid_argument("action dimension mismatch");
    StepResult res = env.step(state, action, rng);
    traj.states.row(t) = state.transpose();
    traj.actions.row(t) = action.transpose();
    traj.rewards[t] = res.reward;
    if (res.costs.size() != U)
      throw std::logic_error("environment returned cost vector of wrong length");
    traj.costs.row(t) = res.costs.transpose();
    state = std::move(res.next_state);
  }
  return traj;
}

}  // namespace cpg
