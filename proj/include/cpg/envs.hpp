// Benchmark environments: a discrete grid world with a walled goal, a linear
// quadratic regulator with an action-energy cost, a four-dimensional robot
// navigation task, and a wrapper that charges for out-of-bounds actions.

#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "cpg/cmdp.hpp"

namespace cpg {

// Discrete grid world with walls. States are integer (x, y) pairs; four
// actions (0 up, 1 right, 2 left, 3 down), moves off the grid clamp to the
// border. The goal is the grid center (reward 0 there, elsewhere negative
// and proportional to the Euclidean distance from the center, scaled to
// [-1, 0]). Landing on a wall cell costs 1. Initial state is uniform over
// the four grid corners. Default walls form a U around the center, one ring
// out, open at the top.
struct DgwwConfig {
  int side_length = 7;  // odd, >= 5
  int horizon = 100;
  double gamma = 1.0;
  double threshold = 0.2;
  CostAggregation aggregation = CostAggregation::kPerStepMean;
  // Empty means "use the default U-shape"; cells are (x, y).
  std::vector<std::pair<int, int>> wall_cells;
};

std::unique_ptr<Environment> make_dgww(const DgwwConfig& cfg);

// Default DGWW wall layout for a given side length.
std::vector<std::pair<int, int>> default_dgww_walls(int side_length);

// LQR with the quadratic action penalty moved into a cost channel:
// dynamics s' = A s + B a, reward -s^T R s, cost a^T Q a. Initial state is
// uniform per component in [init_lo, init_hi]. Defaults are the
// two-dimensional instance used by the experiment presets.
struct LqrConfig {
  MatrixXd A = 0.9 * MatrixXd::Identity(2, 2);
  MatrixXd B = 0.9 * MatrixXd::Identity(2, 2);
  MatrixXd Q = (Eigen::Vector2d() << 0.9, 0.1).finished().asDiagonal();  // cost
  MatrixXd R = (Eigen::Vector2d() << 0.1, 0.9).finished().asDiagonal();  // reward penalty
  double init_lo = -3.0;
  double init_hi = 3.0;
  int horizon = 50;
  double gamma = 1.0;
  double threshold = 0.9;
  CostAggregation aggregation = CostAggregation::kCumulativeDiscounted;
};

std::unique_ptr<Environment> make_cost_lqr(const LqrConfig& cfg);

// Robot navigation with position-and-velocity state s = (x, y, vx, vy) and
// acceleration commands a = (ax, ay):
//   reward r(s, a) = <G1, |s|> + <R1, |a|> - 0.5 ||a||^2
//   cost   c(s, a) = <G2, s^2> + <R2, a^2>
// with componentwise |.| and (.)^2. Dynamics default to a unit-step double
// integrator (x' = x + vx, v' = v + a) and can be overridden.
struct RobotWorldConfig {
  Eigen::Vector4d G1{-1.0, -1.0, -0.001, -0.001};
  Eigen::Vector4d G2{-0.001, -0.001, -1.0, -1.0};
  Eigen::Vector2d R1{-0.01, -0.01};
  Eigen::Vector2d R2{-0.01, -0.01};
  MatrixXd A;  // 4x4; empty -> double integrator
  MatrixXd B;  // 4x2; empty -> double integrator
  double init_lo = -3.0;
  double init_hi = 3.0;
  int horizon = 100;
  double gamma = 1.0;
  double threshold = 1000.0;
  CostAggregation aggregation = CostAggregation::kCumulativeDiscounted;
};

std::unique_ptr<Environment> make_robot_world(const RobotWorldConfig& cfg);

// Wraps an environment so that each step appends one cost component
// ||a - clip(a, a_min, a_max)||_2 and forwards the clipped action to the
// inner environment. `threshold` becomes the appended constraint's b.
std::unique_ptr<Environment> energy_cost_wrapper(
    std::shared_ptr<const Environment> inner, double a_min, double a_max,
    double threshold);

}  // namespace cpg
