// Ridge-regularized Lagrangian machinery: the multiplier feasible set and
// its exact Euclidean projection, the Lagrangian value, the closed-form
// primal function and optimal multipliers, and the reporting utilities that
// translate an epsilon-accurate solution into objective-gap / violation
// bounds and conservative thresholds.

#pragma once

#include <Eigen/Core>
#include <utility>

namespace cpg {

using Eigen::VectorXd;

// Lagrange multipliers constrained to
//   Lambda = { l >= 0 : ||l||_2 <= radius }.
struct Multipliers {
  VectorXd lambda;
  double radius = 0.0;
};

// Feasible-set radius omega^{-1} sqrt(U) J_max. The radius is chosen so the
// optimal multipliers of the regularized problem always fit inside.
double lambda_radius(double omega, int num_constraints, double jmax);

// Exact Euclidean projection onto Lambda: clip at zero componentwise, then
// rescale onto the ball if needed. Clipping first is exact for this set
// because rescaling preserves nonnegativity.
Multipliers project_lambda(const VectorXd& x, double radius);

// L_omega(J, lambda) = J_0 + <lambda, J_{1..U} - b> - (omega/2) ||lambda||^2.
// J has length U + 1 with the objective in slot 0.
double lagrangian_value(const VectorXd& J, const VectorXd& lambda, double omega,
                        const VectorXd& b);

// max over Lambda of L_omega, in closed form:
// J_0 + (1 / 2 omega) ||(J_{1..U} - b)^+||^2. Requires omega > 0.
double primal_function_h(const VectorXd& J, double omega, const VectorXd& b);

// Argmax of L_omega over Lambda: (1/omega) (J_{1..U} - b)^+, projected
// (a no-op by construction of the radius). Requires omega > 0.
Multipliers optimal_lambda(const VectorXd& J, double omega, const VectorXd& b,
                           double radius);

struct GapBounds {
  double objective_gap;        // eps + (omega/2) ||lambda*_0||^2
  double constraint_violation; // 4 eps + omega ||lambda*_0||
};

// Reporting utility: bounds on the objective gap and constraint violation of
// an eps-accurate iterate under omega-regularization, given a user-supplied
// estimate of the unregularized optimal multiplier norm.
GapBounds regularization_gap_bounds(double eps, double omega,
                                    double lambda0_norm);

// b'_i = max(0, b_i - 4 eps - omega lambda0_norm): thresholds tightened so
// that an eps-accurate iterate of the regularized problem satisfies the
// original constraints.
VectorXd conservative_thresholds(const VectorXd& b, double eps, double omega,
                                 double lambda0_norm);

}  // namespace cpg
