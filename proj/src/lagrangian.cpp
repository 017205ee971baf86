#include "cpg/lagrangian.hpp"

#include <cmath>
#include <stdexcept>

namespace cpg {

double lambda_radius(double omega, int num_constraints, double jmax) {
  if (!(omega > 0.0)) throw std::invalid_argument("lambda_radius: omega must be positive");
  if (num_constraints < 0) throw std::invalid_argument("lambda_radius: U must be >= 0");
  return std::sqrt(static_cast<double>(num_constraints)) * jmax / omega;
}

Multipliers project_lambda(const VectorXd& x, double radius) {
  if (!(radius >= 0.0)) throw std::invalid_argument("project_lambda: radius must be >= 0");
  Multipliers m;
  m.radius = radius;
  m.lambda = x.cwiseMax(0.0);
  const double norm = m.lambda.norm();
  if (norm > radius) m.lambda *= radius / norm;
  return m;
}

double lagrangian_value(const VectorXd& J, const VectorXd& lambda, double omega,
                        const VectorXd& b) {
  const int U = static_cast<int>(b.size());
  if (J.size() != U + 1) throw std::invalid_argument("lagrangian_value: J must have length U + 1");
  if (lambda.size() != U) throw std::invalid_argument("lagrangian_value: lambda/b size mismatch");
  return J[0] + lambda.dot(J.tail(U) - b) - 0.5 * omega * lambda.squaredNorm();
}

double primal_function_h(const VectorXd& J, double omega, const VectorXd& b) {
  if (!(omega > 0.0))
    throw std::invalid_argument("primal_function_h: omega must be positive");
  const int U = static_cast<int>(b.size());
  if (J.size() != U + 1) throw std::invalid_argument("primal_function_h: J must have length U + 1");
  const VectorXd surplus = (J.tail(U) - b).cwiseMax(0.0);
  return J[0] + surplus.squaredNorm() / (2.0 * omega);
}

Multipliers optimal_lambda(const VectorXd& J, double omega, const VectorXd& b,
                           double radius) {
  if (!(omega > 0.0))
    throw std::invalid_argument("optimal_lambda: omega must be positive");
  const int U = static_cast<int>(b.size());
  if (J.size() != U + 1) throw std::invalid_argument("optimal_lambda: J must have length U + 1");
  return project_lambda((J.tail(U) - b) / omega, radius);
}

GapBounds regularization_gap_bounds(double eps, double omega,
                                    double lambda0_norm) {
  if (eps < 0.0 || omega < 0.0 || lambda0_norm < 0.0)
    throw std::invalid_argument("regularization_gap_bounds: inputs must be >= 0");
  return {eps + 0.5 * omega * lambda0_norm * lambda0_norm,
          4.0 * eps + omega * lambda0_norm};
}

VectorXd conservative_thresholds(const VectorXd& b, double eps, double omega,
                                 double lambda0_norm) {
  if (eps < 0.0 || omega < 0.0 || lambda0_norm < 0.0)
    throw std::invalid_argument("conservative_thresholds: inputs must be >= 0");
  return (b.array() - 4.0 * eps - omega * lambda0_norm).cwiseMax(0.0);
}

}  // namespace cpg
