// Policy and hyperpolicy families: tabular softmax, linear Gaussian (white
// noise on actions), linear deterministic, and a Gaussian hyperpolicy (white
// noise on parameters), together with the score functions the gradient
// estimators need.

#pragma once

#include <Eigen/Core>

#include "cpg/rng.hpp"

namespace cpg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Row-major flattening shared by all linear parameterizations: parameter
// index a * d_S + s for the (a, s) entry of a d_A x d_S matrix. Deterministic
// deployment of a hyperpolicy mean is then a pure relabeling.
VectorXd flatten_row_major(const MatrixXd& m);
MatrixXd unflatten_row_major(const VectorXd& v, int rows, int cols);

// pi(a_j | s_i) proportional to exp(theta(i, j) / temperature).
struct TabularSoftmaxPolicy {
  MatrixXd theta;  // |S| x |A|
  double temperature = 1.0;
};

// Action probabilities at state s, computed with max-subtraction so large
// theta / temperature ratios cannot overflow.
VectorXd softmax_action_probs(const TabularSoftmaxPolicy& policy, int s);

// d log pi(a|s) / d theta: (1[j = a] - p_j) / temperature on row s, zero
// elsewhere. Same shape as theta.
MatrixXd softmax_score(const TabularSoftmaxPolicy& policy, int s, int a);

int softmax_sample(const TabularSoftmaxPolicy& policy, int s, RngStream& rng);

// a = theta * s + eps with eps ~ N(0, sigma^2 I), drawn fresh at every step.
class LinearGaussianPolicy {
 public:
  LinearGaussianPolicy(MatrixXd theta, double sigma);

  const MatrixXd& theta() const { return theta_; }
  double sigma() const { return sigma_; }
  VectorXd mean_action(const VectorXd& state) const { return theta_ * state; }

 private:
  MatrixXd theta_;  // d_A x d_S
  double sigma_;    // > 0; the sigma = 0 limit is LinearDeterministicPolicy
};

VectorXd gaussian_policy_sample(const LinearGaussianPolicy& policy,
                                const VectorXd& state, RngStream& rng);

// d log N(a; theta s, sigma^2 I) / d theta = ((a - theta s) / sigma^2) s^T.
MatrixXd gaussian_policy_score(const LinearGaussianPolicy& policy,
                               const VectorXd& state, const VectorXd& action);

struct LinearDeterministicPolicy {
  MatrixXd theta;  // d_A x d_S
  VectorXd act(const VectorXd& state) const { return theta * state; }
};

// theta = rho + eps with eps ~ N(0, sigma^2 I), drawn once per trajectory.
// action_dim/state_dim describe the layout of the underlying linear policy
// so the mean can be deployed deterministically.
class GaussianHyperpolicy {
 public:
  GaussianHyperpolicy(VectorXd rho, double sigma, int action_dim,
                      int state_dim);

  const VectorXd& rho() const { return rho_; }
  double sigma() const { return sigma_; }
  int action_dim() const { return action_dim_; }
  int state_dim() const { return state_dim_; }

  GaussianHyperpolicy with_rho(VectorXd rho) const {
    return GaussianHyperpolicy(std::move(rho), sigma_, action_dim_, state_dim_);
  }

 private:
  VectorXd rho_;  // d_Theta = d_A * d_S
  double sigma_;
  int action_dim_, state_dim_;
};

VectorXd hyperpolicy_sample(const GaussianHyperpolicy& h, RngStream& rng);

// d log nu(theta) / d rho = (theta - rho) / sigma^2.
VectorXd hyperpolicy_score(const GaussianHyperpolicy& h, const VectorXd& theta);

// Switches the stochasticity off: the Gaussian policy keeps its theta, the
// hyperpolicy deploys its mean reshaped into the linear policy's layout.
LinearDeterministicPolicy deploy_deterministic(const LinearGaussianPolicy& p);
LinearDeterministicPolicy deploy_deterministic(const GaussianHyperpolicy& h);

}  // namespace cpg
