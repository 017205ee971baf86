#include "cpg/policies.hpp"

#include <cmath>
#include <stdexcept>

namespace cpg {

VectorXd flatten_row_major(const MatrixXd& m) {
  VectorXd v(m.size());
  int k = 0;
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) v[k++] = m(r, c);
  return v;
}

MatrixXd unflatten_row_major(const VectorXd& v, int rows, int cols) {
  if (v.size() != static_cast<long>(rows) * cols)
    throw std::invalid_argument("unflatten_row_major: size mismatch");
  MatrixXd m(rows, cols);
  int k = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = v[k++];
  return m;
}

VectorXd softmax_action_probs(const TabularSoftmaxPolicy& policy, int s) {
  if (s < 0 || s >= policy.theta.rows())
    throw std::out_of_range("softmax_action_probs: state index out of range");
  const VectorXd logits = policy.theta.row(s).transpose() / policy.temperature;
  const VectorXd shifted = (logits.array() - logits.maxCoeff()).exp();
  return shifted / shifted.sum();
}

MatrixXd softmax_score(const TabularSoftmaxPolicy& policy, int s, int a) {
  if (a < 0 || a >= policy.theta.cols())
    throw std::out_of_range("softmax_score: action index out of range");
  const VectorXd p = softmax_action_probs(policy, s);
  MatrixXd grad = MatrixXd::Zero(policy.theta.rows(), policy.theta.cols());
  for (int j = 0; j < p.size(); ++j)
    grad(s, j) = (((j == a) ? 1.0 : 0.0) - p[j]) / policy.temperature;
  return grad;
}

int softmax_sample(const TabularSoftmaxPolicy& policy, int s, RngStream& rng) {
  const VectorXd p = softmax_action_probs(policy, s);
  const double u = rng.uniform();
  double acc = 0.0;
  for (int j = 0; j < p.size(); ++j) {
    acc += p[j];
    if (u < acc) return j;
  }
  return static_cast<int>(p.size()) - 1;
}

LinearGaussianPolicy::LinearGaussianPolicy(MatrixXd theta, double sigma)
    : theta_(std::move(theta)), sigma_(sigma) {
  if (!(sigma > 0.0))
    throw std::invalid_argument(
        "LinearGaussianPolicy: sigma must be positive; use "
        "LinearDeterministicPolicy for the noiseless case");
}

VectorXd gaussian_policy_sample(const LinearGaussianPolicy& policy,
                                const VectorXd& state, RngStream& rng) {
  VectorXd a = policy.mean_action(state);
  for (int i = 0; i < a.size(); ++i) a[i] += policy.sigma() * rng.normal();
  return a;
}

MatrixXd gaussian_policy_score(const LinearGaussianPolicy& policy,
                               const VectorXd& state, const VectorXd& action) {
  const VectorXd residual =
      (action - policy.mean_action(state)) / (policy.sigma() * policy.sigma());
  return residual * state.transpose();
}

GaussianHyperpolicy::GaussianHyperpolicy(VectorXd rho, double sigma,
                                         int action_dim, int state_dim)
    : rho_(std::move(rho)),
      sigma_(sigma),
      action_dim_(action_dim),
      state_dim_(state_dim) {
  if (!(sigma > 0.0))
    throw std::invalid_argument("GaussianHyperpolicy: sigma must be positive");
  if (rho_.size() != static_cast<long>(action_dim) * state_dim)
    throw std::invalid_argument(
        "GaussianHyperpolicy: rho size must equal action_dim * state_dim");
}

VectorXd hyperpolicy_sample(const GaussianHyperpolicy& h, RngStream& rng) {
  VectorXd theta = h.rho();
  for (int i = 0; i < theta.size(); ++i) theta[i] += h.sigma() * rng.normal();
  return theta;
}

VectorXd hyperpolicy_score(const GaussianHyperpolicy& h, const VectorXd& theta) {
  if (theta.size() != h.rho().size())
    throw std::invalid_argument("hyperpolicy_score: theta dimension mismatch");
  return (theta - h.rho()) / (h.sigma() * h.sigma());
}

LinearDeterministicPolicy deploy_deterministic(const LinearGaussianPolicy& p) {
  return LinearDeterministicPolicy{p.theta()};
}

LinearDeterministicPolicy deploy_deterministic(const GaussianHyperpolicy& h) {
  return LinearDeterministicPolicy{
      unflatten_row_major(h.rho(), h.action_dim(), h.state_dim())};
}

}  // namespace cpg
