// Sample-based gradient estimators of the regularized Lagrangian for both
// exploration paradigms, plus plain performance estimates. Every estimator
// keeps its per-sample contributions so variance diagnostics and bit-exact
// affine recombination stay possible.

#pragma once

#include <functional>
#include <vector>

#include "cpg/cmdp.hpp"
#include "cpg/policies.hpp"

namespace cpg {

enum class ExplorationMode { kActionBased, kParameterBased };

struct Batch {
  std::vector<Trajectory> trajectories;
  // Parameter-based mode: the parameter vector each trajectory was run with.
  std::vector<VectorXd> sampled_params;
  ExplorationMode mode = ExplorationMode::kActionBased;
  CostAggregation aggregation = CostAggregation::kCumulativeDiscounted;

  int size() const { return static_cast<int>(trajectories.size()); }
};

// Throws if the batch is empty or the mode-specific bookkeeping is broken.
void validate_batch(const Batch& batch);

struct GradientEstimate {
  VectorXd value;       // columnwise mean of per_sample
  MatrixXd per_sample;  // N x dim

  int batch_size() const { return static_cast<int>(per_sample.rows()); }
};

// Mean of C_i over the batch; i = 0 is the objective cost C_0 = -R.
double estimate_J(const Batch& batch, int i, double gamma);

// Score of the stochastic policy at one (state, action) pair, flattened to
// the parameter layout.
using ScoreFn = std::function<VectorXd(const VectorXd& state, const VectorXd& action)>;

// GPOMDP-style estimator of grad J_i: each step's cost is weighted by the
// cumulative score up to that step. Under per-step-mean aggregation the
// inner weight gamma^t c_t becomes c_t / T for i >= 1 so the estimator stays
// unbiased for the aggregated J; the objective channel i = 0 always uses
// gamma^t (-r_t).
GradientEstimate gpomdp_grad(const Batch& batch, const ScoreFn& score,
                             int param_dim, int i, double gamma);

// PGPE-style estimator: (1/N) sum_j grad log nu(theta_j) C_i(tau_j).
GradientEstimate pgpe_grad(const Batch& batch, const GaussianHyperpolicy& h,
                           int i, double gamma);

// grad of the regularized Lagrangian w.r.t. the primal variable:
// grad J_0 + sum_u lambda_u grad J_u, every index estimated from the same
// batch (no re-sampling).
GradientEstimate primal_lagrangian_grad(const Batch& batch, const ScoreFn& score,
                                        int param_dim, const VectorXd& lambda,
                                        double gamma);
GradientEstimate primal_lagrangian_grad(const Batch& batch,
                                        const GaussianHyperpolicy& h,
                                        const VectorXd& lambda, double gamma);

// Dual gradient, component i: mean_j C_i(tau_j) - b_i - omega lambda_i.
GradientEstimate dual_lagrangian_grad(const Batch& batch, const VectorXd& b,
                                      double omega, const VectorXd& lambda,
                                      double gamma);

// Trace of the unbiased sample covariance of the per-sample rows. Divide by
// the batch size to estimate the variance of the mean estimator itself.
double estimator_variance(const GradientEstimate& est);

}  // namespace cpg
