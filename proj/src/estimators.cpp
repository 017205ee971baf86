#include "cpg/estimators.hpp"

#include <stdexcept>

namespace cpg {

namespace {

// Per-step weight of cost index i at step t. The objective channel (i = 0)
// is always the discounted -r; constraint channels follow the batch's
// aggregation mode.
double step_cost_weight(const Trajectory& traj, int i, int t, double gamma_pow_t,
                        CostAggregation agg) {
  if (i == 0) return gamma_pow_t * (-traj.rewards[t]);
  const double c = traj.costs(t, i - 1);
  if (agg == CostAggregation::kPerStepMean)
    return c / static_cast<double>(traj.length());
  return gamma_pow_t * c;
}

// One pass over the batch computing GPOMDP per-sample rows for all cost
// indices 0..U at once; the cumulative score is shared across indices.
std::vector<MatrixXd> gpomdp_rows_all(const Batch& batch, const ScoreFn& score,
                                      int param_dim, double gamma) {
  const int N = batch.size();
  const int U = static_cast<int>(batch.trajectories.front().costs.cols());
  std::vector<MatrixXd> rows(U + 1, MatrixXd::Zero(N, param_dim));

  VectorXd cum_score(param_dim);
  for (int j = 0; j < N; ++j) {
    const Trajectory& traj = batch.trajectories[j];
    cum_score.setZero();
    double gamma_pow_t = 1.0;
    for (int t = 0; t < traj.length(); ++t) {
      cum_score += score(traj.states.row(t).transpose(),
                         traj.actions.row(t).transpose());
      for (int i = 0; i <= U; ++i) {
        const double w =
            step_cost_weight(traj, i, t, gamma_pow_t, batch.aggregation);
        if (w != 0.0) rows[i].row(j) += w * cum_score.transpose();
      }
      gamma_pow_t *= gamma;
    }
  }
  return rows;
}

std::vector<MatrixXd> pgpe_rows_all(const Batch& batch,
                                    const GaussianHyperpolicy& h,
                                    double gamma) {
  const int N = batch.size();
  const int U = static_cast<int>(batch.trajectories.front().costs.cols());
  const int dim = static_cast<int>(h.rho().size());
  std::vector<MatrixXd> rows(U + 1, MatrixXd::Zero(N, dim));
  for (int j = 0; j < N; ++j) {
    const VectorXd s = hyperpolicy_score(h, batch.sampled_params[j]);
    for (int i = 0; i <= U; ++i) {
      const double c =
          trajectory_cost(batch.trajectories[j], i, gamma, batch.aggregation);
      rows[i].row(j) = c * s.transpose();
    }
  }
  return rows;
}

GradientEstimate from_rows(MatrixXd rows) {
  GradientEstimate est;
  est.value = rows.colwise().mean().transpose();
  est.per_sample = std::move(rows);
  return est;
}

MatrixXd combine_rows(const std::vector<MatrixXd>& rows, const VectorXd& lambda) {
  const int U = static_cast<int>(rows.size()) - 1;
  if (lambda.size() != U)
    throw std::invalid_argument("lambda dimension mismatch");
  MatrixXd combined = rows[0];
  for (int u = 1; u <= U; ++u) combined += lambda[u - 1] * rows[u];
  return combined;
}

void require_mode(const Batch& batch, ExplorationMode mode, const char* what) {
  if (batch.mode != mode)
    throw std::invalid_argument(std::string(what) +
                                ": batch has the wrong exploration mode");
}

}  // namespace

void validate_batch(const Batch& batch) {
  if (batch.trajectories.empty()) throw std::invalid_argument("empty batch");
  if (batch.mode == ExplorationMode::kParameterBased &&
      batch.sampled_params.size() != batch.trajectories.size())
    throw std::invalid_argument(
        "parameter-based batch needs one sampled parameter vector per trajectory");
}

double estimate_J(const Batch& batch, int i, double gamma) {
  validate_batch(batch);
  double sum = 0.0;
  for (const Trajectory& traj : batch.trajectories)
    sum += trajectory_cost(traj, i, gamma, batch.aggregation);
  return sum / batch.size();
}

GradientEstimate gpomdp_grad(const Batch& batch, const ScoreFn& score,
                             int param_dim, int i, double gamma) {
  validate_batch(batch);
  require_mode(batch, ExplorationMode::kActionBased, "gpomdp_grad");
  auto rows = gpomdp_rows_all(batch, score, param_dim, gamma);
  if (i < 0 || i >= static_cast<int>(rows.size()))
    throw std::out_of_range("gpomdp_grad: cost index out of range");
  return from_rows(std::move(rows[i]));
}

GradientEstimate pgpe_grad(const Batch& batch, const GaussianHyperpolicy& h,
                           int i, double gamma) {
  validate_batch(batch);
  require_mode(batch, ExplorationMode::kParameterBased, "pgpe_grad");
  auto rows = pgpe_rows_all(batch, h, gamma);
  if (i < 0 || i >= static_cast<int>(rows.size()))
    throw std::out_of_range("pgpe_grad: cost index out of range");
  return from_rows(std::move(rows[i]));
}

GradientEstimate primal_lagrangian_grad(const Batch& batch, const ScoreFn& score,
                                        int param_dim, const VectorXd& lambda,
                                        double gamma) {
  validate_batch(batch);
  require_mode(batch, ExplorationMode::kActionBased, "primal_lagrangian_grad");
  return from_rows(
      combine_rows(gpomdp_rows_all(batch, score, param_dim, gamma), lambda));
}

GradientEstimate primal_lagrangian_grad(const Batch& batch,
                                        const GaussianHyperpolicy& h,
                                        const VectorXd& lambda, double gamma) {
  validate_batch(batch);
  require_mode(batch, ExplorationMode::kParameterBased, "primal_lagrangian_grad");
  return from_rows(combine_rows(pgpe_rows_all(batch, h, gamma), lambda));
}

GradientEstimate dual_lagrangian_grad(const Batch& batch, const VectorXd& b,
                                      double omega, const VectorXd& lambda,
                                      double gamma) {
  validate_batch(batch);
  const int U = static_cast<int>(b.size());
  if (lambda.size() != U)
    throw std::invalid_argument("dual_lagrangian_grad: lambda/b size mismatch");
  MatrixXd rows(batch.size(), U);
  for (int j = 0; j < batch.size(); ++j)
    for (int i = 1; i <= U; ++i)
      rows(j, i - 1) =
          trajectory_cost(batch.trajectories[j], i, gamma, batch.aggregation) -
          b[i - 1] - omega * lambda[i - 1];
  return from_rows(std::move(rows));
}

double estimator_variance(const GradientEstimate& est) {
  const int n = est.batch_size();
  if (n < 2) throw std::invalid_argument("estimator_variance: need at least 2 samples");
  const Eigen::RowVectorXd mean = est.per_sample.colwise().mean();
  const MatrixXd centered = est.per_sample.rowwise() - mean;
  return centered.squaredNorm() / (n - 1);
}

}  // namespace cpg
