#include "cpg/optimizer.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

namespace cpg {

VectorXd schedule_step(const StepSchedule& schedule, ScheduleState& state,
                       const VectorXd& grad) {
  if (!grad.allFinite()) throw std::runtime_error("non-finite gradient");
  if (schedule.kind == StepSchedule::Kind::kConstant) return schedule.rate * grad;

  if (state.m.size() != grad.size()) {
    state.m = VectorXd::Zero(grad.size());
    state.v = VectorXd::Zero(grad.size());
    state.step_count = 0;
  }
  state.step_count += 1;
  state.m = schedule.beta1 * state.m + (1.0 - schedule.beta1) * grad;
  state.v = schedule.beta2 * state.v + (1.0 - schedule.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(schedule.beta1, static_cast<double>(state.step_count));
  const double c2 = 1.0 - std::pow(schedule.beta2, static_cast<double>(state.step_count));
  const VectorXd m_hat = state.m / c1;
  const VectorXd v_hat = state.v / c2;
  return schedule.rate *
         m_hat.cwiseQuotient(v_hat.cwiseSqrt().array().matrix() +
                             VectorXd::Constant(grad.size(), schedule.eps));
}

VectorXd primal_update(const VectorXd& params, const VectorXd& grad,
                       const StepSchedule& schedule, ScheduleState& state,
                       const std::optional<std::pair<double, double>>& box) {
  VectorXd next = params - schedule_step(schedule, state, grad);
  if (box) next = next.cwiseMax(box->first).cwiseMin(box->second);
  return next;
}

Multipliers dual_update(const Multipliers& multipliers, const VectorXd& grad,
                        const StepSchedule& schedule, ScheduleState& state) {
  return project_lambda(
      multipliers.lambda + schedule_step(schedule, state, grad),
      multipliers.radius);
}

namespace {

VectorXd one_component(double x) { return VectorXd::Constant(1, x); }

// Greedy (zero-temperature) deployment of a tabular softmax policy; ties
// break toward the lowest action index.
int argmax_action(const MatrixXd& theta, int s) {
  int best = 0;
  for (int j = 1; j < theta.cols(); ++j)
    if (theta(s, j) > theta(s, best)) best = j;
  return best;
}

struct Runner {
  const Environment& env;
  const RunConfig& cfg;
  int U;
  int param_dim = 0;
  int num_states = 0, num_actions = 0;  // tabular
  int d_a = 0, d_s = 0;                 // linear

  Runner(const Environment& e, const RunConfig& c) : env(e), cfg(c) {
    const CmdpSpec& spec = env.spec();
    U = spec.num_constraints;
    if (cfg.iterations < 1 || cfg.batch_size < 1 || cfg.eval_interval < 1)
      throw std::invalid_argument("run_cpg: iterations, batch_size and eval_interval must be positive");
    if (cfg.omega < 0.0) throw std::invalid_argument("run_cpg: omega must be >= 0");
    if (cfg.omega == 0.0 && !(cfg.lambda_cap > 0.0))
      throw std::invalid_argument("run_cpg: omega = 0 requires a positive lambda_cap");

    if (cfg.family == PolicyFamily::kTabularSoftmax) {
      if (cfg.mode != ExplorationMode::kActionBased)
        throw std::invalid_argument("run_cpg: tabular softmax requires action-based exploration");
      num_states = env.num_discrete_states();
      num_actions = env.num_discrete_actions();
      if (num_states <= 0 || num_actions <= 0)
        throw std::invalid_argument("run_cpg: tabular softmax needs a discrete environment");
      if (!(cfg.temperature > 0.0))
        throw std::invalid_argument("run_cpg: temperature must be positive");
      param_dim = num_states * num_actions;
    } else {
      if (env.num_discrete_actions() != 0)
        throw std::invalid_argument("run_cpg: linear policies need a continuous environment");
      if (!(cfg.sigma > 0.0))
        throw std::invalid_argument("run_cpg: sigma must be positive");
      d_a = spec.action_dim;
      d_s = spec.state_dim;
      param_dim = d_a * d_s;
    }
  }

  RngStream stream(int k, int phase, int j) const {
    return RngStream(derive_seed({cfg.seed, static_cast<std::uint64_t>(k),
                                  static_cast<std::uint64_t>(phase),
                                  static_cast<std::uint64_t>(j)}));
  }

  Batch collect(const VectorXd& params, int k, int phase) const {
    Batch batch;
    batch.aggregation = env.spec().cost_aggregation;
    batch.trajectories.reserve(cfg.batch_size);

    if (cfg.mode == ExplorationMode::kActionBased) {
      batch.mode = ExplorationMode::kActionBased;
      if (cfg.family == PolicyFamily::kTabularSoftmax) {
        const TabularSoftmaxPolicy policy{
            unflatten_row_major(params, num_states, num_actions), cfg.temperature};
        for (int j = 0; j < cfg.batch_size; ++j) {
          RngStream rng = stream(k, phase, j);
          batch.trajectories.push_back(rollout(
              env,
              [&](const VectorXd& s, int) {
                return one_component(
                    softmax_sample(policy, env.state_index(s), rng));
              },
              rng));
        }
      } else {
        const LinearGaussianPolicy policy(unflatten_row_major(params, d_a, d_s),
                                          cfg.sigma);
        for (int j = 0; j < cfg.batch_size; ++j) {
          RngStream rng = stream(k, phase, j);
          batch.trajectories.push_back(rollout(
              env,
              [&](const VectorXd& s, int) {
                return gaussian_policy_sample(policy, s, rng);
              },
              rng));
        }
      }
    } else {
      batch.mode = ExplorationMode::kParameterBased;
      const GaussianHyperpolicy h(params, cfg.sigma, d_a, d_s);
      batch.sampled_params.reserve(cfg.batch_size);
      for (int j = 0; j < cfg.batch_size; ++j) {
        RngStream rng = stream(k, phase, j);
        const VectorXd theta = hyperpolicy_sample(h, rng);
        const LinearDeterministicPolicy policy{
            unflatten_row_major(theta, d_a, d_s)};
        batch.sampled_params.push_back(theta);
        batch.trajectories.push_back(rollout(
            env, [&](const VectorXd& s, int) { return policy.act(s); }, rng));
      }
    }
    return batch;
  }

  GradientEstimate primal_grad(const Batch& batch, const VectorXd& params,
                               const VectorXd& lambda) const {
    const double gamma = env.spec().gamma;
    if (cfg.mode == ExplorationMode::kParameterBased) {
      const GaussianHyperpolicy h(params, cfg.sigma, d_a, d_s);
      return primal_lagrangian_grad(batch, h, lambda, gamma);
    }
    if (cfg.family == PolicyFamily::kTabularSoftmax) {
      const TabularSoftmaxPolicy policy{
          unflatten_row_major(params, num_states, num_actions), cfg.temperature};
      const ScoreFn score = [&](const VectorXd& s, const VectorXd& a) {
        return flatten_row_major(softmax_score(policy, env.state_index(s),
                                               static_cast<int>(a[0])));
      };
      return primal_lagrangian_grad(batch, score, param_dim, lambda, gamma);
    }
    const LinearGaussianPolicy policy(unflatten_row_major(params, d_a, d_s),
                                      cfg.sigma);
    const ScoreFn score = [&](const VectorXd& s, const VectorXd& a) {
      return flatten_row_major(gaussian_policy_score(policy, s, a));
    };
    return primal_lagrangian_grad(batch, score, param_dim, lambda, gamma);
  }

  // Deterministic deployment of the current primal iterate: the tabular
  // family plays the greedy action, the linear families play theta * s.
  VectorXd eval_deterministic(const VectorXd& params, int k, int rollouts) const {
    const double gamma = env.spec().gamma;
    const CostAggregation agg = env.spec().cost_aggregation;
    VectorXd sums = VectorXd::Zero(U + 1);
    for (int j = 0; j < rollouts; ++j) {
      RngStream rng = stream(k, 2, j);
      Trajectory traj;
      if (cfg.family == PolicyFamily::kTabularSoftmax) {
        const MatrixXd theta = unflatten_row_major(params, num_states, num_actions);
        traj = rollout(
            env,
            [&](const VectorXd& s, int) {
              return one_component(argmax_action(theta, env.state_index(s)));
            },
            rng);
      } else {
        const LinearDeterministicPolicy policy{
            unflatten_row_major(params, d_a, d_s)};
        traj = rollout(
            env, [&](const VectorXd& s, int) { return policy.act(s); }, rng);
      }
      for (int i = 0; i <= U; ++i)
        sums[i] += trajectory_cost(traj, i, gamma, agg);
    }
    return sums / rollouts;
  }
};

}  // namespace

RunRecord run_cpg(const Environment& env, const RunConfig& cfg) {
  Runner runner(env, cfg);
  const CmdpSpec& spec = env.spec();
  const int U = spec.num_constraints;
  const double gamma = spec.gamma;
  const VectorXd& b = spec.thresholds;
  const double jmax_agg =
      j_max_aggregated(gamma, spec.horizon, spec.cost_aggregation);
  const double radius = cfg.omega > 0.0
                            ? lambda_radius(cfg.omega, U, jmax_agg)
                            : cfg.lambda_cap;
  const int eval_rollouts =
      cfg.eval_rollouts > 0 ? cfg.eval_rollouts : cfg.batch_size;
  const double dual_var_bound =
      U * jmax_agg * jmax_agg / static_cast<double>(cfg.batch_size);

  RunRecord record;
  record.seed = cfg.seed;
  record.iterations.reserve(cfg.iterations);

  VectorXd params = VectorXd::Constant(runner.param_dim, cfg.param_init);
  Multipliers lam{VectorXd::Zero(U), radius};
  ScheduleState primal_state, dual_state;
  std::deque<VectorXd> trailing;

  long rollouts = 0;
  long eval_count = 0;

  for (int k = 0; k < cfg.iterations; ++k) {
    // Batch under the current (hyper)policy; primal descent.
    const Batch primal_batch = runner.collect(params, k, 0);
    rollouts += cfg.batch_size;

    VectorXd j_hat(U + 1);
    for (int i = 0; i <= U; ++i) j_hat[i] = estimate_J(primal_batch, i, gamma);
    const double lagr = lagrangian_value(j_hat, lam.lambda, cfg.omega, b);

    const GradientEstimate g_primal = runner.primal_grad(primal_batch, params, lam.lambda);
    if (!j_hat.allFinite() || !g_primal.value.allFinite()) {
      record.status = "nan_abort";
      record.abort_iteration = k;
      break;
    }
    const VectorXd prev_params = params;
    params = primal_update(params, g_primal.value, cfg.primal_schedule,
                           primal_state, cfg.primal_box);
    if (!params.allFinite()) {
      record.status = "nan_abort";
      record.abort_iteration = k;
      break;
    }

    // Fresh batch under the updated primal variable; dual ascent.
    const Batch dual_batch = runner.collect(params, k, 1);
    rollouts += cfg.batch_size;
    const GradientEstimate g_dual =
        dual_lagrangian_grad(dual_batch, b, cfg.omega, lam.lambda, gamma);
    if (!g_dual.value.allFinite()) {
      record.status = "nan_abort";
      record.abort_iteration = k;
      break;
    }
    const VectorXd prev_lambda = lam.lambda;
    lam = dual_update(lam, g_dual.value, cfg.dual_schedule, dual_state);

    IterationLog log;
    log.k = k;
    log.j_hat = j_hat;
    log.lambda = lam.lambda;
    log.lagrangian = lagr;
    log.primal_step_norm = (params - prev_params).norm();
    log.dual_step_norm = (lam.lambda - prev_lambda).norm();
    log.rollouts = rollouts;
    log.dual_variance = cfg.batch_size >= 2
                            ? estimator_variance(g_dual) / cfg.batch_size
                            : 0.0;
    log.dual_variance_bound = dual_var_bound;
    record.iterations.push_back(std::move(log));

    trailing.push_back(params);
    if (static_cast<int>(trailing.size()) > cfg.avg_window) trailing.pop_front();

    if ((k + 1) % cfg.eval_interval == 0 || k == cfg.iterations - 1) {
      EvalLog ev;
      ev.k = k;
      ev.j_det = runner.eval_deterministic(params, k, eval_rollouts);
      record.evals.push_back(std::move(ev));
      eval_count += eval_rollouts;
    }
  }

  record.final_params = params;
  if (cfg.family == PolicyFamily::kTabularSoftmax) {
    record.param_rows = runner.num_states;
    record.param_cols = runner.num_actions;
  } else {
    record.param_rows = runner.d_a;
    record.param_cols = runner.d_s;
  }
  if (!trailing.empty()) {
    VectorXd avg = VectorXd::Zero(runner.param_dim);
    for (const VectorXd& p : trailing) avg += p;
    record.avg_params = avg / static_cast<double>(trailing.size());
  } else {
    record.avg_params = params;
  }
  record.total_rollouts = rollouts;
  record.total_eval_rollouts = eval_count;
  return record;
}

void apply_gap_envelope(std::vector<GapRow>& table, double lambda_l1_norm,
                        double lipschitz_l1, int dimension) {
  if (lambda_l1_norm < 0.0 || lipschitz_l1 < 0.0 || dimension < 1)
    throw std::invalid_argument("apply_gap_envelope: invalid arguments");
  const double scale = (1.0 + lambda_l1_norm) * lipschitz_l1 *
                       std::sqrt(static_cast<double>(dimension));
  for (GapRow& row : table) row.envelope = scale * row.sigma;
}

std::vector<GapRow> deterministic_gap(const Environment& env,
                                      ExplorationMode mode,
                                      const VectorXd& params,
                                      const std::vector<double>& sigma_grid,
                                      int eval_rollouts, std::uint64_t seed) {
  if (eval_rollouts < 1)
    throw std::invalid_argument("deterministic_gap: need at least one rollout");
  for (double s : sigma_grid)
    if (!(s > 0.0))
      throw std::invalid_argument("deterministic_gap: sigma grid must be positive");
  const CmdpSpec& spec = env.spec();
  if (env.num_discrete_actions() != 0)
    throw std::invalid_argument("deterministic_gap: needs a continuous environment");
  const int U = spec.num_constraints;
  const int d_a = spec.action_dim;
  const int d_s = spec.state_dim;
  const double gamma = spec.gamma;
  const CostAggregation agg = spec.cost_aggregation;

  // Per-index mean and unbiased variance over eval_rollouts trajectories.
  const auto estimate = [&](int salt, const std::function<Trajectory(RngStream&)>& sample)
      -> std::pair<VectorXd, VectorXd> {
    MatrixXd values(eval_rollouts, U + 1);
    for (int j = 0; j < eval_rollouts; ++j) {
      RngStream rng(derive_seed({seed, static_cast<std::uint64_t>(salt),
                                 static_cast<std::uint64_t>(j)}));
      const Trajectory traj = sample(rng);
      for (int i = 0; i <= U; ++i)
        values(j, i) = trajectory_cost(traj, i, gamma, agg);
    }
    VectorXd mean = values.colwise().mean().transpose();
    VectorXd var = VectorXd::Zero(U + 1);
    if (eval_rollouts > 1) {
      const MatrixXd centered = values.rowwise() - mean.transpose();
      var = centered.colwise().squaredNorm().transpose() / (eval_rollouts - 1);
    }
    return {std::move(mean), std::move(var)};
  };

  const LinearDeterministicPolicy det{unflatten_row_major(params, d_a, d_s)};
  const auto [j_det, var_det] = estimate(0, [&](RngStream& rng) {
    return rollout(env, [&](const VectorXd& s, int) { return det.act(s); }, rng);
  });

  std::vector<GapRow> table;
  table.reserve(sigma_grid.size());
  for (std::size_t si = 0; si < sigma_grid.size(); ++si) {
    const double sigma = sigma_grid[si];
    std::pair<VectorXd, VectorXd> sto;
    if (mode == ExplorationMode::kActionBased) {
      const LinearGaussianPolicy policy(det.theta, sigma);
      sto = estimate(static_cast<int>(si) + 1, [&](RngStream& rng) {
        return rollout(
            env,
            [&](const VectorXd& s, int) {
              return gaussian_policy_sample(policy, s, rng);
            },
            rng);
      });
    } else {
      const GaussianHyperpolicy h(params, sigma, d_a, d_s);
      sto = estimate(static_cast<int>(si) + 1, [&](RngStream& rng) {
        const LinearDeterministicPolicy sampled{
            unflatten_row_major(hyperpolicy_sample(h, rng), d_a, d_s)};
        return rollout(
            env, [&](const VectorXd& s, int) { return sampled.act(s); }, rng);
      });
    }

    GapRow row;
    row.sigma = sigma;
    row.j_stochastic = sto.first;
    row.j_deterministic = j_det;
    row.gap = (sto.first - j_det).cwiseAbs();
    row.standard_error =
        ((sto.second + var_det) / static_cast<double>(eval_rollouts))
            .cwiseSqrt();
    table.push_back(std::move(row));
  }
  return table;
}

}  // namespace cpg
