#include "cpg/checks.hpp"

#include <cmath>

#include "cpg/envs.hpp"
#include "cpg/optimizer.hpp"

namespace cpg {

namespace {

class BanditEnv final : public Environment {
 public:
  BanditEnv(CmdpSpec spec, VectorXd c0, VectorXd c1)
      : Environment(std::move(spec)), c0_(std::move(c0)), c1_(std::move(c1)) {}

  VectorXd initial_state(RngStream&) const override {
    return VectorXd::Zero(1);
  }

  StepResult step(const VectorXd&, const VectorXd& action,
                  RngStream&) const override {
    const int a = static_cast<int>(action[0]);
    StepResult res;
    res.next_state = VectorXd::Zero(1);
    res.reward = -c0_[a];
    res.costs = VectorXd::Constant(1, c1_[a]);
    return res;
  }

  int num_discrete_states() const override { return 1; }
  int num_discrete_actions() const override { return static_cast<int>(c0_.size()); }
  int state_index(const VectorXd&) const override { return 0; }

 private:
  VectorXd c0_, c1_;
};

class ScalarIdentityEnv final : public Environment {
 public:
  explicit ScalarIdentityEnv(CmdpSpec spec) : Environment(std::move(spec)) {}

  VectorXd initial_state(RngStream&) const override {
    return VectorXd::Ones(1);
  }

  StepResult step(const VectorXd&, const VectorXd& action,
                  RngStream&) const override {
    StepResult res;
    res.next_state = VectorXd::Ones(1);
    res.reward = 0.0;
    res.costs = VectorXd::Constant(1, action[0]);
    return res;
  }
};

VectorXd column_se(const GradientEstimate& est) {
  const int n = est.batch_size();
  const Eigen::RowVectorXd mean = est.per_sample.colwise().mean();
  const MatrixXd centered = est.per_sample.rowwise() - mean;
  const VectorXd var =
      centered.colwise().squaredNorm().transpose() / (n - 1);
  return (var / n).cwiseSqrt();
}

}  // namespace

std::unique_ptr<Environment> make_bandit_env(const VectorXd& objective_costs,
                                             const VectorXd& constraint_costs,
                                             double threshold) {
  if (objective_costs.size() != constraint_costs.size() ||
      objective_costs.size() < 2)
    throw std::invalid_argument("make_bandit_env: need matching cost tables with >= 2 actions");
  CmdpSpec spec;
  spec.state_dim = 1;
  spec.action_dim = 1;
  spec.num_constraints = 1;
  spec.thresholds = VectorXd::Constant(1, threshold);
  spec.gamma = 1.0;
  spec.horizon = 1;
  return std::make_unique<BanditEnv>(std::move(spec), objective_costs,
                                     constraint_costs);
}

std::unique_ptr<Environment> make_scalar_identity_env() {
  CmdpSpec spec;
  spec.state_dim = 1;
  spec.action_dim = 1;
  spec.num_constraints = 1;
  spec.thresholds = VectorXd::Zero(1);
  spec.gamma = 1.0;
  spec.horizon = 1;
  spec.unit_cost_range = false;  // the cost equals the (signed) action
  return std::make_unique<ScalarIdentityEnv>(spec);
}

CheckReport gpomdp_bandit_unbiasedness(long num_samples, std::uint64_t seed) {
  const VectorXd c0 = (VectorXd(2) << 0.8, 0.1).finished();
  const VectorXd c1 = (VectorXd(2) << 0.2, 0.7).finished();
  const auto env = make_bandit_env(c0, c1, 0.5);
  const TabularSoftmaxPolicy policy{
      (MatrixXd(1, 2) << 0.3, -0.4).finished(), 1.0};

  // Enumeration oracle over the finite action set.
  const VectorXd probs = softmax_action_probs(policy, 0);
  VectorXd exact = VectorXd::Zero(2);
  for (int a = 0; a < 2; ++a)
    exact += probs[a] * c1[a] * flatten_row_major(softmax_score(policy, 0, a));

  Batch batch;
  batch.mode = ExplorationMode::kActionBased;
  batch.aggregation = env->spec().cost_aggregation;
  batch.trajectories.reserve(num_samples);
  for (long j = 0; j < num_samples; ++j) {
    RngStream rng(derive_seed({seed, 0xBA, static_cast<std::uint64_t>(j)}));
    batch.trajectories.push_back(rollout(
        *env,
        [&](const VectorXd& s, int) {
          return VectorXd::Constant(
              1, softmax_sample(policy, env->state_index(s), rng));
        },
        rng));
  }
  const ScoreFn score = [&](const VectorXd& s, const VectorXd& a) {
    return flatten_row_major(
        softmax_score(policy, env->state_index(s), static_cast<int>(a[0])));
  };
  const GradientEstimate est = gpomdp_grad(batch, score, 2, 1, 1.0);
  CheckReport report =
      unbiasedness_check("gpomdp_bandit_unbiasedness", est.value,
                         column_se(est), exact);
  report.samples = num_samples;
  return report;
}

CheckReport pgpe_identity_unbiasedness(long num_samples, std::uint64_t seed) {
  const auto env = make_scalar_identity_env();
  const GaussianHyperpolicy h(VectorXd::Constant(1, 0.4), 0.7, 1, 1);

  Batch batch;
  batch.mode = ExplorationMode::kParameterBased;
  batch.aggregation = env->spec().cost_aggregation;
  batch.trajectories.reserve(num_samples);
  batch.sampled_params.reserve(num_samples);
  for (long j = 0; j < num_samples; ++j) {
    RngStream rng(derive_seed({seed, 0x1D, static_cast<std::uint64_t>(j)}));
    const VectorXd theta = hyperpolicy_sample(h, rng);
    const LinearDeterministicPolicy policy{unflatten_row_major(theta, 1, 1)};
    batch.sampled_params.push_back(theta);
    batch.trajectories.push_back(rollout(
        *env, [&](const VectorXd& s, int) { return policy.act(s); }, rng));
  }
  const GradientEstimate est = pgpe_grad(batch, h, 1, 1.0);
  CheckReport report = unbiasedness_check(
      "pgpe_identity_unbiasedness", est.value, column_se(est),
      VectorXd::Ones(1));  // analytic: E[(theta - rho) theta / sigma^2] = 1
  report.samples = num_samples;
  return report;
}

std::vector<CheckReport> run_diagnostics_suite(std::uint64_t seed,
                                               long mc_samples) {
  std::vector<CheckReport> reports;
  RngStream rng(derive_seed({seed, 0xC4EC}));

  // Finite-difference probes at a random point, h = 1e-5.
  const double h = 1e-5;
  {
    const int S = 3, A = 4;
    MatrixXd theta(S, A);
    for (int r = 0; r < S; ++r)
      for (int c = 0; c < A; ++c) theta(r, c) = rng.uniform(-1.0, 1.0);
    const int s = 1, a = 2;
    const auto f = [&](const VectorXd& flat) {
      TabularSoftmaxPolicy p{unflatten_row_major(flat, S, A), 1.0};
      return std::log(softmax_action_probs(p, s)[a]);
    };
    const TabularSoftmaxPolicy p{theta, 1.0};
    reports.push_back(finite_diff_check("softmax_score_fd", f,
                                        flatten_row_major(softmax_score(p, s, a)),
                                        flatten_row_major(theta), h));

    // Negative control: a doubled gradient has to fail.
    CheckReport control = finite_diff_check(
        "negative_control_doubled_gradient", f,
        2.0 * flatten_row_major(softmax_score(p, s, a)), flatten_row_major(theta),
        h);
    control.pass = !control.pass;
    reports.push_back(std::move(control));
  }
  {
    const int da = 2, ds = 3;
    MatrixXd theta(da, ds);
    for (int r = 0; r < da; ++r)
      for (int c = 0; c < ds; ++c) theta(r, c) = rng.uniform(-1.0, 1.0);
    VectorXd s(ds), a(da);
    for (int i = 0; i < ds; ++i) s[i] = rng.uniform(-1.0, 1.0);
    for (int i = 0; i < da; ++i) a[i] = rng.uniform(-1.0, 1.0);
    const double sigma = 0.5;
    const auto f = [&](const VectorXd& flat) {
      const MatrixXd th = unflatten_row_major(flat, da, ds);
      return -(a - th * s).squaredNorm() / (2.0 * sigma * sigma);
    };
    const LinearGaussianPolicy p(theta, sigma);
    reports.push_back(finite_diff_check("gaussian_policy_score_fd", f,
                                        flatten_row_major(gaussian_policy_score(p, s, a)),
                                        flatten_row_major(theta), h));
  }
  {
    const int dim = 4;
    VectorXd rho(dim), theta(dim);
    for (int i = 0; i < dim; ++i) {
      rho[i] = rng.uniform(-1.0, 1.0);
      theta[i] = rng.uniform(-1.0, 1.0);
    }
    const double sigma = 0.8;
    const auto f = [&](const VectorXd& r) {
      return -(theta - r).squaredNorm() / (2.0 * sigma * sigma);
    };
    const GaussianHyperpolicy hp(rho, sigma, 2, 2);
    reports.push_back(finite_diff_check("hyperpolicy_score_fd", f,
                                        hyperpolicy_score(hp, theta), rho, h));
  }

  // Score identities: the Monte-Carlo mean of each score is zero.
  {
    const long n = std::max<long>(mc_samples / 10, 1000);
    const TabularSoftmaxPolicy p{(MatrixXd(1, 3) << 0.5, -0.2, 0.1).finished(),
                                 1.0};
    MatrixXd rows(n, 3);
    for (long j = 0; j < n; ++j) {
      const int a = softmax_sample(p, 0, rng);
      rows.row(j) = flatten_row_major(softmax_score(p, 0, a)).transpose();
    }
    GradientEstimate est;
    est.per_sample = std::move(rows);
    est.value = est.per_sample.colwise().mean().transpose();
    CheckReport r = unbiasedness_check("softmax_score_identity", est.value,
                                       column_se(est), VectorXd::Zero(3));
    r.samples = n;
    reports.push_back(std::move(r));
  }
  {
    const long n = std::max<long>(mc_samples / 10, 1000);
    const LinearGaussianPolicy p((MatrixXd(1, 2) << 0.3, -0.7).finished(), 0.4);
    const VectorXd s = (VectorXd(2) << 1.0, -0.5).finished();
    MatrixXd rows(n, 2);
    for (long j = 0; j < n; ++j) {
      const VectorXd a = gaussian_policy_sample(p, s, rng);
      rows.row(j) = flatten_row_major(gaussian_policy_score(p, s, a)).transpose();
    }
    GradientEstimate est;
    est.per_sample = std::move(rows);
    est.value = est.per_sample.colwise().mean().transpose();
    CheckReport r = unbiasedness_check("gaussian_score_identity", est.value,
                                       column_se(est), VectorXd::Zero(2));
    r.samples = n;
    reports.push_back(std::move(r));
  }

  // White-noise moment conditions for the Gaussian samplers:
  // E[eps] = 0 and E[||eps||^2] <= d sigma^2.
  {
    const long n = std::max<long>(mc_samples / 10, 1000);
    const int d = 3;
    const double sigma = 0.6;
    const GaussianHyperpolicy hp(VectorXd::Zero(d), sigma, 1, 3);
    double sumsq = 0.0;
    MatrixXd rows(n, d);
    for (long j = 0; j < n; ++j) {
      const VectorXd eps = hyperpolicy_sample(hp, rng);
      rows.row(j) = eps.transpose();
      sumsq += eps.squaredNorm();
    }
    GradientEstimate est;
    est.per_sample = std::move(rows);
    est.value = est.per_sample.colwise().mean().transpose();
    CheckReport mean_check = unbiasedness_check(
        "white_noise_zero_mean", est.value, column_se(est), VectorXd::Zero(d));
    mean_check.samples = n;
    reports.push_back(std::move(mean_check));

    // E||eps||^2 = d sigma^2 for the isotropic Gaussian; allow 4 SE slack on
    // the <= side.
    const double mean_sq = sumsq / n;
    double var_acc = 0.0;
    for (long j = 0; j < n; ++j) {
      const double v = est.per_sample.row(j).squaredNorm() - mean_sq;
      var_acc += v * v;
    }
    const double se = std::sqrt(var_acc / (n - 1) / n);
    CheckReport norm_check;
    norm_check.name = "white_noise_second_moment";
    norm_check.measured = mean_sq;
    norm_check.reference = d * sigma * sigma + 4.0 * se;
    norm_check.pass = mean_sq <= norm_check.reference;
    norm_check.samples = n;
    reports.push_back(std::move(norm_check));
  }

  reports.push_back(gpomdp_bandit_unbiasedness(mc_samples, seed));
  reports.push_back(pgpe_identity_unbiasedness(mc_samples, seed));

  // Dual gradient on a frozen batch is a deterministic function of the
  // estimates: exact agreement required.
  {
    const auto env = make_bandit_env((VectorXd(2) << 0.8, 0.1).finished(),
                                     (VectorXd(2) << 0.2, 0.7).finished(), 0.5);
    Batch batch;
    batch.mode = ExplorationMode::kActionBased;
    for (int a : {0, 1, 1}) {
      RngStream r(0);
      batch.trajectories.push_back(rollout(
          *env,
          [&](const VectorXd&, int) {
            return VectorXd::Constant(1, a);
          },
          r));
    }
    const VectorXd b = VectorXd::Constant(1, 0.5);
    const VectorXd lambda = VectorXd::Constant(1, 2.0);
    const double omega = 0.1;
    // Independent recomputation, in batch order so the result is bit-equal.
    double acc = 0.0;
    for (const Trajectory& t : batch.trajectories)
      acc += t.costs(0, 0) - b[0] - omega * lambda[0];
    const VectorXd exact = VectorXd::Constant(1, acc / batch.size());
    const GradientEstimate est = dual_lagrangian_grad(batch, b, omega, lambda, 1.0);
    reports.push_back(unbiasedness_check("dual_gradient_frozen_batch", est.value,
                                         VectorXd::Zero(1), exact));
  }

  // Variance audit over a short grid-world run.
  {
    DgwwConfig cfg;
    cfg.horizon = 50;
    auto env = make_dgww(cfg);
    RunConfig run;
    run.mode = ExplorationMode::kActionBased;
    run.family = PolicyFamily::kTabularSoftmax;
    run.omega = 1e-4;
    run.iterations = 50;
    run.batch_size = 10;
    run.primal_schedule.rate = 0.01;
    run.dual_schedule.rate = 0.1;
    run.seed = derive_seed({seed, 0xDA});
    const RunRecord record = run_cpg(*env, run);
    std::vector<double> measured;
    for (const IterationLog& it : record.iterations)
      measured.push_back(it.dual_variance);
    reports.push_back(variance_bound_audit(measured, env->spec().gamma,
                                           env->spec().horizon,
                                           env->spec().num_constraints,
                                           run.batch_size,
                                           env->spec().cost_aggregation));
  }

  return reports;
}

}  // namespace cpg
