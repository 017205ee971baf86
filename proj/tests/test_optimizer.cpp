#include <doctest.h>

#include <cmath>

#include "cpg/envs.hpp"
#include "cpg/optimizer.hpp"

using namespace cpg;

namespace {

// Test-only environment with a state-visit counter; run_cpg never resamples
// beyond what the rollout accounting claims.
class CountingEnv final : public Environment {
 public:
  CountingEnv(CmdpSpec spec, const Environment& inner)
      : Environment(std::move(spec)), inner_(inner) {}

  VectorXd initial_state(RngStream& rng) const override {
    ++rollout_count;
    return inner_.initial_state(rng);
  }
  StepResult step(const VectorXd& s, const VectorXd& a,
                  RngStream& rng) const override {
    return inner_.step(s, a, rng);
  }
  int num_discrete_states() const override { return inner_.num_discrete_states(); }
  int num_discrete_actions() const override { return inner_.num_discrete_actions(); }
  int state_index(const VectorXd& s) const override { return inner_.state_index(s); }

  mutable long rollout_count = 0;

 private:
  const Environment& inner_;
};

// All-NaN rewards: forces the watchdog at the first iteration.
class NanEnv final : public Environment {
 public:
  explicit NanEnv(CmdpSpec spec) : Environment(std::move(spec)) {}
  VectorXd initial_state(RngStream&) const override { return VectorXd::Zero(1); }
  StepResult step(const VectorXd&, const VectorXd&, RngStream&) const override {
    StepResult res;
    res.next_state = VectorXd::Zero(1);
    res.reward = std::nan("");
    res.costs = VectorXd::Zero(1);
    return res;
  }
};

// Environment with identically zero costs; the multipliers must stay at 0.
class ZeroCostEnv final : public Environment {
 public:
  explicit ZeroCostEnv(CmdpSpec spec) : Environment(std::move(spec)) {}
  VectorXd initial_state(RngStream& rng) const override {
    return VectorXd::Constant(1, rng.uniform(-1.0, 1.0));
  }
  StepResult step(const VectorXd& s, const VectorXd&, RngStream&) const override {
    StepResult res;
    res.next_state = 0.5 * s;
    res.reward = -s.squaredNorm();
    res.costs = VectorXd::Zero(1);
    return res;
  }
};

RunConfig small_dgww_config(std::uint64_t seed) {
  RunConfig cfg;
  cfg.mode = ExplorationMode::kActionBased;
  cfg.family = PolicyFamily::kTabularSoftmax;
  cfg.omega = 1e-4;
  cfg.iterations = 20;
  cfg.batch_size = 5;
  cfg.primal_schedule.rate = 0.01;
  cfg.dual_schedule.rate = 0.1;
  cfg.eval_interval = 5;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("constant schedule steps") {
  StepSchedule sch;
  sch.rate = 0.1;
  ScheduleState state;

  SUBCASE("zero gradient leaves the point unchanged") {
    const VectorXd p = (VectorXd(2) << 1.0, -2.0).finished();
    CHECK(primal_update(p, VectorXd::Zero(2), sch, state) == p);
  }

  SUBCASE("a single descent step") {
    const VectorXd p = VectorXd::Zero(2);
    const VectorXd g = (VectorXd(2) << 1.0, -1.0).finished();
    const VectorXd next = primal_update(p, g, sch, state);
    CHECK(next[0] == doctest::Approx(-0.1).epsilon(1e-15));
    CHECK(next[1] == doctest::Approx(0.1).epsilon(1e-15));
  }

  SUBCASE("non-finite gradients abort") {
    CHECK_THROWS_AS(
        primal_update(VectorXd::Zero(1), VectorXd::Constant(1, std::nan("")),
                      sch, state),
        std::runtime_error);
  }

  SUBCASE("the optional box clamps coordinates") {
    const VectorXd next =
        primal_update(VectorXd::Zero(1), VectorXd::Constant(1, 100.0), sch,
                      state, std::make_pair(-1.0, 1.0));
    CHECK(next[0] == -1.0);
  }
}

TEST_CASE("adam schedule matches the reference recursion") {
  StepSchedule sch;
  sch.kind = StepSchedule::Kind::kAdam;
  sch.rate = 0.05;
  ScheduleState state;

  // Reference recursion evaluated independently.
  double m = 0.0, v = 0.0;
  const double g_seq[] = {2.0, -1.0, 0.5};
  VectorXd p = VectorXd::Zero(1);
  for (int k = 1; k <= 3; ++k) {
    const double g = g_seq[k - 1];
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mhat = m / (1.0 - std::pow(0.9, k));
    const double vhat = v / (1.0 - std::pow(0.999, k));
    const double expected_step = 0.05 * mhat / (std::sqrt(vhat) + 1e-8);
    const VectorXd before = p;
    p = primal_update(p, VectorXd::Constant(1, g), sch, state);
    CHECK(before[0] - p[0] == doctest::Approx(expected_step).epsilon(1e-12));
    if (k == 1) {
      // First step is rate * g / (|g| + eps), i.e. essentially sign(g) * rate.
      CHECK(before[0] - p[0] ==
            doctest::Approx(0.05 * g / (std::abs(g) + 1e-8)).epsilon(1e-9));
    }
  }
}

TEST_CASE("dual update") {
  StepSchedule sch;
  sch.rate = 0.1;
  ScheduleState state;
  const Multipliers start{VectorXd::Zero(1), 10.0};

  SUBCASE("zero gradient leaves lambda unchanged") {
    CHECK(dual_update(start, VectorXd::Zero(1), sch, state).lambda ==
          start.lambda);
  }

  SUBCASE("ascent direction") {
    const Multipliers next = dual_update(start, VectorXd::Ones(1), sch, state);
    CHECK(next.lambda[0] == doctest::Approx(0.1).epsilon(1e-15));
  }

  SUBCASE("outward gradients keep lambda on the ball") {
    Multipliers at_radius{VectorXd::Constant(1, 10.0), 10.0};
    ScheduleState st;
    const Multipliers next =
        dual_update(at_radius, VectorXd::Constant(1, 5.0), sch, st);
    CHECK(next.lambda.norm() == doctest::Approx(10.0).epsilon(1e-12));
  }

  SUBCASE("negative gradients decay lambda toward zero") {
    Multipliers lam{VectorXd::Constant(1, 2.0), 10.0};
    ScheduleState st;
    const double b = 0.5, omega = 0.1;
    for (int k = 0; k < 50; ++k) {
      const VectorXd grad = VectorXd::Constant(1, -b - omega * lam.lambda[0]);
      const Multipliers next = dual_update(lam, grad, sch, st);
      CHECK(next.lambda[0] <= lam.lambda[0]);
      lam = next;
    }
    CHECK(lam.lambda[0] == 0.0);
  }
}

TEST_CASE("descent-ascent sign convention on the quadratic toy") {
  // J0(u) = u^2, J1(u) = -u + 0.5, b = 0. Exact gradients:
  //   dL/du = 2u - lambda, dL/dlambda = -u + 0.5 - omega lambda.
  const double omega = 0.1;
  const auto L = [&](double u, double lambda) {
    return u * u + lambda * (-u + 0.5) - 0.5 * omega * lambda * lambda;
  };
  const double u0 = 1.0, lam0 = 0.5;

  // Primal descent at fixed lambda reduces L for steps below 1 (curvature 2).
  StepSchedule sch;
  sch.rate = 0.2;
  ScheduleState st1;
  const double grad_u = 2.0 * u0 - lam0;
  const double u1 =
      primal_update(VectorXd::Constant(1, u0), VectorXd::Constant(1, grad_u),
                    sch, st1)[0];
  CHECK(L(u1, lam0) < L(u0, lam0));

  // Dual ascent at the updated primal increases L.
  ScheduleState st2;
  const double grad_lam = -u1 + 0.5 - omega * lam0;
  const Multipliers lam1 = dual_update({VectorXd::Constant(1, lam0), 1e6},
                                       VectorXd::Constant(1, grad_lam), sch, st2);
  CHECK(L(u1, lam1.lambda[0]) > L(u1, lam0));
}

TEST_CASE("run_cpg bookkeeping and reproducibility") {
  DgwwConfig dgww;
  dgww.horizon = 30;
  const auto env = make_dgww(dgww);

  SUBCASE("identical configs and seeds give bit-identical records") {
    const RunConfig cfg = small_dgww_config(314);
    const RunRecord a = run_cpg(*env, cfg);
    const RunRecord b = run_cpg(*env, cfg);
    REQUIRE(a.iterations.size() == b.iterations.size());
    for (std::size_t k = 0; k < a.iterations.size(); ++k) {
      CHECK(a.iterations[k].j_hat == b.iterations[k].j_hat);
      CHECK(a.iterations[k].lambda == b.iterations[k].lambda);
      CHECK(a.iterations[k].lagrangian == b.iterations[k].lagrangian);
    }
    CHECK(a.final_params == b.final_params);
    REQUIRE(a.evals.size() == b.evals.size());
    for (std::size_t e = 0; e < a.evals.size(); ++e)
      CHECK(a.evals[e].j_det == b.evals[e].j_det);
  }

  SUBCASE("different seeds explore differently") {
    RunConfig cfg = small_dgww_config(314);
    const RunRecord a = run_cpg(*env, cfg);
    cfg.seed = 2718;
    const RunRecord b = run_cpg(*env, cfg);
    CHECK(a.iterations.front().j_hat != b.iterations.front().j_hat);
  }

  SUBCASE("rollout accounting covers both batches and the evaluations") {
    CountingEnv counting(env->spec(), *env);
    const RunConfig cfg = small_dgww_config(99);
    const RunRecord record = run_cpg(counting, cfg);
    // Two batches of N per iteration; evals of N at every eval_interval.
    const long train = 2L * cfg.iterations * cfg.batch_size;
    const long evals = (cfg.iterations / cfg.eval_interval) * cfg.batch_size;
    CHECK(record.total_rollouts == train);
    CHECK(record.total_eval_rollouts == evals);
    CHECK(counting.rollout_count == train + evals);
    CHECK(record.iterations.back().rollouts == train);
  }

  SUBCASE("nan watchdog aborts and marks the record") {
    CmdpSpec spec;
    spec.state_dim = 1;
    spec.action_dim = 1;
    spec.num_constraints = 1;
    spec.thresholds = VectorXd::Constant(1, 0.5);
    spec.gamma = 1.0;
    spec.horizon = 3;
    const NanEnv nan_env(spec);
    RunConfig cfg;
    cfg.mode = ExplorationMode::kActionBased;
    cfg.family = PolicyFamily::kLinear;
    cfg.sigma = 0.1;
    cfg.iterations = 10;
    cfg.batch_size = 4;
    cfg.seed = 1;
    const RunRecord record = run_cpg(nan_env, cfg);
    CHECK(record.status == "nan_abort");
    CHECK(record.abort_iteration == 0);
    CHECK(record.iterations.empty());
  }

  SUBCASE("zero-cost environments keep lambda at zero") {
    CmdpSpec spec;
    spec.state_dim = 1;
    spec.action_dim = 1;
    spec.num_constraints = 1;
    spec.thresholds = VectorXd::Constant(1, 0.5);
    spec.gamma = 1.0;
    spec.horizon = 5;
    const ZeroCostEnv zero_env(spec);
    RunConfig cfg;
    cfg.mode = ExplorationMode::kActionBased;
    cfg.family = PolicyFamily::kLinear;
    cfg.sigma = 0.2;
    cfg.iterations = 30;
    cfg.batch_size = 5;
    cfg.seed = 7;
    const RunRecord record = run_cpg(zero_env, cfg);
    for (const IterationLog& it : record.iterations)
      CHECK(it.lambda[0] == 0.0);
  }

  SUBCASE("configuration mismatches are rejected") {
    RunConfig cfg = small_dgww_config(1);
    cfg.mode = ExplorationMode::kParameterBased;
    CHECK_THROWS_AS(run_cpg(*env, cfg), std::invalid_argument);

    RunConfig linear_on_grid = small_dgww_config(1);
    linear_on_grid.family = PolicyFamily::kLinear;
    linear_on_grid.sigma = 0.1;
    CHECK_THROWS_AS(run_cpg(*env, linear_on_grid), std::invalid_argument);
  }
}

TEST_CASE("parameter-based runs use one parameter draw per trajectory") {
  LqrConfig lqr;
  lqr.horizon = 10;
  const auto env = make_cost_lqr(lqr);
  RunConfig cfg;
  cfg.mode = ExplorationMode::kParameterBased;
  cfg.family = PolicyFamily::kLinear;
  cfg.sigma = 0.05;
  cfg.iterations = 5;
  cfg.batch_size = 8;
  cfg.primal_schedule.kind = StepSchedule::Kind::kAdam;
  cfg.primal_schedule.rate = 1e-3;
  cfg.dual_schedule.kind = StepSchedule::Kind::kAdam;
  cfg.dual_schedule.rate = 1e-2;
  cfg.seed = 5;
  const RunRecord record = run_cpg(*env, cfg);
  CHECK(record.status == "ok");
  CHECK(record.iterations.size() == 5);
  CHECK(record.final_params.size() == 4);
}

TEST_CASE("deterministic gap study") {
  LqrConfig lqr;
  lqr.horizon = 20;
  const auto env = make_cost_lqr(lqr);
  const VectorXd params = (VectorXd(4) << -0.3, 0.0, 0.0, -0.3).finished();
  const std::vector<double> grid = {0.01, 0.5};

  for (ExplorationMode mode :
       {ExplorationMode::kActionBased, ExplorationMode::kParameterBased}) {
    const auto table = deterministic_gap(*env, mode, params, grid, 4000, 42);
    REQUIRE(table.size() == 2);
    CHECK(table[0].sigma == 0.01);
    CHECK(table[1].sigma == 0.5);
    for (const GapRow& row : table) {
      CHECK(row.gap.size() == 2);
      CHECK(row.standard_error.minCoeff() > 0.0);
      CHECK(row.gap == (row.j_stochastic - row.j_deterministic).cwiseAbs());
    }
    // More noise, larger deviation from the deterministic rollout.
    CHECK(table[1].gap[1] > table[0].gap[1]);
    // Tiny noise stays within a few standard errors of zero gap.
    CHECK(table[0].gap[0] <= 4.0 * table[0].standard_error[0] + 1e-3);
  }

  CHECK_THROWS_AS(deterministic_gap(*env, ExplorationMode::kActionBased, params,
                                    {0.0}, 100, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(deterministic_gap(*env, ExplorationMode::kActionBased, params,
                                    grid, 0, 1),
                  std::invalid_argument);

  SUBCASE("analytic envelope column") {
    auto table =
        deterministic_gap(*env, ExplorationMode::kActionBased, params, grid, 100, 1);
    CHECK(std::isnan(table.front().envelope));
    apply_gap_envelope(table, 3.0, 2.0, 2);
    // (1 + 3) * 2 * sigma * sqrt(2)
    CHECK(table[0].envelope ==
          doctest::Approx(8.0 * 0.01 * std::sqrt(2.0)).epsilon(1e-12));
    CHECK(table[1].envelope ==
          doctest::Approx(8.0 * 0.5 * std::sqrt(2.0)).epsilon(1e-12));
    CHECK_THROWS_AS(apply_gap_envelope(table, -1.0, 2.0, 2),
                    std::invalid_argument);
  }
}
