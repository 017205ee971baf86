#include <doctest.h>

#include <cmath>

#include "cpg/cmdp.hpp"
#include "cpg/envs.hpp"

using namespace cpg;

namespace {

// Independent loop-summation oracle for discounted sums.
double loop_discounted_sum(const std::vector<double>& values, double gamma) {
  double acc = 0.0;
  for (std::size_t t = 0; t < values.size(); ++t)
    acc += std::pow(gamma, static_cast<double>(t)) * values[t];
  return acc;
}

Trajectory make_traj(const std::vector<double>& rewards,
                     const std::vector<std::vector<double>>& costs) {
  const int T = static_cast<int>(rewards.size());
  const int U = costs.empty() ? 0 : static_cast<int>(costs[0].size());
  Trajectory traj;
  traj.states = MatrixXd::Zero(T, 1);
  traj.actions = MatrixXd::Zero(T, 1);
  traj.rewards = Eigen::Map<const VectorXd>(rewards.data(), T);
  traj.costs.resize(T, U);
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < U; ++i) traj.costs(t, i) = costs[t][i];
  return traj;
}

}  // namespace

TEST_CASE("j_max closed form and edge cases") {
  CHECK(j_max(1.0, 100) == 100.0);
  CHECK(j_max(0.5, 2) == doctest::Approx(1.5).epsilon(1e-15));

  // Geometric-sum oracle by explicit summation.
  double oracle = 0.0;
  for (int t = 0; t < 1000; ++t) oracle += std::pow(0.99, t);
  CHECK(j_max(0.99, 1000) == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(j_max(0.99, 1000) == doctest::Approx(99.9957).epsilon(1e-5));

  CHECK_THROWS_WITH_AS(j_max(1.0, 0), "unbounded horizon", std::invalid_argument);
  CHECK_THROWS_AS(j_max(0.5, 0), std::invalid_argument);
  CHECK_THROWS_AS(j_max(1.5, 10), std::invalid_argument);
}

TEST_CASE("j_max monotone in gamma and horizon") {
  const double gammas[] = {0.0, 0.3, 0.7, 0.9, 0.99, 1.0};
  const long horizons[] = {1, 2, 5, 20, 100};
  for (std::size_t gi = 0; gi + 1 < std::size(gammas); ++gi)
    for (long T : horizons)
      CHECK(j_max(gammas[gi], T) <= j_max(gammas[gi + 1], T) + 1e-12);
  for (double g : gammas)
    for (std::size_t ti = 0; ti + 1 < std::size(horizons); ++ti)
      CHECK(j_max(g, horizons[ti]) <= j_max(g, horizons[ti + 1]) + 1e-12);
}

TEST_CASE("j_max_aggregated uses 1 for per-step mean") {
  CHECK(j_max_aggregated(1.0, 100, CostAggregation::kPerStepMean) == 1.0);
  CHECK(j_max_aggregated(1.0, 100, CostAggregation::kCumulativeDiscounted) == 100.0);
}

TEST_CASE("discounted return") {
  CHECK(discounted_return(make_traj({-1, -1, -1}, {{0}, {0}, {0}}), 1.0) == -3.0);
  CHECK(discounted_return(make_traj({0, 0, 0}, {{0}, {0}, {0}}), 0.7) == 0.0);
  const auto traj = make_traj({-1, -0.5}, {{0}, {0}});
  CHECK(discounted_return(traj, 0.5) ==
        doctest::Approx(loop_discounted_sum({-1, -0.5}, 0.5)).epsilon(1e-15));
  CHECK(discounted_return(traj, 0.5) == doctest::Approx(-1.25));
}

TEST_CASE("discounted cost under both aggregations") {
  std::vector<double> rewards(100, 0.0);
  std::vector<std::vector<double>> ones(100, {1.0});
  const auto traj = make_traj(rewards, ones);
  CHECK(discounted_cost(traj, 1, 1.0, CostAggregation::kCumulativeDiscounted) == 100.0);
  CHECK(discounted_cost(traj, 1, 1.0, CostAggregation::kPerStepMean) == 1.0);

  const auto traj2 = make_traj({0, 0, 0}, {{1}, {0}, {1}});
  CHECK(discounted_cost(traj2, 1, 0.9, CostAggregation::kCumulativeDiscounted) ==
        doctest::Approx(loop_discounted_sum({1, 0, 1}, 0.9)).epsilon(1e-15));
  CHECK(discounted_cost(traj2, 1, 0.9, CostAggregation::kCumulativeDiscounted) ==
        doctest::Approx(1.81));

  CHECK_THROWS_AS(discounted_cost(traj2, 0, 0.9, CostAggregation::kCumulativeDiscounted),
                  std::out_of_range);
  CHECK_THROWS_AS(discounted_cost(traj2, 2, 0.9, CostAggregation::kCumulativeDiscounted),
                  std::out_of_range);
}

TEST_CASE("cost0 is the negated return") {
  CHECK(cost0(make_traj({-1, -1}, {{0}, {0}}), 1.0) == 2.0);
  CHECK(cost0(make_traj({0}, {{0}}), 1.0) == 0.0);
  CHECK(cost0(make_traj({-0.3, -0.7}, {{0}, {0}}), 0.5) ==
        doctest::Approx(-loop_discounted_sum({-0.3, -0.7}, 0.5)).epsilon(1e-15));
  CHECK(cost0(make_traj({-0.3, -0.7}, {{0}, {0}}), 0.5) == doctest::Approx(0.65));

  // Exact sign flip for random rewards.
  RngStream rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> rewards(17);
    for (double& r : rewards) r = -rng.uniform();
    std::vector<std::vector<double>> costs(17, {0.0});
    const auto traj = make_traj(rewards, costs);
    CHECK(cost0(traj, 0.95) == -discounted_return(traj, 0.95));
    // rewards in [-1, 0] keep the return in [-J_max, 0]
    CHECK(discounted_return(traj, 0.95) <= 0.0);
    CHECK(discounted_return(traj, 0.95) >= -j_max(0.95, 17));
  }
}

TEST_CASE("rollout produces full-length trajectories from the initial sampler") {
  DgwwConfig cfg;
  cfg.horizon = 5;
  const auto env = make_dgww(cfg);

  // Always-up source: the y coordinate climbs and clamps at the border.
  RngStream rng(derive_seed({1, 2, 3}));
  const Trajectory traj = rollout(
      *env, [](const VectorXd&, int) { return VectorXd::Zero(1); }, rng);
  CHECK(traj.length() == 5);
  // Hand-simulated grid dynamics: y increases by one per step until the
  // border at 6, x never moves.
  const double x0 = traj.states(0, 0);
  const double y0 = traj.states(0, 1);
  for (int t = 1; t < 5; ++t) {
    CHECK(traj.states(t, 0) == x0);
    CHECK(traj.states(t, 1) == std::min(y0 + t, 6.0));
  }

  SUBCASE("identical seeds give bit-identical trajectories") {
    RngStream a(42), b(42);
    const auto src = [](const VectorXd&, int) { return VectorXd::Zero(1); };
    const Trajectory ta = rollout(*env, src, a);
    const Trajectory tb = rollout(*env, src, b);
    CHECK(ta.states == tb.states);
    CHECK(ta.rewards == tb.rewards);
    CHECK(ta.costs == tb.costs);
  }

  SUBCASE("action dimension mismatch throws") {
    RngStream r(1);
    CHECK_THROWS_AS(
        rollout(*env, [](const VectorXd&, int) { return VectorXd::Zero(2); }, r),
        std::invalid_argument);
  }
}

TEST_CASE("zero horizon is rejected at spec level") {
  CmdpSpec spec;
  spec.state_dim = 1;
  spec.action_dim = 1;
  spec.num_constraints = 0;
  spec.thresholds = VectorXd();
  spec.horizon = 0;
  CHECK_THROWS_AS(validate_spec(spec), std::invalid_argument);
}

TEST_CASE("LQR rollout with zero actions follows the matrix powers") {
  LqrConfig cfg;
  const auto env = make_cost_lqr(cfg);
  RngStream rng(99);
  const Trajectory traj = rollout(
      *env, [](const VectorXd&, int) { return VectorXd::Zero(2); }, rng);

  // Matrix-power oracle: s_t = A^t s_0.
  const VectorXd s0 = traj.states.row(0).transpose();
  MatrixXd power = MatrixXd::Identity(2, 2);
  for (int t = 0; t < traj.length(); ++t) {
    const VectorXd expected = power * s0;
    CHECK(traj.states(t, 0) == doctest::Approx(expected[0]).epsilon(1e-12));
    CHECK(traj.states(t, 1) == doctest::Approx(expected[1]).epsilon(1e-12));
    power = cfg.A * power;
  }
}
