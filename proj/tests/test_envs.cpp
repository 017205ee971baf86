#include <doctest.h>

#include <cmath>
#include <memory>

#include "cpg/envs.hpp"

using namespace cpg;

namespace {
VectorXd v2(double x, double y) { return (VectorXd(2) << x, y).finished(); }
}

TEST_CASE("dgww geometry, rewards and costs") {
  DgwwConfig cfg;
  const auto env = make_dgww(cfg);
  CHECK(env->num_discrete_states() == 49);
  CHECK(env->num_discrete_actions() == 4);
  CHECK(env->spec().horizon == 100);

  RngStream rng(3);

  SUBCASE("landing on the center scores reward 0") {
    // From (3, 4), action down lands on the center (3, 3).
    const StepResult res = env->step(v2(3, 4), VectorXd::Constant(1, 3), rng);
    CHECK(res.next_state == v2(3, 3));
    CHECK(res.reward == 0.0);
    CHECK(res.costs[0] == 0.0);
  }

  SUBCASE("landing on a wall cell costs 1") {
    // (3, 2) is the bottom-middle wall cell; step down from the center.
    const StepResult res = env->step(v2(3, 3), VectorXd::Constant(1, 3), rng);
    CHECK(res.next_state == v2(3, 2));
    CHECK(res.costs[0] == 1.0);
  }

  SUBCASE("the opening above the center is free") {
    const StepResult res = env->step(v2(3, 3), VectorXd::Constant(1, 0), rng);
    CHECK(res.next_state == v2(3, 4));
    CHECK(res.costs[0] == 0.0);
  }

  SUBCASE("moves off the grid clamp to the border") {
    const StepResult res = env->step(v2(0, 0), VectorXd::Constant(1, 2), rng);
    CHECK(res.next_state == v2(0, 0));
  }

  SUBCASE("initial states are the four corners") {
    for (int i = 0; i < 200; ++i) {
      RngStream r(i);
      const VectorXd s = env->initial_state(r);
      const bool corner = (s[0] == 0.0 || s[0] == 6.0) && (s[1] == 0.0 || s[1] == 6.0);
      CHECK(corner);
    }
  }

  SUBCASE("rewards lie in [-1, 0] with zero only at the center, costs in {0,1}") {
    for (int x = 0; x < 7; ++x)
      for (int y = 0; y < 7; ++y)
        for (int a = 0; a < 4; ++a) {
          const StepResult res = env->step(v2(x, y), VectorXd::Constant(1, a), rng);
          CHECK(res.reward <= 0.0);
          CHECK(res.reward >= -1.0);
          const bool at_center = res.next_state == v2(3, 3);
          CHECK((res.reward == 0.0) == at_center);
          CHECK((res.costs[0] == 0.0 || res.costs[0] == 1.0));
          CHECK(res.next_state[0] >= 0.0);
          CHECK(res.next_state[0] <= 6.0);
          CHECK(res.next_state[1] >= 0.0);
          CHECK(res.next_state[1] <= 6.0);
        }
  }

  SUBCASE("invalid side lengths are rejected") {
    DgwwConfig bad;
    bad.side_length = 6;
    CHECK_THROWS_AS(make_dgww(bad), std::invalid_argument);
    bad.side_length = 3;
    CHECK_THROWS_AS(make_dgww(bad), std::invalid_argument);
  }
}

TEST_CASE("cost LQR matches the configured matrices") {
  LqrConfig cfg;  // defaults are the experiment instance
  const auto env = make_cost_lqr(cfg);
  RngStream rng(1);

  SUBCASE("configured instance values") {
    // Hand arithmetic: r = -(0.1*1 + 0.9*0) = -0.1, c = 0.9 + 0.1 = 1.0,
    // s' = 0.9*(1,0) + 0.9*(1,1) = (1.8, 0.9).
    const StepResult res = env->step(v2(1, 0), v2(1, 1), rng);
    CHECK(res.reward == doctest::Approx(-0.1).epsilon(1e-15));
    CHECK(res.costs[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(res.next_state[0] == doctest::Approx(1.8).epsilon(1e-15));
    CHECK(res.next_state[1] == doctest::Approx(0.9).epsilon(1e-15));
  }

  SUBCASE("zero action: zero cost, contraction by A") {
    const StepResult res = env->step(v2(2, -1), v2(0, 0), rng);
    CHECK(res.costs[0] == 0.0);
    CHECK(res.next_state[0] == doctest::Approx(1.8));
    CHECK(res.next_state[1] == doctest::Approx(-0.9));
  }

  SUBCASE("initial states are inside the configured range") {
    for (int i = 0; i < 100; ++i) {
      RngStream r(i);
      const VectorXd s = env->initial_state(r);
      CHECK(s[0] >= -3.0);
      CHECK(s[0] <= 3.0);
      CHECK(s[1] >= -3.0);
      CHECK(s[1] <= 3.0);
    }
  }

  SUBCASE("costs are nonnegative for random PSD Q") {
    RngStream r(17);
    for (int rep = 0; rep < 50; ++rep) {
      MatrixXd M(2, 2);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) M(i, j) = r.uniform(-1.0, 1.0);
      LqrConfig psd;
      psd.Q = M.transpose() * M;  // PSD by construction
      const auto e = make_cost_lqr(psd);
      const VectorXd a = v2(r.uniform(-2.0, 2.0), r.uniform(-2.0, 2.0));
      const StepResult res = e->step(v2(0.5, -0.5), a, rng);
      CHECK(res.costs[0] >= -1e-12);
    }
  }

  SUBCASE("shape mismatches are rejected") {
    LqrConfig bad;
    bad.B = MatrixXd::Identity(3, 2);
    CHECK_THROWS_AS(make_cost_lqr(bad), std::invalid_argument);
  }
}

TEST_CASE("robot world rewards, costs and kinematics") {
  RobotWorldConfig cfg;  // experiment coefficients
  const auto env = make_robot_world(cfg);
  RngStream rng(5);

  SUBCASE("origin with no action scores zero") {
    const StepResult res =
        env->step(VectorXd::Zero(4), VectorXd::Zero(2), rng);
    CHECK(res.reward == 0.0);
    CHECK(res.costs[0] == 0.0);
  }

  SUBCASE("configured coefficient values") {
    // Hand arithmetic: r = <G1, |s|> = -1 - 1 = -2; c = <G2, s^2> = -0.002.
    VectorXd s(4);
    s << 1, 1, 0, 0;
    const StepResult res = env->step(s, VectorXd::Zero(2), rng);
    CHECK(res.reward == doctest::Approx(-2.0).epsilon(1e-15));
    CHECK(res.costs[0] == doctest::Approx(-0.002).epsilon(1e-15));
  }

  SUBCASE("double-integrator kinematics") {
    VectorXd s(4);
    s << 1.0, 2.0, 0.5, -0.25;
    VectorXd a(2);
    a << 0.1, 0.2;
    const StepResult res = env->step(s, a, rng);
    CHECK(res.next_state[0] == doctest::Approx(1.5));    // x + vx
    CHECK(res.next_state[1] == doctest::Approx(1.75));   // y + vy
    CHECK(res.next_state[2] == doctest::Approx(0.6));    // vx + ax
    CHECK(res.next_state[3] == doctest::Approx(-0.05));  // vy + ay
  }
}

TEST_CASE("energy cost wrapper") {
  auto inner = std::shared_ptr<const Environment>(make_cost_lqr(LqrConfig{}));
  const auto env = energy_cost_wrapper(inner, -1.0, 1.0, 50.0);
  CHECK(env->spec().num_constraints == 2);
  CHECK(env->spec().thresholds[1] == 50.0);
  RngStream rng(1);

  SUBCASE("in-bounds actions add no cost and pass through") {
    const StepResult res = env->step(v2(1, 0), v2(0.5, -0.5), rng);
    CHECK(res.costs[1] == 0.0);
    const StepResult direct = inner->step(v2(1, 0), v2(0.5, -0.5), rng);
    CHECK(res.next_state == direct.next_state);
  }

  SUBCASE("clipping cost and forwarded action") {
    // ||(2,0) - (1,0)|| = 1; the inner env sees the clipped action.
    const StepResult res = env->step(v2(1, 0), v2(2, 0), rng);
    CHECK(res.costs[1] == doctest::Approx(1.0).epsilon(1e-15));
    const StepResult clipped = inner->step(v2(1, 0), v2(1, 0), rng);
    CHECK(res.next_state == clipped.next_state);
    CHECK(res.costs[0] == clipped.costs[0]);

    const StepResult res2 = env->step(v2(1, 0), v2(2, 2), rng);
    CHECK(res2.costs[1] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  }

  SUBCASE("added cost is zero iff the action is within bounds") {
    RngStream r(23);
    for (int rep = 0; rep < 100; ++rep) {
      const VectorXd a = v2(r.uniform(-2.0, 2.0), r.uniform(-2.0, 2.0));
      const StepResult res = env->step(v2(0, 0), a, rng);
      const bool inside = a[0] >= -1.0 && a[0] <= 1.0 && a[1] >= -1.0 && a[1] <= 1.0;
      CHECK((res.costs[1] == 0.0) == inside);
    }
  }

  SUBCASE("composition with identical bounds is idempotent") {
    auto doubled = energy_cost_wrapper(
        std::shared_ptr<const Environment>(
            energy_cost_wrapper(inner, -1.0, 1.0, 50.0)),
        -1.0, 1.0, 50.0);
    const StepResult res = doubled->step(v2(1, 0), v2(2, 0), rng);
    CHECK(res.costs.size() == 3);
    CHECK(res.costs[1] == 0.0);  // the inner wrapper sees a clipped action
    CHECK(res.costs[2] == doctest::Approx(1.0));
  }

  SUBCASE("bad bounds are rejected") {
    CHECK_THROWS_AS(energy_cost_wrapper(inner, 1.0, -1.0, 50.0),
                    std::invalid_argument);
  }
}
