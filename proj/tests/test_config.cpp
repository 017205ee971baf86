#include <doctest.h>

#include <cmath>
#include <nlohmann/json.hpp>
#include <set>

#include "cpg/config.hpp"

using namespace cpg;
using nlohmann::json;

namespace {

json minimal_lqr_config() {
  return json::parse(R"({
    "name": "tiny",
    "environment": {"kind": "cost_lqr", "horizon": 10, "threshold": 0.5},
    "algorithm": {"mode": "AB", "policy": "linear", "sigma": 0.1,
                  "omega": 1e-4, "iterations": 5, "batch_size": 4,
                  "schedule": "constant", "step_primal": 0.01, "step_dual": 0.1},
    "run": {"num_seeds": 2, "master_seed": 7, "output_dir": "out/tiny"}
  })");
}

}  // namespace

TEST_CASE("shipped presets load and match their documented values") {
  SUBCASE("dgww_cpgae") {
    const ExperimentConfig cfg = load_config(CPG_CONFIG_DIR "/dgww_cpgae.json");
    CHECK(cfg.environment.kind == "dgww");
    CHECK(cfg.environment.dgww.side_length == 7);
    CHECK(cfg.environment.dgww.horizon == 100);
    CHECK(cfg.environment.dgww.gamma == 1.0);
    CHECK(cfg.environment.dgww.threshold == 0.2);
    CHECK(cfg.environment.dgww.aggregation == CostAggregation::kPerStepMean);
    CHECK(cfg.mode == ExplorationMode::kActionBased);
    CHECK(cfg.family == PolicyFamily::kTabularSoftmax);
    CHECK(cfg.omega == 1e-4);
    CHECK(cfg.iterations == 3000);
    CHECK(cfg.batch_size == 10);
    CHECK(cfg.primal_schedule.kind == StepSchedule::Kind::kConstant);
    CHECK(cfg.primal_schedule.rate == 0.01);
    CHECK(cfg.dual_schedule.rate == 0.1);
    CHECK(cfg.num_seeds == 5);
  }

  SUBCASE("costlqr pair") {
    const ExperimentConfig ae = load_config(CPG_CONFIG_DIR "/costlqr_cpgae.json");
    const ExperimentConfig pe = load_config(CPG_CONFIG_DIR "/costlqr_cpgpe.json");
    for (const ExperimentConfig* cfg : {&ae, &pe}) {
      CHECK(cfg->environment.kind == "cost_lqr");
      CHECK(cfg->environment.lqr.horizon == 50);
      CHECK(cfg->environment.lqr.threshold == 0.9);
      CHECK(cfg->sigma == doctest::Approx(std::sqrt(1e-3)).epsilon(1e-12));
      CHECK(cfg->omega == 1e-4);
      CHECK(cfg->iterations == 6000);
      CHECK(cfg->batch_size == 100);
      CHECK(cfg->primal_schedule.kind == StepSchedule::Kind::kAdam);
      CHECK(cfg->primal_schedule.rate == 1e-3);
      CHECK(cfg->dual_schedule.rate == 1e-2);
    }
    CHECK(ae.mode == ExplorationMode::kActionBased);
    CHECK(pe.mode == ExplorationMode::kParameterBased);
    // Paper instance matrices are the defaults.
    CHECK(ae.environment.lqr.A == 0.9 * MatrixXd::Identity(2, 2));
    CHECK(ae.environment.lqr.Q(0, 0) == 0.9);
    CHECK(ae.environment.lqr.Q(1, 1) == 0.1);
    CHECK(ae.environment.lqr.R(0, 0) == 0.1);
    CHECK(ae.environment.lqr.R(1, 1) == 0.9);
  }

  SUBCASE("sensitivity sweep expands to a 3 x num_seeds matrix") {
    const ExperimentConfig cfg =
        load_config(CPG_CONFIG_DIR "/costlqr_sensitivity.json");
    REQUIRE(cfg.sweep.has_value());
    CHECK(cfg.sweep->parameter == "omega");
    CHECK(cfg.sweep->values == std::vector<double>{0.0, 1e-4, 1e-2});
    CHECK(cfg.sweep_size() * cfg.num_seeds == 15);
    CHECK(cfg.environment.lqr.threshold == 0.2);
    CHECK(cfg.iterations == 10000);

    // The sweep overrides omega per cell and every cell seed is distinct.
    std::set<std::uint64_t> seeds;
    for (int sw = 0; sw < 3; ++sw)
      for (int seed = 0; seed < cfg.num_seeds; ++seed) {
        const RunConfig run = build_run_config(cfg, sw, seed);
        CHECK(run.omega == cfg.sweep->values[sw]);
        seeds.insert(run.seed);
      }
    CHECK(seeds.size() == 15);
  }

  SUBCASE("remaining presets validate") {
    CHECK(load_config(CPG_CONFIG_DIR "/robotworld_cpgae.json").iterations == 1000);
    CHECK(load_config(CPG_CONFIG_DIR "/robotworld_cpgpe.json").sigma ==
          doctest::Approx(1e-3).epsilon(1e-12));  // sqrt(1e-6)
    const ExperimentConfig dep =
        load_config(CPG_CONFIG_DIR "/deployment_sigma_sweep.json");
    REQUIRE(dep.deployment_study.has_value());
    CHECK(dep.deployment_study->sigma_grid ==
          std::vector<double>{0.01, 0.05, 0.1, 0.5, 1.0});
  }
}

TEST_CASE("validation failures carry field paths") {
  SUBCASE("missing environment section") {
    json j = minimal_lqr_config();
    j.erase("environment");
    CHECK_THROWS_WITH_AS(parse_config(j), "config: missing environment section",
                         std::invalid_argument);
  }

  SUBCASE("unknown keys are rejected") {
    json j = minimal_lqr_config();
    j["algorithm"]["learning_rate"] = 0.1;
    CHECK_THROWS_WITH_AS(parse_config(j), "algorithm.learning_rate: unknown key",
                         std::invalid_argument);
  }

  SUBCASE("type mismatches are rejected") {
    json j = minimal_lqr_config();
    j["algorithm"]["iterations"] = "many";
    CHECK_THROWS_WITH_AS(parse_config(j),
                         "algorithm.iterations: expected an integer",
                         std::invalid_argument);
  }

  SUBCASE("mode and policy pairing") {
    json j = minimal_lqr_config();
    j["algorithm"]["policy"] = "tabular_softmax";
    CHECK_THROWS_AS(parse_config(j), std::invalid_argument);

    json k = minimal_lqr_config();
    k["environment"] = {{"kind", "dgww"}, {"horizon", 10}, {"threshold", 0.2}};
    CHECK_THROWS_AS(parse_config(k), std::invalid_argument);
  }

  SUBCASE("sigma and sigma_sq are mutually exclusive") {
    json j = minimal_lqr_config();
    j["algorithm"]["sigma_sq"] = 0.01;
    CHECK_THROWS_AS(parse_config(j), std::invalid_argument);
  }

  SUBCASE("omega = 0 needs a positive lambda cap") {
    json j = minimal_lqr_config();
    j["algorithm"]["omega"] = 0.0;
    j["algorithm"]["lambda_cap"] = 0.0;
    CHECK_THROWS_AS(parse_config(j), std::invalid_argument);
  }
}

TEST_CASE("configs round-trip through serialization") {
  for (const char* preset :
       {"dgww_cpgae", "costlqr_cpgae", "costlqr_cpgpe", "costlqr_sensitivity",
        "robotworld_cpgae", "robotworld_cpgpe", "deployment_sigma_sweep"}) {
    const ExperimentConfig cfg =
        load_config(std::string(CPG_CONFIG_DIR "/") + preset + ".json");
    const json first = serialize(cfg);
    const json second = serialize(parse_config(first));
    CHECK(first == second);
  }
}

TEST_CASE("sigma_sq converts to sigma") {
  json j = minimal_lqr_config();
  j["algorithm"].erase("sigma");
  j["algorithm"]["sigma_sq"] = 1e-3;
  const ExperimentConfig cfg = parse_config(j);
  CHECK(cfg.sigma == doctest::Approx(std::sqrt(1e-3)).epsilon(1e-15));
}

TEST_CASE("optional report sections parse and round-trip") {
  json j = minimal_lqr_config();
  j["deployment_study"] = {{"sigma_grid", {0.1, 0.5}},
                           {"rollouts", 50},
                           {"lipschitz_l1", 1.5}};
  j["bound_report"] = {{"epsilon", 0.05}, {"lambda0_norm", 3.0}};
  const ExperimentConfig cfg = parse_config(j);
  REQUIRE(cfg.deployment_study.has_value());
  CHECK(cfg.deployment_study->lipschitz_l1 == 1.5);
  REQUIRE(cfg.bound_report.has_value());
  CHECK(cfg.bound_report->epsilon == 0.05);
  CHECK(cfg.bound_report->lambda0_norm == 3.0);
  CHECK(serialize(parse_config(serialize(cfg))) == serialize(cfg));

  j["bound_report"]["epsilon"] = -1.0;
  CHECK_THROWS_AS(parse_config(j), std::invalid_argument);
}
