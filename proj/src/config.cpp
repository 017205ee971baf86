#include "cpg/config.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <stdexcept>

namespace cpg {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::invalid_argument(path + ": " + what);
}

void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
}

void reject_unknown(const json& obj, const std::string& path,
                    const std::set<std::string>& allowed) {
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) fail(path + "." + key, "unknown key");
}

double get_double(const json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key)) fail(path + "." + key, "missing required field");
  const json& v = obj.at(key);
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  return v.get<double>();
}

double get_double_or(const json& obj, const std::string& path, const char* key,
                     double def) {
  if (!obj.contains(key)) return def;
  const json& v = obj.at(key);
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  return v.get<double>();
}

long get_int(const json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key)) fail(path + "." + key, "missing required field");
  const json& v = obj.at(key);
  if (!v.is_number_integer()) fail(path + "." + key, "expected an integer");
  return v.get<long>();
}

long get_int_or(const json& obj, const std::string& path, const char* key,
                long def) {
  if (!obj.contains(key)) return def;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) fail(path + "." + key, "expected an integer");
  return v.get<long>();
}

std::string get_string(const json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key)) fail(path + "." + key, "missing required field");
  const json& v = obj.at(key);
  if (!v.is_string()) fail(path + "." + key, "expected a string");
  return v.get<std::string>();
}

MatrixXd get_matrix(const json& obj, const std::string& path, const char* key,
                    const MatrixXd& def) {
  if (!obj.contains(key)) return def;
  const json& v = obj.at(key);
  const std::string where = path + "." + key;
  if (!v.is_array() || v.empty() || !v[0].is_array())
    fail(where, "expected an array of row arrays");
  const int rows = static_cast<int>(v.size());
  const int cols = static_cast<int>(v[0].size());
  MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (!v[r].is_array() || static_cast<int>(v[r].size()) != cols)
      fail(where, "ragged matrix rows");
    for (int c = 0; c < cols; ++c) {
      if (!v[r][c].is_number()) fail(where, "expected numeric entries");
      m(r, c) = v[r][c].get<double>();
    }
  }
  return m;
}

VectorXd get_vector(const json& obj, const std::string& path, const char* key,
                    const VectorXd& def) {
  if (!obj.contains(key)) return def;
  const json& v = obj.at(key);
  const std::string where = path + "." + key;
  if (!v.is_array()) fail(where, "expected an array");
  VectorXd out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) fail(where, "expected numeric entries");
    out[static_cast<long>(i)] = v[i].get<double>();
  }
  return out;
}

CostAggregation parse_aggregation(const json& obj, const std::string& path,
                                  CostAggregation def) {
  if (!obj.contains("cost_aggregation")) return def;
  const std::string s = get_string(obj, path, "cost_aggregation");
  if (s == "per_step_mean") return CostAggregation::kPerStepMean;
  if (s == "cumulative_discounted") return CostAggregation::kCumulativeDiscounted;
  fail(path + ".cost_aggregation",
       "must be \"per_step_mean\" or \"cumulative_discounted\"");
}

std::string aggregation_name(CostAggregation a) {
  return a == CostAggregation::kPerStepMean ? "per_step_mean"
                                            : "cumulative_discounted";
}

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const VectorXd& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

EnvironmentConfig parse_environment(const json& j) {
  const std::string path = "environment";
  expect_object(j, path);
  EnvironmentConfig env;
  env.kind = get_string(j, path, "kind");

  std::set<std::string> allowed = {"kind",      "horizon",
                                   "gamma",     "threshold",
                                   "cost_aggregation", "wrapper"};
  if (env.kind == "dgww") {
    allowed.insert({"side_length", "wall_cells"});
  } else if (env.kind == "cost_lqr") {
    allowed.insert({"A", "B", "Q", "R", "init_range"});
  } else if (env.kind == "robot_world") {
    allowed.insert({"G1", "G2", "R1", "R2", "A", "B", "init_range"});
  } else {
    fail(path + ".kind", "must be \"dgww\", \"cost_lqr\" or \"robot_world\"");
  }
  reject_unknown(j, path, allowed);

  if (env.kind == "dgww") {
    DgwwConfig& d = env.dgww;
    d.side_length = static_cast<int>(get_int_or(j, path, "side_length", d.side_length));
    d.horizon = static_cast<int>(get_int(j, path, "horizon"));
    d.gamma = get_double_or(j, path, "gamma", d.gamma);
    d.threshold = get_double(j, path, "threshold");
    d.aggregation = parse_aggregation(j, path, CostAggregation::kPerStepMean);
    if (j.contains("wall_cells")) {
      const json& cells = j.at("wall_cells");
      if (!cells.is_array()) fail(path + ".wall_cells", "expected an array of [x, y] pairs");
      for (const json& c : cells) {
        if (!c.is_array() || c.size() != 2 || !c[0].is_number_integer() ||
            !c[1].is_number_integer())
          fail(path + ".wall_cells", "expected [x, y] integer pairs");
        d.wall_cells.emplace_back(c[0].get<int>(), c[1].get<int>());
      }
    }
  } else if (env.kind == "cost_lqr") {
    LqrConfig& l = env.lqr;
    l.A = get_matrix(j, path, "A", l.A);
    l.B = get_matrix(j, path, "B", l.B);
    l.Q = get_matrix(j, path, "Q", l.Q);
    l.R = get_matrix(j, path, "R", l.R);
    const VectorXd range = get_vector(j, path, "init_range",
                                      (VectorXd(2) << l.init_lo, l.init_hi).finished());
    if (range.size() != 2) fail(path + ".init_range", "expected [lo, hi]");
    l.init_lo = range[0];
    l.init_hi = range[1];
    l.horizon = static_cast<int>(get_int(j, path, "horizon"));
    l.gamma = get_double_or(j, path, "gamma", l.gamma);
    l.threshold = get_double(j, path, "threshold");
    l.aggregation = parse_aggregation(j, path, CostAggregation::kCumulativeDiscounted);
  } else {
    RobotWorldConfig& r = env.robot_world;
    r.G1 = get_vector(j, path, "G1", r.G1);
    r.G2 = get_vector(j, path, "G2", r.G2);
    r.R1 = get_vector(j, path, "R1", r.R1);
    r.R2 = get_vector(j, path, "R2", r.R2);
    if (r.G1.size() != 4 || r.G2.size() != 4)
      fail(path, "G1 and G2 must have length 4");
    if (r.R1.size() != 2 || r.R2.size() != 2)
      fail(path, "R1 and R2 must have length 2");
    r.A = get_matrix(j, path, "A", r.A);
    r.B = get_matrix(j, path, "B", r.B);
    const VectorXd range = get_vector(j, path, "init_range",
                                      (VectorXd(2) << r.init_lo, r.init_hi).finished());
    if (range.size() != 2) fail(path + ".init_range", "expected [lo, hi]");
    r.init_lo = range[0];
    r.init_hi = range[1];
    r.horizon = static_cast<int>(get_int(j, path, "horizon"));
    r.gamma = get_double_or(j, path, "gamma", r.gamma);
    r.threshold = get_double(j, path, "threshold");
    r.aggregation = parse_aggregation(j, path, CostAggregation::kCumulativeDiscounted);
  }

  if (j.contains("wrapper")) {
    const json& w = j.at("wrapper");
    const std::string wpath = path + ".wrapper";
    expect_object(w, wpath);
    reject_unknown(w, wpath, {"a_min", "a_max", "threshold"});
    WrapperConfig wc;
    wc.a_min = get_double(w, wpath, "a_min");
    wc.a_max = get_double(w, wpath, "a_max");
    wc.threshold = get_double(w, wpath, "threshold");
    env.wrapper = wc;
  }
  return env;
}

StepSchedule::Kind parse_schedule_kind(const json& obj, const std::string& path) {
  const std::string s = get_string(obj, path, "schedule");
  if (s == "constant") return StepSchedule::Kind::kConstant;
  if (s == "adam") return StepSchedule::Kind::kAdam;
  fail(path + ".schedule", "must be \"constant\" or \"adam\"");
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  expect_object(j, "config");
  reject_unknown(j, "config",
                 {"name", "environment", "algorithm", "run", "sweep",
                  "deployment_study", "bound_report"});
  ExperimentConfig cfg;
  cfg.name = get_string(j, "config", "name");
  if (!j.contains("environment")) fail("config", "missing environment section");
  cfg.environment = parse_environment(j.at("environment"));

  if (!j.contains("algorithm")) fail("config", "missing algorithm section");
  const json& a = j.at("algorithm");
  const std::string apath = "algorithm";
  expect_object(a, apath);
  reject_unknown(a, apath,
                 {"mode", "policy", "sigma", "sigma_sq", "temperature", "omega",
                  "lambda_cap", "iterations", "batch_size", "schedule",
                  "step_primal", "step_dual", "eval_interval", "eval_rollouts",
                  "avg_window", "param_init", "primal_box"});

  const std::string mode = get_string(a, apath, "mode");
  if (mode == "AB") cfg.mode = ExplorationMode::kActionBased;
  else if (mode == "PB") cfg.mode = ExplorationMode::kParameterBased;
  else fail(apath + ".mode", "must be \"AB\" or \"PB\"");

  const std::string policy = get_string(a, apath, "policy");
  if (policy == "tabular_softmax") cfg.family = PolicyFamily::kTabularSoftmax;
  else if (policy == "linear") cfg.family = PolicyFamily::kLinear;
  else fail(apath + ".policy", "must be \"tabular_softmax\" or \"linear\"");

  if (a.contains("sigma") && a.contains("sigma_sq"))
    fail(apath, "give either sigma or sigma_sq, not both");
  if (a.contains("sigma_sq")) {
    const double s2 = get_double(a, apath, "sigma_sq");
    if (!(s2 > 0.0)) fail(apath + ".sigma_sq", "must be positive");
    cfg.sigma = std::sqrt(s2);
  } else {
    cfg.sigma = get_double_or(a, apath, "sigma", 0.0);
  }
  cfg.temperature = get_double_or(a, apath, "temperature", 1.0);
  cfg.omega = get_double(a, apath, "omega");
  cfg.lambda_cap = get_double_or(a, apath, "lambda_cap", 1e4);
  cfg.iterations = static_cast<int>(get_int(a, apath, "iterations"));
  cfg.batch_size = static_cast<int>(get_int(a, apath, "batch_size"));
  const StepSchedule::Kind kind = parse_schedule_kind(a, apath);
  cfg.primal_schedule.kind = kind;
  cfg.dual_schedule.kind = kind;
  cfg.primal_schedule.rate = get_double(a, apath, "step_primal");
  cfg.dual_schedule.rate = get_double(a, apath, "step_dual");
  cfg.eval_interval = static_cast<int>(get_int_or(a, apath, "eval_interval", 10));
  cfg.eval_rollouts = static_cast<int>(get_int_or(a, apath, "eval_rollouts", 0));
  cfg.avg_window = static_cast<int>(get_int_or(a, apath, "avg_window", 100));
  cfg.param_init = get_double_or(a, apath, "param_init", 0.0);
  if (a.contains("primal_box")) {
    const VectorXd box = get_vector(a, apath, "primal_box", VectorXd());
    if (box.size() != 2 || !(box[0] < box[1]))
      fail(apath + ".primal_box", "expected [lo, hi] with lo < hi");
    cfg.primal_box = std::make_pair(box[0], box[1]);
  }

  if (!j.contains("run")) fail("config", "missing run section");
  const json& r = j.at("run");
  const std::string rpath = "run";
  expect_object(r, rpath);
  reject_unknown(r, rpath, {"num_seeds", "master_seed", "output_dir"});
  cfg.num_seeds = static_cast<int>(get_int(r, rpath, "num_seeds"));
  if (cfg.num_seeds < 1) fail(rpath + ".num_seeds", "must be >= 1");
  const long ms = get_int(r, rpath, "master_seed");
  if (ms < 0) fail(rpath + ".master_seed", "must be >= 0");
  cfg.master_seed = static_cast<std::uint64_t>(ms);
  cfg.output_dir = get_string(r, rpath, "output_dir");

  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    const std::string spath = "sweep";
    expect_object(s, spath);
    reject_unknown(s, spath, {"parameter", "values"});
    SweepConfig sweep;
    sweep.parameter = get_string(s, spath, "parameter");
    if (sweep.parameter != "omega" && sweep.parameter != "sigma")
      fail(spath + ".parameter", "must be \"omega\" or \"sigma\"");
    const VectorXd values = get_vector(s, spath, "values", VectorXd());
    if (values.size() == 0) fail(spath + ".values", "must be non-empty");
    for (int i = 0; i < values.size(); ++i) sweep.values.push_back(values[i]);
    cfg.sweep = std::move(sweep);
  }

  if (j.contains("deployment_study")) {
    const json& d = j.at("deployment_study");
    const std::string dpath = "deployment_study";
    expect_object(d, dpath);
    reject_unknown(d, dpath, {"sigma_grid", "rollouts", "lipschitz_l1"});
    DeploymentStudyConfig study;
    const VectorXd grid = get_vector(d, dpath, "sigma_grid", VectorXd());
    if (grid.size() == 0) fail(dpath + ".sigma_grid", "must be non-empty");
    for (int i = 0; i < grid.size(); ++i) {
      if (!(grid[i] > 0.0)) fail(dpath + ".sigma_grid", "entries must be positive");
      study.sigma_grid.push_back(grid[i]);
    }
    study.rollouts = static_cast<int>(get_int_or(d, dpath, "rollouts", 10000));
    if (study.rollouts < 1) fail(dpath + ".rollouts", "must be >= 1");
    if (d.contains("lipschitz_l1")) {
      const double l1 = get_double(d, dpath, "lipschitz_l1");
      if (!(l1 >= 0.0)) fail(dpath + ".lipschitz_l1", "must be >= 0");
      study.lipschitz_l1 = l1;
    }
    cfg.deployment_study = std::move(study);
  }

  if (j.contains("bound_report")) {
    const json& b = j.at("bound_report");
    const std::string bpath = "bound_report";
    expect_object(b, bpath);
    reject_unknown(b, bpath, {"epsilon", "lambda0_norm"});
    BoundReportConfig report;
    report.epsilon = get_double(b, bpath, "epsilon");
    report.lambda0_norm = get_double(b, bpath, "lambda0_norm");
    if (report.epsilon < 0.0) fail(bpath + ".epsilon", "must be >= 0");
    if (report.lambda0_norm < 0.0) fail(bpath + ".lambda0_norm", "must be >= 0");
    cfg.bound_report = report;
  }

  // Cross-field consistency.
  if (cfg.family == PolicyFamily::kTabularSoftmax) {
    if (cfg.mode != ExplorationMode::kActionBased)
      fail("algorithm", "tabular_softmax requires mode AB");
    if (cfg.environment.kind != "dgww")
      fail("algorithm", "tabular_softmax requires the dgww environment");
    if (!(cfg.temperature > 0.0)) fail("algorithm.temperature", "must be positive");
  } else {
    if (cfg.environment.kind == "dgww")
      fail("algorithm", "linear policies need a continuous environment");
    if (!(cfg.sigma > 0.0) &&
        !(cfg.sweep && cfg.sweep->parameter == "sigma"))
      fail("algorithm.sigma", "must be positive");
  }
  if (cfg.omega < 0.0) fail("algorithm.omega", "must be >= 0");
  if ((cfg.omega == 0.0 ||
       (cfg.sweep && cfg.sweep->parameter == "omega" &&
        std::any_of(cfg.sweep->values.begin(), cfg.sweep->values.end(),
                    [](double w) { return w == 0.0; }))) &&
      !(cfg.lambda_cap > 0.0))
    fail("algorithm.lambda_cap", "omega = 0 requires a positive lambda_cap");
  if (cfg.iterations < 1) fail("algorithm.iterations", "must be >= 1");
  if (cfg.batch_size < 1) fail("algorithm.batch_size", "must be >= 1");
  if (cfg.eval_interval < 1) fail("algorithm.eval_interval", "must be >= 1");
  if (!(cfg.primal_schedule.rate > 0.0)) fail("algorithm.step_primal", "must be positive");
  if (!(cfg.dual_schedule.rate > 0.0)) fail("algorithm.step_dual", "must be positive");

  // Environment construction validates the remaining env fields.
  build_environment(cfg.environment);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
  return parse_config(j);
}

json serialize(const ExperimentConfig& cfg) {
  json env;
  env["kind"] = cfg.environment.kind;
  if (cfg.environment.kind == "dgww") {
    const DgwwConfig& d = cfg.environment.dgww;
    env["side_length"] = d.side_length;
    env["horizon"] = d.horizon;
    env["gamma"] = d.gamma;
    env["threshold"] = d.threshold;
    env["cost_aggregation"] = aggregation_name(d.aggregation);
    if (!d.wall_cells.empty()) {
      json cells = json::array();
      for (const auto& [x, y] : d.wall_cells) cells.push_back({x, y});
      env["wall_cells"] = std::move(cells);
    }
  } else if (cfg.environment.kind == "cost_lqr") {
    const LqrConfig& l = cfg.environment.lqr;
    env["A"] = matrix_to_json(l.A);
    env["B"] = matrix_to_json(l.B);
    env["Q"] = matrix_to_json(l.Q);
    env["R"] = matrix_to_json(l.R);
    env["init_range"] = {l.init_lo, l.init_hi};
    env["horizon"] = l.horizon;
    env["gamma"] = l.gamma;
    env["threshold"] = l.threshold;
    env["cost_aggregation"] = aggregation_name(l.aggregation);
  } else {
    const RobotWorldConfig& r = cfg.environment.robot_world;
    env["G1"] = vector_to_json(r.G1);
    env["G2"] = vector_to_json(r.G2);
    env["R1"] = vector_to_json(r.R1);
    env["R2"] = vector_to_json(r.R2);
    if (r.A.size() != 0) env["A"] = matrix_to_json(r.A);
    if (r.B.size() != 0) env["B"] = matrix_to_json(r.B);
    env["init_range"] = {r.init_lo, r.init_hi};
    env["horizon"] = r.horizon;
    env["gamma"] = r.gamma;
    env["threshold"] = r.threshold;
    env["cost_aggregation"] = aggregation_name(r.aggregation);
  }
  if (cfg.environment.wrapper) {
    env["wrapper"] = {{"a_min", cfg.environment.wrapper->a_min},
                      {"a_max", cfg.environment.wrapper->a_max},
                      {"threshold", cfg.environment.wrapper->threshold}};
  }

  json algo;
  algo["mode"] = cfg.mode == ExplorationMode::kActionBased ? "AB" : "PB";
  algo["policy"] = cfg.family == PolicyFamily::kTabularSoftmax
                       ? "tabular_softmax"
                       : "linear";
  algo["sigma"] = cfg.sigma;
  algo["temperature"] = cfg.temperature;
  algo["omega"] = cfg.omega;
  algo["lambda_cap"] = cfg.lambda_cap;
  algo["iterations"] = cfg.iterations;
  algo["batch_size"] = cfg.batch_size;
  algo["schedule"] = cfg.primal_schedule.kind == StepSchedule::Kind::kAdam
                         ? "adam"
                         : "constant";
  algo["step_primal"] = cfg.primal_schedule.rate;
  algo["step_dual"] = cfg.dual_schedule.rate;
  algo["eval_interval"] = cfg.eval_interval;
  algo["eval_rollouts"] = cfg.eval_rollouts;
  algo["avg_window"] = cfg.avg_window;
  algo["param_init"] = cfg.param_init;
  if (cfg.primal_box)
    algo["primal_box"] = {cfg.primal_box->first, cfg.primal_box->second};

  json out;
  out["name"] = cfg.name;
  out["environment"] = std::move(env);
  out["algorithm"] = std::move(algo);
  out["run"] = {{"num_seeds", cfg.num_seeds},
                {"master_seed", static_cast<long>(cfg.master_seed)},
                {"output_dir", cfg.output_dir}};
  if (cfg.sweep)
    out["sweep"] = {{"parameter", cfg.sweep->parameter},
                    {"values", cfg.sweep->values}};
  if (cfg.deployment_study) {
    json study = {{"sigma_grid", cfg.deployment_study->sigma_grid},
                  {"rollouts", cfg.deployment_study->rollouts}};
    if (cfg.deployment_study->lipschitz_l1)
      study["lipschitz_l1"] = *cfg.deployment_study->lipschitz_l1;
    out["deployment_study"] = std::move(study);
  }
  if (cfg.bound_report)
    out["bound_report"] = {{"epsilon", cfg.bound_report->epsilon},
                           {"lambda0_norm", cfg.bound_report->lambda0_norm}};
  return out;
}

std::unique_ptr<Environment> build_environment(const EnvironmentConfig& cfg) {
  std::unique_ptr<Environment> env;
  if (cfg.kind == "dgww") env = make_dgww(cfg.dgww);
  else if (cfg.kind == "cost_lqr") env = make_cost_lqr(cfg.lqr);
  else if (cfg.kind == "robot_world") env = make_robot_world(cfg.robot_world);
  else throw std::invalid_argument("environment.kind: unknown environment");
  if (cfg.wrapper)
    env = energy_cost_wrapper(std::shared_ptr<const Environment>(std::move(env)),
                              cfg.wrapper->a_min, cfg.wrapper->a_max,
                              cfg.wrapper->threshold);
  return env;
}

RunConfig build_run_config(const ExperimentConfig& cfg, int sweep_index,
                           int seed_index) {
  if (sweep_index < 0 || sweep_index >= cfg.sweep_size())
    throw std::out_of_range("sweep index out of range");
  if (seed_index < 0 || seed_index >= cfg.num_seeds)
    throw std::out_of_range("seed index out of range");
  RunConfig run;
  run.mode = cfg.mode;
  run.family = cfg.family;
  run.sigma = cfg.sigma;
  run.temperature = cfg.temperature;
  run.omega = cfg.omega;
  run.lambda_cap = cfg.lambda_cap;
  run.iterations = cfg.iterations;
  run.batch_size = cfg.batch_size;
  run.primal_schedule = cfg.primal_schedule;
  run.dual_schedule = cfg.dual_schedule;
  run.eval_interval = cfg.eval_interval;
  run.eval_rollouts = cfg.eval_rollouts;
  run.avg_window = cfg.avg_window;
  run.param_init = cfg.param_init;
  run.primal_box = cfg.primal_box;
  if (cfg.sweep) {
    const double v = cfg.sweep->values[sweep_index];
    if (cfg.sweep->parameter == "omega") run.omega = v;
    else run.sigma = v;
  }
  run.seed = derive_seed({cfg.master_seed, static_cast<std::uint64_t>(sweep_index),
                          static_cast<std::uint64_t>(seed_index)});
  return run;
}

}  // namespace cpg
