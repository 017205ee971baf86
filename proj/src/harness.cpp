#include "cpg/harness.hpp"

#include <algorithm>
#include <atomic>
#include <boost/math/distributions/students_t.hpp>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <thread>

namespace cpg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Shortest round-trip decimal form; keeps text files byte-reproducible.
std::string fmt(double x) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  (void)ec;
  return std::string(buf, ptr);
}

json vec_to_json(const VectorXd& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

VectorXd vec_from_json(const json& arr) {
  VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i)
    v[static_cast<long>(i)] = arr[i].get<double>();
  return v;
}

std::string cell_stem(int sweep_index, int seed_index) {
  return "record_sw" + std::to_string(sweep_index) + "_seed" +
         std::to_string(seed_index);
}

void write_record_jsonl(const fs::path& path, const ExperimentConfig& cfg,
                        const CellResult& cell, const VectorXd& thresholds,
                        bool unit_cost_range) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());

  json header;
  header["type"] = "config";
  header["experiment"] = serialize(cfg);
  header["sweep_index"] = cell.sweep_index;
  if (cell.has_sweep) header["sweep_value"] = cell.sweep_value;
  else header["sweep_value"] = nullptr;
  header["seed_index"] = cell.seed_index;
  header["run_seed"] = cell.run_seed;
  header["thresholds"] = vec_to_json(thresholds);
  header["unit_cost_range"] = unit_cost_range;
  out << header.dump() << '\n';

  for (const IterationLog& it : cell.record.iterations) {
    json line;
    line["type"] = "iter";
    line["k"] = it.k;
    line["J"] = vec_to_json(it.j_hat);
    line["lambda"] = vec_to_json(it.lambda);
    line["L"] = it.lagrangian;
    line["primal_step"] = it.primal_step_norm;
    line["dual_step"] = it.dual_step_norm;
    line["rollouts"] = it.rollouts;
    line["dual_var"] = it.dual_variance;
    line["dual_var_bound"] = it.dual_variance_bound;
    out << line.dump() << '\n';
  }
  for (const EvalLog& ev : cell.record.evals) {
    json line;
    line["type"] = "eval";
    line["k"] = ev.k;
    line["JD"] = vec_to_json(ev.j_det);
    out << line.dump() << '\n';
  }
  json tail;
  tail["type"] = "final";
  tail["status"] = cell.ok ? cell.record.status : "error";
  tail["error"] = cell.error;
  tail["abort_iteration"] = cell.record.abort_iteration;
  tail["final_params"] = vec_to_json(cell.record.final_params);
  tail["avg_params"] = vec_to_json(cell.record.avg_params);
  tail["param_shape"] = {cell.record.param_rows, cell.record.param_cols};
  tail["rollouts"] = cell.record.total_rollouts;
  tail["eval_rollouts"] = cell.record.total_eval_rollouts;
  out << tail.dump() << '\n';
}

void write_record_csv(const fs::path& path, const CellResult& cell) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const RunRecord& rec = cell.record;
  const int U = rec.iterations.empty()
                    ? 0
                    : static_cast<int>(rec.iterations.front().j_hat.size()) - 1;

  out << "k";
  for (int i = 0; i <= U; ++i) out << ",J" << i;
  for (int i = 1; i <= U; ++i) out << ",lambda" << i;
  out << ",lagrangian,primal_step,dual_step,rollouts,dual_var,dual_var_bound";
  for (int i = 0; i <= U; ++i) out << ",det_J" << i;
  out << '\n';

  std::size_t ev = 0;
  for (const IterationLog& it : rec.iterations) {
    out << it.k;
    for (int i = 0; i <= U; ++i) out << ',' << fmt(it.j_hat[i]);
    for (int i = 0; i < U; ++i) out << ',' << fmt(it.lambda[i]);
    out << ',' << fmt(it.lagrangian) << ',' << fmt(it.primal_step_norm) << ','
        << fmt(it.dual_step_norm) << ',' << it.rollouts << ','
        << fmt(it.dual_variance) << ',' << fmt(it.dual_variance_bound);
    if (ev < rec.evals.size() && rec.evals[ev].k == it.k) {
      for (int i = 0; i <= U; ++i) out << ',' << fmt(rec.evals[ev].j_det[i]);
      ++ev;
    } else {
      for (int i = 0; i <= U; ++i) out << ',';
    }
    out << '\n';
  }
}

void write_deployment_csv(const fs::path& path,
                          const std::vector<GapRow>& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (table.empty()) return;
  const int n = static_cast<int>(table.front().j_stochastic.size());
  const bool with_envelope = !std::isnan(table.front().envelope);
  out << "sigma";
  for (int i = 0; i < n; ++i) out << ",J_sto" << i;
  for (int i = 0; i < n; ++i) out << ",J_det" << i;
  for (int i = 0; i < n; ++i) out << ",gap" << i;
  for (int i = 0; i < n; ++i) out << ",se" << i;
  if (with_envelope) out << ",envelope";
  out << '\n';
  for (const GapRow& row : table) {
    out << fmt(row.sigma);
    for (int i = 0; i < n; ++i) out << ',' << fmt(row.j_stochastic[i]);
    for (int i = 0; i < n; ++i) out << ',' << fmt(row.j_deterministic[i]);
    for (int i = 0; i < n; ++i) out << ',' << fmt(row.gap[i]);
    for (int i = 0; i < n; ++i) out << ',' << fmt(row.standard_error[i]);
    if (with_envelope) out << ',' << fmt(row.envelope);
    out << '\n';
  }
}

struct RecordGroup {
  int sweep_index = 0;
  bool has_sweep = false;
  double sweep_value = 0.0;
  std::vector<LoadedRecord> records;
};

std::vector<RecordGroup> group_by_sweep(std::vector<LoadedRecord> loaded) {
  std::vector<RecordGroup> groups;
  for (LoadedRecord& rec : loaded) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const RecordGroup& g) {
      return g.sweep_index == rec.sweep_index;
    });
    if (it == groups.end()) {
      groups.push_back({rec.sweep_index, rec.has_sweep, rec.sweep_value, {}});
      it = groups.end() - 1;
    }
    it->records.push_back(std::move(rec));
  }
  std::sort(groups.begin(), groups.end(),
            [](const RecordGroup& a, const RecordGroup& b) {
              return a.sweep_index < b.sweep_index;
            });
  return groups;
}

json series_to_json(const std::vector<SeriesPoint>& series) {
  json arr = json::array();
  for (const SeriesPoint& p : series)
    arr.push_back({p.x, p.mean, p.mean - p.half_width, p.mean + p.half_width,
                   p.n});
  return arr;
}

}  // namespace

bool ExperimentResult::all_ok() const {
  for (const CellResult& c : cells)
    if (!c.ok || c.record.status != "ok") return false;
  for (const CheckReport& c : checks)
    if (!c.pass) return false;
  return true;
}

std::string resolve_output_dir(const std::string& configured) {
  fs::path p(configured);
  if (p.is_absolute()) return configured;
  if (const char* root = std::getenv("CPG_OUTPUT_ROOT"))
    return (fs::path(root) / p).string();
  return configured;
}

double student_t_975(int dof) {
  if (dof < 1) throw std::invalid_argument("student_t_975: dof must be >= 1");
  boost::math::students_t_distribution<double> dist(dof);
  return boost::math::quantile(dist, 0.975);
}

AggregateSeries aggregate(const std::vector<RunRecord>& records) {
  if (records.empty()) throw std::invalid_argument("aggregate: no records");

  std::size_t full_len = 0;
  for (const RunRecord& r : records)
    full_len = std::max(full_len, r.iterations.size());
  for (const RunRecord& r : records)
    if (r.status == "ok" && r.iterations.size() != full_len)
      throw std::invalid_argument("aggregate: misaligned iteration grids");
  if (full_len == 0) throw std::invalid_argument("aggregate: empty records");

  const int U =
      static_cast<int>(records.front().iterations.front().j_hat.size()) - 1;

  std::map<int, double> t_cache;
  const auto t_quantile = [&t_cache](int dof) {
    auto it = t_cache.find(dof);
    if (it == t_cache.end()) it = t_cache.emplace(dof, student_t_975(dof)).first;
    return it->second;
  };

  // Two-pass mean / CI; identical values give an exact zero half-width.
  const auto make_point = [&](double x, const std::vector<double>& values) {
    SeriesPoint p;
    p.x = x;
    p.n = static_cast<int>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    p.mean = sum / p.n;
    if (p.n >= 2) {
      bool all_equal = true;
      double ss = 0.0;
      for (double v : values) {
        all_equal = all_equal && v == values.front();
        ss += (v - p.mean) * (v - p.mean);
      }
      if (!all_equal)
        p.half_width = t_quantile(p.n - 1) * std::sqrt(ss / (p.n - 1) / p.n);
    }
    return p;
  };

  // value extractor -> series over the iteration grid
  const auto build = [&](const std::function<double(const IterationLog&)>& get) {
    std::vector<SeriesPoint> series(full_len);
    std::vector<double> values;
    for (std::size_t k = 0; k < full_len; ++k) {
      values.clear();
      for (const RunRecord& r : records)
        if (k < r.iterations.size()) values.push_back(get(r.iterations[k]));
      series[k] = make_point(static_cast<double>(k), values);
    }
    return series;
  };

  AggregateSeries out;
  for (int i = 0; i <= U; ++i)
    out["J" + std::to_string(i)] =
        build([i](const IterationLog& it) { return it.j_hat[i]; });
  for (int i = 1; i <= U; ++i)
    out["lambda" + std::to_string(i)] =
        build([i](const IterationLog& it) { return it.lambda[i - 1]; });
  out["lagrangian"] = build([](const IterationLog& it) { return it.lagrangian; });
  out["dual_var"] = build([](const IterationLog& it) { return it.dual_variance; });
  out["rollouts"] =
      build([](const IterationLog& it) { return static_cast<double>(it.rollouts); });

  // Deterministic-deployment series on the eval grid.
  std::size_t eval_len = 0;
  const RunRecord* longest = &records.front();
  for (const RunRecord& r : records)
    if (r.evals.size() > eval_len) {
      eval_len = r.evals.size();
      longest = &r;
    }
  for (const RunRecord& r : records) {
    if (r.status == "ok" && r.evals.size() != eval_len)
      throw std::invalid_argument("aggregate: misaligned eval grids");
    for (std::size_t e = 0; e < r.evals.size(); ++e)
      if (r.evals[e].k != longest->evals[e].k)
        throw std::invalid_argument("aggregate: misaligned eval grids");
  }
  if (eval_len > 0) {
    std::vector<double> values;
    for (int i = 0; i <= U; ++i) {
      std::vector<SeriesPoint> series(eval_len);
      for (std::size_t e = 0; e < eval_len; ++e) {
        values.clear();
        for (const RunRecord& r : records)
          if (e < r.evals.size()) values.push_back(r.evals[e].j_det[i]);
        series[e] =
            make_point(static_cast<double>(longest->evals[e].k), values);
      }
      out["det_J" + std::to_string(i)] = std::move(series);
    }
  }
  return out;
}

std::vector<LoadedRecord> load_records(const std::string& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("record_", 0) == 0 && entry.path().extension() == ".jsonl")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw std::invalid_argument("no record files under " + dir);

  std::vector<LoadedRecord> loaded;
  for (const fs::path& file : files) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot read " + file.string());
    LoadedRecord rec;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "config") {
        rec.sweep_index = j.at("sweep_index").get<int>();
        rec.seed_index = j.at("seed_index").get<int>();
        rec.has_sweep = !j.at("sweep_value").is_null();
        if (rec.has_sweep) rec.sweep_value = j.at("sweep_value").get<double>();
        rec.record.seed = j.at("run_seed").get<std::uint64_t>();
      } else if (type == "iter") {
        IterationLog it;
        it.k = j.at("k").get<int>();
        it.j_hat = vec_from_json(j.at("J"));
        it.lambda = vec_from_json(j.at("lambda"));
        it.lagrangian = j.at("L").get<double>();
        it.primal_step_norm = j.at("primal_step").get<double>();
        it.dual_step_norm = j.at("dual_step").get<double>();
        it.rollouts = j.at("rollouts").get<long>();
        it.dual_variance = j.at("dual_var").get<double>();
        it.dual_variance_bound = j.at("dual_var_bound").get<double>();
        rec.record.iterations.push_back(std::move(it));
      } else if (type == "eval") {
        EvalLog ev;
        ev.k = j.at("k").get<int>();
        ev.j_det = vec_from_json(j.at("JD"));
        rec.record.evals.push_back(std::move(ev));
      } else if (type == "final") {
        rec.record.status = j.at("status").get<std::string>();
        rec.record.abort_iteration = j.at("abort_iteration").get<int>();
        rec.record.final_params = vec_from_json(j.at("final_params"));
        rec.record.avg_params = vec_from_json(j.at("avg_params"));
        if (j.contains("param_shape")) {
          rec.record.param_rows = j.at("param_shape")[0].get<int>();
          rec.record.param_cols = j.at("param_shape")[1].get<int>();
        }
        rec.record.total_rollouts = j.at("rollouts").get<long>();
        rec.record.total_eval_rollouts = j.at("eval_rollouts").get<long>();
      }
    }
    // Record invariants: iteration indices strictly increase and the
    // rollout counter is monotone.
    for (std::size_t k = 1; k < rec.record.iterations.size(); ++k) {
      if (rec.record.iterations[k].k <= rec.record.iterations[k - 1].k ||
          rec.record.iterations[k].rollouts < rec.record.iterations[k - 1].rollouts)
        throw std::runtime_error("corrupt record: " + file.string());
    }
    loaded.push_back(std::move(rec));
  }
  std::sort(loaded.begin(), loaded.end(),
            [](const LoadedRecord& a, const LoadedRecord& b) {
              return std::tie(a.sweep_index, a.seed_index) <
                     std::tie(b.sweep_index, b.seed_index);
            });
  return loaded;
}

void emit_plot_data(const AggregateSeries& series, const std::string& quantity,
                    const std::string& path, XAxis x,
                    const VectorXd& thresholds) {
  std::string key = quantity;
  bool negate = false;
  double threshold = std::nan("");

  const auto parse_index = [](const std::string& s, std::size_t prefix_len) {
    return std::stoi(s.substr(prefix_len));
  };
  if (quantity == "return") {
    key = "J0";
    negate = true;
  } else if (quantity == "det_return") {
    key = "det_J0";
    negate = true;
  } else if (quantity.rfind("cost", 0) == 0) {
    const int i = parse_index(quantity, 4);
    key = "J" + std::to_string(i);
    if (i < 1 || i > thresholds.size())
      throw std::invalid_argument("emit_plot_data: no threshold for " + quantity);
    threshold = thresholds[i - 1];
  } else if (quantity.rfind("det_cost", 0) == 0) {
    const int i = parse_index(quantity, 8);
    key = "det_J" + std::to_string(i);
    if (i < 1 || i > thresholds.size())
      throw std::invalid_argument("emit_plot_data: no threshold for " + quantity);
    threshold = thresholds[i - 1];
  }

  const auto it = series.find(key);
  if (it == series.end() || it->second.empty())
    throw std::invalid_argument("emit_plot_data: unknown or empty quantity: " +
                                quantity);

  const std::vector<SeriesPoint>* rollouts = nullptr;
  if (x == XAxis::kRollouts) {
    const auto rit = series.find("rollouts");
    if (rit == series.end())
      throw std::invalid_argument("emit_plot_data: rollouts series unavailable");
    rollouts = &rit->second;
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# " << (x == XAxis::kRollouts ? "rollouts" : "iteration")
      << " mean ci_low ci_high";
  if (!std::isnan(threshold)) out << " threshold";
  out << '\n';
  for (const SeriesPoint& p : it->second) {
    double xval = p.x;
    if (rollouts) {
      const std::size_t k = static_cast<std::size_t>(p.x);
      if (k >= rollouts->size())
        throw std::invalid_argument("emit_plot_data: rollouts series too short");
      xval = (*rollouts)[k].mean;
    }
    const double mean = negate ? -p.mean : p.mean;
    out << fmt(xval) << ' ' << fmt(mean) << ' ' << fmt(mean - p.half_width)
        << ' ' << fmt(mean + p.half_width);
    if (!std::isnan(threshold)) out << ' ' << fmt(threshold);
    out << '\n';
  }
}

namespace {

void write_summary(const std::string& dir, const json& experiment,
                   const std::vector<LoadedRecord>& loaded) {
  const ExperimentConfig cfg = parse_config(experiment);
  json cells = json::array();
  json checks = json::array();
  for (const LoadedRecord& rec : loaded) {
    json c;
    c["sweep_index"] = rec.sweep_index;
    if (rec.has_sweep) c["sweep_value"] = rec.sweep_value;
    else c["sweep_value"] = nullptr;
    c["seed_index"] = rec.seed_index;
    c["run_seed"] = rec.record.seed;
    c["status"] = rec.record.status;
    c["abort_iteration"] = rec.record.abort_iteration;
    c["rollouts"] = rec.record.total_rollouts;
    c["eval_rollouts"] = rec.record.total_eval_rollouts;
    c["iterations"] = rec.record.iterations.size();
    cells.push_back(std::move(c));
  }

  json aggregates;
  for (const RecordGroup& group : group_by_sweep(loaded)) {
    std::vector<RunRecord> records;
    records.reserve(group.records.size());
    for (const LoadedRecord& r : group.records)
      if (!r.record.iterations.empty()) records.push_back(r.record);
    if (records.empty()) continue;
    json entry;
    if (group.has_sweep) entry["sweep_value"] = group.sweep_value;
    else entry["sweep_value"] = nullptr;
    json series_json;
    for (const auto& [name, series] : aggregate(records))
      series_json[name] = series_to_json(series);
    entry["series"] = std::move(series_json);

    // Optional accuracy/violation bound report from user-supplied estimates.
    if (cfg.bound_report) {
      double omega = cfg.omega;
      if (cfg.sweep && cfg.sweep->parameter == "omega" && group.has_sweep)
        omega = group.sweep_value;
      const GapBounds bounds = regularization_gap_bounds(
          cfg.bound_report->epsilon, omega, cfg.bound_report->lambda0_norm);
      std::ifstream in(fs::path(dir) /
                       (cell_stem(group.records.front().sweep_index,
                                  group.records.front().seed_index) +
                        ".jsonl"));
      std::string first;
      std::getline(in, first);
      const VectorXd thresholds =
          vec_from_json(json::parse(first).at("thresholds"));
      entry["bound_report"] = {
          {"epsilon", cfg.bound_report->epsilon},
          {"lambda0_norm", cfg.bound_report->lambda0_norm},
          {"lambda0_norm_source", "user_supplied"},
          {"omega", omega},
          {"objective_gap_bound", bounds.objective_gap},
          {"constraint_violation_bound", bounds.constraint_violation},
          {"conservative_thresholds",
           vec_to_json(conservative_thresholds(thresholds,
                                               cfg.bound_report->epsilon, omega,
                                               cfg.bound_report->lambda0_norm))}};
    }
    aggregates["sw" + std::to_string(group.sweep_index)] = std::move(entry);

    // Variance-bound audit per record, when the bound premise (unit per-step
    // costs) holds; the bound column is logged either way.
    for (const LoadedRecord& r : group.records) {
      if (r.record.iterations.empty()) continue;
      const bool unit_costs = [&] {
        std::ifstream in(fs::path(dir) /
                         (cell_stem(r.sweep_index, r.seed_index) + ".jsonl"));
        std::string first;
        std::getline(in, first);
        return json::parse(first).value("unit_cost_range", false);
      }();
      if (!unit_costs) continue;
      double worst = 0.0;
      for (const IterationLog& it : r.record.iterations)
        worst = std::max(worst, it.dual_variance);
      const double bound = r.record.iterations.front().dual_variance_bound;
      json check;
      check["name"] = "dual_gradient_variance_bound " +
                      cell_stem(r.sweep_index, r.seed_index);
      check["measured"] = worst;
      check["reference"] = bound;
      check["pass"] = worst <= bound;
      check["samples"] = r.record.iterations.size();
      checks.push_back(std::move(check));
    }
  }

  json summary;
  summary["experiment"] = experiment;
  summary["cells"] = std::move(cells);
  summary["aggregates"] = std::move(aggregates);
  summary["checks"] = std::move(checks);

  std::ofstream out(fs::path(dir) / "summary.json", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write summary under " + dir);
  out << summary.dump(1) << '\n';
}

}  // namespace

void write_summary_from_records(const std::string& dir) {
  const std::vector<LoadedRecord> loaded = load_records(dir);
  std::ifstream in(fs::path(dir) / (cell_stem(loaded.front().sweep_index,
                                              loaded.front().seed_index) +
                                    ".jsonl"));
  std::string first;
  std::getline(in, first);
  write_summary(dir, json::parse(first).at("experiment"), loaded);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentResult result;
  result.config = cfg;
  result.out_dir = resolve_output_dir(cfg.output_dir);
  fs::create_directories(result.out_dir);

  const int sweeps = cfg.sweep_size();
  const int total = sweeps * cfg.num_seeds;
  result.cells.resize(total);

  std::atomic<int> next{0};
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const int workers = std::min<int>(static_cast<int>(hw), total);

  const auto run_cell = [&](int index) {
    CellResult& cell = result.cells[index];
    cell.sweep_index = index / cfg.num_seeds;
    cell.seed_index = index % cfg.num_seeds;
    cell.has_sweep = cfg.sweep.has_value();
    if (cell.has_sweep) cell.sweep_value = cfg.sweep->values[cell.sweep_index];
    try {
      const RunConfig run = build_run_config(cfg, cell.sweep_index, cell.seed_index);
      cell.run_seed = run.seed;
      const std::unique_ptr<Environment> env = build_environment(cfg.environment);
      cell.record = run_cpg(*env, run);
      if (cfg.deployment_study && cfg.family == PolicyFamily::kLinear &&
          cell.record.status == "ok") {
        cell.gap_table = deterministic_gap(
            *env, cfg.mode, cell.record.avg_params,
            cfg.deployment_study->sigma_grid, cfg.deployment_study->rollouts,
            derive_seed({run.seed, 0xD5u}));
        if (cfg.deployment_study->lipschitz_l1 && !cell.record.iterations.empty()) {
          const double lambda_l1 =
              cell.record.iterations.back().lambda.lpNorm<1>();
          const int dim = cfg.mode == ExplorationMode::kParameterBased
                              ? static_cast<int>(cell.record.avg_params.size())
                              : env->spec().action_dim;
          apply_gap_envelope(cell.gap_table, lambda_l1,
                             *cfg.deployment_study->lipschitz_l1, dim);
        }
      }
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
      cell.record.status = "error";
    }

    const std::unique_ptr<Environment> env = build_environment(cfg.environment);
    const std::string stem = cell_stem(cell.sweep_index, cell.seed_index);
    write_record_jsonl(fs::path(result.out_dir) / (stem + ".jsonl"), cfg, cell,
                       env->spec().thresholds, env->spec().unit_cost_range);
    write_record_csv(fs::path(result.out_dir) / (stem + ".csv"), cell);
    if (!cell.gap_table.empty())
      write_deployment_csv(fs::path(result.out_dir) /
                               ("deployment_sw" + std::to_string(cell.sweep_index) +
                                "_seed" + std::to_string(cell.seed_index) + ".csv"),
                           cell.gap_table);
  };

  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      int index;
      while ((index = next.fetch_add(1)) < total) run_cell(index);
    });
  for (std::thread& t : pool) t.join();

  write_summary_from_records(result.out_dir);

  // Mirror the summary's audit checks into the in-memory result.
  for (const CellResult& cell : result.cells) {
    if (!cell.ok || cell.record.iterations.empty()) continue;
    const std::unique_ptr<Environment> env = build_environment(cfg.environment);
    if (!env->spec().unit_cost_range) continue;
    std::vector<double> measured;
    measured.reserve(cell.record.iterations.size());
    for (const IterationLog& it : cell.record.iterations)
      measured.push_back(it.dual_variance);
    CheckReport report = variance_bound_audit(
        measured, env->spec().gamma, env->spec().horizon,
        env->spec().num_constraints, cfg.batch_size,
        env->spec().cost_aggregation);
    report.name += " " + cell_stem(cell.sweep_index, cell.seed_index);
    result.checks.push_back(std::move(report));
  }
  return result;
}

}  // namespace cpg
