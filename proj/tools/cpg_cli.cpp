// Experiment CLI: run / validate / aggregate / plotdata / check.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <nlohmann/json.hpp>

#include "cpg/checks.hpp"
#include "cpg/harness.hpp"

namespace fs = std::filesystem;

namespace {

void print_report(const cpg::CheckReport& r) {
  std::printf("[%s] %-45s measured=%.6g reference=%.6g samples=%ld\n",
              r.pass ? "PASS" : "FAIL", r.name.c_str(), r.measured, r.reference,
              r.samples);
}

int cmd_run(const std::string& config_path) {
  const cpg::ExperimentConfig cfg = cpg::load_config(config_path);
  const cpg::ExperimentResult result = cpg::run_experiment(cfg);
  for (const cpg::CellResult& cell : result.cells) {
    std::printf("cell sw%d seed%d: %s%s%s\n", cell.sweep_index, cell.seed_index,
                cell.ok ? cell.record.status.c_str() : "error",
                cell.error.empty() ? "" : " - ", cell.error.c_str());
  }
  for (const cpg::CheckReport& check : result.checks) print_report(check);
  std::printf("records and summary written to %s\n", result.out_dir.c_str());
  if (!result.all_ok()) {
    std::fprintf(stderr, "run finished with failures\n");
    return 1;
  }
  return 0;
}

int cmd_validate(const std::string& config_path) {
  const cpg::ExperimentConfig cfg = cpg::load_config(config_path);
  std::printf("OK: %s (%d sweep value%s x %d seed%s, %d iterations, batch %d)\n",
              cfg.name.c_str(), cfg.sweep_size(), cfg.sweep_size() == 1 ? "" : "s",
              cfg.num_seeds, cfg.num_seeds == 1 ? "" : "s", cfg.iterations,
              cfg.batch_size);
  return 0;
}

int cmd_aggregate(const std::string& dir) {
  cpg::write_summary_from_records(dir);
  std::printf("summary.json rewritten under %s\n", dir.c_str());
  return 0;
}

int cmd_plotdata(const std::string& dir, const std::string& quantity,
                 const std::string& x_axis, const std::string& out_dir) {
  const cpg::XAxis x = x_axis == "rollouts" ? cpg::XAxis::kRollouts
                                            : cpg::XAxis::kIterations;
  const auto loaded = cpg::load_records(dir);

  // Thresholds come from the record headers.
  std::ifstream first_file;
  cpg::VectorXd thresholds;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".jsonl" &&
        entry.path().filename().string().rfind("record_", 0) == 0) {
      std::ifstream in(entry.path());
      std::string line;
      std::getline(in, line);
      const auto j = nlohmann::json::parse(line);
      const auto& t = j.at("thresholds");
      thresholds.resize(t.size());
      for (std::size_t i = 0; i < t.size(); ++i)
        thresholds[static_cast<long>(i)] = t[i].get<double>();
      break;
    }
  }

  std::map<int, std::vector<cpg::RunRecord>> by_sweep;
  for (const auto& rec : loaded)
    if (!rec.record.iterations.empty())
      by_sweep[rec.sweep_index].push_back(rec.record);

  const std::string target = out_dir.empty() ? dir : out_dir;
  fs::create_directories(target);
  for (const auto& [sweep_index, records] : by_sweep) {
    const cpg::AggregateSeries series = cpg::aggregate(records);
    const std::string path = (fs::path(target) /
                              ("plot_" + quantity + "_sw" +
                               std::to_string(sweep_index) + ".dat"))
                                 .string();
    cpg::emit_plot_data(series, quantity, path, x, thresholds);
    std::printf("wrote %s\n", path.c_str());
  }
  return 0;
}

int cmd_check(std::uint64_t seed, long samples) {
  const auto reports = cpg::run_diagnostics_suite(seed, samples);
  bool all = true;
  for (const cpg::CheckReport& r : reports) {
    print_report(r);
    all = all && r.pass;
  }
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained policy-gradient experiment harness"};
  app.require_subcommand(1);

  std::string config_path, dir, quantity, x_axis = "iterations", out_dir;
  std::uint64_t seed = 20240917;
  long samples = 100000;

  CLI::App* run = app.add_subcommand("run", "Run an experiment config");
  run->add_option("config", config_path, "experiment config file")->required();

  CLI::App* validate = app.add_subcommand("validate", "Validate a config");
  validate->add_option("config", config_path, "experiment config file")->required();

  CLI::App* agg = app.add_subcommand("aggregate", "Recompute the summary from records");
  agg->add_option("dir", dir, "directory with record files")->required();

  CLI::App* plot = app.add_subcommand("plotdata", "Emit columnar plot data");
  plot->add_option("dir", dir, "directory with record files")->required();
  plot->add_option("--quantity", quantity, "logged quantity to plot")->required();
  plot->add_option("--x", x_axis, "x axis: iterations or rollouts")
      ->check(CLI::IsMember({"iterations", "rollouts"}));
  plot->add_option("--out", out_dir, "output directory (default: record dir)");

  CLI::App* check = app.add_subcommand("check", "Run the diagnostics suite");
  check->add_option("--seed", seed, "diagnostics seed");
  check->add_option("--samples", samples, "Monte-Carlo sample count");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path);
    if (validate->parsed()) return cmd_validate(config_path);
    if (agg->parsed()) return cmd_aggregate(dir);
    if (plot->parsed()) return cmd_plotdata(dir, quantity, x_axis, out_dir);
    if (check->parsed()) return cmd_check(seed, samples);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
