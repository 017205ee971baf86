// Experiment orchestration: executes the (sweep value, seed) run matrix in
// parallel, writes line-delimited record files with CSV mirrors, aggregates
// per-iteration series to mean +/- 95% confidence intervals, and emits
// columnar plot data.

#pragma once

#include <map>
#include <string>
#include <vector>

#include "cpg/config.hpp"
#include "cpg/diagnostics.hpp"

namespace cpg {

struct CellResult {
  int sweep_index = 0;
  int seed_index = 0;
  bool has_sweep = false;
  double sweep_value = 0.0;
  std::uint64_t run_seed = 0;
  bool ok = false;
  std::string error;
  RunRecord record;
  std::vector<GapRow> gap_table;  // deployment study, when configured
};

struct ExperimentResult {
  ExperimentConfig config;
  std::string out_dir;
  std::vector<CellResult> cells;
  std::vector<CheckReport> checks;

  bool all_ok() const;
};

// Applies the CPG_OUTPUT_ROOT environment variable, when set, as a prefix
// for relative output directories.
std::string resolve_output_dir(const std::string& configured);

// Runs every (sweep value, seed) cell, one record file per cell plus a
// summary document. Cell failures are recorded, not fatal to siblings.
// Reruns with the same config are byte-identical.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

struct SeriesPoint {
  double x = 0.0;        // iteration index
  double mean = 0.0;
  double half_width = 0.0;  // 95% CI half-width (0 when n = 1)
  int n = 0;             // seeds contributing at this iteration
};

// Quantity name ("J0", "J1", ..., "lambda1", ..., "lagrangian", "dual_var",
// "rollouts", "det_J0", ...) -> per-iteration series.
using AggregateSeries = std::map<std::string, std::vector<SeriesPoint>>;

// Pointwise mean and Student-t CI over records. Records must share the
// iteration grid; a NaN-aborted record contributes a prefix and lowers n
// from its abort point on.
AggregateSeries aggregate(const std::vector<RunRecord>& records);

// 97.5% Student-t quantile with `dof` degrees of freedom.
double student_t_975(int dof);

struct LoadedRecord {
  int sweep_index = 0;
  int seed_index = 0;
  bool has_sweep = false;
  double sweep_value = 0.0;
  RunRecord record;
};

// Reads every record_*.jsonl under `dir`, ordered by (sweep, seed).
std::vector<LoadedRecord> load_records(const std::string& dir);

enum class XAxis { kIterations, kRollouts };

// Writes a columnar text file for one quantity: x, mean, ci_low, ci_high,
// plus a constant threshold column for cost quantities. Besides the
// canonical series names, "return" / "det_return" (negated J0) and
// "cost<i>" / "det_cost<i>" (J<i> with threshold overlay) are accepted.
// Throws on an unknown quantity or an empty series; no file is written then.
void emit_plot_data(const AggregateSeries& series, const std::string& quantity,
                    const std::string& path, XAxis x, const VectorXd& thresholds);

// Recomputes the summary document (aggregates + variance audits) from the
// record files in `dir`.
void write_summary_from_records(const std::string& dir);

}  // namespace cpg
