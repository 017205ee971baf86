// Numerical cross-checks shared by the test suite and the CLI `check` verb:
// finite-difference gradient validation, Monte-Carlo unbiasedness checks
// against exact oracles, and the dual-gradient variance-bound audit.

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cpg/cmdp.hpp"

namespace cpg {

struct CheckReport {
  std::string name;
  double measured = 0.0;   // worst-case observed quantity
  double reference = 0.0;  // bound or tolerance it is compared against
  bool pass = false;
  long samples = 0;
};

// Central-difference validation of an analytic gradient. Passes iff the
// worst per-coordinate deviation stays within 10 h^2 + 1e-8 relative.
CheckReport finite_diff_check(const std::string& name,
                              const std::function<double(const VectorXd&)>& f,
                              const VectorXd& analytic_grad,
                              const VectorXd& point, double h);

// Componentwise |mc_mean - exact| <= 4 standard errors. A zero standard
// error demands exact agreement.
CheckReport unbiasedness_check(const std::string& name, const VectorXd& mc_mean,
                               const VectorXd& mc_se, const VectorXd& exact);

// Audits a history of measured dual-gradient estimator variances (variance
// of the mean, i.e. row sample variance / N) against the bound
// U * J_max^2 / N with the aggregation-consistent J_max.
CheckReport variance_bound_audit(const std::vector<double>& measured,
                                 double gamma, long horizon, int num_constraints,
                                 int batch_size, CostAggregation agg);

}  // namespace cpg
