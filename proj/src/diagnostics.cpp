#include "cpg/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cpg {

CheckReport finite_diff_check(const std::string& name,
                              const std::function<double(const VectorXd&)>& f,
                              const VectorXd& analytic_grad,
                              const VectorXd& point, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_check: h must be positive");
  if (analytic_grad.size() != point.size())
    throw std::invalid_argument("finite_diff_check: gradient/point size mismatch");

  CheckReport report;
  report.name = name;
  report.samples = point.size();
  report.pass = true;
  double worst = 0.0;
  double worst_tol = 0.0;
  VectorXd x = point;
  for (int i = 0; i < point.size(); ++i) {
    const double xi = x[i];
    x[i] = xi + h;
    const double fp = f(x);
    x[i] = xi - h;
    const double fm = f(x);
    x[i] = xi;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::runtime_error("finite_diff_check: non-finite evaluation");
    const double fd = (fp - fm) / (2.0 * h);
    const double dev = std::abs(fd - analytic_grad[i]);
    const double tol = 10.0 * h * h + 1e-8 * std::max(1.0, std::abs(analytic_grad[i]));
    if (dev > worst) {
      worst = dev;
      worst_tol = tol;
    }
    if (dev > tol) report.pass = false;
  }
  report.measured = worst;
  report.reference = worst_tol;
  return report;
}

CheckReport unbiasedness_check(const std::string& name, const VectorXd& mc_mean,
                               const VectorXd& mc_se, const VectorXd& exact) {
  if (mc_mean.size() != exact.size() || mc_se.size() != exact.size())
    throw std::invalid_argument("unbiasedness_check: size mismatch");
  CheckReport report;
  report.name = name;
  report.samples = mc_mean.size();
  report.pass = true;
  double worst_ratio = 0.0;
  for (int i = 0; i < exact.size(); ++i) {
    const double dev = std::abs(mc_mean[i] - exact[i]);
    const double limit = 4.0 * mc_se[i];
    if (mc_se[i] == 0.0) {
      if (dev != 0.0) report.pass = false;
      continue;
    }
    worst_ratio = std::max(worst_ratio, dev / mc_se[i]);
    if (dev > limit) report.pass = false;
  }
  report.measured = worst_ratio;  // worst deviation in standard-error units
  report.reference = 4.0;
  return report;
}

CheckReport variance_bound_audit(const std::vector<double>& measured,
                                 double gamma, long horizon, int num_constraints,
                                 int batch_size, CostAggregation agg) {
  if (batch_size < 2)
    throw std::invalid_argument("variance_bound_audit: batch_size must be >= 2");
  const double jm = j_max_aggregated(gamma, horizon, agg);
  const double bound = num_constraints * jm * jm / batch_size;
  CheckReport report;
  report.name = "dual_gradient_variance_bound";
  report.reference = bound;
  report.samples = static_cast<long>(measured.size());
  report.measured = measured.empty()
                        ? 0.0
                        : *std::max_element(measured.begin(), measured.end());
  report.pass = report.measured <= bound;
  return report;
}

}  // namespace cpg
