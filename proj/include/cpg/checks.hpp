// Runnable diagnostics: small enumerable environments with known exact
// gradients, Monte-Carlo unbiasedness checks against those oracles, and the
// full suite behind the CLI `check` verb.

#pragma once

#include <memory>

#include "cpg/diagnostics.hpp"
#include "cpg/estimators.hpp"

namespace cpg {

// One-step bandit: a single state, one action per entry of the cost tables,
// reward -objective_costs[a] and constraint cost constraint_costs[a]. The
// exact gradient of any J_i is computable by enumerating the action set.
std::unique_ptr<Environment> make_bandit_env(const VectorXd& objective_costs,
                                             const VectorXd& constraint_costs,
                                             double threshold);

// One-step scalar environment whose constraint cost equals the action, so
// with a linear deterministic policy theta (1x1) acting on the fixed state
// s = 1 the trajectory cost is exactly theta.
std::unique_ptr<Environment> make_scalar_identity_env();

// GPOMDP on the two-action softmax bandit against the enumeration oracle
// sum_a pi(a) score(a) c(a); passes within 4 standard errors.
CheckReport gpomdp_bandit_unbiasedness(long num_samples, std::uint64_t seed);

// PGPE on the scalar identity-cost model against the analytic value
// E[(theta - rho) theta / sigma^2] = 1; passes within 4 standard errors.
CheckReport pgpe_identity_unbiasedness(long num_samples, std::uint64_t seed);

// Finite-difference probes, score identities, the unbiasedness oracles, a
// deliberately corrupted negative control, and a variance audit on a short
// grid-world run.
std::vector<CheckReport> run_diagnostics_suite(std::uint64_t seed,
                                               long mc_samples = 100000);

}  // namespace cpg
