#pragma once

#include <optional>
#include <string>

namespace emv {

/// First and second moments at one period of e0, (e1 - e0) and q.
struct MomentSet {
  double A0 = 1.0, B0 = 1.0;  // e0
  double A1 = 0.0, B1 = 1.0;  // e1 - e0
  double A2 = 1.0, B2 = 1.0;  // q

  /// E[e0 * (e1 - e0)] when e0 and e1 are independent.
  double cross() const noexcept { return A0 * A1 - (B0 - A0 * A0); }
};

/// Builds a MomentSet from independent per-asset means and variances.
MomentSet moments_from_marginals(double e0_mean, double e0_var, double e1_mean, double e1_var,
                                 double q_mean, double q_var);

/// Describes the first violated invariant (B >= A^2 for each pair, B1 > 0), if any.
std::optional<std::string> moment_violation(const MomentSet& m, double tol = 1e-14);

}  // namespace emv
