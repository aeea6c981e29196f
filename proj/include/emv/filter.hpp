#pragma once

// Hidden-regime estimation and the moment schedules that feed the policy
// formulas.

#include <array>
#include <string>
#include <vector>

#include "emv/chain.hpp"
#include "emv/moments.hpp"
#include "emv/policy.hpp"

namespace emv {

/// One step of the regime filter: P21 + p (P11 - P21).
double update_filter(double p_hat, const Matrix2& P) noexcept;

/// p_hat_1 .. p_hat_T by iterating update_filter from p0.
std::vector<double> filter_path(double p0, const Matrix2& P, int T);

/// Same values from the geometric-sum closed form.
std::vector<double> filter_path_closed_form(double p0, const Matrix2& P, int T);

/// n-step transition matrix by repeated squaring.
Matrix2 matrix_power(const Matrix2& P, unsigned long long n);

/// E[regime_t] = 1 * Prob(regime_t = 1) + 2 * Prob(regime_t = 2), in [1,2].
double expected_regime_signal(double p0, const Matrix2& P, int t);

/// Prob(regime_t = 1).
double regime_one_probability(double p0, const Matrix2& P, int t);

/// Moments under the signal-weighted law: means and second moments of e0 and q
/// mix linearly with weights (signal, 1 - signal); B1 uses the filtered cross
/// term  B1 = E[e1^2]_mix - 2 e1_hat e0_hat + B0_hat.
/// The signal is not restricted to [0,1]. Throws Error when B1 <= 0.
MomentSet filtered_moments(double signal, const std::array<MomentSet, 2>& regime_moments);

enum class ScheduleFlavor { regime_conditioned, filtered, expectation_based };

struct MomentSchedule {
  ScheduleFlavor flavor = ScheduleFlavor::regime_conditioned;
  std::vector<MomentSet> periods;          // t = 0 .. T-1
  std::vector<std::string> violations;     // invariant breaches found while building

  int horizon() const noexcept { return static_cast<int>(periods.size()); }
};

/// The same moments at every period.
MomentSchedule constant_schedule(const MomentSet& m, int T);

/// Filtered moments along the deterministic signal path of the given kind.
MomentSchedule signal_schedule(SignalKind kind, const RegimeChain& chain,
                               const std::array<MomentSet, 2>& regime_moments, int T);

/// Signal value at t for the deterministic kinds (filter uses p_hat_t with p_hat_0 = p0).
double deterministic_signal(SignalKind kind, const RegimeChain& chain, int t);

}  // namespace emv
