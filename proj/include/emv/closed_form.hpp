#pragma once

// Analytic value functions and optimal Gaussian feedback policies for the
// entropy-regularized surplus problem with moment schedules.

#include <vector>

#include "emv/filter.hpp"
#include "emv/market.hpp"
#include "emv/moments.hpp"
#include "emv/policy.hpp"

namespace emv {

struct ProblemSpec {
  int T = 2520;          // periods
  double d = 8.0;        // target terminal surplus
  double w = 8.0;        // Lagrange multiplier
  double lambda = 2.0;   // exploration weight
  double x0 = 1.0;
  double l0 = 0.1;

  /// Throws ConfigError unless lambda > 0 and T >= 1.
  void validate() const;
};

struct FTerms {
  double F1 = 0.0;
  double F2 = 0.0;
};

/// F1 = B0 B1 - C^2,  F2 = A0 (B1 - A1^2) + A1 (B0 - A0^2),  C = A0 A1 - (B0 - A0^2).
FTerms f_terms(const MomentSet& m) noexcept;

struct ActionLaw {
  double mean = 0.0;
  double variance = 0.0;
};

/// prod_{k=from}^{n-1} y_k for every suffix, accumulated in log space with
/// sign and zero tracking so long horizons neither overflow nor underflow.
class SuffixProduct {
 public:
  SuffixProduct() = default;
  explicit SuffixProduct(const std::vector<double>& y);

  /// Empty products (from >= n) are 1.
  double operator()(int from) const;

 private:
  std::vector<double> log_abs_;
  std::vector<int> negatives_;
  std::vector<int> zeros_;
};

/// Every product and sum the closed form needs, precomputed once per schedule
/// in O(T) and queried in O(1).
class ScheduleTerms {
 public:
  explicit ScheduleTerms(const MomentSchedule& schedule);

  int horizon() const noexcept { return T_; }
  const MomentSet& at(int t) const { return schedule_.periods.at(t); }
  ScheduleFlavor flavor() const noexcept { return schedule_.flavor; }

  double prod_A2(int from) const { return pA2_(from); }
  double prod_B2(int from) const { return pB2_(from); }
  double prod_F1_over_B1(int from) const { return pF1B1_(from); }
  double prod_F2_over_B1(int from) const { return pF2B1_(from); }
  double prod_F2_over_F1(int from) const;
  double prod_B1_over_F1(int from) const;

  /// sum_{k=from}^{T-1} [ln(B1_k / (pi lambda)) + sum_{j>k} ln(F1_j / B1_j)]
  double log_term(int from, double lambda) const;
  /// sum_{k=from}^{T-1} (A1_k^2 / B1_k) prod_{j>k} F2_j^2 / (B1_j F1_j)
  double w_square_sum(int from) const;
  /// Same sum with each summand weighted by (prod_{j=k}^{T-1} A2_j)^2 prod_{j=from}^{k-1} B2_j.
  double l_square_sum(int from) const;

  /// Throws Error naming the offending period if F1_k <= 0 or B1_k <= 0 for some k >= from.
  void require_positive(int from) const;

 private:
  MomentSchedule schedule_;
  int T_ = 0;
  int last_bad_F1_ = -1;
  int last_bad_B1_ = -1;
  SuffixProduct pA2_, pB2_, pF1B1_, pF2B1_, pF2F1_, pB1F1_;
  std::vector<double> log_B1_, log_inner_, w_sum_, l_sum_;
};

/// Optimal Gaussian action at (t, x, l) for the given schedule.
ActionLaw optimal_policy(int t, double x, double l, const ScheduleTerms& terms,
                         const ProblemSpec& spec);
ActionLaw optimal_policy(int t, double x, double l, const MomentSchedule& schedule,
                         const ProblemSpec& spec);

/// Same law as optimal_policy, returned as affine coefficients in (x, l).
AffineGaussian optimal_affine(int t, const ScheduleTerms& terms, const ProblemSpec& spec);

/// optimal_policy on an expectation-based schedule; throws on any other flavor.
ActionLaw suboptimal_policy(int t, double x, double l, const ScheduleTerms& tilde_terms,
                            const ProblemSpec& spec);

/// Optimal affine law at t when the moments stay at m for all remaining periods.
/// Matches optimal_affine on a constant schedule up to rounding, without the O(T) setup.
AffineGaussian frozen_optimal_affine(int t, const MomentSet& m, const ProblemSpec& spec);

/// Exact value function of the optimal policy; t = T gives the terminal
/// function (x - l - w)^2 - (w - d)^2.
double value_function(int t, double x, double l, const ScheduleTerms& terms,
                      const ProblemSpec& spec);
double value_function(int t, double x, double l, const MomentSchedule& schedule,
                      const ProblemSpec& spec);

/// The five-term expression that propagates the (w + l prod A2)^2 term with
/// (E q)^2. It coincides with value_function when every q is deterministic.
double value_function_deterministic_liability(int t, double x, double l,
                                              const ScheduleTerms& terms,
                                              const ProblemSpec& spec);

/// E[J_{t+1}(x', l')] + lambda E[ln pi(u)] for u ~ N(mean, variance), with the
/// action integral by Gauss-Hermite quadrature and the return expectation
/// exact (independent two-point laws matching every first and second moment).
double one_step_objective(int t, double x, double l, double mean, double variance,
                          const ScheduleTerms& terms, const ProblemSpec& spec, int quad_order);

/// |one_step_objective at the optimal law - value_function(t)|; quad_order >= 5.
double bellman_residual(int t, double x, double l, const ScheduleTerms& terms,
                        const ProblemSpec& spec, int quad_order);
double bellman_residual(int t, double x, double l, const MomentSchedule& schedule,
                        const ProblemSpec& spec, int quad_order);

/// Complete-information policy: signal is the true regime; future moments
/// frozen at the current regime's values.
GaussianPolicy coemv_optimal_policy(const MarketModel& model, const ProblemSpec& spec);

/// Partial-information policy on the filtered signal; future moments frozen at
/// the current filtered moments.
GaussianPolicy poemv_optimal_policy(const MarketModel& model, const ProblemSpec& spec);

/// Partial-information policy without learning: signal is the deterministic
/// expectation-based (or unconditional) estimate, substituted into the mixture.
GaussianPolicy poemv_suboptimal_policy(const MarketModel& model, const ProblemSpec& spec,
                                       SignalKind signal = SignalKind::expectation);

}  // namespace emv
