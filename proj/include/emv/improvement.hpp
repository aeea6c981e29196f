#pragma once

// Policy evaluation and policy improvement for affine Gaussian feedback
// policies under a deterministic moment schedule.

#include <vector>

#include "emv/closed_form.hpp"
#include "emv/policy.hpp"
#include "emv/rng.hpp"

namespace emv {

/// J(x, l) = xx x^2 + xl x l + ll l^2 + x x + l l + c, for a fixed multiplier w.
struct QuadraticValue {
  double xx = 0.0, xl = 0.0, ll = 0.0, x = 0.0, l = 0.0, c = 0.0;

  double operator()(double xv, double lv) const noexcept {
    return xx * xv * xv + xl * xv * lv + ll * lv * lv + x * xv + l * lv + c;
  }
};

/// Terminal objective (x - l - w)^2 - (w - d)^2 as a QuadraticValue.
QuadraticValue terminal_value(const ProblemSpec& spec);

/// Initial admissible family: mean (g1/g2)(g0 x - h1[T-t-1] (w + l f1[T-t])) and
/// variance lambda h2[T-t-1] / (2 g2). g* are indexed by period (size T), the
/// h* and f* by remaining horizon (size T+1); index 0 is normalized to 1.
/// h3 and f2 enter only the state-free offset and are carried for completeness.
struct InitialPolicyFamily {
  std::vector<double> g0, g1, g2;
  std::vector<double> h1, h2, h3, f1, f2;

  /// Throws Error unless sizes match T, g2 > 0, h2 > 0 and the index-0 normalization holds.
  void validate(int T) const;

  std::vector<AffineGaussian> policy(const ProblemSpec& spec) const;

  /// Random valid family; values stay within a factor of a few of the optimum's scale.
  static InitialPolicyFamily random(int T, Stream& rng);
};

/// Iterate n of the improvement scheme. objective[t] is the objective of
/// playing policy[t] at t and then following the previous iterate's
/// continuation at t+1, so it equals the exact objective of the sequence
/// (pi^n_t, pi^{n-1}_{t+1}, ..., pi^1_{t+n-1}, pi^0 from t+n on).
struct IteratedPolicy {
  int n = 0;
  std::vector<AffineGaussian> policy;     // t = 0 .. T-1
  std::vector<QuadraticValue> objective;  // t = 0 .. T
};

/// E[next(x', l')] + lambda E[ln pi] for the law p at period t, as a quadratic in (x, l).
QuadraticValue backup(int t, const AffineGaussian& p, const QuadraticValue& next,
                      const ScheduleTerms& terms, const ProblemSpec& spec);

/// Exact objective of an affine Gaussian policy by backward recursion.
std::vector<QuadraticValue> evaluate_policy(const std::vector<AffineGaussian>& policy,
                                            const ScheduleTerms& terms, const ProblemSpec& spec);

/// Minimizer of integral (B u^2 + 2 mu u + lambda ln pi) pi du over densities: N(-mu/B, lambda/(2B)).
ActionLaw gaussian_entropy_min(double B, double mu, double lambda);

/// The improved law at t given the objective of the current policy at t+1.
AffineGaussian improve_at(int t, const QuadraticValue& next, const ScheduleTerms& terms,
                          const ProblemSpec& spec);

IteratedPolicy make_iterated(std::vector<AffineGaussian> policy, const ScheduleTerms& terms,
                             const ProblemSpec& spec);

/// Improves every period against the current continuation: policy[t] becomes the
/// entropy-regularized minimizer of objective[t+1], and objective[t] its backup.
IteratedPolicy improve_once(const IteratedPolicy& current, const ScheduleTerms& terms,
                            const ProblemSpec& spec);

struct ConvergenceResult {
  IteratedPolicy final;
  int n_used = 0;
  std::vector<IteratedPolicy> trace;  // iterates 0 .. n_used
};

/// Improves until the laws at periods >= t move by less than 1e-12 (relative)
/// or n reaches T - t. Throws Error if the result is not a fixed point then.
ConvergenceResult iterate_to_convergence(const IteratedPolicy& initial, const ScheduleTerms& terms,
                                         const ProblemSpec& spec, int t);
ConvergenceResult iterate_to_convergence(const InitialPolicyFamily& initial,
                                         const ScheduleTerms& terms, const ProblemSpec& spec,
                                         int t);

/// Largest relative change of the four law parameters over periods >= t.
double policy_change(const std::vector<AffineGaussian>& a, const std::vector<AffineGaussian>& b,
                     int t);

/// Wraps a period-indexed affine sequence; the signal argument is ignored.
GaussianPolicy sequence_policy(std::vector<AffineGaussian> policy, SignalKind signal,
                               PolicyKind kind = PolicyKind::custom);

}  // namespace emv
