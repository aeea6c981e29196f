#include "emv/closed_form.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include "emv/error.hpp"
#include "emv/quadrature.hpp"

namespace emv {

void ProblemSpec::validate() const {
  if (T < 1) throw ConfigError("T must be at least one period");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be positive");
  if (!std::isfinite(d) || !std::isfinite(w)) throw ConfigError("d and w must be finite");
  if (!(x0 > 0.0)) throw ConfigError("x0 must be positive");
  if (!std::isfinite(l0)) throw ConfigError("l0 must be finite");
}

FTerms f_terms(const MomentSet& m) noexcept {
  const double c = m.cross();
  return {m.B0 * m.B1 - c * c, m.A0 * (m.B1 - m.A1 * m.A1) + m.A1 * (m.B0 - m.A0 * m.A0)};
}

SuffixProduct::SuffixProduct(const std::vector<double>& y) {
  const std::size_t n = y.size();
  log_abs_.assign(n + 1, 0.0);
  negatives_.assign(n + 1, 0);
  zeros_.assign(n + 1, 0);
  for (std::size_t k = n; k-- > 0;) {
    const bool zero = y[k] == 0.0;
    log_abs_[k] = log_abs_[k + 1] + (zero ? 0.0 : std::log(std::abs(y[k])));
    negatives_[k] = negatives_[k + 1] + (y[k] < 0.0 ? 1 : 0);
    zeros_[k] = zeros_[k + 1] + (zero ? 1 : 0);
  }
}

double SuffixProduct::operator()(int from) const {
  const int n = static_cast<int>(log_abs_.size()) - 1;
  if (from >= n) return 1.0;
  if (from < 0) throw Error("SuffixProduct: negative start index");
  if (zeros_[from] > 0) return 0.0;
  const double mag = std::exp(log_abs_[from]);
  return negatives_[from] % 2 == 0 ? mag : -mag;
}

ScheduleTerms::ScheduleTerms(const MomentSchedule& schedule)
    : schedule_(schedule), T_(schedule.horizon()) {
  if (T_ < 1) throw Error("ScheduleTerms: empty schedule");
  const auto n = static_cast<std::size_t>(T_);
  std::vector<double> A2(n), B2(n), F1B1(n), F2B1(n), F2F1(n), B1F1(n), G(n);
  std::vector<double> ln_F1B1(n);
  for (int t = 0; t < T_; ++t) {
    const MomentSet& m = schedule_.periods[t];
    const FTerms f = f_terms(m);
    if (!(f.F1 > 0.0)) last_bad_F1_ = t;
    if (!(m.B1 > 0.0)) last_bad_B1_ = t;
    A2[t] = m.A2;
    B2[t] = m.B2;
    F1B1[t] = f.F1 / m.B1;
    F2B1[t] = f.F2 / m.B1;
    F2F1[t] = f.F2 / f.F1;
    B1F1[t] = m.B1 / f.F1;
    G[t] = f.F2 * f.F2 / (m.B1 * f.F1);
    ln_F1B1[t] = std::log(F1B1[t]);
  }
  pA2_ = SuffixProduct(A2);
  pB2_ = SuffixProduct(B2);
  pF1B1_ = SuffixProduct(F1B1);
  pF2B1_ = SuffixProduct(F2B1);
  pF2F1_ = SuffixProduct(F2F1);
  pB1F1_ = SuffixProduct(B1F1);
  const SuffixProduct pG(G);

  std::vector<double> inner(n + 1, 0.0);  // sum_{j>=a} ln(F1_j / B1_j)
  log_B1_.assign(n + 1, 0.0);
  log_inner_.assign(n + 1, 0.0);
  w_sum_.assign(n + 1, 0.0);
  l_sum_.assign(n + 1, 0.0);
  for (int t = T_ - 1; t >= 0; --t) {
    const MomentSet& m = schedule_.periods[t];
    inner[t] = inner[t + 1] + ln_F1B1[t];
    log_B1_[t] = log_B1_[t + 1] + std::log(m.B1);
    log_inner_[t] = log_inner_[t + 1] + inner[t + 1];
    const double c = m.A1 * m.A1 / m.B1 * pG(t + 1);
    w_sum_[t] = w_sum_[t + 1] + c;
    const double pi_t = pA2_(t);
    l_sum_[t] = c * pi_t * pi_t + m.B2 * l_sum_[t + 1];
  }
}

void ScheduleTerms::require_positive(int from) const {
  if (last_bad_B1_ >= from) {
    std::ostringstream msg;
    msg << "B1 is not positive at period k=" << last_bad_B1_;
    throw Error(msg.str());
  }
  if (last_bad_F1_ >= from) {
    std::ostringstream msg;
    msg << "F1 is not positive at period k=" << last_bad_F1_;
    throw Error(msg.str());
  }
}

double ScheduleTerms::prod_F2_over_F1(int from) const {
  require_positive(from);
  return pF2F1_(from);
}

double ScheduleTerms::prod_B1_over_F1(int from) const {
  require_positive(from);
  return pB1F1_(from);
}

double ScheduleTerms::log_term(int from, double lambda) const {
  require_positive(from);
  if (from >= T_) return 0.0;
  return log_B1_[from] - (T_ - from) * std::log(std::numbers::pi * lambda) + log_inner_[from];
}

double ScheduleTerms::w_square_sum(int from) const {
  if (from >= T_) return 0.0;
  require_positive(from);
  return w_sum_[from];
}

double ScheduleTerms::l_square_sum(int from) const {
  if (from >= T_) return 0.0;
  require_positive(from);
  return l_sum_[from];
}

namespace {

void check_time(int t, int T, bool allow_terminal) {
  const int hi = allow_terminal ? T : T - 1;
  if (t < 0 || t > hi) {
    std::ostringstream msg;
    msg << "period t=" << t << " outside [0," << hi << "]";
    throw Error(msg.str());
  }
}

void check_horizon(const ScheduleTerms& terms, const ProblemSpec& spec) {
  if (terms.horizon() != spec.T) {
    std::ostringstream msg;
    msg << "schedule length " << terms.horizon() << " does not match T=" << spec.T;
    throw Error(msg.str());
  }
}

}  // namespace

AffineGaussian optimal_affine(int t, const ScheduleTerms& terms, const ProblemSpec& spec) {
  check_horizon(terms, spec);
  check_time(t, spec.T, false);
  const MomentSet& m = terms.at(t);
  if (!(m.B1 > 0.0)) {
    std::ostringstream msg;
    msg << "B1 is not positive at period k=" << t;
    throw Error(msg.str());
  }
  const double k = m.A1 / m.B1 * terms.prod_F2_over_F1(t + 1);
  AffineGaussian g;
  g.coef_x = -m.cross() / m.B1;
  g.coef_l = k * terms.prod_A2(t);
  g.intercept = k * spec.w;
  g.variance = spec.lambda / (2.0 * m.B1) * terms.prod_B1_over_F1(t + 1);
  return g;
}

ActionLaw optimal_policy(int t, double x, double l, const ScheduleTerms& terms,
                         const ProblemSpec& spec) {
  const AffineGaussian g = optimal_affine(t, terms, spec);
  return {g.mean(x, l), g.variance};
}

ActionLaw optimal_policy(int t, double x, double l, const MomentSchedule& schedule,
                         const ProblemSpec& spec) {
  return optimal_policy(t, x, l, ScheduleTerms(schedule), spec);
}

ActionLaw suboptimal_policy(int t, double x, double l, const ScheduleTerms& tilde_terms,
                            const ProblemSpec& spec) {
  if (tilde_terms.flavor() != ScheduleFlavor::expectation_based) {
    throw Error("suboptimal_policy needs an expectation-based schedule");
  }
  return optimal_policy(t, x, l, tilde_terms, spec);
}

AffineGaussian frozen_optimal_affine(int t, const MomentSet& m, const ProblemSpec& spec) {
  check_time(t, spec.T, false);
  const FTerms f = f_terms(m);
  if (!(m.B1 > 0.0)) throw Error("frozen moments: B1 is not positive");
  const int future = spec.T - t - 1;
  if (future > 0 && !(f.F1 > 0.0)) throw Error("frozen moments: F1 is not positive");
  const double k = m.A1 / m.B1 * (future > 0 ? std::pow(f.F2 / f.F1, future) : 1.0);
  AffineGaussian g;
  g.coef_x = -m.cross() / m.B1;
  g.coef_l = k * std::pow(m.A2, spec.T - t);
  g.intercept = k * spec.w;
  g.variance =
      spec.lambda / (2.0 * m.B1) * (future > 0 ? std::pow(m.B1 / f.F1, future) : 1.0);
  return g;
}

namespace {

double terminal_value(double x, double l, const ProblemSpec& spec) {
  const double gap = x - l - spec.w;
  return gap * gap - (spec.w - spec.d) * (spec.w - spec.d);
}

// Everything in the value function except the terms quadratic in (w, l) that
// come from the W^2 sum.
double value_common(int t, double x, double l, const ScheduleTerms& terms,
                    const ProblemSpec& spec) {
  const double w = spec.w, d = spec.d;
  const double pi_t = terms.prod_A2(t);
  const double W = w + l * pi_t;
  return 0.5 * spec.lambda * terms.log_term(t, spec.lambda) + terms.prod_F1_over_B1(t) * x * x -
         2.0 * terms.prod_F2_over_B1(t) * W * x + 2.0 * pi_t * w * l +
         terms.prod_B2(t) * l * l - d * d + 2.0 * w * d;
}

}  // namespace

double value_function(int t, double x, double l, const ScheduleTerms& terms,
                      const ProblemSpec& spec) {
  check_horizon(terms, spec);
  check_time(t, spec.T, true);
  if (t == spec.T) return terminal_value(x, l, spec);
  terms.require_positive(t);
  const double w = spec.w;
  const double s = terms.w_square_sum(t);
  return value_common(t, x, l, terms, spec) - s * (w * w + 2.0 * w * l * terms.prod_A2(t)) -
         terms.l_square_sum(t) * l * l;
}

double value_function(int t, double x, double l, const MomentSchedule& schedule,
                      const ProblemSpec& spec) {
  return value_function(t, x, l, ScheduleTerms(schedule), spec);
}

double value_function_deterministic_liability(int t, double x, double l,
                                              const ScheduleTerms& terms,
                                              const ProblemSpec& spec) {
  check_horizon(terms, spec);
  check_time(t, spec.T, true);
  if (t == spec.T) return terminal_value(x, l, spec);
  terms.require_positive(t);
  const double W = spec.w + l * terms.prod_A2(t);
  return value_common(t, x, l, terms, spec) - terms.w_square_sum(t) * W * W;
}

double one_step_objective(int t, double x, double l, double mean, double variance,
                          const ScheduleTerms& terms, const ProblemSpec& spec, int quad_order) {
  check_horizon(terms, spec);
  check_time(t, spec.T, false);
  if (!(variance > 0.0)) throw Error("one_step_objective: variance must be positive");
  const MomentSet& m = terms.at(t);
  const double m1 = m.A0 + m.A1;
  const double var0 = m.B0 - m.A0 * m.A0;
  const double var1 = m.B1 + 2.0 * m.A0 * m1 - m.B0 - m1 * m1;
  const double var2 = m.B2 - m.A2 * m.A2;
  const double tol = 1e-14;
  if (var0 < -tol || var1 < -tol || var2 < -tol) {
    throw Error("one_step_objective: moments at t are not realizable by independent returns");
  }
  const double s0 = std::sqrt(std::max(var0, 0.0));
  const double s1 = std::sqrt(std::max(var1, 0.0));
  const double s2 = std::sqrt(std::max(var2, 0.0));
  const std::array<double, 2> e0{m.A0 - s0, m.A0 + s0};
  const std::array<double, 2> e1{m1 - s1, m1 + s1};
  const std::array<double, 2> q{m.A2 - s2, m.A2 + s2};

  const HermiteRule rule = gauss_hermite(quad_order);
  const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * variance);
  auto integrand = [&](double u) {
    double next = 0.0;
    for (double a : e0)
      for (double b : e1)
        for (double c : q) next += value_function(t + 1, a * x + (b - a) * u, c * l, terms, spec);
    const double z = u - mean;
    return 0.125 * next + spec.lambda * (log_norm - z * z / (2.0 * variance));
  };
  return gaussian_expectation(rule, mean, variance, integrand);
}

double bellman_residual(int t, double x, double l, const ScheduleTerms& terms,
                        const ProblemSpec& spec, int quad_order) {
  if (quad_order < 5) throw Error("bellman_residual: quad_order must be at least 5");
  const ActionLaw law = optimal_policy(t, x, l, terms, spec);
  const double rhs = one_step_objective(t, x, l, law.mean, law.variance, terms, spec, quad_order);
  return std::abs(rhs - value_function(t, x, l, terms, spec));
}

double bellman_residual(int t, double x, double l, const MomentSchedule& schedule,
                        const ProblemSpec& spec, int quad_order) {
  return bellman_residual(t, x, l, ScheduleTerms(schedule), spec, quad_order);
}

GaussianPolicy coemv_optimal_policy(const MarketModel& model, const ProblemSpec& spec) {
  const std::array<MomentSet, 2> rm{model.moments(1), model.moments(2)};
  return GaussianPolicy(PolicyKind::coemv_opt, SignalKind::regime,
                        [rm, spec](int t, double regime) {
                          if (regime != 1.0 && regime != 2.0) {
                            throw Error("complete-information policy needs regime 1 or 2");
                          }
                          return frozen_optimal_affine(t, rm[regime == 1.0 ? 0 : 1], spec);
                        });
}

GaussianPolicy poemv_optimal_policy(const MarketModel& model, const ProblemSpec& spec) {
  const std::array<MomentSet, 2> rm{model.moments(1), model.moments(2)};
  return GaussianPolicy(PolicyKind::poemv_opt, SignalKind::filter,
                        [rm, spec](int t, double p) {
                          return frozen_optimal_affine(t, filtered_moments(p, rm), spec);
                        });
}

GaussianPolicy poemv_suboptimal_policy(const MarketModel& model, const ProblemSpec& spec,
                                       SignalKind signal) {
  if (signal == SignalKind::regime || signal == SignalKind::filter) {
    throw ConfigError("suboptimal policy signal must be expectation or unconditional");
  }
  const std::array<MomentSet, 2> rm{model.moments(1), model.moments(2)};
  return GaussianPolicy(PolicyKind::poemv_sub, signal, [rm, spec](int t, double p) {
    return frozen_optimal_affine(t, filtered_moments(p, rm), spec);
  });
}

}  // namespace emv
