#pragma once

#include <functional>
#include <string_view>

namespace emv {

enum class PolicyKind { coemv_opt, poemv_opt, poemv_sub, learned, custom };

/// What the policy conditions on besides (t, x, l).
///   regime        true regime index 1|2 (complete information)
///   filter        filtered probability p_hat_t
///   expectation   E[regime_t] in [1,2]
///   unconditional Prob(regime_t = 1)
enum class SignalKind { regime, filter, expectation, unconditional };

std::string_view to_string(PolicyKind k);
std::string_view to_string(SignalKind k);
PolicyKind policy_kind_from_string(std::string_view s);
SignalKind signal_kind_from_string(std::string_view s);

/// Normal action density whose mean is affine in (x, l).
struct AffineGaussian {
  double coef_x = 0.0;
  double coef_l = 0.0;
  double intercept = 0.0;
  double variance = 0.0;

  double mean(double x, double l) const noexcept { return coef_x * x + coef_l * l + intercept; }
};

/// Feedback rule (t, x, l, signal) -> N(mean, variance). Every policy in the
/// library (closed form, improved, learned) is affine in (x, l), so the rule
/// returns coefficients for a given (t, signal).
class GaussianPolicy {
 public:
  using Rule = std::function<AffineGaussian(int t, double signal)>;

  GaussianPolicy(PolicyKind kind, SignalKind signal, Rule rule)
      : kind_(kind), signal_(signal), rule_(std::move(rule)) {}

  AffineGaussian at(int t, double signal) const { return rule_(t, signal); }
  double mean(int t, double x, double l, double signal) const { return at(t, signal).mean(x, l); }
  double variance(int t, double signal) const { return at(t, signal).variance; }

  PolicyKind kind() const noexcept { return kind_; }
  SignalKind signal() const noexcept { return signal_; }

 private:
  PolicyKind kind_;
  SignalKind signal_;
  Rule rule_;
};

}  // namespace emv
