#pragma once

#include <cmath>
#include <vector>

namespace emv {

/// Gauss-Hermite rule for the weight exp(-z^2): sum_i weight_i f(node_i)
/// integrates polynomials of degree < 2 * order exactly.
struct HermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Nodes by Newton iteration on the orthonormal Hermite recurrence. order >= 1.
HermiteRule gauss_hermite(int order);

/// E[f(U)] for U ~ N(mean, variance) with the given rule.
template <class F>
double gaussian_expectation(const HermiteRule& rule, double mean, double variance, F&& f) {
  constexpr double inv_sqrt_pi = 0.56418958354775628695;
  const double scale = variance > 0.0 ? std::sqrt(2.0 * variance) : 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    acc += rule.weights[i] * f(mean + scale * rule.nodes[i]);
  }
  return acc * inv_sqrt_pi;
}

}  // namespace emv
