#pragma once

#include <array>

#include "emv/rng.hpp"

namespace emv {

using Matrix2 = std::array<std::array<double, 2>, 2>;

/// Two-state homogeneous Markov chain; regimes are labelled 1 (bull) and 2 (bear).
struct RegimeChain {
  Matrix2 P{};     // P[i][j] = Prob(regime j+1 next | regime i+1 now)
  double p0 = 0.5; // Prob(regime 1 at t = 0)

  /// Throws ConfigError unless P is row-stochastic (1e-12) with entries in [0,1]
  /// and p0 lies in (0,1).
  static RegimeChain make(const Matrix2& P, double p0);

  double P11() const noexcept { return P[0][0]; }
  double P12() const noexcept { return P[0][1]; }
  double P21() const noexcept { return P[1][0]; }
  double P22() const noexcept { return P[1][1]; }
};

/// Draws the regime at t+1 given the regime at t.
int step_regime(int current, const RegimeChain& chain, Stream& rng);

/// Draws the initial regime: 1 with probability p0.
int initial_regime(const RegimeChain& chain, Stream& rng);

}  // namespace emv
