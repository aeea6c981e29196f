#include "emv/chain.hpp"

#include <cmath>
#include <sstream>

#include "emv/error.hpp"

namespace emv {

RegimeChain RegimeChain::make(const Matrix2& P, double p0) {
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      if (!(P[i][j] >= 0.0 && P[i][j] <= 1.0)) {
        std::ostringstream msg;
        msg << "transition probability P" << i + 1 << j + 1 << " = " << P[i][j]
            << " outside [0,1]";
        throw ConfigError(msg.str());
      }
    }
    if (std::abs(P[i][0] + P[i][1] - 1.0) > 1e-12) {
      std::ostringstream msg;
      msg << "row " << i + 1 << " of the transition matrix sums to " << P[i][0] + P[i][1];
      throw ConfigError(msg.str());
    }
  }
  if (!(p0 > 0.0 && p0 < 1.0)) {
    throw ConfigError("initial regime probability p0 must lie in (0,1)");
  }
  return RegimeChain{P, p0};
}

int step_regime(int current, const RegimeChain& chain, Stream& rng) {
  const double stay = chain.P[current - 1][current - 1];
  if (rng.uniform() < stay) return current;
  return current == 1 ? 2 : 1;
}

int initial_regime(const RegimeChain& chain, Stream& rng) {
  return rng.bernoulli(chain.p0) ? 1 : 2;
}

}  // namespace emv
