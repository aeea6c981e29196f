#include "emv/quadrature.hpp"

#include <algorithm>
#include <cmath>

#include "emv/error.hpp"

namespace emv {

HermiteRule gauss_hermite(int order) {
  if (order < 1) throw Error("gauss_hermite: order must be positive");
  const int n = order;
  HermiteRule r;
  r.nodes.assign(n, 0.0);
  r.weights.assign(n, 0.0);
  constexpr double pim4 = 0.75112554446494248286;  // pi^(-1/4)
  const int half = (n + 1) / 2;
  double z = 0.0;
  for (int i = 0; i < half; ++i) {
    // Starting guesses for the largest roots, then extrapolation from the previous two.
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * r.nodes[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * r.nodes[1];
    } else {
      z = 2.0 * z - r.nodes[i - 2];
    }
    double pp = 0.0;
    int it = 0;
    for (; it < 100; ++it) {
      double p1 = pim4, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 3e-14 * std::max(1.0, std::abs(z))) break;
    }
    if (it == 100) throw Error("gauss_hermite: Newton iteration did not converge");
    r.nodes[i] = z;
    r.nodes[n - 1 - i] = -z;
    r.weights[i] = r.weights[n - 1 - i] = 2.0 / (pp * pp);
  }
  if (n % 2 == 1) r.nodes[n / 2] = 0.0;
  return r;
}

}  // namespace emv
