#include "emv/moments.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace emv {

MomentSet moments_from_marginals(double e0_mean, double e0_var, double e1_mean, double e1_var,
                                 double q_mean, double q_var) {
  MomentSet m;
  m.A0 = e0_mean;
  m.B0 = e0_var + e0_mean * e0_mean;
  m.A1 = e1_mean - e0_mean;
  // E[(e1 - e0)^2] with e0, e1 independent.
  m.B1 = (e1_var + e1_mean * e1_mean) - 2.0 * e0_mean * e1_mean + m.B0;
  m.A2 = q_mean;
  m.B2 = q_var + q_mean * q_mean;
  return m;
}

std::optional<std::string> moment_violation(const MomentSet& m, double tol) {
  auto below = [tol](double B, double A) {
    return B - A * A < -tol * std::max(1.0, std::abs(B));
  };
  std::ostringstream msg;
  msg.precision(17);
  if (!std::isfinite(m.A0) || !std::isfinite(m.B0) || !std::isfinite(m.A1) ||
      !std::isfinite(m.B1) || !std::isfinite(m.A2) || !std::isfinite(m.B2)) {
    return std::string("non-finite moment");
  }
  if (below(m.B0, m.A0)) {
    msg << "B0 = " << m.B0 << " < A0^2 = " << m.A0 * m.A0;
    return msg.str();
  }
  if (below(m.B1, m.A1)) {
    msg << "B1 = " << m.B1 << " < A1^2 = " << m.A1 * m.A1;
    return msg.str();
  }
  if (below(m.B2, m.A2)) {
    msg << "B2 = " << m.B2 << " < A2^2 = " << m.A2 * m.A2;
    return msg.str();
  }
  if (!(m.B1 > 0.0)) {
    msg << "B1 = " << m.B1 << " is not positive";
    return msg.str();
  }
  return std::nullopt;
}

}  // namespace emv
