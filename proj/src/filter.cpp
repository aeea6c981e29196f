#include "emv/filter.hpp"

#include <cmath>
#include <sstream>

#include "emv/error.hpp"

namespace emv {

double update_filter(double p_hat, const Matrix2& P) noexcept {
  return P[1][0] + p_hat * (P[0][0] - P[1][0]);
}

std::vector<double> filter_path(double p0, const Matrix2& P, int T) {
  if (T < 1) throw Error("filter_path: T must be at least 1");
  std::vector<double> out(static_cast<std::size_t>(T));
  double p = p0;
  for (int t = 0; t < T; ++t) out[t] = p = update_filter(p, P);
  return out;
}

std::vector<double> filter_path_closed_form(double p0, const Matrix2& P, int T) {
  if (T < 1) throw Error("filter_path_closed_form: T must be at least 1");
  const double c = P[0][0] - P[1][0];
  std::vector<double> out(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    // p_hat_{t+1} = P21 * sum_{k=0}^{t} c^k + p0 c^{t+1}
    const double ct1 = std::pow(c, t + 1);
    const double geo = c == 1.0 ? static_cast<double>(t + 1) : (1.0 - ct1) / (1.0 - c);
    out[t] = P[1][0] * geo + p0 * ct1;
  }
  return out;
}

Matrix2 matrix_power(const Matrix2& P, unsigned long long n) {
  auto mul = [](const Matrix2& a, const Matrix2& b) {
    Matrix2 r{};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
    return r;
  };
  Matrix2 result{{{1.0, 0.0}, {0.0, 1.0}}};
  Matrix2 base = P;
  while (n > 0) {
    if (n & 1ULL) result = mul(result, base);
    base = mul(base, base);
    n >>= 1;
  }
  return result;
}

double expected_regime_signal(double p0, const Matrix2& P, int t) {
  if (t < 0) throw Error("expected_regime_signal: t must be nonnegative");
  const Matrix2 M = matrix_power(P, static_cast<unsigned long long>(t));
  return (M[0][0] + 2.0 * M[0][1]) * p0 + (M[1][0] + 2.0 * M[1][1]) * (1.0 - p0);
}

double regime_one_probability(double p0, const Matrix2& P, int t) {
  if (t < 0) throw Error("regime_one_probability: t must be nonnegative");
  const Matrix2 M = matrix_power(P, static_cast<unsigned long long>(t));
  return M[0][0] * p0 + M[1][0] * (1.0 - p0);
}

MomentSet filtered_moments(double signal, const std::array<MomentSet, 2>& rm) {
  if (!std::isfinite(signal)) throw Error("filtered_moments: non-finite signal");
  const double s = signal, r = 1.0 - signal;
  auto mix = [s, r](double a, double b) { return s * a + r * b; };
  const double m1_1 = rm[0].A0 + rm[0].A1, m1_2 = rm[1].A0 + rm[1].A1;
  const double sq1_1 = rm[0].B1 + 2.0 * rm[0].A0 * m1_1 - rm[0].B0;
  const double sq1_2 = rm[1].B1 + 2.0 * rm[1].A0 * m1_2 - rm[1].B0;

  MomentSet m;
  m.A0 = mix(rm[0].A0, rm[1].A0);
  m.B0 = mix(rm[0].B0, rm[1].B0);
  const double e1 = mix(m1_1, m1_2);
  m.A1 = e1 - m.A0;
  m.B1 = mix(sq1_1, sq1_2) - 2.0 * e1 * m.A0 + m.B0;
  m.A2 = mix(rm[0].A2, rm[1].A2);
  m.B2 = mix(rm[0].B2, rm[1].B2);
  // Degenerate weights reproduce the inputs bit for bit.
  if (signal == 1.0) m = rm[0];
  if (signal == 0.0) m = rm[1];
  if (!(m.B1 > 0.0)) {
    std::ostringstream msg;
    msg << "filtered_moments: B1 = " << m.B1 << " <= 0 at signal " << signal;
    throw Error(msg.str());
  }
  return m;
}

MomentSchedule constant_schedule(const MomentSet& m, int T) {
  if (T < 1) throw Error("constant_schedule: T must be at least 1");
  MomentSchedule s;
  s.flavor = ScheduleFlavor::regime_conditioned;
  s.periods.assign(static_cast<std::size_t>(T), m);
  if (auto v = moment_violation(m)) s.violations.push_back("all t: " + *v);
  return s;
}

double deterministic_signal(SignalKind kind, const RegimeChain& chain, int t) {
  switch (kind) {
    case SignalKind::filter: {
      double p = chain.p0;
      for (int k = 0; k < t; ++k) p = update_filter(p, chain.P);
      return p;
    }
    case SignalKind::expectation:
      return expected_regime_signal(chain.p0, chain.P, t);
    case SignalKind::unconditional:
      return regime_one_probability(chain.p0, chain.P, t);
    case SignalKind::regime:
      break;
  }
  throw Error("deterministic_signal: the regime signal is random, not a deterministic path");
}

MomentSchedule signal_schedule(SignalKind kind, const RegimeChain& chain,
                               const std::array<MomentSet, 2>& regime_moments, int T) {
  if (T < 1) throw Error("signal_schedule: T must be at least 1");
  MomentSchedule s;
  s.flavor = kind == SignalKind::expectation ? ScheduleFlavor::expectation_based
                                             : ScheduleFlavor::filtered;
  s.periods.reserve(static_cast<std::size_t>(T));
  double p = chain.p0;
  for (int t = 0; t < T; ++t) {
    const double sig = kind == SignalKind::filter ? p : deterministic_signal(kind, chain, t);
    s.periods.push_back(filtered_moments(sig, regime_moments));
    if (auto v = moment_violation(s.periods.back())) {
      s.violations.push_back("t=" + std::to_string(t) + ": " + *v);
    }
    p = update_filter(p, chain.P);
  }
  return s;
}

}  // namespace emv
