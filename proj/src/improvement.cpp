#include "emv/improvement.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "emv/error.hpp"

namespace emv {

QuadraticValue terminal_value(const ProblemSpec& spec) {
  // (x - l - w)^2 - (w - d)^2
  QuadraticValue v;
  v.xx = 1.0;
  v.xl = -2.0;
  v.ll = 1.0;
  v.x = -2.0 * spec.w;
  v.l = 2.0 * spec.w;
  v.c = spec.w * spec.w - (spec.w - spec.d) * (spec.w - spec.d);
  return v;
}

void InitialPolicyFamily::validate(int T) const {
  const auto n = static_cast<std::size_t>(T);
  if (g0.size() != n || g1.size() != n || g2.size() != n) {
    throw Error("initial family: g0, g1, g2 need one entry per period");
  }
  for (const auto* v : {&h1, &h2, &h3, &f1, &f2}) {
    if (v->size() != n + 1) throw Error("initial family: h and f need T+1 entries");
  }
  if (h1[0] != 1.0 || h2[0] != 1.0 || f1[0] != 1.0 || f2[0] != 1.0) {
    throw Error("initial family: h1, h2, f1, f2 must be 1 at remaining horizon 0");
  }
  for (int t = 0; t < T; ++t) {
    if (!(g2[t] > 0.0)) throw Error("initial family: g2 must be positive at t=" + std::to_string(t));
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (!(h2[k] > 0.0)) throw Error("initial family: h2 must be positive at k=" + std::to_string(k));
  }
}

std::vector<AffineGaussian> InitialPolicyFamily::policy(const ProblemSpec& spec) const {
  validate(spec.T);
  const int T = spec.T;
  std::vector<AffineGaussian> out(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    const double r = g1[t] / g2[t];
    const double h = h1[T - t - 1];
    out[t].coef_x = r * g0[t];
    out[t].coef_l = -r * h * f1[T - t];
    out[t].intercept = -r * h * spec.w;
    out[t].variance = spec.lambda * h2[T - t - 1] / (2.0 * g2[t]);
  }
  return out;
}

InitialPolicyFamily InitialPolicyFamily::random(int T, Stream& rng) {
  auto u = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
  InitialPolicyFamily f;
  for (int t = 0; t < T; ++t) {
    f.g0.push_back(u(-2.0, 2.0));
    f.g1.push_back(u(-1.0, 1.0));
    f.g2.push_back(u(0.2, 2.0));
  }
  for (int k = 0; k <= T; ++k) {
    const bool first = k == 0;
    f.h1.push_back(first ? 1.0 : u(-2.0, 2.0));
    f.h2.push_back(first ? 1.0 : u(0.2, 2.0));
    f.h3.push_back(first ? 1.0 : u(0.2, 2.0));
    f.f1.push_back(first ? 1.0 : u(0.5, 1.5));
    f.f2.push_back(first ? 1.0 : u(0.5, 1.5));
  }
  return f;
}

QuadraticValue backup(int t, const AffineGaussian& p, const QuadraticValue& n,
                      const ScheduleTerms& terms, const ProblemSpec& spec) {
  if (!(p.variance > 0.0)) {
    throw Error("policy variance must be positive at t=" + std::to_string(t));
  }
  const MomentSet& m = terms.at(t);
  const double C = m.cross();
  const double ax = p.coef_x, al = p.coef_l, a0 = p.intercept, v = p.variance;
  // E[J(x', l') | u] with x' = e0 x + (e1 - e0) u, l' = q l, then u ~ N(ax x + al l + a0, v).
  QuadraticValue j;
  j.xx = n.xx * (m.B0 + 2.0 * C * ax + m.B1 * ax * ax);
  j.xl = n.xx * (2.0 * C * al + 2.0 * m.B1 * ax * al) + n.xl * m.A2 * (m.A0 + m.A1 * ax);
  j.ll = n.xx * m.B1 * al * al + n.xl * m.A2 * m.A1 * al + n.ll * m.B2;
  j.x = n.xx * (2.0 * C * a0 + 2.0 * m.B1 * ax * a0) + n.x * (m.A0 + m.A1 * ax);
  j.l = n.xx * 2.0 * m.B1 * al * a0 + n.xl * m.A2 * m.A1 * a0 + n.x * m.A1 * al + n.l * m.A2;
  j.c = n.xx * m.B1 * (a0 * a0 + v) + n.x * m.A1 * a0 + n.c -
        0.5 * spec.lambda * std::log(2.0 * std::numbers::pi * std::numbers::e * v);
  return j;
}

std::vector<QuadraticValue> evaluate_policy(const std::vector<AffineGaussian>& policy,
                                            const ScheduleTerms& terms, const ProblemSpec& spec) {
  const int T = spec.T;
  if (static_cast<int>(policy.size()) != T || terms.horizon() != T) {
    throw Error("evaluate_policy: policy, schedule and T disagree on the horizon");
  }
  std::vector<QuadraticValue> J(static_cast<std::size_t>(T) + 1);
  J[T] = terminal_value(spec);
  for (int t = T - 1; t >= 0; --t) J[t] = backup(t, policy[t], J[t + 1], terms, spec);
  return J;
}

ActionLaw gaussian_entropy_min(double B, double mu, double lambda) {
  if (!(B > 0.0)) throw Error("gaussian_entropy_min: B must be positive");
  if (!(lambda > 0.0)) throw Error("gaussian_entropy_min: lambda must be positive");
  return {-mu / B, lambda / (2.0 * B)};
}

AffineGaussian improve_at(int t, const QuadraticValue& next, const ScheduleTerms& terms,
                          const ProblemSpec& spec) {
  const MomentSet& m = terms.at(t);
  const double B = next.xx * m.B1;
  if (!(B > 0.0)) {
    std::ostringstream msg;
    msg << "improve: quadratic coefficient of u is " << B << " at t=" << t;
    throw Error(msg.str());
  }
  // mu(x, l) = xx C x + (xl A2 A1 / 2) l + (x A1 / 2), affine in the state.
  const double mx = next.xx * m.cross();
  const double ml = 0.5 * next.xl * m.A2 * m.A1;
  const double m0 = 0.5 * next.x * m.A1;
  const ActionLaw at_x = gaussian_entropy_min(B, mx, spec.lambda);
  AffineGaussian g;
  g.coef_x = at_x.mean;
  g.coef_l = -ml / B;
  g.intercept = -m0 / B;
  g.variance = at_x.variance;
  return g;
}

IteratedPolicy make_iterated(std::vector<AffineGaussian> policy, const ScheduleTerms& terms,
                             const ProblemSpec& spec) {
  IteratedPolicy it;
  it.policy = std::move(policy);
  it.objective = evaluate_policy(it.policy, terms, spec);
  return it;
}

IteratedPolicy improve_once(const IteratedPolicy& current, const ScheduleTerms& terms,
                            const ProblemSpec& spec) {
  for (const auto& q : current.objective) {
    if (!std::isfinite(q.xx) || !std::isfinite(q.xl) || !std::isfinite(q.ll) ||
        !std::isfinite(q.x) || !std::isfinite(q.l) || !std::isfinite(q.c)) {
      throw Error("improve_once: current objective has non-finite coefficients");
    }
  }
  IteratedPolicy out;
  out.n = current.n + 1;
  out.policy.resize(current.policy.size());
  out.objective.resize(current.objective.size());
  out.objective[spec.T] = terminal_value(spec);
  for (int t = 0; t < spec.T; ++t) {
    out.policy[t] = improve_at(t, current.objective[t + 1], terms, spec);
    out.objective[t] = backup(t, out.policy[t], current.objective[t + 1], terms, spec);
  }
  return out;
}

double policy_change(const std::vector<AffineGaussian>& a, const std::vector<AffineGaussian>& b,
                     int t) {
  double worst = 0.0;
  auto rel = [](double x, double y) {
    return std::abs(x - y) / std::max(1.0, std::max(std::abs(x), std::abs(y)));
  };
  for (std::size_t k = static_cast<std::size_t>(t); k < a.size(); ++k) {
    worst = std::max({worst, rel(a[k].coef_x, b[k].coef_x), rel(a[k].coef_l, b[k].coef_l),
                      rel(a[k].intercept, b[k].intercept), rel(a[k].variance, b[k].variance)});
  }
  return worst;
}

ConvergenceResult iterate_to_convergence(const IteratedPolicy& initial, const ScheduleTerms& terms,
                                         const ProblemSpec& spec, int t) {
  if (t < 0 || t >= spec.T) throw Error("iterate_to_convergence: need 0 <= t < T");
  constexpr double tol = 1e-12;
  ConvergenceResult r;
  r.trace.push_back(initial);
  IteratedPolicy cur = initial;
  double change = 0.0;
  do {
    IteratedPolicy next = improve_once(cur, terms, spec);
    change = policy_change(cur.policy, next.policy, t);
    cur = std::move(next);
    r.trace.push_back(cur);
  } while (change >= tol && cur.n - initial.n < spec.T - t);
  r.n_used = cur.n - initial.n;
  if (change >= tol) {
    // Budget exhausted: the result must already be a fixed point.
    const IteratedPolicy probe = improve_once(cur, terms, spec);
    const double residual = policy_change(cur.policy, probe.policy, t);
    if (residual >= 1e-10) {
      std::ostringstream msg;
      msg << "policy iteration did not converge after " << r.n_used
          << " steps; last change " << change << ", fixed-point residual " << residual;
      throw Error(msg.str());
    }
  }
  r.final = cur;
  return r;
}

ConvergenceResult iterate_to_convergence(const InitialPolicyFamily& initial,
                                         const ScheduleTerms& terms, const ProblemSpec& spec,
                                         int t) {
  return iterate_to_convergence(make_iterated(initial.policy(spec), terms, spec), terms, spec, t);
}

GaussianPolicy sequence_policy(std::vector<AffineGaussian> policy, SignalKind signal,
                               PolicyKind kind) {
  return GaussianPolicy(kind, signal, [p = std::move(policy)](int t, double) {
    return p.at(static_cast<std::size_t>(t));
  });
}

}  // namespace emv
