#include <cmath>
#include <numbers>

#include "doctest.h"
#include "emv/error.hpp"
#include "emv/filter.hpp"
#include "emv/improvement.hpp"
#include "emv/market.hpp"
#include "emv/quadrature.hpp"
#include "support.hpp"

using namespace emv;

namespace {

MomentSet random_moments(Stream& rng) {
  auto u = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
  return moments_from_marginals(u(0.95, 1.15), u(0.0, 0.02), u(0.95, 1.4), u(0.01, 0.12),
                                u(0.9, 1.1), u(0.0, 0.03));
}

MomentSchedule random_schedule(Stream& rng, int T) {
  MomentSchedule s;
  for (int t = 0; t < T; ++t) s.periods.push_back(random_moments(rng));
  return s;
}

ProblemSpec random_spec(Stream& rng, int T) {
  ProblemSpec p;
  p.T = T;
  p.d = 1.0 + 4.0 * rng.uniform();
  p.w = p.d + 2.0 * rng.uniform();
  p.lambda = 0.1 + 3.0 * rng.uniform();
  return p;
}

bool close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

bool same_law(const AffineGaussian& a, const AffineGaussian& b, double tol) {
  return close(a.coef_x, b.coef_x, tol) && close(a.coef_l, b.coef_l, tol) &&
         close(a.intercept, b.intercept, tol) && close(a.variance, b.variance, tol);
}

// E[J(x', l')] + lambda E[ln pi(u)] with u from Gauss-Hermite and returns from
// a two-point law per asset carrying the same first and second moments.
double one_step_oracle(double x, double l, const AffineGaussian& p, const QuadraticValue& next,
                       const MomentSet& m, double lambda) {
  const double s0 = std::sqrt(std::max(0.0, m.B0 - m.A0 * m.A0));
  const double m1 = m.A0 + m.A1;
  const double v1 = m.B1 + 2.0 * m.A0 * m1 - m.B0 - m1 * m1;
  const double s1 = std::sqrt(std::max(0.0, v1));
  const double s2 = std::sqrt(std::max(0.0, m.B2 - m.A2 * m.A2));
  const HermiteRule rule = gauss_hermite(12);
  const double mean = p.mean(x, l);
  double total = 0.0;
  for (int a = -1; a <= 1; a += 2)
    for (int b = -1; b <= 1; b += 2)
      for (int c = -1; c <= 1; c += 2) {
        const double e0 = m.A0 + a * s0, e1 = m1 + b * s1, q = m.A2 + c * s2;
        total += 0.125 * gaussian_expectation(rule, mean, p.variance, [&](double u) {
          return next(e0 * x + (e1 - e0) * u, q * l);
        });
      }
  return total - 0.5 * lambda * std::log(2.0 * std::numbers::pi * std::numbers::e * p.variance);
}

struct Instance {
  MomentSchedule schedule;
  ProblemSpec spec;
};

Instance random_instance(Stream& rng, int T) {
  return {random_schedule(rng, T), random_spec(rng, T)};
}

}  // namespace

TEST_CASE("terminal value expands (x - l - w)^2 - (w - d)^2") {
  ProblemSpec p;
  p.w = 9.5;
  p.d = 8.0;
  const QuadraticValue v = terminal_value(p);
  for (double x : {-1.0, 0.3, 4.0})
    for (double l : {0.0, 0.1, 2.0}) {
      const double want = (x - l - p.w) * (x - l - p.w) - (p.w - p.d) * (p.w - p.d);
      CHECK(v(x, l) == doctest::Approx(want).epsilon(1e-14));
    }
}

TEST_CASE("evaluate_policy matches a one-step quadrature oracle") {
  Stream rng(11, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const Instance in = random_instance(rng, 4);
    const ScheduleTerms terms(in.schedule);
    Stream frng(11, 100 + trial);
    const auto policy = InitialPolicyFamily::random(4, frng).policy(in.spec);
    const auto J = evaluate_policy(policy, terms, in.spec);
    for (int t = 0; t < 4; ++t) {
      for (int k = 0; k < 5; ++k) {
        const double x = -2.0 + 6.0 * rng.uniform(), l = 2.0 * rng.uniform();
        const double want =
            one_step_oracle(x, l, policy[t], J[t + 1], in.schedule.periods[t], in.spec.lambda);
        CHECK(J[t](x, l) == doctest::Approx(want).epsilon(1e-11));
      }
    }
  }
}

TEST_CASE("evaluate_policy of the optimal policy is the value function") {
  Stream rng(12, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const Instance in = random_instance(rng, 5);
    const ScheduleTerms terms(in.schedule);
    std::vector<AffineGaussian> opt;
    for (int t = 0; t < 5; ++t) opt.push_back(optimal_affine(t, terms, in.spec));
    const auto J = evaluate_policy(opt, terms, in.spec);
    for (int t = 0; t <= 5; ++t) {
      const double x = 3.0 * rng.uniform(), l = rng.uniform();
      CHECK(J[t](x, l) == doctest::Approx(value_function(t, x, l, terms, in.spec)).epsilon(1e-10));
    }
  }
}

TEST_CASE("gaussian_entropy_min examples") {
  const ActionLaw a = gaussian_entropy_min(2.0, 1.0, 2.0);
  CHECK(a.mean == -0.5);
  CHECK(a.variance == 0.5);
  for (double B : {0.1, 1.0, 40.0}) CHECK(gaussian_entropy_min(B, 0.0, 1.0).mean == 0.0);
}

TEST_CASE("gaussian_entropy_min against a grid search") {
  const double B = 1.7, mu = -0.4, lambda = 0.6;
  auto objective = [&](double m, double v) {
    return B * (m * m + v) + 2.0 * mu * m -
           0.5 * lambda * std::log(2.0 * std::numbers::pi * std::numbers::e * v);
  };
  const ActionLaw best = gaussian_entropy_min(B, mu, lambda);
  CHECK(best.mean == doctest::Approx(mu / -B).epsilon(1e-15));
  CHECK(best.variance == doctest::Approx(lambda / (2 * B)).epsilon(1e-15));
  const double at_best = objective(best.mean, best.variance);
  CHECK(at_best == doctest::Approx(-mu * mu / B + 0.5 * lambda * std::log(B / (std::numbers::pi * lambda)))
                       .epsilon(1e-13));
  double grid_min = INFINITY, gm = 0, gv = 0;
  for (int i = 0; i <= 400; ++i) {
    for (int j = 1; j <= 400; ++j) {
      const double m = -1.0 + 2.0 * i / 400.0, v = 0.5 * j / 400.0;
      const double f = objective(m, v);
      if (f < grid_min) grid_min = f, gm = m, gv = v;
    }
  }
  CHECK(at_best <= grid_min);
  CHECK(std::abs(gm - best.mean) < 0.006);
  CHECK(std::abs(gv - best.variance) < 0.002);

  // A uniform density with the optimal mean and variance has less entropy.
  const double half = std::sqrt(3.0 * best.variance);
  const double uniform_obj = B * (best.mean * best.mean + best.variance) + 2 * mu * best.mean +
                             lambda * -std::log(2 * half);
  CHECK(uniform_obj > at_best);

  CHECK_THROWS_AS(gaussian_entropy_min(0.0, 1.0, 1.0), Error);
  CHECK_THROWS_AS(gaussian_entropy_min(-1.0, 1.0, 1.0), Error);
}

TEST_CASE("initial family validation and mapping") {
  Stream rng(3, 0);
  InitialPolicyFamily f = InitialPolicyFamily::random(4, rng);
  CHECK_NOTHROW(f.validate(4));
  CHECK_THROWS_AS(f.validate(5), Error);
  ProblemSpec p;
  p.T = 4;
  const auto pol = f.policy(p);
  REQUIRE(pol.size() == 4);
  for (int t = 0; t < 4; ++t) {
    const double x = 1.3, l = 0.4;
    const double want = f.g1[t] / f.g2[t] * (f.g0[t] * x - f.h1[3 - t] * (p.w + l * f.f1[4 - t]));
    CHECK(pol[t].mean(x, l) == doctest::Approx(want).epsilon(1e-14));
    CHECK(pol[t].variance == doctest::Approx(p.lambda * f.h2[3 - t] / (2 * f.g2[t])).epsilon(1e-15));
  }
  InitialPolicyFamily bad = f;
  bad.g2[2] = 0.0;
  CHECK_THROWS_WITH_AS(bad.validate(4), doctest::Contains("t=2"), Error);
  bad = f;
  bad.h1[0] = 0.5;
  CHECK_THROWS_AS(bad.validate(4), Error);
}

TEST_CASE("iterate n at period t depends on the initial policy only through its objective at t+n") {
  // With h2 = 1/J_xx, h1 and f1 read off the objective of the initial policy at t+n,
  // the n-th iterate at t is
  //   mean = -(C x - A1 h1 prod(F2/F1) (w + l f1 prod A2)) / B1,  var = lambda h2 prod(B1/F1) / (2 B1).
  Stream rng(21, 0);
  const int T = 6;
  for (int trial = 0; trial < 10; ++trial) {
    const Instance in = random_instance(rng, T);
    const ScheduleTerms terms(in.schedule);
    Stream frng(21, 50 + trial);
    const IteratedPolicy start =
        make_iterated(InitialPolicyFamily::random(T, frng).policy(in.spec), terms, in.spec);

    const QuadraticValue& JT = start.objective[T];
    CHECK(JT.xx == 1.0);
    CHECK(JT.x == -2.0 * in.spec.w);
    CHECK(JT.xl == -2.0);

    std::vector<IteratedPolicy> iters{start};
    for (int n = 1; n <= T; ++n) iters.push_back(improve_once(iters.back(), terms, in.spec));

    for (int t = 0; t < T; ++t) {
      for (int n = 1; t + n <= T; ++n) {
        const QuadraticValue& J0 = start.objective[t + n];
        const double h2 = 1.0 / J0.xx;
        const double h1 = -J0.x * h2 / (2.0 * in.spec.w);
        const double f1 = J0.xl * in.spec.w / J0.x;
        double pF2F1 = 1.0, pB1F1 = 1.0, pA2 = 1.0;
        for (int k = t + 1; k <= t + n - 1; ++k) {
          const FTerms f = f_terms(in.schedule.periods[k]);
          pF2F1 *= f.F2 / f.F1;
          pB1F1 *= in.schedule.periods[k].B1 / f.F1;
        }
        for (int k = t; k <= t + n - 1; ++k) pA2 *= in.schedule.periods[k].A2;
        const MomentSet& m = in.schedule.periods[t];
        const double x = 0.5 + 2.0 * rng.uniform(), l = rng.uniform();
        const double want_mean =
            -(m.cross() * x - m.A1 * h1 * pF2F1 * (in.spec.w + l * f1 * pA2)) / m.B1;
        const double want_var = in.spec.lambda * h2 * pB1F1 / (2.0 * m.B1);
        const AffineGaussian& got = iters[n].policy[t];
        INFO("t=" << t << " n=" << n);
        CHECK(got.mean(x, l) == doctest::Approx(want_mean).epsilon(1e-10));
        CHECK(got.variance == doctest::Approx(want_var).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("the iterate objective is the exact objective of the spliced policy sequence") {
  Stream rng(25, 0);
  const int T = 5;
  const Instance in = random_instance(rng, T);
  const ScheduleTerms terms(in.schedule);
  Stream frng(25, 1);
  std::vector<IteratedPolicy> iters{
      make_iterated(InitialPolicyFamily::random(T, frng).policy(in.spec), terms, in.spec)};
  for (int n = 1; n <= T; ++n) iters.push_back(improve_once(iters.back(), terms, in.spec));
  for (int n = 0; n <= T; ++n) {
    for (int t = 0; t < T; ++t) {
      // Play iterate n at t, n-1 at t+1, ..., then the initial policy.
      std::vector<AffineGaussian> seq(iters[0].policy);
      for (int k = t; k < T && n - (k - t) >= 1; ++k) seq[k] = iters[n - (k - t)].policy[k];
      const auto J = evaluate_policy(seq, terms, in.spec);
      for (int probe = 0; probe < 5; ++probe) {
        const double x = 4.0 * rng.uniform() - 1.0, l = rng.uniform();
        CHECK(iters[n].objective[t](x, l) == doctest::Approx(J[t](x, l)).epsilon(1e-11));
      }
    }
  }
}

TEST_CASE("period t reaches the optimal law after T - t improvements") {
  Stream rng(31, 0);
  for (int T : {1, 2, 4, 6}) {
    for (int trial = 0; trial < 5; ++trial) {
      const Instance in = random_instance(rng, T);
      const ScheduleTerms terms(in.schedule);
      Stream frng(31, 1000 * T + trial);
      IteratedPolicy it =
          make_iterated(InitialPolicyFamily::random(T, frng).policy(in.spec), terms, in.spec);
      for (int n = 1; n <= T; ++n) {
        it = improve_once(it, terms, in.spec);
        for (int t = T - n; t < T; ++t) {
          CHECK(same_law(it.policy[t], optimal_affine(t, terms, in.spec), 1e-10));
        }
      }
    }
  }
}

TEST_CASE("iterate_to_convergence") {
  Stream rng(41, 0);
  const int T = 4;
  const Instance in = random_instance(rng, T);
  const ScheduleTerms terms(in.schedule);
  Stream frng(41, 1);
  const InitialPolicyFamily fam = InitialPolicyFamily::random(T, frng);

  for (int t = 0; t < T; ++t) {
    const ConvergenceResult r = iterate_to_convergence(fam, terms, in.spec, t);
    CHECK(r.n_used <= T - t);
    CHECK(r.n_used >= 1);
    CHECK(r.trace.size() == static_cast<std::size_t>(r.n_used) + 1);
    for (int k = t; k < T; ++k) {
      CHECK(same_law(r.final.policy[k], optimal_affine(k, terms, in.spec), 1e-10));
    }
  }
  CHECK(iterate_to_convergence(fam, terms, in.spec, T - 1).n_used == 1);

  std::vector<AffineGaussian> opt;
  for (int t = 0; t < T; ++t) opt.push_back(optimal_affine(t, terms, in.spec));
  const IteratedPolicy at_opt = make_iterated(opt, terms, in.spec);
  const IteratedPolicy again = improve_once(at_opt, terms, in.spec);
  CHECK(policy_change(at_opt.policy, again.policy, 0) < 1e-12);
  CHECK(iterate_to_convergence(at_opt, terms, in.spec, 0).n_used == 1);

  CHECK_THROWS_AS(iterate_to_convergence(fam, terms, in.spec, T), Error);
  CHECK_THROWS_AS(iterate_to_convergence(fam, terms, in.spec, -1), Error);
}

TEST_CASE("each improvement lowers the objective everywhere") {
  Stream rng(51, 0);
  for (int T : {4, 5, 6}) {
    for (int trial = 0; trial < 4; ++trial) {
      const Instance in = random_instance(rng, T);
      const ScheduleTerms terms(in.schedule);
      Stream frng(51, 100 * T + trial);
      IteratedPolicy it =
          make_iterated(InitialPolicyFamily::random(T, frng).policy(in.spec), terms, in.spec);
      for (int n = 0; n < T; ++n) {
        const IteratedPolicy next = improve_once(it, terms, in.spec);
        for (int probe = 0; probe < 100; ++probe) {
          const int t = static_cast<int>(rng.uniform() * T);
          const double x = -3.0 + 8.0 * rng.uniform(), l = 2.0 * rng.uniform();
          const double before = it.objective[t](x, l), after = next.objective[t](x, l);
          CHECK(after <= before + 1e-10 * std::max(1.0, std::abs(before)));
        }
        it = next;
      }
    }
  }
}

TEST_CASE("improvement on the filtered schedule reduces to the regime schedule under indicators") {
  const MarketModel market = default_market();
  const std::array<MomentSet, 2> rm{market.moments(1), market.moments(2)};
  Stream rng(61, 0);
  const int T = 6;
  MomentSchedule regime, filtered;
  for (int t = 0; t < T; ++t) {
    const int r = rng.uniform() < 0.5 ? 1 : 2;
    regime.periods.push_back(rm[r - 1]);
    filtered.periods.push_back(filtered_moments(r == 1 ? 1.0 : 0.0, rm));
  }
  ProblemSpec spec;
  spec.T = T;
  const ScheduleTerms a(regime), b(filtered);
  Stream f1(61, 1), f2(61, 1);
  const auto ra = iterate_to_convergence(InitialPolicyFamily::random(T, f1), a, spec, 0);
  const auto rb = iterate_to_convergence(InitialPolicyFamily::random(T, f2), b, spec, 0);
  CHECK(ra.n_used == rb.n_used);
  for (int t = 0; t < T; ++t) CHECK(same_law(ra.final.policy[t], rb.final.policy[t], 0.0));
}

TEST_CASE("improvement rejects a non-convex continuation") {
  MomentSchedule s;
  s.periods.push_back(MomentSet{});
  ProblemSpec spec;
  spec.T = 1;
  const ScheduleTerms terms(s);
  QuadraticValue concave;
  concave.xx = -1.0;
  CHECK_THROWS_WITH_AS(improve_at(0, concave, terms, spec), doctest::Contains("t=0"), Error);
}

TEST_CASE("sequence_policy exposes the period laws") {
  std::vector<AffineGaussian> seq{{1, 2, 3, 4}, {5, 6, 7, 8}};
  const GaussianPolicy g = sequence_policy(seq, SignalKind::filter);
  CHECK(g.at(1, 0.3).coef_l == 6);
  CHECK(g.signal() == SignalKind::filter);
  CHECK_THROWS(g.at(2, 0.0));
}
