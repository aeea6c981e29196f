#include "emv/market.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "emv/error.hpp"
#include "emv/filter.hpp"

namespace emv {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double draw(const ReturnSpec& spec, double dt, Stream& rng) {
  const double mean = spec.period_mean(dt);
  const double sd = spec.period_sd(dt);
  switch (spec.kind) {
    case ReturnKind::constant:
      return mean;
    case ReturnKind::normal:
      return mean + sd * rng.normal();
    case ReturnKind::skewed_t:
      return sample_skewed_t(mean, sd, spec.dof, spec.skew, rng);
  }
  return mean;
}

}  // namespace

void ReturnSpec::validate(std::string_view name) const {
  auto fail = [&](const std::string& what) {
    throw ConfigError(std::string(name) + ": " + what);
  };
  if (!std::isfinite(annual_mean)) fail("annual_mean must be finite");
  if (!(annual_vol >= 0.0) || !std::isfinite(annual_vol)) fail("annual_vol must be >= 0");
  if (kind == ReturnKind::constant && annual_vol != 0.0) fail("constant return needs vol = 0");
  if (kind == ReturnKind::skewed_t) {
    if (!(dof > 2.0)) fail("skewed_t needs dof > 2 so the variance exists");
    if (!(skew > -1.0 && skew < 1.0)) fail("skewed_t needs skew in (-1,1)");
  }
}

double ReturnSpec::period_mean(double dt) const noexcept {
  const double rate = convention == MeanConvention::gross ? annual_mean - 1.0 : annual_mean;
  return 1.0 + rate * dt;
}

double ReturnSpec::period_sd(double dt) const noexcept {
  const double annual_sd = vol_is_variance ? std::sqrt(annual_vol) : annual_vol;
  return annual_sd * std::sqrt(dt);
}

MarketModel MarketModel::make(const RegimeChain& chain, const std::array<ReturnSpec, 2>& e0,
                              const std::array<ReturnSpec, 2>& e1,
                              const std::array<ReturnSpec, 2>& q, double dt) {
  if (!(dt > 0.0 && dt <= 1.0)) throw ConfigError("dt must lie in (0,1] years");
  for (int i = 0; i < 2; ++i) {
    const std::string r = std::to_string(i + 1);
    e0[i].validate("e0 regime " + r);
    e1[i].validate("e1 regime " + r);
    q[i].validate("q regime " + r);
  }
  MarketModel m{chain, e0, e1, q, dt};
  for (int regime = 1; regime <= 2; ++regime) {
    // E[e e'] = [[E e0^2, E e0 E e1], [E e0 E e1, E e1^2]] must be positive definite.
    const int i = regime - 1;
    const double a0 = e0[i].period_mean(dt), s0 = e0[i].period_sd(dt);
    const double a1 = e1[i].period_mean(dt), s1 = e1[i].period_sd(dt);
    const double m00 = a0 * a0 + s0 * s0, m11 = a1 * a1 + s1 * s1, m01 = a0 * a1;
    if (!(m00 > 0.0 && m00 * m11 - m01 * m01 > 0.0)) {
      throw ConfigError("second-moment matrix of (e0, e1) is not positive definite in regime " +
                        std::to_string(regime));
    }
  }
  return m;
}

MomentSet MarketModel::moments(int regime) const {
  const int i = regime - 1;
  auto var = [&](const ReturnSpec& s) {
    const double sd = s.period_sd(dt);
    return sd * sd;
  };
  return moments_from_marginals(e0[i].period_mean(dt), var(e0[i]), e1[i].period_mean(dt),
                                var(e1[i]), q[i].period_mean(dt), var(q[i]));
}

Returns sample_returns(int regime, const MarketModel& model, Stream& rng) {
  const int i = regime - 1;
  Returns r;
  r.e0 = draw(model.e0[i], model.dt, rng);
  r.e1 = draw(model.e1[i], model.dt, rng);
  r.q = draw(model.q[i], model.dt, rng);
  return r;
}

double sample_skewed_t(double mean, double vol, double dof, double skew, Stream& rng) {
  if (!(dof > 2.0)) throw Error("skewed t needs dof > 2");
  if (!(vol >= 0.0)) throw Error("skewed t needs vol >= 0");
  if (vol == 0.0) return mean;
  // Hansen's standardized skewed t: y = (1 -/+ skew)|T| on the left/right, where
  // T is a unit-variance Student t and the left branch has mass (1 - skew)/2.
  const double c = std::exp(std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof)) /
                   std::sqrt(std::numbers::pi * (dof - 2.0));
  const double a = 4.0 * skew * c * (dof - 2.0) / (dof - 1.0);
  const double b = std::sqrt(1.0 + 3.0 * skew * skew - a * a);
  std::student_t_distribution<double> student(dof);
  const double t = std::abs(student(rng)) * std::sqrt((dof - 2.0) / dof);
  const bool left = rng.uniform() < 0.5 * (1.0 - skew);
  const double y = left ? -(1.0 - skew) * t : (1.0 + skew) * t;
  return mean + vol * (y - a) / b;
}

SurplusStep step_surplus(double x, double l, double u, double e0, double e1, double q) {
  if (!std::isfinite(x) || !std::isfinite(l) || !std::isfinite(u) || !std::isfinite(e0) ||
      !std::isfinite(e1) || !std::isfinite(q)) {
    throw Error("step_surplus: non-finite input");
  }
  SurplusStep s;
  s.x = e0 * x + (e1 - e0) * u;
  s.l = q * l;
  s.s = s.x - s.l;
  return s;
}

std::string_view to_string(Dynamics d) {
  return d == Dynamics::market ? "market" : "filtered";
}

Dynamics dynamics_from_string(std::string_view s) {
  if (s == "market") return Dynamics::market;
  if (s == "filtered") return Dynamics::filtered;
  throw ConfigError("unknown dynamics '" + std::string(s) + "' (market|filtered)");
}

std::vector<double> deterministic_signal_path(SignalKind kind, const RegimeChain& chain,
                                              int periods) {
  std::vector<double> out(static_cast<std::size_t>(periods) + 1);
  if (kind == SignalKind::filter) {
    out[0] = chain.p0;
    double p = chain.p0;
    for (int t = 1; t <= periods; ++t) out[t] = p = update_filter(p, chain.P);
    return out;
  }
  for (int t = 0; t <= periods; ++t) out[t] = deterministic_signal(kind, chain, t);
  return out;
}

Episode simulate_episode(const MarketModel& model, const GaussianPolicy& policy, int periods,
                         double x0, double l0, Stream& rng, const SimulationOptions& opts) {
  if (periods < 1) throw Error("simulate_episode: horizon must be at least one period");
  if (!(x0 > 0.0)) throw Error("simulate_episode: initial wealth must be positive");

  const auto p_hat = deterministic_signal_path(SignalKind::filter, model.chain, periods);
  std::vector<double> policy_signal;
  if (policy.signal() != SignalKind::regime) {
    policy_signal = policy.signal() == SignalKind::filter
                        ? p_hat
                        : deterministic_signal_path(policy.signal(), model.chain, periods);
  }
  std::vector<double> env_weight;
  if (opts.dynamics == Dynamics::filtered) {
    env_weight = opts.env_signal == SignalKind::filter
                     ? p_hat
                     : deterministic_signal_path(opts.env_signal, model.chain, periods);
  }
  const std::array<MomentSet, 2> rm{model.moments(1), model.moments(2)};

  Episode ep;
  ep.steps.resize(static_cast<std::size_t>(periods) + 1);
  double x = x0, l = l0;
  int regime = initial_regime(model.chain, rng);
  for (int t = 0; t < periods; ++t) {
    const double signal =
        policy.signal() == SignalKind::regime ? static_cast<double>(regime) : policy_signal[t];
    const AffineGaussian g = policy.at(t, signal);
    const double mean = g.mean(x, l);
    if (!std::isfinite(mean) || !std::isfinite(g.variance) || g.variance < 0.0) {
      std::ostringstream msg;
      msg << "policy returned non-finite mean/variance at t=" << t;
      throw Error(msg.str());
    }
    const double z = opts.action == ActionMode::sample ? rng.normal() : 0.0;
    const double u = mean + std::sqrt(g.variance) * z;

    Returns r;
    if (opts.dynamics == Dynamics::market) {
      r = sample_returns(regime, model, rng);
    } else {
      const double w = env_weight[t];
      r.e0 = rm[0].A0 * w + rm[1].A0 * (1.0 - w);
      r.e1 = (rm[0].A0 + rm[0].A1) * w + (rm[1].A0 + rm[1].A1) * (1.0 - w);
      r.q = rm[0].A2 * w + rm[1].A2 * (1.0 - w);
    }
    const SurplusStep next = step_surplus(x, l, u, r.e0, r.e1, r.q);
    ep.steps[t] =
        EpisodeStep{t, x, l, regime, p_hat[t], signal, u, mean, g.variance, r.e0, r.e1, r.q};
    x = next.x;
    l = next.l;
    regime = step_regime(regime, model.chain, rng);
  }
  const double terminal_signal =
      policy.signal() == SignalKind::regime ? static_cast<double>(regime) : policy_signal[periods];
  ep.steps[periods] = EpisodeStep{periods, x, l, regime, p_hat[periods], terminal_signal,
                                  kNaN, kNaN, kNaN, kNaN, kNaN, kNaN};
  return ep;
}

MarketModel default_market(double dt) {
  const RegimeChain chain = RegimeChain::make({{{0.9986, 0.0014}, {0.0114, 0.9886}}}, 0.3);
  auto constant = [](double gross) {
    ReturnSpec s;
    s.kind = ReturnKind::constant;
    s.annual_mean = gross;
    s.convention = MeanConvention::gross;
    return s;
  };
  auto skewed = [](double rate, double vol) {
    ReturnSpec s;
    s.kind = ReturnKind::skewed_t;
    s.annual_mean = rate;
    s.annual_vol = vol;
    s.dof = 10.0;
    s.skew = 0.1;
    s.convention = MeanConvention::net;
    return s;
  };
  auto normal = [](double rate, double vol) {
    ReturnSpec s;
    s.kind = ReturnKind::normal;
    s.annual_mean = rate;
    s.annual_vol = vol;
    s.convention = MeanConvention::net;
    return s;
  };
  return MarketModel::make(chain, {constant(1.2), constant(1.05)},
                           {skewed(0.5, 0.2), skewed(0.06, 0.3)},
                           {normal(0.05, 0.1), normal(0.01, 0.2)}, dt);
}

void write_episode_csv(std::ostream& os, const Episode& ep) {
  os << "t,x,l,regime,p_hat,action\n";
  os << std::setprecision(17);
  for (const auto& s : ep.steps) {
    os << s.t << ',' << s.x << ',' << s.l << ',' << s.regime << ',' << s.p_hat << ',';
    if (std::isfinite(s.action)) os << s.action;
    os << '\n';
  }
}

}  // namespace emv
