#include "emv/empirical.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include "emv/chain.hpp"
#include "emv/error.hpp"

namespace emv {

namespace {

std::vector<std::string> business_days(std::size_t n) {
  using namespace std::chrono;
  std::vector<std::string> out;
  out.reserve(n);
  sys_days day = sys_days{year{1990} / January / 1};
  while (out.size() < n) {
    const weekday wd{day};
    if (wd != Saturday && wd != Sunday) {
      const year_month_day ymd{day};
      char buf[24];
      std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                    static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
      out.emplace_back(buf);
    }
    day += days{1};
  }
  return out;
}

ReturnSpec normal_net(double mean, double variance) {
  ReturnSpec s;
  s.kind = ReturnKind::normal;
  s.annual_mean = mean;
  s.annual_vol = std::sqrt(std::max(variance, 0.0));
  s.convention = MeanConvention::net;
  return s;
}

// Annual net mean and variance of a base spec.
std::pair<double, double> annual_net(const ReturnSpec& s) {
  const double mean = s.convention == MeanConvention::gross ? s.annual_mean - 1.0 : s.annual_mean;
  const double vol = s.vol_is_variance ? std::sqrt(s.annual_vol) : s.annual_vol;
  return {mean, vol * vol};
}

// Two-component mixture of annual (mean, variance) with weight pi on the first.
ReturnSpec mixed(const ReturnSpec& a, const ReturnSpec& b, double pi) {
  const auto [ma, va] = annual_net(a);
  const auto [mb, vb] = annual_net(b);
  const double m = pi * ma + (1.0 - pi) * mb;
  const double v = pi * (va + ma * ma) + (1.0 - pi) * (vb + mb * mb) - m * m;
  ReturnSpec s = normal_net(m, v);
  // Mixing two constants with the same rate leaves a constant.
  if (!(v > 1e-14)) {
    s.kind = ReturnKind::constant;
    s.annual_vol = 0.0;
  }
  return s;
}

struct PanelAccumulator {
  std::array<std::vector<double>, 2> by_phase;
  std::array<double, 2> sojourn_total{}, segments{};

  void add(const std::vector<double>& returns, const std::vector<MarketPhase>& labels) {
    for (std::size_t t = 0; t < returns.size(); ++t) {
      by_phase[static_cast<int>(labels[t]) - 1].push_back(returns[t]);
    }
    const std::vector<MarketPhase> span(labels.begin(),
                                        labels.begin() + static_cast<std::ptrdiff_t>(returns.size()));
    for (const Segment& s : segments_of(span)) {
      const int i = static_cast<int>(s.phase) - 1;
      sojourn_total[i] += static_cast<double>(s.end - s.begin);
      segments[i] += 1.0;
    }
  }
};

std::pair<double, double> mean_var(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, s / static_cast<double>(v.size() - 1)};
}

}  // namespace

std::vector<RecordedPath> synthetic_panel(const MarketModel& truth, int n_paths, int periods,
                                          std::uint64_t seed) {
  if (n_paths < 1 || periods < 1) throw ConfigError("synthetic_panel: need paths and periods");
  const auto dates = business_days(static_cast<std::size_t>(periods) + 1);
  const Frequency f = std::abs(truth.dt * 12.0 - 1.0) < 1e-9 ? Frequency::monthly : Frequency::daily;
  std::vector<RecordedPath> out(static_cast<std::size_t>(n_paths));
  for (int k = 0; k < n_paths; ++k) {
    Stream rng(seed, static_cast<std::uint64_t>(k));
    RecordedPath& p = out[k];
    p.prices.frequency = f;
    p.prices.dates = dates;
    p.prices.closes.push_back(100.0);
    int regime = initial_regime(truth.chain, rng);
    for (int t = 0; t < periods; ++t) {
      const Returns r = sample_returns(regime, truth, rng);
      if (!(r.e1 > 0.0)) throw Error("synthetic_panel: risky gross return is not positive");
      p.returns.push_back(r);
      p.regimes.push_back(regime);
      p.prices.closes.push_back(p.prices.closes.back() * r.e1);
      regime = step_regime(regime, truth.chain, rng);
    }
  }
  return out;
}

MarketModel model_from_estimate(const PhaseEstimate& est, const MarketModel& base) {
  const RegimeChain chain = RegimeChain::make(
      {{{1.0 - est.P12, est.P12}, {est.P21, 1.0 - est.P21}}}, base.chain.p0);
  return MarketModel::make(chain, base.e0,
                           {normal_net(est.mean[0], est.variance[0]),
                            normal_net(est.mean[1], est.variance[1])},
                           base.q, base.dt);
}

MarketModel pooled_model(const PhaseEstimate& est, double pooled_mean, double pooled_variance,
                         const MarketModel& base) {
  const double pi = est.P21 / (est.P12 + est.P21);  // stationary weight of regime 1
  const ReturnSpec e0 = mixed(base.e0[0], base.e0[1], pi);
  const ReturnSpec q = mixed(base.q[0], base.q[1], pi);
  const ReturnSpec e1 = normal_net(pooled_mean, pooled_variance);
  const RegimeChain chain = RegimeChain::make(
      {{{1.0 - est.P12, est.P12}, {est.P21, 1.0 - est.P21}}}, base.chain.p0);
  return MarketModel::make(chain, {e0, e0}, {e1, e1}, {q, q}, base.dt);
}

PhaseEstimate estimate_panel(const std::vector<PriceSeries>& series, double gamma1, double gamma2) {
  if (series.empty()) throw ConfigError("estimate_panel: no series");
  PanelAccumulator acc;
  const int ppy = periods_per_year(series.front().frequency);
  for (const auto& s : series) {
    if (s.frequency != series.front().frequency) throw ConfigError("estimate_panel: mixed frequencies");
    acc.add(s.returns(), label_regimes(s, gamma1, gamma2).labels);
  }
  PhaseEstimate e;
  for (int i = 0; i < 2; ++i) {
    if (acc.by_phase[i].size() < 2) {
      throw Error(std::string("estimate_panel: ") + (i == 0 ? "bull" : "bear") +
                  " phase never identified; use longer series");
    }
    const auto [m, v] = mean_var(acc.by_phase[i]);
    e.mean[i] = m * ppy;
    e.variance[i] = v * ppy;
    e.n_returns[i] = static_cast<int>(acc.by_phase[i].size());
    e.mean_sojourn[i] = acc.sojourn_total[i] / acc.segments[i];
  }
  e.P12 = 1.0 / e.mean_sojourn[0];
  e.P21 = 1.0 / e.mean_sojourn[1];
  return e;
}

EmpiricalRun train_empirical(const std::vector<PriceSeries>& training, const MarketModel& base,
                             const Hyperparams& hyper, const ProblemSpec& spec,
                             const EmpiricalOptions& opts) {
  hyper.validate();
  spec.validate();
  const int ppy = periods_per_year(opts.frequency);
  if (std::abs(base.dt * ppy - 1.0) > 1e-9 || std::abs(hyper.dt - base.dt) > 1e-15) {
    throw ConfigError("train_empirical: dt must match the data frequency");
  }
  std::vector<std::size_t> lengths;
  for (const auto& s : training) {
    if (s.frequency != opts.frequency) throw ConfigError("train_empirical: series frequency differs");
    lengths.push_back(s.size() > 0 ? s.size() - 1 : 0);
  }
  const BlockSampler sampler(lengths, static_cast<std::size_t>(spec.T));

  EmpiricalRun run;
  run.estimate = estimate_panel(training, opts.gamma1, opts.gamma2);
  std::vector<double> everything;
  for (const auto& s : training) {
    const auto r = s.returns();
    everything.insert(everything.end(), r.begin(), r.end());
  }
  auto [pooled_mean, pooled_var] = mean_var(everything);
  pooled_mean *= ppy;
  pooled_var *= ppy;

  run.state = initial_state(Algo::poemv1, hyper, spec);
  TrainEnvironment env;
  env.sim.dynamics =
      opts.learner == EmpiricalLearner::poemv1 ? opts.poemv1_dynamics : Dynamics::market;
  env.sim.env_signal = SignalKind::filter;

  while (run.state.completed < hyper.n_iter) {
    const int iter = run.state.completed + 1;
    Stream brng(hyper.seed + 1, static_cast<std::uint64_t>(iter));
    const BlockRef ref = sampler.sample(brng);
    const auto& closes = training[ref.series].closes;
    const std::vector<double> block(closes.begin() + static_cast<std::ptrdiff_t>(ref.start),
                                    closes.begin() + static_cast<std::ptrdiff_t>(ref.start + spec.T + 1));
    std::vector<double> returns(static_cast<std::size_t>(spec.T));
    for (int t = 0; t < spec.T; ++t) returns[t] = block[t + 1] / block[t] - 1.0;
    try {
      const RegimeLabels labels = label_regimes(block, opts.gamma1, opts.gamma2);
      run.estimate = exp_average_update(run.estimate, estimate_params(returns, labels.labels, ppy),
                                        opts.exp_N);
    } catch (const Error&) {
      ++run.skipped_blocks;
    }
    const auto [bm, bv] = mean_var(returns);
    pooled_mean = exp_average_update(pooled_mean, bm * ppy, opts.exp_N);
    pooled_var = exp_average_update(pooled_var, bv * ppy, opts.exp_N);

    run.final_model = opts.learner == EmpiricalLearner::poemv1
                          ? model_from_estimate(run.estimate, base)
                          : pooled_model(run.estimate, pooled_mean, pooled_var, base);
    train_step(run.state, run.final_model, hyper, spec, env);
  }
  if (hyper.n_iter == 0) {
    run.final_model = opts.learner == EmpiricalLearner::poemv1
                          ? model_from_estimate(run.estimate, base)
                          : pooled_model(run.estimate, pooled_mean, pooled_var, base);
  }
  return run;
}

std::vector<double> replay_terminals(const GaussianPolicy& policy, const RegimeChain& signal_chain,
                                     const std::vector<RecordedPath>& paths,
                                     const ProblemSpec& spec, ActionMode mode, std::uint64_t seed) {
  const bool by_regime = policy.signal() == SignalKind::regime;
  const std::vector<double> signal =
      by_regime ? std::vector<double>{} : deterministic_signal_path(policy.signal(), signal_chain, spec.T);
  std::vector<double> out;
  out.reserve(paths.size());
  for (std::size_t k = 0; k < paths.size(); ++k) {
    const RecordedPath& p = paths[k];
    if (static_cast<int>(p.returns.size()) < spec.T) {
      throw ConfigError("replay path " + std::to_string(k) + " is shorter than the horizon");
    }
    Stream rng(seed, static_cast<std::uint64_t>(k));
    double x = spec.x0, l = spec.l0;
    bool finite = true;
    for (int t = 0; t < spec.T && finite; ++t) {
      const double s = by_regime ? static_cast<double>(p.regimes[t]) : signal[t];
      const AffineGaussian g = policy.at(t, s);
      const double z = mode == ActionMode::sample ? rng.normal() : 0.0;
      const double u = g.mean(x, l) + std::sqrt(g.variance) * z;
      const Returns& r = p.returns[t];
      x = r.e0 * x + (r.e1 - r.e0) * u;
      l = r.q * l;
      finite = std::isfinite(x) && std::isfinite(l);
    }
    out.push_back(finite ? x - l : std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

}  // namespace emv
