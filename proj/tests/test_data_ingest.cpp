#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "emv/data_ingest.hpp"
#include "emv/empirical.hpp"
#include "emv/error.hpp"
#include "support.hpp"

using namespace emv;

namespace {

std::vector<double> random_walk(Stream& rng, std::size_t n, double vol) {
  std::vector<double> c{100.0};
  for (std::size_t t = 1; t < n; ++t) c.push_back(c.back() * std::exp(vol * rng.normal()));
  return c;
}

PriceSeries series_from_returns(const std::vector<double>& r, Frequency f = Frequency::daily) {
  PriceSeries s;
  s.frequency = f;
  s.closes.push_back(50.0);
  for (double x : r) s.closes.push_back(s.closes.back() * (1.0 + x));
  for (std::size_t i = 0; i < s.closes.size(); ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04zu-01-01", 1000 + i);
    s.dates.push_back(buf);
  }
  return s;
}

// Two-regime market with long phases and a positive mixture excess return.
MarketModel synthetic_truth() {
  const MarketModel base = default_market(1.0 / 252.0);
  ReturnSpec rf;
  rf.kind = ReturnKind::constant;
  rf.annual_mean = 1.04;
  ReturnSpec rf_bear = rf;
  rf_bear.annual_mean = 1.02;
  ReturnSpec bull;
  bull.kind = ReturnKind::normal;
  bull.annual_mean = 0.45;
  bull.annual_vol = 0.1;
  bull.convention = MeanConvention::net;
  ReturnSpec bear = bull;
  bear.annual_mean = -0.5;
  const auto chain =
      RegimeChain::make({{{1.0 - 1.0 / 1500, 1.0 / 1500}, {1.0 / 750, 1.0 - 1.0 / 750}}}, 2.0 / 3.0);
  return MarketModel::make(chain, {rf, rf_bear}, {bull, bear}, base.q, base.dt);
}

}  // namespace

TEST_CASE("labels: rise then fall gives bull then bear") {
  const RegimeLabels r = label_regimes(std::vector<double>{100, 130, 100});
  REQUIRE(r.segments.size() == 2);
  CHECK(r.segments[0].phase == MarketPhase::bull);
  CHECK(r.segments[0].begin == 0);
  CHECK(r.segments[0].end == 1);
  CHECK(r.segments[1].phase == MarketPhase::bear);
  CHECK(r.segments[1].end == 3);
  // Period 0 -> 1 (+30%) is bull, 1 -> 2 (-23.1%) is bear.
  CHECK(r.labels[0] == MarketPhase::bull);
  CHECK(r.labels[1] == MarketPhase::bear);
}

TEST_CASE("labels: monotone and flat series") {
  std::vector<double> up;
  for (int i = 100; i <= 200; ++i) up.push_back(i);
  const RegimeLabels a = label_regimes(up);
  REQUIRE(a.segments.size() == 1);
  CHECK(a.segments[0].phase == MarketPhase::bull);

  const std::vector<double> flat(50, 10.0);
  CHECK(label_regimes(flat).segments.size() == 1);
  CHECK(label_regimes(flat).labels[0] == MarketPhase::bull);
  CHECK(label_regimes(flat, 0.24, 0.19, MarketPhase::bear).labels[0] == MarketPhase::bear);

  CHECK_THROWS_AS(label_regimes(std::vector<double>{1.0}), Error);
  CHECK_THROWS_AS(label_regimes(up, 0.2, 1.5), ConfigError);
}

TEST_CASE("labels: a fall below the threshold is not a bear market") {
  // 18% fall then recovery: never confirmed.
  const RegimeLabels r = label_regimes(std::vector<double>{100, 82, 100, 101});
  CHECK(r.segments.size() == 1);
  // A 19% fall from the first peak is.
  const RegimeLabels s = label_regimes(std::vector<double>{100, 81, 80});
  REQUIRE(s.segments.size() == 1);
  CHECK(s.segments[0].phase == MarketPhase::bear);
}

TEST_CASE("labels: invariant to price scaling, segments alternate") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Stream rng(seed, 7);
    const auto c = random_walk(rng, 3000, 0.015);
    const RegimeLabels base = label_regimes(c);
    for (double k : {0.125, 4.0, 7.3, 0.0137}) {
      std::vector<double> scaled(c);
      for (double& v : scaled) v *= k;
      CHECK(label_regimes(scaled).labels == base.labels);
    }
    std::size_t covered = 0;
    for (std::size_t i = 0; i < base.segments.size(); ++i) {
      CHECK(base.segments[i].begin == covered);
      CHECK(base.segments[i].end > base.segments[i].begin);
      covered = base.segments[i].end;
      if (i > 0) CHECK(base.segments[i].phase != base.segments[i - 1].phase);
    }
    CHECK(covered == c.size());
  }
}

TEST_CASE("estimate_params: sojourns and per-phase statistics") {
  // Four alternating phases of 100 periods with constant returns.
  std::vector<double> r;
  std::vector<MarketPhase> labels;
  for (int k = 0; k < 4; ++k) {
    const MarketPhase p = k % 2 == 0 ? MarketPhase::bull : MarketPhase::bear;
    for (int i = 0; i < 100; ++i) {
      r.push_back(p == MarketPhase::bull ? 0.001 : -0.002);
      labels.push_back(p);
    }
  }
  const PhaseEstimate e = estimate_params(r, labels, 252);
  CHECK(e.P12 == doctest::Approx(0.01));
  CHECK(e.P21 == doctest::Approx(0.01));
  CHECK(e.mean[0] == doctest::Approx(0.252));
  CHECK(e.mean[1] == doctest::Approx(-0.504));
  CHECK(e.variance[0] == doctest::Approx(0.0).epsilon(1e-20));
  CHECK(e.variance[1] == doctest::Approx(0.0).epsilon(1e-20));
  CHECK(e.n_returns[0] == 200);

  // A two-period bull spell inside a bear series.
  std::vector<MarketPhase> l2(40, MarketPhase::bear);
  l2[10] = l2[11] = MarketPhase::bull;
  std::vector<double> r2(40, 0.0);
  for (std::size_t i = 0; i < r2.size(); ++i) r2[i] = 0.001 * static_cast<double>(i % 3);
  CHECK(estimate_params(r2, l2, 252).P12 == doctest::Approx(0.5));
}

TEST_CASE("estimate_params: a missing phase asks for a longer window") {
  const std::vector<double> r(30, 0.001);
  const std::vector<MarketPhase> l(30, MarketPhase::bull);
  try {
    estimate_params(r, l, 252);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("bear") != std::string::npos);
    CHECK(std::string(e.what()).find("longer") != std::string::npos);
  }
}

TEST_CASE("exponential averaging") {
  CHECK(exp_average_update(0.3, 0.6, 6) == doctest::Approx(0.4));
  CHECK(exp_average_update(0.7, 0.7, 6) == doctest::Approx(0.7));
  CHECK(exp_average_update(0.2, 0.9, 2) == 0.9);
  CHECK_THROWS_AS(exp_average_update(0.1, 0.2, 1), ConfigError);
  Stream rng(3, 0);
  for (int i = 0; i < 200; ++i) {
    const double a = rng.normal(), b = rng.normal();
    const int N = 2 + static_cast<int>(rng.uniform() * 20);
    const double v = exp_average_update(a, b, N);
    CHECK(v >= std::min(a, b) - 1e-15);
    CHECK(v <= std::max(a, b) + 1e-15);
  }
}

TEST_CASE("block counts") {
  CHECK(block_count(35, 20, 10, Frequency::daily) == 88235u);
  CHECK(block_count(35, 20, 10, Frequency::monthly) == 4235u);
  CHECK(block_count({2520}, 2520) == 1u);
  CHECK(block_count({2519}, 2520) == 0u);
  CHECK(block_count({10, 3, 12}, 5) == 6u + 0u + 8u);
}

TEST_CASE("block sampler enumerates every block once and samples uniformly") {
  const BlockSampler s({10, 3, 12}, 5);
  REQUIRE(s.count() == 14u);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t i = 0; i < s.count(); ++i) {
    const BlockRef b = s.at(i);
    CHECK(b.series != 1u);
    CHECK(b.start + 5 <= (b.series == 0 ? 10u : 12u));
    seen.insert({b.series, b.start});
  }
  CHECK(seen.size() == 14u);
  CHECK_THROWS_AS(s.at(14), Error);

  Stream rng(5, 0);
  std::map<std::size_t, int> per_series;
  const int n = 70000;
  for (int i = 0; i < n; ++i) ++per_series[s.sample(rng).series];
  // Expected shares 6/14 and 8/14; binomial sd about 0.0019.
  CHECK(std::abs(per_series[0] / double(n) - 6.0 / 14.0) < 0.01);
  CHECK(std::abs(per_series[2] / double(n) - 8.0 / 14.0) < 0.01);
  CHECK_THROWS_AS(BlockSampler({3}, 5), ConfigError);
}

TEST_CASE("beta estimation") {
  Stream rng(6, 0);
  std::vector<double> ri(300);
  for (double& x : ri) x = 0.01 * rng.normal();
  const PriceSeries index = series_from_returns(ri);
  CHECK(estimate_beta(index, index).beta == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<double> doubled(ri);
  for (double& x : doubled) x *= 2.0;
  CHECK(estimate_beta(series_from_returns(doubled), index).beta ==
        doctest::Approx(2.0).epsilon(1e-10));

  // y = 1.05 x + noise: the estimate falls within three true standard errors.
  const double sigma = 0.004;
  std::vector<double> noisy(ri);
  for (double& x : noisy) x = 1.05 * x + sigma * rng.normal();
  const BetaEstimate b = estimate_beta(series_from_returns(noisy), index);
  double mx = 0.0;
  for (double x : ri) mx += x;
  mx /= ri.size();
  double sxx = 0.0;
  for (double x : ri) sxx += (x - mx) * (x - mx);
  const double se = sigma / std::sqrt(sxx);
  CHECK(std::abs(b.beta - 1.05) < 3.0 * se);
  CHECK(b.std_error == doctest::Approx(se).epsilon(0.2));
  CHECK(b.n == 300u);

  PriceSeries shorter = index;
  shorter.dates.resize(30);
  shorter.closes.resize(30);
  CHECK_THROWS_AS(estimate_beta(shorter, index), Error);
}

TEST_CASE("price CSV parsing") {
  std::istringstream good("date,close\n2020-01-02,100\n2020-01-03,101.5\n\n2020-01-06,99\n");
  const PriceSeries s = read_price_csv(good, Frequency::daily);
  CHECK(s.size() == 3u);
  CHECK(s.closes[1] == 101.5);
  CHECK(s.returns()[0] == doctest::Approx(0.015));

  std::ostringstream out;
  write_price_csv(out, s);
  std::istringstream again(out.str());
  const PriceSeries t = read_price_csv(again, Frequency::daily);
  CHECK(t.closes == s.closes);
  CHECK(t.dates == s.dates);

  auto bad = [](const std::string& text) {
    std::istringstream is(text);
    CHECK_THROWS_AS(read_price_csv(is, Frequency::daily), ConfigError);
  };
  bad("");
  bad("day,price\n2020-01-01,1\n");
  bad("date,close\n2020-01-02,100\n2020-01-02,101\n");
  bad("date,close\n2020-01-02,-1\n");
  bad("date,close\n2020-01-02,abc\n");
  bad("date,close\n2020/01/02,1\n");
  bad("date,close\n2020-01-02,1,2\n");
  CHECK_THROWS_AS(load_price_csv("/nonexistent/prices.csv", Frequency::daily), ConfigError);
  CHECK(frequency_from_string("monthly") == Frequency::monthly);
  CHECK_THROWS_AS(frequency_from_string("weekly"), ConfigError);
}

TEST_CASE("heuristic estimation recovers a known market") {
  const MarketModel truth = synthetic_truth();
  const auto panel = synthetic_panel(truth, 35, 20 * 252, 1);
  std::vector<PriceSeries> prices;
  for (const auto& p : panel) prices.push_back(p.prices);
  const PhaseEstimate e = estimate_panel(prices, 0.24, 0.19);
  for (int i = 0; i < 2; ++i) {
    CAPTURE(i);
    const double se = 0.1 * std::sqrt(252.0 / e.n_returns[i]);
    CHECK(std::abs(e.mean[i] - truth.e1[i].annual_mean) < 3.0 * se);
  }
  CHECK(testing::rel_err(e.P12, 1.0 / 1500) < 0.2);
  CHECK(testing::rel_err(e.P21, 1.0 / 750) < 0.2);
}

TEST_CASE("synthetic panel is reproducible and consistent") {
  const MarketModel truth = synthetic_truth();
  const auto a = synthetic_panel(truth, 3, 300, 9);
  const auto b = synthetic_panel(truth, 3, 300, 9);
  REQUIRE(a.size() == 3u);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].prices.closes == b[k].prices.closes);
    CHECK_NOTHROW(a[k].prices.validate());
    CHECK(a[k].prices.size() == 301u);
    for (int t = 0; t < 300; ++t) {
      CHECK(a[k].prices.closes[t + 1] == a[k].prices.closes[t] * a[k].returns[t].e1);
    }
  }
}

TEST_CASE("markets built from estimates") {
  const MarketModel base = synthetic_truth();
  PhaseEstimate e;
  e.mean = {0.2, -0.1};
  e.variance = {0.04, 0.09};
  e.P12 = 0.01;
  e.P21 = 0.03;
  const MarketModel m = model_from_estimate(e, base);
  CHECK(m.chain.P12() == 0.01);
  CHECK(m.chain.P21() == 0.03);
  CHECK(m.e1[1].period_mean(m.dt) == doctest::Approx(1.0 - 0.1 / 252.0));
  CHECK(m.e1[1].period_sd(m.dt) == doctest::Approx(0.3 * std::sqrt(1.0 / 252.0)));

  const MarketModel p = pooled_model(e, 0.08, 0.05, base);
  // Stationary weight of regime 1 is 0.03 / 0.04.
  CHECK(p.e0[0].period_mean(p.dt) == doctest::Approx(1.0 + (0.75 * 0.04 + 0.25 * 0.02) / 252.0));
  CHECK(p.e0[0].kind == ReturnKind::normal);  // 4% and 2% mixed: nonzero dispersion
  CHECK(p.e1[0].period_mean(p.dt) == p.e1[1].period_mean(p.dt));
  CHECK(p.moments(1).A1 == p.moments(2).A1);
}

TEST_CASE("replay of recorded returns") {
  // Constant returns and a deterministic policy u = 0.5: closed-form wealth.
  RecordedPath path;
  const int T = 20;
  for (int t = 0; t < T; ++t) {
    path.returns.push_back({1.001, 1.003, 1.0005});
    path.regimes.push_back(1);
  }
  const GaussianPolicy pol(PolicyKind::custom, SignalKind::filter, [](int, double) {
    AffineGaussian g;
    g.intercept = 0.5;
    return g;
  });
  ProblemSpec spec;
  spec.T = T;
  const auto out = replay_terminals(pol, default_market().chain, {path}, spec, ActionMode::mean, 1);
  double x = spec.x0, l = spec.l0;
  for (int t = 0; t < T; ++t) {
    x = 1.001 * x + (1.003 - 1.001) * 0.5;
    l *= 1.0005;
  }
  REQUIRE(out.size() == 1u);
  CHECK(out[0] == doctest::Approx(x - l).epsilon(1e-14));
  spec.T = T + 1;
  CHECK_THROWS_AS(replay_terminals(pol, default_market().chain, {path}, spec, ActionMode::mean, 1),
                  ConfigError);
}

TEST_CASE("block training is deterministic") {
  const MarketModel truth = synthetic_truth();
  const auto panel = synthetic_panel(truth, 4, 1000, 2);
  std::vector<PriceSeries> prices;
  for (const auto& p : panel) prices.push_back(p.prices);
  ProblemSpec spec;
  spec.T = 252;
  Hyperparams h;
  h.n_iter = 15;
  for (EmpiricalLearner learner : {EmpiricalLearner::poemv1, EmpiricalLearner::emv}) {
    EmpiricalOptions o;
    o.learner = learner;
    const EmpiricalRun a = train_empirical(prices, truth, h, spec, o);
    const EmpiricalRun b = train_empirical(prices, truth, h, spec, o);
    CHECK(a.state == b.state);
    CHECK(a.state.completed == 15);
    CHECK(a.skipped_blocks >= 0);
  }
  EmpiricalOptions monthly;
  monthly.frequency = Frequency::monthly;
  CHECK_THROWS_AS(train_empirical(prices, truth, h, spec, monthly), ConfigError);
}

TEST_CASE("regime learner environment option") {
  const MarketModel truth = synthetic_truth();
  const auto panel = synthetic_panel(truth, 4, 1000, 2);
  std::vector<PriceSeries> prices;
  for (const auto& p : panel) prices.push_back(p.prices);
  ProblemSpec spec;
  spec.T = 252;
  Hyperparams h;
  h.n_iter = 5;
  EmpiricalOptions filtered, market;
  market.poemv1_dynamics = Dynamics::market;
  const EmpiricalRun a = train_empirical(prices, truth, h, spec, filtered);
  const EmpiricalRun b = train_empirical(prices, truth, h, spec, market);
  // Same blocks and seeds, different return draws.
  CHECK(a.state.history.front().terminal_net_wealth != b.state.history.front().terminal_net_wealth);
  // The regime-free learner always trains on its pooled market.
  filtered.learner = market.learner = EmpiricalLearner::emv;
  CHECK(train_empirical(prices, truth, h, spec, filtered).state ==
        train_empirical(prices, truth, h, spec, market).state);
}
