#include "emv/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "emv/chain.hpp"
#include "emv/error.hpp"
#include "emv/kernels.hpp"
#include "emv/rng.hpp"

namespace emv {

namespace {

constexpr std::size_t kBlock = 256;

// Policy laws for every (t, signal) a path can visit.
struct LawTable {
  bool by_regime = false;
  std::vector<AffineGaussian> laws;  // T entries, or 2T when by_regime

  const AffineGaussian& at(int t, int regime) const {
    return by_regime ? laws[2 * static_cast<std::size_t>(t) + (regime - 1)] : laws[t];
  }
};

LawTable tabulate(const GaussianPolicy& policy, const MarketModel& model, int T) {
  LawTable tab;
  tab.by_regime = policy.signal() == SignalKind::regime;
  if (tab.by_regime) {
    tab.laws.resize(2 * static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
      tab.laws[2 * t] = policy.at(t, 1.0);
      tab.laws[2 * t + 1] = policy.at(t, 2.0);
    }
  } else {
    const auto path = deterministic_signal_path(policy.signal(), model.chain, T);
    tab.laws.resize(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) tab.laws[t] = policy.at(t, path[t]);
  }
  return tab;
}

void run_block(std::size_t first, std::size_t n, const LawTable& tab, const MarketModel& model,
               const ProblemSpec& spec, const EvalOptions& opts,
               const std::vector<double>& env_weight, double* out) {
  const std::array<MomentSet, 2> rm{model.moments(1), model.moments(2)};
  std::vector<Stream> rng;
  rng.reserve(n);
  std::vector<int> regime(n);
  for (std::size_t p = 0; p < n; ++p) {
    rng.emplace_back(opts.seed, static_cast<std::uint64_t>(first + p));
    regime[p] = initial_regime(model.chain, rng[p]);
  }
  std::vector<double> x(n, spec.x0), l(n, spec.l0), u(n);
  std::vector<double> cx(n), cl(n), c0(n), sd(n), z(n), e0(n), e1(n), q(n);
  const bool sample = opts.sim.action == ActionMode::sample;
  const bool market = opts.sim.dynamics == Dynamics::market;
  for (int t = 0; t < spec.T; ++t) {
    Returns mixed;
    if (!market) {
      const double w = env_weight[t];
      mixed.e0 = rm[0].A0 * w + rm[1].A0 * (1.0 - w);
      mixed.e1 = (rm[0].A0 + rm[0].A1) * w + (rm[1].A0 + rm[1].A1) * (1.0 - w);
      mixed.q = rm[0].A2 * w + rm[1].A2 * (1.0 - w);
    }
    for (std::size_t p = 0; p < n; ++p) {
      const AffineGaussian& g = tab.at(t, regime[p]);
      cx[p] = g.coef_x;
      cl[p] = g.coef_l;
      c0[p] = g.intercept;
      sd[p] = std::sqrt(g.variance);
      z[p] = sample ? rng[p].normal() : 0.0;
      const Returns r = market ? sample_returns(regime[p], model, rng[p]) : mixed;
      e0[p] = r.e0;
      e1[p] = r.e1;
      q[p] = r.q;
      regime[p] = step_regime(regime[p], model.chain, rng[p]);
    }
    kernels::affine_action(cx.data(), cl.data(), c0.data(), sd.data(), x.data(), l.data(),
                           z.data(), n, u.data());
    kernels::surplus_step(x.data(), l.data(), u.data(), e0.data(), e1.data(), q.data(), n);
  }
  for (std::size_t p = 0; p < n; ++p) {
    const double s = x[p] - l[p];
    out[p] = std::isfinite(s) ? s : std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace

double sharpe_ratio(double mean, double variance) {
  if (mean == 1.0) return 0.0;
  if (!(variance > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return (mean - 1.0) / std::sqrt(variance);
}

double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

std::vector<double> terminal_surpluses(const GaussianPolicy& policy, const MarketModel& model,
                                       const ProblemSpec& spec, const EvalOptions& opts) {
  if (opts.n_paths < 1) throw ConfigError("evaluation needs at least one path");
  spec.validate();
  for (double d : {spec.x0, spec.l0}) {
    if (!std::isfinite(d)) throw ConfigError("initial wealth and liability must be finite");
  }
  const LawTable tab = tabulate(policy, model, spec.T);
  for (const auto& g : tab.laws) {
    if (!std::isfinite(g.coef_x) || !std::isfinite(g.coef_l) || !std::isfinite(g.intercept) ||
        !std::isfinite(g.variance) || g.variance < 0.0) {
      throw Error("policy returned a non-finite or negative-variance law");
    }
  }
  std::vector<double> env_weight;
  if (opts.sim.dynamics == Dynamics::filtered) {
    env_weight = deterministic_signal_path(opts.sim.env_signal, model.chain, spec.T);
  }

  const auto n = static_cast<std::size_t>(opts.n_paths);
  std::vector<double> out(n);
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  unsigned workers = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, blocks));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto work = [&] {
    for (std::size_t b; (b = next.fetch_add(1)) < blocks && !failed;) {
      const std::size_t first = b * kBlock;
      try {
        run_block(first, std::min(kBlock, n - first), tab, model, spec, opts, env_weight,
                  out.data() + first);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < workers; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

EvalReport summarize(const std::vector<double>& terminals) {
  std::vector<double> ok;
  ok.reserve(terminals.size());
  for (double v : terminals) {
    if (std::isfinite(v)) ok.push_back(v);
  }
  const std::size_t excluded = terminals.size() - ok.size();
  if (excluded * 100 > terminals.size()) {
    throw Error(std::to_string(excluded) + " of " + std::to_string(terminals.size()) +
                " terminal values are non-finite (more than 1%)");
  }
  if (ok.size() < 2) throw Error("need at least two finite terminal values");
  EvalReport r;
  const double n = static_cast<double>(ok.size());
  r.mean = pairwise_sum(ok.data(), ok.size()) / n;
  std::vector<double> sq(ok.size());
  for (std::size_t i = 0; i < ok.size(); ++i) sq[i] = (ok[i] - r.mean) * (ok[i] - r.mean);
  r.variance = pairwise_sum(sq.data(), sq.size()) / (n - 1.0);
  r.sharpe = sharpe_ratio(r.mean, r.variance);
  r.n_paths = static_cast<int>(ok.size());
  r.excluded = static_cast<int>(excluded);
  return r;
}

EvalReport out_of_sample(const GaussianPolicy& policy, const MarketModel& model,
                         const ProblemSpec& spec, const EvalOptions& opts) {
  if (opts.n_paths < 2) throw ConfigError("out-of-sample evaluation needs at least 2 paths");
  EvalReport r = summarize(terminal_surpluses(policy, model, spec, opts));
  r.kind = policy.kind();
  r.label = std::string(to_string(policy.kind()));
  r.seed = opts.seed;
  return r;
}

void write_report_csv(std::ostream& os, const std::vector<EvalReport>& reports) {
  os << "algo,mean,variance,sharpe,n_paths,seed\n";
  const auto old = os.precision(17);
  for (const auto& r : reports) {
    os << r.label << ',' << r.mean << ',' << r.variance << ',' << r.sharpe << ',' << r.n_paths
       << ',' << r.seed << '\n';
  }
  os.precision(old);
}

std::string format_table(const std::vector<EvalReport>& reports) {
  std::size_t width = std::string("Algorithm").size();
  for (const auto& r : reports) width = std::max(width, r.label.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width)) << "Algorithm" << std::right
     << std::setw(12) << "Mean" << std::setw(12) << "Variance" << std::setw(12) << "Sharpe"
     << '\n';
  os << std::fixed << std::setprecision(4);
  for (const auto& r : reports) {
    os << std::left << std::setw(static_cast<int>(width)) << r.label << std::right
       << std::setw(12) << r.mean << std::setw(12) << r.variance << std::setw(12) << r.sharpe
       << '\n';
  }
  return os.str();
}

}  // namespace emv
