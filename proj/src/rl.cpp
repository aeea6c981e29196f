#include "emv/rl.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "emv/error.hpp"
#include "emv/filter.hpp"
#include "emv/kernels.hpp"

namespace emv {

namespace {

constexpr double kMaxExponent = 700.0;

double poly(const Grid& g, const double* basis) {
  double s = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) s += g[k] * basis[k];
  return s;
}

double checked_exp(double e, const char* name) {
  if (!(e <= kMaxExponent)) {
    std::ostringstream msg;
    msg << "grid " << name << " overflows exp (exponent " << e << ")";
    throw Error(msg.str());
  }
  return std::exp(e);
}

Grid weighted_sums(const std::vector<double>& weights, const std::vector<double>& basis,
                   std::size_t n, int K) {
  Grid out(static_cast<std::size_t>(K));
  kernels::basis_weighted_sums(weights.data(), basis.data(), n, K, out.data());
  return out;
}

double gaussian_entropy(double variance) {
  return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * variance);
}

}  // namespace

std::string_view to_string(Algo a) {
  switch (a) {
    case Algo::coemv: return "coemv";
    case Algo::poemv1: return "poemv1";
    case Algo::poemv2: return "poemv2";
  }
  return "?";
}

Algo algo_from_string(std::string_view s) {
  if (s == "coemv") return Algo::coemv;
  if (s == "poemv1") return Algo::poemv1;
  if (s == "poemv2") return Algo::poemv2;
  throw ConfigError("unknown algorithm '" + std::string(s) + "' (coemv|poemv1|poemv2)");
}

SignalKind signal_of(Algo a) {
  switch (a) {
    case Algo::coemv: return SignalKind::regime;
    case Algo::poemv1: return SignalKind::filter;
    case Algo::poemv2: return SignalKind::expectation;
  }
  return SignalKind::filter;
}

void check_signal(Algo a, SignalKind signal) {
  const bool ok = a == Algo::poemv2
                      ? signal == SignalKind::expectation || signal == SignalKind::unconditional
                      : signal == signal_of(a);
  if (!ok) {
    throw ConfigError(std::string(to_string(a)) + " cannot use the " +
                      std::string(to_string(signal)) + " signal");
  }
}

int grid_size(int m) { return (m + 1) * m; }

std::vector<double> basis_at(double s, double tau, int m) {
  std::vector<double> out(static_cast<std::size_t>(grid_size(m)));
  kernels::scalar::basis_eval(&s, &tau, 1, m, out.data());
  return out;
}

CriticParams CriticParams::zeros(int m) {
  if (m < 1) throw Error("polynomial order m must be at least 1");
  CriticParams c;
  c.m = m;
  const Grid z(static_cast<std::size_t>(grid_size(m)), 0.0);
  c.theta = {z, z, z};
  c.vartheta = {z, z};
  c.psi = z;
  return c;
}

ActorParams ActorParams::zeros(int m) {
  if (m < 1) throw Error("polynomial order m must be at least 1");
  ActorParams a;
  a.m = m;
  const Grid z(static_cast<std::size_t>(grid_size(m)), 0.0);
  a.phi = {z, z, z};
  return a;
}

CriticTerms critic_terms(const CriticParams& c, const double* basis) {
  CriticTerms k;
  k.theta1 = checked_exp(poly(c.theta[0], basis), "theta1");
  k.theta2 = checked_exp(poly(c.theta[1], basis), "theta2");
  k.theta3 = checked_exp(poly(c.theta[2], basis), "theta3");
  k.vartheta1 = -checked_exp(poly(c.vartheta[0], basis), "vartheta1");
  k.vartheta2 = -checked_exp(poly(c.vartheta[1], basis), "vartheta2");
  k.psi = poly(c.psi, basis);
  return k;
}

ActorTerms actor_terms(const ActorParams& a, const double* basis) {
  return {poly(a.phi[0], basis), poly(a.phi[1], basis), poly(a.phi[2], basis)};
}

double critic_value(const CriticTerms& k, double x, double l, double w) {
  const double W = w + k.theta2 * l;
  return k.theta1 * x * x + k.vartheta1 * W * x + W * W * k.vartheta2 + k.theta2 * w * l +
         k.theta3 * l * l + k.psi;
}

double critic_value(int t, double x, double l, double signal, const CriticParams& c, double w,
                    int T, double dt) {
  if (t < 0 || t > T) throw Error("critic_value: need 0 <= t <= T");
  const auto b = basis_at(signal, (T - t) * dt, c.m);
  return critic_value(critic_terms(c, b.data()), x, l, w);
}

double terminal_objective(double x, double l, double w, double d) {
  return (x - l - w) * (x - l - w) - (w - d) * (w - d);
}

AffineGaussian actor_law(const CriticTerms& k, const ActorTerms& a, double w) {
  const double scale = -(k.vartheta1 / k.theta1) * checked_exp(a.phi2, "phi2");
  AffineGaussian g;
  g.coef_x = a.phi1;
  g.coef_l = scale * k.theta2;
  g.intercept = scale * w;
  g.variance = checked_exp(a.phi3, "phi3") / (2.0 * k.theta1);
  return g;
}

AffineGaussian actor_law(int t, double signal, const CriticParams& c, const ActorParams& a,
                         double w, int T, double dt) {
  const auto b = basis_at(signal, (T - t) * dt, c.m);
  return actor_law(critic_terms(c, b.data()), actor_terms(a, b.data()), w);
}

double actor_sample(int t, double x, double l, double signal, const CriticParams& c,
                    const ActorParams& a, double w, int T, double dt, Stream& rng) {
  const AffineGaussian g = actor_law(t, signal, c, a, w, T, dt);
  return g.mean(x, l) + std::sqrt(g.variance) * rng.normal();
}

double policy_entropy(double theta1, double phi3) {
  return -0.5 * std::log(theta1 / std::numbers::pi) + 0.5 * (phi3 + 1.0);
}

std::array<double, 3> log_density_scores(const CriticTerms& k, const ActorTerms& a, double w,
                                         double x, double l, double u) {
  const double W = w + k.theta2 * l;
  const double shift = (k.vartheta1 / k.theta1) * std::exp(a.phi2) * W;
  const double r = u - a.phi1 * x + shift;  // u minus the mean
  const double prec = k.theta1 * std::exp(-a.phi3);
  return {2.0 * prec * r * x, -2.0 * prec * r * shift, prec * r * r - 0.5};
}

EpisodeView view_episode(const Episode& ep, const CriticParams& c, double w,
                         const ProblemSpec& spec, double dt) {
  if (ep.periods() != spec.T) {
    throw Error("episode has " + std::to_string(ep.periods()) + " periods, expected " +
                std::to_string(spec.T));
  }
  EpisodeView v;
  v.T = spec.T;
  v.n = static_cast<std::size_t>(spec.T);
  const int K = grid_size(c.m);
  std::vector<double> s(v.n), tau(v.n);
  for (std::size_t t = 0; t < v.n; ++t) {
    s[t] = ep.steps[t].signal;
    tau[t] = (spec.T - static_cast<int>(t)) * dt;
  }
  v.basis.resize(static_cast<std::size_t>(K) * v.n);
  kernels::basis_eval(s.data(), tau.data(), v.n, c.m, v.basis.data());
  v.critic.resize(v.n);
  v.J.resize(v.n);
  std::vector<double> b(static_cast<std::size_t>(K));
  for (std::size_t t = 0; t < v.n; ++t) {
    for (int k = 0; k < K; ++k) b[k] = v.basis[k * v.n + t];
    v.critic[t] = critic_terms(c, b.data());
    v.J[t] = critic_value(v.critic[t], ep.steps[t].x, ep.steps[t].l, w);
  }
  const EpisodeStep& end = ep.terminal();
  v.J_T = terminal_objective(end.x, end.l, w, spec.d);
  return v;
}

namespace {

// J_T - J_t - lambda sum_{k>=t} H_k dt with behaviour entropies.
std::vector<double> terminal_differences(const Episode& ep, const EpisodeView& v,
                                         const ProblemSpec& spec, double dt) {
  std::vector<double> td(v.n);
  double tail = 0.0;
  for (std::size_t t = v.n; t-- > 0;) {
    tail += gaussian_entropy(ep.steps[t].action_var) * dt;
    td[t] = v.J_T - v.J[t] - spec.lambda * tail;
  }
  return td;
}

}  // namespace

double martingale_loss(const Episode& ep, const CriticParams& c, double w, const ProblemSpec& spec,
                       double dt) {
  const EpisodeView v = view_episode(ep, c, w, spec, dt);
  const auto td = terminal_differences(ep, v, spec, dt);
  double loss = 0.0;
  for (double d : td) loss += d * d * dt;
  return 0.5 * loss;
}

CriticGrads ml_gradients(const Episode& ep, const CriticParams& c, double w,
                         const ProblemSpec& spec, double dt) {
  const EpisodeView v = view_episode(ep, c, w, spec, dt);
  const auto td = terminal_differences(ep, v, spec, dt);
  const int K = grid_size(c.m);
  std::array<std::vector<double>, 6> wts;
  for (auto& x : wts) x.resize(v.n);
  for (std::size_t t = 0; t < v.n; ++t) {
    const CriticTerms& k = v.critic[t];
    const double x = ep.steps[t].x, l = ep.steps[t].l;
    const double W = w + k.theta2 * l;
    const double f = -td[t] * dt;
    wts[0][t] = f * x * x * k.theta1;
    wts[1][t] = f * (k.vartheta1 * l * x + 2.0 * W * k.vartheta2 * l + w * l) * k.theta2;
    wts[2][t] = f * l * l * k.theta3;
    wts[3][t] = f * W * x * k.vartheta1;
    wts[4][t] = f * W * W * k.vartheta2;
    wts[5][t] = f;
  }
  CriticGrads g;
  for (int i = 0; i < 3; ++i) g.theta[i] = weighted_sums(wts[i], v.basis, v.n, K);
  for (int i = 0; i < 2; ++i) g.vartheta[i] = weighted_sums(wts[3 + i], v.basis, v.n, K);
  g.psi = weighted_sums(wts[5], v.basis, v.n, K);
  return g;
}

ActorGrads policy_gradient(const Episode& ep, const CriticParams& c, const ActorParams& a, double w,
                           const ProblemSpec& spec, double dt) {
  if (a.m != c.m) throw Error("policy_gradient: actor and critic orders differ");
  const EpisodeView v = view_episode(ep, c, w, spec, dt);
  const int K = grid_size(c.m);
  std::array<std::vector<double>, 3> wts;
  for (auto& x : wts) x.resize(v.n);
  std::vector<double> b(static_cast<std::size_t>(K));
  for (std::size_t t = 0; t < v.n; ++t) {
    for (int k = 0; k < K; ++k) b[k] = v.basis[k * v.n + t];
    const ActorTerms at = actor_terms(a, b.data());
    const CriticTerms& ct = v.critic[t];
    const EpisodeStep& st = ep.steps[t];
    const auto score = log_density_scores(ct, at, w, st.x, st.l, st.action);
    const double next = t + 1 < v.n ? v.J[t + 1] : v.J_T;
    const double H = policy_entropy(ct.theta1, at.phi3);
    const double adv = next - v.J[t] - spec.lambda * H * dt;
    wts[0][t] = score[0] * adv;
    wts[1][t] = score[1] * adv;
    wts[2][t] = score[2] * adv - spec.lambda * 0.5 * dt;
  }
  ActorGrads g;
  for (int i = 0; i < 3; ++i) g.phi[i] = weighted_sums(wts[i], v.basis, v.n, K);
  return g;
}

double update_lagrange(double w, const std::vector<double>& window, double d, double alpha) {
  if (window.empty()) throw Error("update_lagrange: empty window");
  double s = 0.0;
  for (double x : window) s += x;
  return w - alpha * (s / static_cast<double>(window.size()) - d);
}

void Hyperparams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string(name) + " must be positive");
    }
  };
  positive(eta_theta, "eta_theta");
  positive(eta_vartheta, "eta_vartheta");
  positive(eta_psi, "eta_psi");
  positive(eta_phi, "eta_phi");
  positive(alpha, "alpha");
  positive(dt, "dt");
  if (N < 1) throw ConfigError("N must be at least 1");
  if (batch < 1) throw ConfigError("batch must be at least 1");
  if (n_iter < 0) throw ConfigError("n_iter must be nonnegative");
  if (m < 1) throw ConfigError("m must be at least 1");
  if (clip) positive(*clip, "clip");
}

TrainEnvironment default_environment(Algo a) { return default_environment(a, signal_of(a)); }

TrainEnvironment default_environment(Algo a, SignalKind signal) {
  check_signal(a, signal);
  TrainEnvironment env;
  switch (a) {
    case Algo::coemv:
      env.sim.dynamics = Dynamics::market;
      break;
    case Algo::poemv1:
      env.sim.dynamics = Dynamics::filtered;
      env.sim.env_signal = SignalKind::filter;
      break;
    case Algo::poemv2:
      env.sim.dynamics = Dynamics::filtered;
      env.sim.env_signal = signal;
      break;
  }
  env.sim.action = ActionMode::sample;
  return env;
}

TrainState initial_state(Algo a, const Hyperparams& h, const ProblemSpec& spec) {
  return initial_state(a, h, spec, signal_of(a));
}

TrainState initial_state(Algo a, const Hyperparams& h, const ProblemSpec& spec, SignalKind signal) {
  h.validate();
  check_signal(a, signal);
  TrainState s;
  s.algo = a;
  s.signal = signal;
  s.critic = CriticParams::zeros(h.m);
  s.actor = ActorParams::zeros(h.m);
  s.w = spec.d;
  return s;
}

GaussianPolicy learned_policy(Algo a, const CriticParams& c, const ActorParams& ac, double w, int T,
                              double dt) {
  return GaussianPolicy(PolicyKind::learned, signal_of(a),
                        [c, ac, w, T, dt](int t, double signal) {
                          return actor_law(t, signal, c, ac, w, T, dt);
                        });
}

GaussianPolicy learned_policy(const TrainState& s, int T, double dt) {
  const CriticParams c = s.critic;
  const ActorParams ac = s.actor;
  const double w = s.w;
  return GaussianPolicy(PolicyKind::learned, s.signal, [c, ac, w, T, dt](int t, double signal) {
    return actor_law(t, signal, c, ac, w, T, dt);
  });
}

namespace {

// Laws for every (t, signal value) the episode can visit, computed once per
// iteration through the same actor_law used by learned_policy.
GaussianPolicy tabulated_policy(const TrainState& s, const std::vector<double>& path, int T,
                                double dt) {
  const bool regime = s.signal == SignalKind::regime;
  const std::size_t S = regime ? 2 : 1;
  std::vector<AffineGaussian> table(static_cast<std::size_t>(T) * S);
  for (int t = 0; t < T; ++t) {
    if (regime) {
      table[2 * t] = actor_law(t, 1.0, s.critic, s.actor, s.w, T, dt);
      table[2 * t + 1] = actor_law(t, 2.0, s.critic, s.actor, s.w, T, dt);
    } else {
      table[t] = actor_law(t, path[t], s.critic, s.actor, s.w, T, dt);
    }
  }
  return GaussianPolicy(PolicyKind::learned, s.signal,
                        [table = std::move(table), regime](int t, double signal) {
                          if (regime) return table[2 * t + (signal == 1.0 ? 0 : 1)];
                          return table[t];
                        });
}

void clip_grid(Grid& g, const std::optional<double>& clip) {
  if (!clip) return;
  for (double& v : g) v = std::clamp(v, -*clip, *clip);
}

void accumulate(Grid& into, const Grid& g) {
  for (std::size_t k = 0; k < into.size(); ++k) into[k] += g[k];
}

void scale(Grid& g, double f) {
  for (double& v : g) v *= f;
}

// Gradients are clipped after batch averaging.
void step_grid(Grid& p, Grid g, double eta, const std::optional<double>& clip) {
  clip_grid(g, clip);
  for (std::size_t k = 0; k < p.size(); ++k) p[k] -= eta * g[k];
}

void require_finite(const TrainState& s, int iter) {
  auto check = [&](const Grid& g, const std::string& name) {
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (!std::isfinite(g[k])) {
        throw Error("training diverged at iteration " + std::to_string(iter) + ": " + name + "[" +
                    std::to_string(k) + "] is not finite");
      }
    }
  };
  for (int i = 0; i < 3; ++i) check(s.critic.theta[i], "theta" + std::to_string(i + 1));
  for (int i = 0; i < 2; ++i) check(s.critic.vartheta[i], "vartheta" + std::to_string(i + 1));
  check(s.critic.psi, "psi");
  for (int i = 0; i < 3; ++i) check(s.actor.phi[i], "phi" + std::to_string(i + 1));
  if (!std::isfinite(s.w)) {
    throw Error("training diverged at iteration " + std::to_string(iter) + ": w is not finite");
  }
}

}  // namespace

void train_step(TrainState& s, const MarketModel& model, const Hyperparams& h,
                const ProblemSpec& spec, const TrainEnvironment& env) {
  if (s.critic.m != h.m || s.actor.m != h.m) throw Error("train: state and hyperparameters disagree on m");
  const int T = spec.T;
  const int iter = s.completed + 1;
  try {
    const SignalKind kind = s.signal;
    const std::vector<double> path =
        kind == SignalKind::regime ? std::vector<double>{}
                                   : deterministic_signal_path(kind, model.chain, T);
    const GaussianPolicy pol = tabulated_policy(s, path, T, h.dt);
    std::vector<Episode> eps;
    eps.reserve(static_cast<std::size_t>(h.batch));
    for (int k = 0; k < h.batch; ++k) {
      Stream rng(h.seed, static_cast<std::uint64_t>(iter - 1) * h.batch + k + 1);
      eps.push_back(simulate_episode(model, pol, T, spec.x0, spec.l0, rng, env.sim));
    }
    const double inv = 1.0 / h.batch;

    CriticGrads cg = ml_gradients(eps[0], s.critic, s.w, spec, h.dt);
    for (int k = 1; k < h.batch; ++k) {
      const CriticGrads more = ml_gradients(eps[k], s.critic, s.w, spec, h.dt);
      for (int i = 0; i < 3; ++i) accumulate(cg.theta[i], more.theta[i]);
      for (int i = 0; i < 2; ++i) accumulate(cg.vartheta[i], more.vartheta[i]);
      accumulate(cg.psi, more.psi);
    }
    if (h.batch > 1) {
      for (auto& g : cg.theta) scale(g, inv);
      for (auto& g : cg.vartheta) scale(g, inv);
      scale(cg.psi, inv);
    }
    for (int i = 0; i < 3; ++i) step_grid(s.critic.theta[i], cg.theta[i], h.eta_theta, h.clip);
    for (int i = 0; i < 2; ++i) {
      step_grid(s.critic.vartheta[i], cg.vartheta[i], h.eta_vartheta, h.clip);
    }
    step_grid(s.critic.psi, cg.psi, h.eta_psi, h.clip);

    ActorGrads ag = policy_gradient(eps[0], s.critic, s.actor, s.w, spec, h.dt);
    for (int k = 1; k < h.batch; ++k) {
      const ActorGrads more = policy_gradient(eps[k], s.critic, s.actor, s.w, spec, h.dt);
      for (int i = 0; i < 3; ++i) accumulate(ag.phi[i], more.phi[i]);
    }
    if (h.batch > 1) {
      for (auto& g : ag.phi) scale(g, inv);
    }
    for (int i = 0; i < 3; ++i) step_grid(s.actor.phi[i], ag.phi[i], h.eta_phi, h.clip);

    double terminal = 0.0;
    for (const Episode& ep : eps) terminal += ep.terminal_surplus();
    terminal *= inv;
    s.recent_terminals.push_back(terminal);
    if (static_cast<int>(s.recent_terminals.size()) > h.N) {
      s.recent_terminals.erase(s.recent_terminals.begin());
    }
    if (iter % h.N == 0) s.w = update_lagrange(s.w, s.recent_terminals, spec.d, h.alpha);
    s.history.push_back({iter, terminal, s.w});
  } catch (const Error& e) {
    throw Error("training failed at iteration " + std::to_string(iter) + ": " + e.what());
  }
  require_finite(s, iter);
  s.completed = iter;
}

void train_continue(TrainState& s, const MarketModel& model, const Hyperparams& h,
                    const ProblemSpec& spec, const TrainEnvironment& env) {
  h.validate();
  spec.validate();
  while (s.completed < h.n_iter) train_step(s, model, h, spec, env);
}

TrainState train(Algo a, const MarketModel& model, const Hyperparams& hyper,
                 const ProblemSpec& spec, const TrainEnvironment& env) {
  TrainState s = initial_state(a, hyper, spec);
  train_continue(s, model, hyper, spec, env);
  return s;
}

TrainState train(Algo a, const MarketModel& model, const Hyperparams& hyper,
                 const ProblemSpec& spec) {
  return train(a, model, hyper, spec, default_environment(a));
}

void write_history_csv(std::ostream& os, const TrainState& s) {
  os << "iter,avg_terminal_net_wealth,var_terminal_net_wealth,w\n";
  os.precision(17);
  constexpr std::size_t block = 10;
  for (std::size_t start = 0; start < s.history.size(); start += block) {
    const std::size_t end = std::min(start + block, s.history.size());
    const double n = static_cast<double>(end - start);
    double mean = 0.0;
    for (std::size_t i = start; i < end; ++i) mean += s.history[i].terminal_net_wealth;
    mean /= n;
    double ss = 0.0;
    for (std::size_t i = start; i < end; ++i) {
      const double d = s.history[i].terminal_net_wealth - mean;
      ss += d * d;
    }
    const double var = n > 1 ? ss / (n - 1) : 0.0;
    os << s.history[end - 1].iter << ',' << mean << ',' << var << ',' << s.history[end - 1].w
       << '\n';
  }
}

std::string checkpoint_json(const TrainState& s, const Hyperparams& h) {
  nlohmann::json j;
  j["format"] = "emv-train-state/1";
  j["algo"] = std::string(to_string(s.algo));
  j["signal"] = std::string(to_string(s.signal));
  j["m"] = s.critic.m;
  j["critic"] = {{"theta1", s.critic.theta[0]},       {"theta2", s.critic.theta[1]},
                 {"theta3", s.critic.theta[2]},       {"vartheta1", s.critic.vartheta[0]},
                 {"vartheta2", s.critic.vartheta[1]}, {"psi", s.critic.psi}};
  j["actor"] = {{"phi1", s.actor.phi[0]}, {"phi2", s.actor.phi[1]}, {"phi3", s.actor.phi[2]}};
  j["w"] = s.w;
  j["completed"] = s.completed;
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& r : s.history) hist.push_back({r.iter, r.terminal_net_wealth, r.w});
  j["history"] = hist;
  j["recent_terminals"] = s.recent_terminals;
  j["hyper"] = {{"eta_theta", h.eta_theta}, {"eta_vartheta", h.eta_vartheta},
                {"eta_psi", h.eta_psi},     {"eta_phi", h.eta_phi},
                {"alpha", h.alpha},         {"N", h.N},
                {"n_iter", h.n_iter},       {"dt", h.dt},
                {"seed", h.seed},           {"m", h.m},
                {"batch", h.batch}};
  j["hyper"]["clip"] = h.clip ? nlohmann::json(*h.clip) : nlohmann::json(nullptr);
  return j.dump(2);
}

void load_checkpoint(const std::string& text, TrainState& s, Hyperparams& h) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format") != "emv-train-state/1") throw ConfigError("checkpoint: unknown format");
    TrainState out;
    out.algo = algo_from_string(j.at("algo").get<std::string>());
    out.signal = j.contains("signal") ? signal_kind_from_string(j.at("signal").get<std::string>())
                                      : signal_of(out.algo);
    check_signal(out.algo, out.signal);
    const int m = j.at("m").get<int>();
    out.critic = CriticParams::zeros(m);
    out.actor = ActorParams::zeros(m);
    const auto size = static_cast<std::size_t>(grid_size(m));
    auto grid = [&](const nlohmann::json& src, const char* name) {
      Grid g = src.at(name).get<Grid>();
      if (g.size() != size) throw ConfigError(std::string("checkpoint: grid ") + name + " has wrong size");
      return g;
    };
    const auto& c = j.at("critic");
    out.critic.theta = {grid(c, "theta1"), grid(c, "theta2"), grid(c, "theta3")};
    out.critic.vartheta = {grid(c, "vartheta1"), grid(c, "vartheta2")};
    out.critic.psi = grid(c, "psi");
    const auto& a = j.at("actor");
    out.actor.phi = {grid(a, "phi1"), grid(a, "phi2"), grid(a, "phi3")};
    out.w = j.at("w").get<double>();
    out.completed = j.at("completed").get<int>();
    for (const auto& r : j.at("history")) {
      out.history.push_back({r.at(0).get<int>(), r.at(1).get<double>(), r.at(2).get<double>()});
    }
    out.recent_terminals = j.at("recent_terminals").get<std::vector<double>>();
    if (static_cast<int>(out.history.size()) != out.completed) {
      throw ConfigError("checkpoint: history length differs from completed iterations");
    }
    const auto& hj = j.at("hyper");
    Hyperparams hp;
    hp.eta_theta = hj.at("eta_theta").get<double>();
    hp.eta_vartheta = hj.at("eta_vartheta").get<double>();
    hp.eta_psi = hj.at("eta_psi").get<double>();
    hp.eta_phi = hj.at("eta_phi").get<double>();
    hp.alpha = hj.at("alpha").get<double>();
    hp.N = hj.at("N").get<int>();
    hp.n_iter = hj.at("n_iter").get<int>();
    hp.dt = hj.at("dt").get<double>();
    hp.seed = hj.at("seed").get<std::uint64_t>();
    hp.m = hj.at("m").get<int>();
    hp.batch = hj.value("batch", 1);
    if (hj.at("clip").is_null()) {
      hp.clip.reset();
    } else {
      hp.clip = hj.at("clip").get<double>();
    }
    if (hp.m != m) throw ConfigError("checkpoint: hyperparameter m differs from grid order");
    hp.validate();
    s = std::move(out);
    h = hp;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace emv
