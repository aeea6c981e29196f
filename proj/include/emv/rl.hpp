#pragma once

// Actor-critic learners with polynomial-in-(signal, time-to-go) parameters.
//
// Every scalar function f of the critic and actor is built from a grid of
// (m+1) m coefficients c[i][j], 0 <= i <= m, 1 <= j <= m:
//   poly(s, tau) = sum c[i][j] s^i tau^j
// with s the regime signal and tau = (T - t) dt the time to go in years.
// theta_k = exp(poly), vartheta_k = -exp(poly); psi and phi_k are plain polys.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emv/closed_form.hpp"
#include "emv/market.hpp"
#include "emv/policy.hpp"
#include "emv/rng.hpp"

namespace emv {

enum class Algo { coemv, poemv1, poemv2 };

std::string_view to_string(Algo a);
Algo algo_from_string(std::string_view s);

/// Default signal the learner conditions on.
SignalKind signal_of(Algo a);

/// Throws ConfigError unless `signal` is allowed for `a`: PoEMV-2 takes the
/// expectation or the unconditional probability, the others only their default.
void check_signal(Algo a, SignalKind signal);

using Grid = std::vector<double>;

int grid_size(int m);

/// Basis values s^i tau^j in grid order (index i m + j - 1).
std::vector<double> basis_at(double s, double tau, int m);

struct CriticParams {
  int m = 2;
  std::array<Grid, 3> theta;
  std::array<Grid, 2> vartheta;
  Grid psi;

  static CriticParams zeros(int m);
  bool operator==(const CriticParams&) const = default;
};

struct ActorParams {
  int m = 2;
  std::array<Grid, 3> phi;

  static ActorParams zeros(int m);
  bool operator==(const ActorParams&) const = default;
};

/// Critic functions expanded at one (signal, tau).
struct CriticTerms {
  double theta1 = 1.0, theta2 = 1.0, theta3 = 1.0;
  double vartheta1 = -1.0, vartheta2 = -1.0;
  double psi = 0.0;
};

struct ActorTerms {
  double phi1 = 0.0, phi2 = 0.0, phi3 = 0.0;
};

/// Throws Error naming the grid when an exponent would overflow.
CriticTerms critic_terms(const CriticParams& c, const double* basis);
ActorTerms actor_terms(const ActorParams& a, const double* basis);

/// theta1 x^2 + vartheta1 (w + theta2 l) x + vartheta2 (w + theta2 l)^2 + theta2 w l + theta3 l^2 + psi
double critic_value(const CriticTerms& k, double x, double l, double w);
double critic_value(int t, double x, double l, double signal, const CriticParams& c, double w,
                    int T, double dt);

/// (x - l - w)^2 - (w - d)^2
double terminal_objective(double x, double l, double w, double d);

/// N(phi1 x - (vartheta1/theta1) e^phi2 (w + theta2 l), e^phi3 / (2 theta1)).
AffineGaussian actor_law(const CriticTerms& k, const ActorTerms& a, double w);
AffineGaussian actor_law(int t, double signal, const CriticParams& c, const ActorParams& a,
                         double w, int T, double dt);
double actor_sample(int t, double x, double l, double signal, const CriticParams& c,
                    const ActorParams& a, double w, int T, double dt, Stream& rng);

/// -ln(theta1 / pi) / 2 + (phi3 + 1) / 2
double policy_entropy(double theta1, double phi3);

struct CriticGrads {
  std::array<Grid, 3> theta;
  std::array<Grid, 2> vartheta;
  Grid psi;
};

struct ActorGrads {
  std::array<Grid, 3> phi;
};

/// Partial derivatives of ln pi(u) with respect to (phi1, phi2, phi3) at fixed
/// critic terms; multiply by the basis for the grid entries.
std::array<double, 3> log_density_scores(const CriticTerms& k, const ActorTerms& a, double w,
                                         double x, double l, double u);

/// Shared per-step quantities of one episode under given parameters.
struct EpisodeView {
  int T = 0;
  std::size_t n = 0;              // periods
  std::vector<double> basis;      // K * n, basis-major
  std::vector<CriticTerms> critic;
  std::vector<double> J;          // critic values at t < T
  double J_T = 0.0;               // terminal objective
};

EpisodeView view_episode(const Episode& ep, const CriticParams& c, double w, const ProblemSpec& spec,
                         double dt);

/// Single-episode martingale loss. Entropy terms use the behaviour policy's
/// variance recorded in the episode.
double martingale_loss(const Episode& ep, const CriticParams& c, double w, const ProblemSpec& spec,
                       double dt);

/// Gradient of martingale_loss with respect to every critic grid entry.
CriticGrads ml_gradients(const Episode& ep, const CriticParams& c, double w,
                         const ProblemSpec& spec, double dt);

/// Score-function policy gradient G. The temporal difference at the last
/// period uses the terminal objective for J_T.
ActorGrads policy_gradient(const Episode& ep, const CriticParams& c, const ActorParams& a, double w,
                           const ProblemSpec& spec, double dt);

/// w - alpha (mean(window) - d). Throws Error on an empty window.
double update_lagrange(double w, const std::vector<double>& window, double d, double alpha);

struct Hyperparams {
  double eta_theta = 1e-12;
  double eta_vartheta = 1e-12;
  double eta_psi = 1e-9;
  double eta_phi = 1e-9;
  double alpha = 1e-2;
  int N = 10;
  int n_iter = 10000;
  double dt = 1.0 / 252.0;
  std::uint64_t seed = 1;
  int m = 2;
  /// Episodes per iteration; gradients are averaged over them.
  int batch = 1;
  /// Per-entry gradient clip; nullopt disables clipping.
  std::optional<double> clip = 1e6;

  void validate() const;
};

struct IterationRecord {
  int iter = 0;  // 1-based
  double terminal_net_wealth = 0.0;
  double w = 0.0;  // multiplier after this iteration

  bool operator==(const IterationRecord&) const = default;
};

struct TrainState {
  Algo algo = Algo::poemv1;
  SignalKind signal = SignalKind::filter;
  CriticParams critic;
  ActorParams actor;
  double w = 0.0;
  int completed = 0;
  std::vector<IterationRecord> history;
  std::vector<double> recent_terminals;  // ring buffer of capacity N

  bool operator==(const TrainState&) const = default;
};

/// Environment the learner interacts with.
struct TrainEnvironment {
  SimulationOptions sim;
};

/// Defaults: CoEMV on the market with the regime signal, PoEMV-1 on
/// filtered dynamics under p_hat, PoEMV-2 on dynamics weighted by its own
/// expectation signal.
TrainEnvironment default_environment(Algo a);
TrainEnvironment default_environment(Algo a, SignalKind signal);

TrainState initial_state(Algo a, const Hyperparams& h, const ProblemSpec& spec);
TrainState initial_state(Algo a, const Hyperparams& h, const ProblemSpec& spec, SignalKind signal);

/// One iteration: episodes, critic step, actor step and, every N
/// iterations, the multiplier update. Episode k of iteration i draws from
/// Stream(seed, (i - 1) batch + k + 1); with batch 1 that is Stream(seed, i).
/// The recorded terminal is the batch mean.
void train_step(TrainState& state, const MarketModel& model, const Hyperparams& hyper,
                const ProblemSpec& spec, const TrainEnvironment& env);

/// Runs iterations until state.completed == hyper.n_iter. Iteration k draws
/// from Stream(seed, k), so a resumed state continues bit-identically.
void train_continue(TrainState& state, const MarketModel& model, const Hyperparams& hyper,
                    const ProblemSpec& spec, const TrainEnvironment& env);

TrainState train(Algo a, const MarketModel& model, const Hyperparams& hyper,
                 const ProblemSpec& spec);
TrainState train(Algo a, const MarketModel& model, const Hyperparams& hyper,
                 const ProblemSpec& spec, const TrainEnvironment& env);

/// Frozen learned policy; copies the parameters.
GaussianPolicy learned_policy(const TrainState& s, int T, double dt);
GaussianPolicy learned_policy(Algo a, const CriticParams& c, const ActorParams& ac, double w, int T,
                              double dt);

/// `iter,avg_terminal_net_wealth,var_terminal_net_wealth,w` over blocks of 10 iterations.
void write_history_csv(std::ostream& os, const TrainState& s);

/// JSON text holding the state, the hyperparameters and the seed.
std::string checkpoint_json(const TrainState& s, const Hyperparams& h);
void load_checkpoint(const std::string& json_text, TrainState& s, Hyperparams& h);

}  // namespace emv
