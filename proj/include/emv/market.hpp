#pragma once

// Two-regime market: return laws, asset/liability/surplus dynamics and episode
// simulation.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "emv/chain.hpp"
#include "emv/moments.hpp"
#include "emv/policy.hpp"
#include "emv/rng.hpp"

namespace emv {

enum class ReturnKind { constant, normal, skewed_t };

/// How annual_mean is quoted: as a gross factor (1.2) or as a net rate (0.2).
enum class MeanConvention { gross, net };

/// Annual return law of one asset (or the liability) in one regime.
///
/// Per-period conversion over a period of length dt (years):
///   mean  = 1 + (g - 1) dt  for a gross quote g,  1 + r dt for a net quote r
///   sd    = annual_vol * sqrt(dt)
/// When vol_is_variance is set, annual_vol holds a variance and sd uses its root.
struct ReturnSpec {
  ReturnKind kind = ReturnKind::constant;
  double annual_mean = 1.0;
  double annual_vol = 0.0;
  double dof = 10.0;   // skewed_t only
  double skew = 0.0;   // skewed_t only, in (-1, 1)
  MeanConvention convention = MeanConvention::gross;
  bool vol_is_variance = false;

  void validate(std::string_view name) const;
  double period_mean(double dt) const noexcept;
  double period_sd(double dt) const noexcept;
};

struct MarketModel {
  RegimeChain chain;
  std::array<ReturnSpec, 2> e0;  // index 0 -> regime 1
  std::array<ReturnSpec, 2> e1;
  std::array<ReturnSpec, 2> q;
  double dt = 1.0 / 252.0;

  /// Validates every spec and that E[e e'] is positive definite in both regimes.
  static MarketModel make(const RegimeChain& chain, const std::array<ReturnSpec, 2>& e0,
                          const std::array<ReturnSpec, 2>& e1,
                          const std::array<ReturnSpec, 2>& q, double dt);

  /// Per-period moments in the given regime (1 or 2).
  MomentSet moments(int regime) const;
};

struct Returns {
  double e0 = 1.0;
  double e1 = 1.0;
  double q = 1.0;
};

struct SurplusStep {
  double x = 0.0;
  double l = 0.0;
  double s = 0.0;
};

Returns sample_returns(int regime, const MarketModel& model, Stream& rng);

/// Skewed Student-t (Hansen family) rescaled to the given mean and standard deviation.
double sample_skewed_t(double mean, double vol, double dof, double skew, Stream& rng);

/// x' = e0 x + (e1 - e0) u,  l' = q l,  s' = x' - l'.
SurplusStep step_surplus(double x, double l, double u, double e0, double e1, double q);

/// Environment driving wealth in an episode.
///   market    returns drawn from the hidden regime's law
///   filtered  returns replaced by their conditional means given a regime signal
///             (mixture weights signal / 1 - signal), no return noise
enum class Dynamics { market, filtered };

enum class ActionMode { sample, mean };

struct SimulationOptions {
  Dynamics dynamics = Dynamics::market;
  SignalKind env_signal = SignalKind::filter;  // weights for filtered dynamics
  ActionMode action = ActionMode::sample;
};

std::string_view to_string(Dynamics d);
Dynamics dynamics_from_string(std::string_view s);

struct EpisodeStep {
  int t = 0;
  double x = 0.0;
  double l = 0.0;
  int regime = 1;
  double p_hat = 0.5;
  double signal = 0.0;       // value fed to the policy at t
  double action = 0.0;       // NaN on the terminal record
  double action_mean = 0.0;  // NaN on the terminal record
  double action_var = 0.0;   // NaN on the terminal record
  double e0 = 0.0;           // returns realized over [t, t+1]; NaN on the terminal record
  double e1 = 0.0;
  double q = 0.0;
};

/// periods + 1 records; the last one is the terminal state.
struct Episode {
  std::vector<EpisodeStep> steps;

  int periods() const noexcept { return static_cast<int>(steps.size()) - 1; }
  const EpisodeStep& terminal() const { return steps.back(); }
  double terminal_surplus() const { return steps.back().x - steps.back().l; }
};

/// Deterministic signal path of length periods + 1 for the non-regime kinds.
std::vector<double> deterministic_signal_path(SignalKind kind, const RegimeChain& chain,
                                              int periods);

Episode simulate_episode(const MarketModel& model, const GaussianPolicy& policy, int periods,
                         double x0, double l0, Stream& rng, const SimulationOptions& opts = {});

/// Market used by the simulation study: daily periods over ten years, a
/// persistent bull regime and a short-lived bear regime.
MarketModel default_market(double dt = 1.0 / 252.0);

/// Header `t,x,l,regime,p_hat,action`; the terminal row has an empty action.
void write_episode_csv(std::ostream& os, const Episode& ep);

}  // namespace emv
