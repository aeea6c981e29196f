#pragma once

// Block-based training and replay evaluation on price panels.
//
// Each training iteration samples one block, labels it, estimates per-phase
// statistics, folds them into a running exponential average and builds a
// market from the averaged estimate; the learner then takes one step on an
// episode generated from that market. Evaluation replays recorded returns.

#include <cstdint>
#include <vector>

#include "emv/closed_form.hpp"
#include "emv/data_ingest.hpp"
#include "emv/market.hpp"
#include "emv/rl.hpp"

namespace emv {

/// Returns and hidden regimes of one path; prices follow the risky asset.
struct RecordedPath {
  std::vector<Returns> returns;  // per period, gross
  std::vector<int> regimes;      // per period, regime in force over [t, t+1]
  PriceSeries prices;            // returns.size() + 1 closes of the risky asset
};

/// Paths drawn from a known market; path k uses Stream(seed, k). Dates are
/// synthetic business-day stamps.
std::vector<RecordedPath> synthetic_panel(const MarketModel& truth, int n_paths, int periods,
                                          std::uint64_t seed);

/// Market with the base's riskless asset and liability, the estimated
/// per-phase risky returns (normal) and transition probabilities.
MarketModel model_from_estimate(const PhaseEstimate& est, const MarketModel& base);

/// Regime-free market: riskless and liability returns mixed with the
/// stationary weights of the estimated chain, risky returns from the pooled
/// block statistics, identical in both regimes.
MarketModel pooled_model(const PhaseEstimate& est, double pooled_mean, double pooled_variance,
                         const MarketModel& base);

enum class EmpiricalLearner {
  poemv1,  // regime-switching market, filtered dynamics
  emv      // regime-free market, no filter
};

struct EmpiricalOptions {
  EmpiricalLearner learner = EmpiricalLearner::poemv1;
  int exp_N = 6;
  double gamma1 = 0.24;
  double gamma2 = 0.19;
  Frequency frequency = Frequency::daily;
  /// Environment of the regime-switching learner: filtered mixture dynamics or
  /// the estimated market itself.
  Dynamics poemv1_dynamics = Dynamics::filtered;
};

struct EmpiricalRun {
  TrainState state;
  PhaseEstimate estimate;    // running average after the last iteration
  MarketModel final_model;   // market the last iteration trained on
  int skipped_blocks = 0;    // blocks missing a phase; the previous estimate is kept
};

/// Blocks have spec.T periods. The initial estimate comes from labelling every
/// training series in full. Block draws use Stream(seed + 1, iteration), the
/// learner's episodes Stream(seed, iteration).
EmpiricalRun train_empirical(const std::vector<PriceSeries>& training, const MarketModel& base,
                             const Hyperparams& hyper, const ProblemSpec& spec,
                             const EmpiricalOptions& opts);

/// Estimate from full-length series (labels computed per series, statistics pooled).
PhaseEstimate estimate_panel(const std::vector<PriceSeries>& series, double gamma1, double gamma2);

/// Terminal surplus of `policy` on each recorded path (first spec.T periods).
/// Non-regime signals are the deterministic paths of `signal_chain`; actions
/// are sampled with Stream(seed, path index) when mode is sample.
std::vector<double> replay_terminals(const GaussianPolicy& policy, const RegimeChain& signal_chain,
                                     const std::vector<RecordedPath>& paths,
                                     const ProblemSpec& spec, ActionMode mode, std::uint64_t seed);

}  // namespace emv
