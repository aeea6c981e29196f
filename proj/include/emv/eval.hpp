#pragma once

// Out-of-sample evaluation of frozen policies and comparison tables.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "emv/closed_form.hpp"
#include "emv/market.hpp"
#include "emv/policy.hpp"

namespace emv {

struct EvalOptions {
  int n_paths = 1000;
  std::uint64_t seed = 1;
  SimulationOptions sim;
  /// Worker threads; 0 picks the hardware concurrency. Results do not depend on it.
  unsigned threads = 0;
};

struct EvalReport {
  std::string label;
  PolicyKind kind = PolicyKind::custom;
  double mean = 0.0;
  double variance = 0.0;
  double sharpe = 0.0;
  int n_paths = 0;    // finite terminals used
  int excluded = 0;   // non-finite terminals dropped
  std::uint64_t seed = 0;
  std::string digest;
};

/// (mean - 1) / sqrt(variance); 0 when mean == 1, NaN when variance == 0 and mean != 1.
double sharpe_ratio(double mean, double variance);

/// Fixed-order pairwise sum, independent of how the values were produced.
double pairwise_sum(const double* v, std::size_t n);

/// Terminal surplus x_T - l_T of path p = 0..n_paths-1, path p drawing from
/// Stream(seed, p) in the same order as simulate_episode. Non-finite paths
/// come back as NaN.
std::vector<double> terminal_surpluses(const GaussianPolicy& policy, const MarketModel& model,
                                       const ProblemSpec& spec, const EvalOptions& opts);

/// Unbiased sample statistics of the finite entries. Throws Error when more
/// than 1% of entries are non-finite or fewer than two remain.
EvalReport summarize(const std::vector<double>& terminals);

/// Needs n_paths >= 2 (ConfigError otherwise).
EvalReport out_of_sample(const GaussianPolicy& policy, const MarketModel& model,
                         const ProblemSpec& spec, const EvalOptions& opts);

/// Header `algo,mean,variance,sharpe,n_paths,seed`.
void write_report_csv(std::ostream& os, const std::vector<EvalReport>& reports);

/// Aligned text with columns Algorithm / Mean / Variance / Sharpe.
std::string format_table(const std::vector<EvalReport>& reports);

}  // namespace emv
