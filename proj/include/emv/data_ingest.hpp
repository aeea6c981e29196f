#pragma once

// Price-series ingestion and the heuristic estimation used for empirical
// runs: bull/bear labelling, per-regime return statistics, sojourn-based
// transition probabilities, exponential averaging, block sampling and beta.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "emv/rng.hpp"

namespace emv {

enum class Frequency { daily, monthly };

std::string_view to_string(Frequency f);
Frequency frequency_from_string(std::string_view s);

/// 252 or 12.
int periods_per_year(Frequency f);

struct PriceSeries {
  std::vector<std::string> dates;  // ISO-8601 YYYY-MM-DD
  std::vector<double> closes;
  Frequency frequency = Frequency::daily;

  std::size_t size() const noexcept { return closes.size(); }

  /// Throws ConfigError unless dates are well formed and strictly increasing,
  /// closes are finite and positive, and both columns have the same length.
  void validate() const;

  /// Simple returns close[t+1] / close[t] - 1, size() - 1 entries.
  std::vector<double> returns() const;
};

/// Reads `date,close` CSV (header required; extra columns rejected).
PriceSeries read_price_csv(std::istream& is, Frequency f);
PriceSeries load_price_csv(const std::string& path, Frequency f);
void write_price_csv(std::ostream& os, const PriceSeries& s);

enum class MarketPhase { bull = 1, bear = 2 };

struct Segment {
  std::size_t begin = 0;  // first observation
  std::size_t end = 0;    // one past the last observation
  MarketPhase phase = MarketPhase::bull;
};

/// One label per observation. The period from observation t to t + 1 takes
/// the label of observation t.
struct RegimeLabels {
  std::vector<MarketPhase> labels;
  std::vector<Segment> segments;  // contiguous, alternating
};

/// Turning-point segmentation. From the running extremum, a rise of at least
/// gamma1 over the trough confirms a bull segment starting at the trough; a
/// fall of at least gamma2 from the peak confirms a bear segment starting at
/// the peak. The first confirmation also labels the observations before it;
/// the unconfirmed tail keeps the last confirmed label; with no confirmation
/// at all every observation gets `initial`.
RegimeLabels label_regimes(const std::vector<double>& closes, double gamma1 = 0.24,
                           double gamma2 = 0.19, MarketPhase initial = MarketPhase::bull);
RegimeLabels label_regimes(const PriceSeries& s, double gamma1 = 0.24, double gamma2 = 0.19,
                           MarketPhase initial = MarketPhase::bull);

std::vector<Segment> segments_of(const std::vector<MarketPhase>& labels);

/// Annualized per-phase return statistics and transition probabilities.
/// Index 0 is bull, 1 is bear.
struct PhaseEstimate {
  std::array<double, 2> mean{};      // annualized mean simple return (net)
  std::array<double, 2> variance{};  // annualized variance
  std::array<int, 2> n_returns{};
  std::array<double, 2> mean_sojourn{};  // observations per segment
  double P12 = 0.0;                  // 1 / mean bull sojourn
  double P21 = 0.0;                  // 1 / mean bear sojourn
};

/// `returns` has one entry per period and `labels` at least as many entries.
/// Throws Error naming the missing phase (suggesting a longer window) when a
/// phase has fewer than two returns.
PhaseEstimate estimate_params(const std::vector<double>& returns,
                              const std::vector<MarketPhase>& labels, int periods_per_year);
PhaseEstimate estimate_params(const PriceSeries& s, const RegimeLabels& labels);

/// (1 - 2/N) old + (2/N) new; N >= 2.
double exp_average_update(double old_value, double new_value, int N = 6);
PhaseEstimate exp_average_update(const PhaseEstimate& old_value, const PhaseEstimate& new_value,
                                 int N = 6);

/// Number of overlapping blocks of `horizon` periods: sum over series of
/// (length - horizon + 1), series shorter than the horizon contributing 0.
std::size_t block_count(const std::vector<std::size_t>& lengths, std::size_t horizon);

/// Same count for n_series series spanning window_years each.
std::size_t block_count(std::size_t n_series, int window_years, int horizon_years,
                        Frequency f);

struct BlockRef {
  std::size_t series = 0;
  std::size_t start = 0;  // first period
};

/// Uniform over all (series, start) pairs counted by block_count.
class BlockSampler {
 public:
  BlockSampler(std::vector<std::size_t> lengths, std::size_t horizon);

  std::size_t count() const noexcept { return total_; }
  BlockRef at(std::size_t index) const;
  BlockRef sample(Stream& rng) const;

 private:
  std::vector<std::size_t> lengths_;
  std::vector<std::size_t> cumulative_;  // blocks before series i
  std::size_t horizon_ = 0;
  std::size_t total_ = 0;
};

struct BetaEstimate {
  double beta = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;  // return pairs used
};

/// OLS slope of stock returns on index returns over the dates both series
/// share (returns between consecutive shared dates). Needs at least 30 pairs.
BetaEstimate estimate_beta(const PriceSeries& stock, const PriceSeries& index);

}  // namespace emv
