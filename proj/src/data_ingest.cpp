#include "emv/data_ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "emv/error.hpp"

namespace emv {

namespace {

bool iso_date(const std::string& d) {
  if (d.size() != 10 || d[4] != '-' || d[7] != '-') return false;
  for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
    if (!std::isdigit(static_cast<unsigned char>(d[i]))) return false;
  }
  const int month = std::stoi(d.substr(5, 2));
  const int day = std::stoi(d.substr(8, 2));
  return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

double sample_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_variance(const std::vector<double>& v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace

std::string_view to_string(Frequency f) { return f == Frequency::daily ? "daily" : "monthly"; }

Frequency frequency_from_string(std::string_view s) {
  if (s == "daily") return Frequency::daily;
  if (s == "monthly") return Frequency::monthly;
  throw ConfigError("unknown frequency '" + std::string(s) + "' (daily|monthly)");
}

int periods_per_year(Frequency f) { return f == Frequency::daily ? 252 : 12; }

void PriceSeries::validate() const {
  if (dates.size() != closes.size()) throw ConfigError("price series: date/close length mismatch");
  for (std::size_t i = 0; i < closes.size(); ++i) {
    if (!iso_date(dates[i])) {
      throw ConfigError("price series: bad date '" + dates[i] + "' at row " + std::to_string(i + 1));
    }
    if (!std::isfinite(closes[i]) || !(closes[i] > 0.0)) {
      throw ConfigError("price series: close must be positive at " + dates[i]);
    }
    if (i > 0 && !(dates[i - 1] < dates[i])) {
      throw ConfigError("price series: dates not strictly increasing at " + dates[i]);
    }
  }
}

std::vector<double> PriceSeries::returns() const {
  std::vector<double> r;
  if (closes.size() < 2) return r;
  r.reserve(closes.size() - 1);
  for (std::size_t t = 0; t + 1 < closes.size(); ++t) r.push_back(closes[t + 1] / closes[t] - 1.0);
  return r;
}

PriceSeries read_price_csv(std::istream& is, Frequency f) {
  PriceSeries s;
  s.frequency = f;
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("price CSV is empty");
  std::string header = trim(line);
  std::transform(header.begin(), header.end(), header.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (header != "date,close") throw ConfigError("price CSV header must be 'date,close'");
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw ConfigError("price CSV row " + std::to_string(row) + ": expected two fields");
    }
    s.dates.push_back(trim(line.substr(0, comma)));
    const std::string value = trim(line.substr(comma + 1));
    std::size_t used = 0;
    double close = 0.0;
    try {
      close = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != value.size()) {
      throw ConfigError("price CSV row " + std::to_string(row) + ": bad close '" + value + "'");
    }
    s.closes.push_back(close);
  }
  s.validate();
  return s;
}

PriceSeries load_price_csv(const std::string& path, Frequency f) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open price file " + path);
  return read_price_csv(in, f);
}

void write_price_csv(std::ostream& os, const PriceSeries& s) {
  os << "date,close\n";
  const auto old = os.precision(17);
  for (std::size_t i = 0; i < s.size(); ++i) os << s.dates[i] << ',' << s.closes[i] << '\n';
  os.precision(old);
}

std::vector<Segment> segments_of(const std::vector<MarketPhase>& labels) {
  std::vector<Segment> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (out.empty() || out.back().phase != labels[i]) {
      if (!out.empty()) out.back().end = i;
      out.push_back({i, i, labels[i]});
    }
  }
  if (!out.empty()) out.back().end = labels.size();
  return out;
}

RegimeLabels label_regimes(const std::vector<double>& c, double gamma1, double gamma2,
                           MarketPhase initial) {
  if (c.size() < 2) throw Error("label_regimes: need at least two observations");
  if (!(gamma1 > 0.0) || !(gamma2 > 0.0) || !(gamma2 < 1.0)) {
    throw ConfigError("label_regimes: thresholds must satisfy gamma1 > 0 and 0 < gamma2 < 1");
  }
  // Turning points: (index, phase starting there).
  std::vector<std::pair<std::size_t, MarketPhase>> starts;
  bool confirmed = false;
  MarketPhase phase = initial;
  double hi = c[0], lo = c[0];
  std::size_t hi_at = 0, lo_at = 0;
  for (std::size_t t = 1; t < c.size(); ++t) {
    const double x = c[t];
    if (!confirmed) {
      if (x > hi) hi = x, hi_at = t;
      if (x < lo) lo = x, lo_at = t;
      if (x >= lo * (1.0 + gamma1)) {
        confirmed = true;
        phase = MarketPhase::bull;
        starts.push_back({0, phase});
        hi = x, hi_at = t;
      } else if (x <= hi * (1.0 - gamma2)) {
        confirmed = true;
        phase = MarketPhase::bear;
        starts.push_back({0, phase});
        lo = x, lo_at = t;
      }
      continue;
    }
    if (phase == MarketPhase::bull) {
      if (x > hi) {
        hi = x, hi_at = t;
      } else if (x <= hi * (1.0 - gamma2)) {
        phase = MarketPhase::bear;
        starts.push_back({hi_at, phase});
        lo = x, lo_at = t;
      }
    } else {
      if (x < lo) {
        lo = x, lo_at = t;
      } else if (x >= lo * (1.0 + gamma1)) {
        phase = MarketPhase::bull;
        starts.push_back({lo_at, phase});
        hi = x, hi_at = t;
      }
    }
  }
  RegimeLabels out;
  out.labels.assign(c.size(), initial);
  for (std::size_t k = 0; k < starts.size(); ++k) {
    const std::size_t end = k + 1 < starts.size() ? starts[k + 1].first : c.size();
    std::fill(out.labels.begin() + starts[k].first, out.labels.begin() + end, starts[k].second);
  }
  out.segments = segments_of(out.labels);
  return out;
}

RegimeLabels label_regimes(const PriceSeries& s, double gamma1, double gamma2,
                           MarketPhase initial) {
  return label_regimes(s.closes, gamma1, gamma2, initial);
}

PhaseEstimate estimate_params(const std::vector<double>& returns,
                              const std::vector<MarketPhase>& labels, int ppy) {
  if (labels.size() < returns.size()) throw Error("estimate_params: fewer labels than returns");
  if (ppy < 1) throw ConfigError("estimate_params: periods per year must be positive");
  std::array<std::vector<double>, 2> by_phase;
  for (std::size_t t = 0; t < returns.size(); ++t) {
    by_phase[static_cast<int>(labels[t]) - 1].push_back(returns[t]);
  }
  PhaseEstimate e;
  for (int i = 0; i < 2; ++i) {
    if (by_phase[i].size() < 2) {
      throw Error(std::string("estimate_params: ") + (i == 0 ? "bull" : "bear") +
                  " phase has fewer than two returns; use a longer window");
    }
    const double m = sample_mean(by_phase[i]);
    e.mean[i] = m * ppy;
    e.variance[i] = sample_variance(by_phase[i], m) * ppy;
    e.n_returns[i] = static_cast<int>(by_phase[i].size());
  }
  const std::vector<MarketPhase> span(labels.begin(),
                                      labels.begin() + static_cast<std::ptrdiff_t>(returns.size()));
  std::array<double, 2> total{}, count{};
  for (const Segment& s : segments_of(span)) {
    const int i = static_cast<int>(s.phase) - 1;
    total[i] += static_cast<double>(s.end - s.begin);
    count[i] += 1.0;
  }
  for (int i = 0; i < 2; ++i) e.mean_sojourn[i] = total[i] / count[i];
  e.P12 = 1.0 / e.mean_sojourn[0];
  e.P21 = 1.0 / e.mean_sojourn[1];
  return e;
}

PhaseEstimate estimate_params(const PriceSeries& s, const RegimeLabels& labels) {
  return estimate_params(s.returns(), labels.labels, periods_per_year(s.frequency));
}

double exp_average_update(double old_value, double new_value, int N) {
  if (N < 2) throw ConfigError("exp_average_update: N must be at least 2");
  const double k = 2.0 / N;
  return (1.0 - k) * old_value + k * new_value;
}

PhaseEstimate exp_average_update(const PhaseEstimate& o, const PhaseEstimate& n, int N) {
  PhaseEstimate e = n;
  for (int i = 0; i < 2; ++i) {
    e.mean[i] = exp_average_update(o.mean[i], n.mean[i], N);
    e.variance[i] = exp_average_update(o.variance[i], n.variance[i], N);
    e.mean_sojourn[i] = exp_average_update(o.mean_sojourn[i], n.mean_sojourn[i], N);
  }
  e.P12 = exp_average_update(o.P12, n.P12, N);
  e.P21 = exp_average_update(o.P21, n.P21, N);
  return e;
}

std::size_t block_count(const std::vector<std::size_t>& lengths, std::size_t horizon) {
  if (horizon == 0) throw ConfigError("block horizon must be positive");
  std::size_t n = 0;
  for (std::size_t len : lengths) {
    if (len >= horizon) n += len - horizon + 1;
  }
  return n;
}

std::size_t block_count(std::size_t n_series, int window_years, int horizon_years, Frequency f) {
  if (window_years < horizon_years || horizon_years < 1) {
    throw ConfigError("block_count: need window >= horizon >= 1 year");
  }
  const auto ppy = static_cast<std::size_t>(periods_per_year(f));
  return block_count(std::vector<std::size_t>(n_series, ppy * window_years),
                     ppy * static_cast<std::size_t>(horizon_years));
}

BlockSampler::BlockSampler(std::vector<std::size_t> lengths, std::size_t horizon)
    : lengths_(std::move(lengths)), horizon_(horizon) {
  total_ = block_count(lengths_, horizon_);
  if (total_ == 0) throw ConfigError("no series spans the block horizon");
  std::size_t acc = 0;
  for (std::size_t len : lengths_) {
    cumulative_.push_back(acc);
    if (len >= horizon_) acc += len - horizon_ + 1;
  }
}

BlockRef BlockSampler::at(std::size_t index) const {
  if (index >= total_) throw Error("block index out of range");
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), index);
  // upper_bound lands past every series sharing a cumulative value, so the
  // series found always contributes blocks.
  const std::size_t s = static_cast<std::size_t>(it - cumulative_.begin()) - 1;
  return {s, index - cumulative_[s]};
}

BlockRef BlockSampler::sample(Stream& rng) const {
  auto index = static_cast<std::size_t>(rng.uniform() * static_cast<double>(total_));
  return at(std::min(index, total_ - 1));
}

BetaEstimate estimate_beta(const PriceSeries& stock, const PriceSeries& index) {
  std::vector<double> a, b;  // closes on shared dates
  for (std::size_t i = 0, j = 0; i < stock.size() && j < index.size();) {
    if (stock.dates[i] < index.dates[j]) {
      ++i;
    } else if (index.dates[j] < stock.dates[i]) {
      ++j;
    } else {
      a.push_back(stock.closes[i++]);
      b.push_back(index.closes[j++]);
    }
  }
  if (a.size() < 31) {
    throw Error("estimate_beta: only " + std::to_string(a.size() > 0 ? a.size() - 1 : 0) +
                " overlapping return pairs, need at least 30");
  }
  const std::size_t n = a.size() - 1;
  std::vector<double> y(n), x(n);
  for (std::size_t t = 0; t < n; ++t) {
    y[t] = a[t + 1] / a[t] - 1.0;
    x[t] = b[t + 1] / b[t] - 1.0;
  }
  const double mx = sample_mean(x), my = sample_mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    sxx += (x[t] - mx) * (x[t] - mx);
    sxy += (x[t] - mx) * (y[t] - my);
  }
  if (!(sxx > 0.0)) throw Error("estimate_beta: index returns are constant");
  BetaEstimate e;
  e.n = n;
  e.beta = sxy / sxx;
  const double alpha = my - e.beta * mx;
  double sse = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double r = y[t] - alpha - e.beta * x[t];
    sse += r * r;
  }
  e.std_error = std::sqrt(sse / static_cast<double>(n - 2) / sxx);
  return e;
}

}  // namespace emv
