#pragma once

// JSON run configuration: market, problem, learner and evaluation settings.
//
// Layout (every section and key optional; absent keys take the defaults of
// the simulation study):
//
//   {
//     "seed": 1,
//     "market":   { "p0", "P11", "P12", "P21", "P22", "dt",
//                   "e0": [spec, spec], "e1": [spec, spec], "q": [spec, spec] }
//                 or a path to a file holding that object,
//     "problem":  { "x0", "l0", "lambda", "d", "T" },
//     "training": { "algo", "signal", "eta_theta", "eta_vartheta", "eta_psi",
//                   "eta_phi", "alpha", "N", "m", "n_iter", "batch", "clip" },
//     "evaluation": { "n_paths", "action", "threads" }
//   }
//
// A return spec is { "kind", "annual_mean", "annual_vol", "dof", "skew",
// "convention", "vol_is_variance" }. Unknown keys are rejected.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "emv/closed_form.hpp"
#include "emv/market.hpp"
#include "emv/rl.hpp"

namespace emv {

struct EvalSettings {
  int n_paths = 1000;
  ActionMode action = ActionMode::sample;
  unsigned threads = 0;
};

struct RunConfig {
  MarketModel market = default_market();
  ProblemSpec problem;
  Hyperparams hyper;  // hyper.dt mirrors market.dt, hyper.seed mirrors seed
  Algo algo = Algo::poemv1;
  SignalKind signal = SignalKind::filter;
  EvalSettings eval;
  std::uint64_t seed = 1;
  /// Keys absent from the source and filled from defaults, as JSON pointers.
  std::vector<std::string> defaulted;

  /// Throws ConfigError on any inconsistency.
  void validate() const;
};

std::string_view to_string(ReturnKind k);
ReturnKind return_kind_from_string(std::string_view s);
std::string_view to_string(MeanConvention c);
MeanConvention convention_from_string(std::string_view s);
std::string_view to_string(ActionMode m);
ActionMode action_mode_from_string(std::string_view s);

nlohmann::json to_json(const ReturnSpec& s);
nlohmann::json to_json(const MarketModel& m);
nlohmann::json to_json(const RunConfig& c);

/// Missing keys take `fallback`'s values and are appended to `defaulted`
/// (prefixed with `where`).
ReturnSpec return_spec_from_json(const nlohmann::json& j, const ReturnSpec& fallback,
                                 const std::string& where, std::vector<std::string>* defaulted);
MarketModel market_from_json(const nlohmann::json& j, std::vector<std::string>* defaulted = nullptr);

/// `base_dir` resolves a market given as a relative file path.
RunConfig config_from_json(const nlohmann::json& j, const std::string& base_dir = ".");

RunConfig load_config(const std::string& path);
MarketModel load_market(const std::string& path);

/// Parses JSON text; syntax errors become ConfigError naming `what`.
nlohmann::json parse_json(const std::string& text, const std::string& what);
std::string read_text_file(const std::string& path);

/// Readings that fill gaps in the model description, with the values in force.
nlohmann::json resolved_readings(const RunConfig& c);

}  // namespace emv
