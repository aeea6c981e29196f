#include "emv/policy.hpp"

#include <string>

#include "emv/error.hpp"

namespace emv {

std::string_view to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::coemv_opt: return "coemv_opt";
    case PolicyKind::poemv_opt: return "poemv_opt";
    case PolicyKind::poemv_sub: return "poemv_sub";
    case PolicyKind::learned: return "learned";
    case PolicyKind::custom: return "custom";
  }
  return "custom";
}

std::string_view to_string(SignalKind k) {
  switch (k) {
    case SignalKind::regime: return "regime";
    case SignalKind::filter: return "filter";
    case SignalKind::expectation: return "expectation";
    case SignalKind::unconditional: return "unconditional";
  }
  return "regime";
}

PolicyKind policy_kind_from_string(std::string_view s) {
  for (auto k : {PolicyKind::coemv_opt, PolicyKind::poemv_opt, PolicyKind::poemv_sub,
                 PolicyKind::learned, PolicyKind::custom}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown policy kind '" + std::string(s) + "'");
}

SignalKind signal_kind_from_string(std::string_view s) {
  for (auto k : {SignalKind::regime, SignalKind::filter, SignalKind::expectation,
                 SignalKind::unconditional}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown signal kind '" + std::string(s) +
                    "' (regime|filter|expectation|unconditional)");
}

}  // namespace emv
