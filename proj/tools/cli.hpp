#pragma once

// Command-line front end. Subcommands write CSV/JSON artifacts plus a
// manifest.json into --out; runs with identical manifests produce identical
// artifact bytes.
//
// Exit codes: 0 success, 1 user error (flags, config, input files),
// 2 internal or numerical failure.

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace emv::cli {

/// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// The `command` and `flags` entries a manifest records for `args`, without
/// running anything. Throws ConfigError on a parse failure.
nlohmann::json invocation(const std::vector<std::string>& args);

/// Arguments reproducing a recorded invocation.
std::vector<std::string> arguments(const nlohmann::json& invocation);

}  // namespace emv::cli
