#pragma once

#include <stdexcept>
#include <string>

namespace emv {

/// Numerical or internal failure (non-finite state, nonpositive log argument, ...).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user input: configuration, CLI flags, data files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace emv
