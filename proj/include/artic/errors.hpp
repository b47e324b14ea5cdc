#pragma once

#include <stdexcept>
#include <string>

namespace artic {

/// Bad configuration or input file; the CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A documented precondition was broken by the caller.
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

/// Forward integration of the shooting grid produced non-finite values.
struct LinearizationError : std::runtime_error {
  LinearizationError(int interval_, const std::string& msg)
      : std::runtime_error(msg), interval(interval_) {}
  int interval;
};

/// Closed-loop simulation hit an unrecoverable condition; carries the sample index.
struct SimAbort : std::runtime_error {
  SimAbort(int sample_, const std::string& msg)
      : std::runtime_error("sample " + std::to_string(sample_) + ": " + msg),
        sample(sample_) {}
  int sample;
};

}  // namespace artic
