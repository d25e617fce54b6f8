#pragma once

#include <stdexcept>
#include <string>

namespace vdio {

// Error taxonomy mirrored by the CLI exit codes: configuration problems
// (bad keys, inconsistent calibration) are recoverable by the user editing
// files; data problems mean the dataset itself is unusable; numerical faults
// mean the estimator broke an internal invariant and the run must stop.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

class NumericalFault : public std::runtime_error {
 public:
  explicit NumericalFault(const std::string& what) : std::runtime_error(what) {}
};

enum ExitCode {
  kExitOk = 0,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumerical = 4,
};

}  // namespace vdio
