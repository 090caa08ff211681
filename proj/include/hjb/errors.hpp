#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace hjb {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeMismatch : Error { using Error::Error; };
struct NoMinimizer : Error { using Error::Error; };
struct NonDiagonalR : Error { using Error::Error; };
struct SensorMismatch : Error { using Error::Error; };
struct EmptyCollocation : Error { using Error::Error; };
struct DivergenceDetected : Error { using Error::Error; };
struct UnstableSpec : Error { using Error::Error; };
struct NonFiniteValue : Error { using Error::Error; };
struct EmptySequence : Error { using Error::Error; };
struct UnknownProblem : Error { using Error::Error; };
struct OracleInapplicable : Error { using Error::Error; };
struct ViscosityBoundViolation : Error { using Error::Error; };

// Carries the dotted path of the offending config field.
struct ConfigError : Error {
  ConfigError(std::string field_path, const std::string& message)
      : Error(field_path + ": " + message), field(std::move(field_path)) {}
  std::string field;
};

}  // namespace hjb
