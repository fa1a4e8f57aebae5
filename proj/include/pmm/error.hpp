#pragma once

#include "pmm/types.hpp"

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pmm {

enum class ErrorCode {
  ModeMismatch,
  LengthMismatch,
  DimensionMismatch,
  ConvergenceFailure,
  DegenerateLevel,
  NonUnitary,
  InvalidArgument,
  NumericalFailure,
  Io,
  Config,
  UnknownPreset,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised when a tracked eigenvalue (or eigenphase) is too close to a neighbour
/// for first-order perturbation theory.
class DegenerateLevelError : public Error {
 public:
  DegenerateLevelError(Index level, double gap, double threshold);
  Index level() const noexcept { return level_; }
  double gap() const noexcept { return gap_; }

 private:
  Index level_;
  double gap_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

inline void require(bool condition, ErrorCode code, const std::string& message)
{
  if (!condition) fail(code, message);
}

using WarningHandler = std::function<void(std::string_view)>;

/// Replaces the process-wide warning sink (default: stderr). Returns the previous one.
WarningHandler set_warning_handler(WarningHandler handler);
void warn(std::string_view message);

}  // namespace pmm
