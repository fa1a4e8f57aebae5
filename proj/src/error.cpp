#include "pmm/error.hpp"

#include <iostream>
#include <cctype>
#include <map>
#include <mutex>
#include <sstream>

namespace pmm {

std::string_view to_string(ErrorCode code)
{
  switch (code) {
    case ErrorCode::ModeMismatch: return "mode-mismatch";
    case ErrorCode::LengthMismatch: return "length-mismatch";
    case ErrorCode::DimensionMismatch: return "dimension-mismatch";
    case ErrorCode::ConvergenceFailure: return "convergence-failure";
    case ErrorCode::DegenerateLevel: return "degenerate-level";
    case ErrorCode::NonUnitary: return "non-unitary";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::NumericalFailure: return "numerical-failure";
    case ErrorCode::Io: return "io";
    case ErrorCode::Config: return "config";
    case ErrorCode::UnknownPreset: return "unknown-preset";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
{
}

namespace {

std::string degenerate_message(Index level, double gap, double threshold)
{
  std::ostringstream os;
  os << "level " << level << " has gap " << gap << " below threshold " << threshold;
  return os.str();
}

std::mutex& handler_mutex()
{
  static std::mutex m;
  return m;
}

WarningHandler& handler()
{
  // Repeats of the same warning, numbers ignored, stop printing after five.
  static WarningHandler h = [counts = std::map<std::string, int>{}](std::string_view msg) mutable {
    std::string key;
    for (char ch : msg)
      if (!std::isdigit(static_cast<unsigned char>(ch))) key += ch;
    const int n = ++counts[key];
    if (n <= 5) std::cerr << "warning: " << msg << '\n';
    if (n == 5) std::cerr << "warning: further repeats of the above suppressed\n";
  };
  return h;
}

}  // namespace

DegenerateLevelError::DegenerateLevelError(Index level, double gap, double threshold)
    : Error(ErrorCode::DegenerateLevel, degenerate_message(level, gap, threshold)),
      level_(level),
      gap_(gap)
{
}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

WarningHandler set_warning_handler(WarningHandler h)
{
  std::lock_guard lock(handler_mutex());
  auto previous = std::move(handler());
  handler() = std::move(h);
  return previous;
}

void warn(std::string_view message)
{
  std::lock_guard lock(handler_mutex());
  if (handler()) handler()(message);
}

}  // namespace pmm
