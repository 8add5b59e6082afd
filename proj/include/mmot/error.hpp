#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mmot {

enum class ErrorKind {
  PointOutsideWindow,
  SupportOutsideWindow,
  ZeroMass,
  ParseError,
  NormalizationError,
  NegativeWeight,
  NumericalBreakdown,
  InsufficientSupport,
  Infeasible,
  DimensionMismatch,
  OverlappingNeighborhoods,
  EmptyRestriction,
  NoOffDiagonalSupport,
  InvalidConfig,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace mmot
