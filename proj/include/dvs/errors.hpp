#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dvs {

/// A matrix (or submatrix) that must have full row rank does not, under the
/// active numerical-rank tolerance.
struct SingularMatrixError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Conditioning on an event of zero probability.
struct NullEventError : std::domain_error {
  using std::domain_error::domain_error;
};

/// A subset enumeration would exceed the configured cap.
struct EnumerationLimitError : std::length_error {
  using std::length_error::length_error;
};

/// No feasible selection exists (or could be found) for the request.
struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tabular input that fails to parse; row and col are 1-based file positions
/// (0 when the location does not apply).
struct ParseError : std::runtime_error {
  std::size_t row = 0;
  std::size_t col = 0;
  ParseError(const std::string& what, std::size_t r, std::size_t c)
      : std::runtime_error(what), row(r), col(c) {}
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dvs
