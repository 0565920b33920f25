#pragma once

#include <stdexcept>
#include <string>

namespace polyscore {

// Invalid arguments and violated preconditions are reported with
// std::invalid_argument. The types below carry the remaining failure classes
// so the CLI can map them onto its exit-code contract.

/// File could not be read, written, or parsed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (DIMACS, sample files, JSON payloads).
class ParseError : public IoError {
 public:
  using IoError::IoError;
};

/// A numerical procedure could not produce a trustworthy value: singular
/// Gram matrix, unconverged quadrature, divergent chain.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GridNotConverged : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Iterative optimizer hit its iteration cap.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace polyscore
