#pragma once

#include <stdexcept>
#include <string>

namespace hdtm {

// Base class for all library errors. Callers that only need coarse
// handling can catch this; the CLI maps subtypes onto exit codes.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Argument outside the transformation's y-domain or theta-domain.
struct DomainError : Error {
  using Error::Error;
};

// Inverse-transform target outside the range of the transformation.
struct RangeError : Error {
  using Error::Error;
};

// A power y^theta (or equivalent exponential) would not be representable.
struct OverflowError : Error {
  using Error::Error;
};

// Malformed caller input: non-finite values, dimension mismatch, bad flags.
struct InputError : Error {
  using Error::Error;
};

// CSV/JSON parse failure; carries 1-based data row and column name when known.
struct ParseError : InputError {
  ParseError(const std::string& msg, long row = -1, std::string column = "")
      : InputError(format(msg, row, column)), row(row), column(std::move(column)) {}
  long row;
  std::string column;

 private:
  static std::string format(const std::string& msg, long row, const std::string& col) {
    std::string out = msg;
    if (row >= 0) out += " (row " + std::to_string(row) + (col.empty() ? ")" : ", column '" + col + "')");
    return out;
  }
};

// Response carries no usable variation at the requested theta.
struct DegenerateModelError : Error {
  using Error::Error;
};

// Nonpositive variance handed to the score, or a zero-variance test.
struct VarianceError : Error {
  using Error::Error;
};

// Z-solver could not produce an estimate.
struct EstimationError : Error {
  using Error::Error;
};

// Too many bootstrap replicates failed to estimate.
struct BootstrapError : Error {
  using Error::Error;
};

// SNR calibration impossible (zero signal).
struct CalibrationError : Error {
  using Error::Error;
};

// Data-generating process produced too many out-of-range draws.
struct DgpError : Error {
  using Error::Error;
};

// Monte Carlo study aborted (too many per-replication failures).
struct StudyError : Error {
  using Error::Error;
};

// Covariance construction failed the positive-definiteness check.
struct MatrixError : Error {
  using Error::Error;
};

}  // namespace hdtm
