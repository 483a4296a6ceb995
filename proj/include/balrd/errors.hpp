#pragma once

#include <stdexcept>
#include <string>

namespace balrd {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Nonfinite or nonpositive values where the balance math needs positive
/// finite input. Usually means the problem definition is broken or the run
/// diverged.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Mismatched vector lengths or other violated call contracts.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// The 2x2 Gram matrix of the log-gradients failed the relative determinant
/// test.
class SingularGramError : public Error {
 public:
  explicit SingularGramError(double det, double threshold)
      : Error("singular Gram matrix: det=" + std::to_string(det) +
              " <= " + std::to_string(threshold)),
        det_(det) {}
  double det() const { return det_; }

 private:
  double det_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Rejected rate-distortion curve (too few points, non-monotonic, no overlap).
class CurveError : public Error {
 public:
  using Error::Error;
};

}  // namespace balrd
