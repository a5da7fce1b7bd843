#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace dsm {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
  using Error::Error;
};

class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// A linear solve hit a pivot below the singularity threshold.
class SingularOperator : public Error {
public:
  SingularOperator(const std::string& what, double condition_estimate)
    : Error(what), condition_estimate_(condition_estimate) {}

  /// sigma_max / sigma_min of the offending matrix (infinity when exactly singular).
  double condition_estimate() const noexcept { return condition_estimate_; }

private:
  double condition_estimate_;
};

/// I + (L + eps)^-1 g'(u) is numerically singular at some point.
class SingularLinearization : public Error {
public:
  using Error::Error;
};

class NotSymmetric : public Error {
public:
  using Error::Error;
};

class NotApplicable : public Error {
public:
  using Error::Error;
};

class NonPsdOperator : public Error {
public:
  using Error::Error;
};

class NotMonotone : public Error {
public:
  using Error::Error;
};

class Inconsistent : public Error {
public:
  using Error::Error;
};

class MaxIterations : public Error {
public:
  using Error::Error;
};

/// The discrepancy level of the noisy stopping rule was never reached.
class TMaxReached : public Error {
public:
  using Error::Error;
};

class InnerSolveFailed : public Error {
public:
  InnerSolveFailed(const std::string& what, std::size_t step)
    : Error(what), step_(step) {}

  std::size_t step() const noexcept { return step_; }

private:
  std::size_t step_;
};

class ParseError : public Error {
public:
  using Error::Error;
};

class CertificateMismatch : public Error {
public:
  using Error::Error;
};

} // namespace dsm
