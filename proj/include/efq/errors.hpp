#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace efq {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A structural parameter (order, length, budget) is unusable.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// The norm constraint ||R||^2 < nu is violated.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Iteration failed to converge or a matrix was too ill-conditioned.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A filter whose impulse response starts with zero cannot be head-normalized.
class DegenerateFilterError : public Error {
 public:
  using Error::Error;
};

/// A checked property of a result does not hold.
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Configuration problems, reported together with their field paths.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> issues)
      : Error(join(issues)), issues_(std::move(issues)) {}

  const std::vector<std::string>& issues() const { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string out = "invalid configuration:";
    for (const auto& issue : issues) {
      out += "\n  ";
      out += issue;
    }
    return out;
  }

  std::vector<std::string> issues_;
};

}  // namespace efq
