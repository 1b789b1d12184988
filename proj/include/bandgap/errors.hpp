#pragma once

#include <stdexcept>
#include <string>

namespace bandgap {

// Base class for all library failures; what() carries a human-readable
// diagnostic naming the violated hypothesis or tolerance.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Mismatched array shapes / dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Argument outside the operation's domain (eps <= 0, zero vector, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A runtime-verifiable hypothesis (H1, H2(a), H2(b), H2(c), H3) failed.
class HypothesisError : public Error {
 public:
  HypothesisError(std::string hypothesis, const std::string& msg)
      : Error("hypothesis " + hypothesis + " violated: " + msg),
        hypothesis_(std::move(hypothesis)) {}
  const std::string& hypothesis() const { return hypothesis_; }

 private:
  std::string hypothesis_;
};

// Fredholm solvability condition of a deflated solve failed.
class SolvabilityError : public Error {
 public:
  using Error::Error;
};

// An eigensolver did not converge or an assembled problem is unusable.
class SolverError : public Error {
 public:
  using Error::Error;
};

// Band edge has no adjacent spectral gap.
class GaplessError : public Error {
 public:
  using Error::Error;
};

// Band crossing detected inside a finite-difference stencil.
class BandCrossingError : public Error {
 public:
  using Error::Error;
};

}  // namespace bandgap
