#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace savnls {

/// Invalid sizes, ranges or options supplied when constructing an object.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Bad runtime input: non-finite samples, points outside the domain.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The SAV radicand became nonpositive.
class ModelError : public std::runtime_error {
 public:
  ModelError(const std::string& what, double radicand)
      : std::runtime_error(what), radicand_(radicand) {}
  double radicand() const noexcept { return radicand_; }

 private:
  double radicand_;
};

/// Singular factorization, singular Schur complement or residual bound violated.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A time slab failed: Newton diverged or did not converge.
class StepError : public std::runtime_error {
 public:
  StepError(const std::string& what, std::vector<double> increments, long slab = -1)
      : std::runtime_error(what), increments_(std::move(increments)), slab_(slab) {}

  const std::vector<double>& increment_history() const noexcept { return increments_; }
  long slab() const noexcept { return slab_; }

 private:
  std::vector<double> increments_;
  long slab_;
};

}  // namespace savnls
