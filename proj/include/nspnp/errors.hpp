#pragma once

#include <stdexcept>
#include <string>

namespace nspnp {

/// A history or window does not cover the requested times or region.
class CoverageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Neumann/periodic Poisson right-hand side with non-zero mean.
class IncompatibleRHS : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iterative solver hit its iteration cap above tolerance.
class NoConvergence : public std::runtime_error {
 public:
  NoConvergence(const std::string& what, double residual, int iterations)
      : std::runtime_error(what), residual_(residual), iterations_(iterations) {}
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

/// Blow-up guard tripped during a time step.
class StabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed snapshot or config file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Contraction ratio requested for two (numerically) identical trajectories.
class DegeneratePair : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nspnp
