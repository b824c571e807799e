#pragma once

#include <span>
#include <vector>

#include "nspnp/grid.hpp"
#include "nspnp/stencil.hpp"

namespace nspnp {

enum class EllipticMethod { conjugate_gradient, direct_small };

struct EllipticConfig {
  double tol = 1e-10;  // relative residual ‖b - Ax‖₂ / ‖b‖₂
  int max_iter = 20000;
  EllipticMethod method = EllipticMethod::conjugate_gradient;
  /// |∫rhs| / ∫|rhs| above this is rejected as IncompatibleRHS.
  double compat_tol = 1e-8;

  void validate() const;
};

/// Solution plus its residual certificate.
struct EllipticResult {
  ScalarField solution;
  double residual = 0.0;  // final relative residual
  int iterations = 0;
};

enum class HelmholtzBC { neumann, dirichlet, periodic };

/// Owns CG scratch buffers. One solve at a time per instance.
class EllipticSolver {
 public:
  explicit EllipticSolver(EllipticConfig config = {});

  const EllipticConfig& config() const { return config_; }

  /// -Δψ = rhs with zero-flux (or periodic) boundaries and Σψ = 0.
  EllipticResult solve_neumann_poisson(const ScalarField& rhs);

  /// (I - αΔ)x = rhs. Dirichlet places homogeneous walls half a cell out.
  EllipticResult solve_helmholtz(const ScalarField& rhs, double alpha, HelmholtzBC bc);

  /// Component-wise (I - αΔ)x = rhs with no-slip walls (or periodic wrap).
  VectorField solve_velocity_helmholtz(const VectorField& rhs, double alpha,
                                       double* max_residual = nullptr);

  /// Raw solve on a staggered array; `poisson` selects -Δ instead of I - αΔ.
  /// Returns {relative residual, iterations}.
  std::pair<double, int> solve_array(const LaplaceStencil& stencil, double alpha, bool poisson,
                                     std::span<const double> rhs, std::span<double> x);

 private:
  std::pair<double, int> solve_cg(const LaplaceStencil& stencil, double alpha, bool poisson,
                                  std::span<const double> rhs, std::span<double> x);
  std::pair<double, int> solve_dense(const LaplaceStencil& stencil, double alpha, bool poisson,
                                     std::span<const double> rhs, std::span<double> x);

  EllipticConfig config_;
  std::vector<double> r_, p_, ap_;
};

EllipticResult solve_neumann_poisson(const ScalarField& rhs, const EllipticConfig& config = {});
EllipticResult solve_helmholtz(const ScalarField& rhs, double alpha, HelmholtzBC bc,
                               const EllipticConfig& config = {});

}  // namespace nspnp
