#pragma once

#include "nspnp/elliptic.hpp"
#include "nspnp/grid.hpp"

namespace nspnp {

enum class Advection { centered, upwind };

struct NPStepParams {
  double dt = 1e-3;
  bool clip_in_flux = true;  // use [n]_+ in the electro-migration flux
  Advection advection = Advection::centered;
  /// Largest tolerated ‖div w‖₂ of the drift.
  double drift_divergence_tol = 1e-6;

  void validate() const;
};

struct NPStepResult {
  ScalarField n_plus;
  ScalarField n_minus;
  /// dt·max|w|/h; above one the explicit advection is outside its CFL range.
  double cfl = 0.0;
};

/// One IMEX step of
///   ∂ₜn⁺ + div(n⁺w) − Δn⁺ =  div([n⁺]_+ ∇ψ)
///   ∂ₜn⁻ + div(n⁻w) − Δn⁻ = −div([n⁻]_+ ∇ψ)
/// with explicit fluxes and implicit diffusion under zero-flux or periodic
/// boundaries. Throws StabilityError on non-finite output or when max|n|
/// grows more than tenfold, std::invalid_argument when w is not solenoidal.
NPStepResult np_step(const ScalarField& n_plus, const ScalarField& n_minus, const VectorField& w,
                     const ScalarField& psi, const NPStepParams& params, EllipticSolver& solver);
NPStepResult np_step(const ScalarField& n_plus, const ScalarField& n_minus, const VectorField& w,
                     const ScalarField& psi, const NPStepParams& params);

/// ∫(|n⁺|^p + |n⁻|^p). Throws std::invalid_argument for p < 2.
double lp_ledger(const ScalarField& n_plus, const ScalarField& n_minus, double p);

/// Face flux n·w with centred or upwind face values.
VectorField advective_flux(const ScalarField& n, const VectorField& w, Advection scheme);

}  // namespace nspnp
