#pragma once

#include "nspnp/elliptic.hpp"
#include "nspnp/grid.hpp"
#include "nspnp/nernst_planck.hpp"

namespace nspnp {

enum class ForceForm { charge_gradient, maxwell_stress };

struct NSStepParams {
  double dt = 1e-3;
  ForceForm force_form = ForceForm::maxwell_stress;
  Advection advection = Advection::centered;

  void validate() const;
};

struct NSStepResult {
  VectorField u;
  ScalarField pressure;  // zero mean
  double divergence_l2 = 0.0;
};

/// Face force from the electrostatic potential:
///   charge_gradient: −(n⁺ − n⁻)∇ψ
///   maxwell_stress:  div(∇ψ⊗∇ψ − ½|∇ψ|² I)
VectorField electro_force(const ScalarField& n_plus, const ScalarField& n_minus,
                          const ScalarField& psi, ForceForm form);

/// Conservative drift advection div(u⊗w) on the MAC grid (skew-symmetric
/// when div w = 0).
VectorField drift_advection(const VectorField& u, const VectorField& w);

/// Projection onto discretely solenoidal fields. Returns the projected field
/// and φ with u − dt∇φ solenoidal. Wall-normal boundary faces of `u` are
/// zeroed first.
std::pair<VectorField, ScalarField> project(const VectorField& u, double dt, EllipticSolver& solver);

/// One step: explicit advection and force, implicit diffusion per component
/// with no-slip walls, then pressure projection.
/// Throws StabilityError on non-finite output or runaway growth.
NSStepResult ns_step(const VectorField& u, const VectorField& w, const VectorField& force,
                     const NSStepParams& params, EllipticSolver& solver);
NSStepResult ns_step(const VectorField& u, const VectorField& w, const VectorField& force,
                     const NSStepParams& params);

}  // namespace nspnp
