#pragma once

#include <array>
#include <vector>

#include "nspnp/elliptic.hpp"
#include "nspnp/state.hpp"

namespace nspnp {

/// Unnormalised space-time bump: χ(|y|²/τ)·φ(τ) with
/// χ(s) = exp(−1/(1−s)) on [0,1) and φ(τ) = exp(−1/(1−(2τ−3)²)) on (1,2).
double zeta_profile(const Point& y, double tau, int dims);
/// 1 / ∫ zeta_profile over ℝ^dims × ℝ, by one-dimensional quadrature.
double zeta_normalization(int dims);
/// Normalised kernel: ∫ ζ dy dτ = 1, support in {|y|² < τ, 1 < τ < 2}.
double zeta(const Point& y, double tau, int dims);

struct MollifierSpec {
  double epsilon = 0.0;       // retardation scale (time)
  double dt = 0.0;            // spacing of the history being mollified
  double length_scale = 1.0;  // spatial support radius is √(τ·ε)·length_scale, τ ∈ (ε, 2ε)

  /// History samples per ε; must be an integer ≥ 2.
  int kernel_resolution() const;
  void validate() const;
};

/// Discrete kernel on a grid: integer cell offsets at lags j·dt, weights summing to one.
class Mollifier {
 public:
  struct Tap {
    int lag = 0;  // in units of dt
    std::array<int, 3> offset{0, 0, 0};
    double weight = 0.0;
  };

  Mollifier(const MollifierSpec& spec, const GridSpec& grid);

  const MollifierSpec& spec() const { return spec_; }
  const GridSpec& grid() const { return grid_; }
  const std::vector<Tap>& taps() const { return taps_; }
  double weight_sum() const;

  /// Θ_ε(u)(·, t). Slices at negative times count as zero; every tap time
  /// t − j·dt ≥ 0 must be present in `history` or CoverageError is raised.
  VectorField theta(const FieldHistory& history, double t) const;
  /// Same kernel applied to an arbitrary lag-indexed sequence of fields:
  /// `lagged(j)` returns the field j·dt in the past, or nullptr for zero.
  template <typename Lookup>
  VectorField apply(Lookup&& lagged) const;

  /// Θ̂_ε(u)(·, t) = shrink(Θ_ε(u), 2ε) + ∇g with −Δg = div(shrink(Θ_ε(u))).
  VectorField theta_hat(const FieldHistory& history, double t, EllipticSolver& solver) const;

 private:
  void accumulate(const VectorField& src, const Tap& tap, VectorField& out) const;

  MollifierSpec spec_;
  GridSpec grid_;
  std::vector<Tap> taps_;
};

/// f ∘ Φ_δ with Φ_δ(x) = c + (1 + 2δ/L_min)(x − c) about the box centre c,
/// by multilinear interpolation on each component lattice; zero where
/// Φ_δ(x) leaves the box. Identity for δ = 0 and on periodic grids.
VectorField shrink_compose(const VectorField& f, double delta);

/// Divergence correction: f + ∇g with −Δg = div f under zero-flux walls.
/// Returns the corrected field; `gradient_norm` receives ‖∇g‖₂ if non-null.
VectorField divergence_correct(const VectorField& f, EllipticSolver& solver,
                               double* gradient_norm = nullptr);

template <typename Lookup>
VectorField Mollifier::apply(Lookup&& lagged) const {
  VectorField out(grid_);
  int current = -1;
  const VectorField* src = nullptr;
  for (const Tap& tap : taps_) {
    if (tap.lag != current) {
      current = tap.lag;
      src = lagged(tap.lag);
    }
    if (src) accumulate(*src, tap, out);
  }
  return out;
}

}  // namespace nspnp
