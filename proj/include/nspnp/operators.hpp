#pragma once

#include <array>
#include <optional>
#include <vector>

#include "nspnp/grid.hpp"

namespace nspnp {

/// Face-normal centred differences. Wall faces carry zero (mirror ghost).
VectorField gradient(const ScalarField& f);

/// MAC cell divergence; the negative adjoint of `gradient` on periodic grids.
ScalarField divergence(const VectorField& v);

/// 5/7-point Laplacian: wrap for periodic grids, mirror ghosts at walls.
ScalarField laplacian(const ScalarField& f);

/// Open ball used as an integration region.
struct Ball {
  Point center{0.0, 0.0, 0.0};
  double radius = 0.0;
};

/// True when the ball is strictly inside the box (always true when periodic,
/// where distances are taken to the nearest periodic image).
bool ball_inside(const GridSpec& grid, const Ball& ball);

/// Linear indices of cells whose centres lie inside `ball`.
/// Throws std::domain_error when the ball leaves a walled box.
std::vector<std::size_t> ball_cells(const GridSpec& grid, const Ball& ball);

/// (Σ |f|^p · cell volume)^{1/p} over the whole domain or a ball.
/// Throws std::invalid_argument for p < 1.
double lp_norm(const ScalarField& f, double p, const std::optional<Ball>& region = {});
/// Same for |v| with v averaged to cell centres.
double lp_norm(const VectorField& v, double p, const std::optional<Ball>& region = {});

/// Cell-centred velocity gradient tensor, grad[a][b] = ∂_b u_a.
using TensorArrays = std::array<std::array<std::vector<double>, 3>, 3>;
TensorArrays velocity_gradient(const VectorField& u);

/// Cell-centred |∇u|².
std::vector<double> velocity_gradient_sq(const VectorField& u);

/// Cell-centred average of the face gradient of f.
std::array<std::vector<double>, 3> cell_gradient(const ScalarField& f);

/// Σ_a ∫ |∇_h u_a|² consistent with the velocity Helmholtz stencils,
/// i.e. -⟨u, Δ_h u⟩ including no-slip ghost differences at walls.
double dirichlet_energy(const VectorField& u);

/// Σ_{a,b} ∫ |∂_a∂_b ψ|² with mixed differences at cell corners.
double hessian_energy(const ScalarField& psi);

}  // namespace nspnp
