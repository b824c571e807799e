#pragma once

#include <array>
#include <span>

#include "nspnp/grid.hpp"

namespace nspnp {

/// Boundary treatment of the 3-point second difference along one axis.
enum class AxisBC {
  periodic,        // wrap
  neumann_cell,    // cell-centred unknowns, ghost = mirror (zero flux)
  dirichlet_cell,  // cell-centred unknowns, wall half a cell out, ghost = -value
  dirichlet_node,  // node unknowns including pinned zero boundary nodes
};

/// Second-order Laplacian stencil on one staggered array.
struct LaplaceStencil {
  Layout layout;
  int dims = 2;
  std::array<AxisBC, 3> bc{AxisBC::periodic, AxisBC::periodic, AxisBC::periodic};
  std::array<double, 3> inv_h2{1.0, 1.0, 1.0};

  /// y = Δ_h x. Pinned nodes map to zero and contribute zero to neighbours.
  void apply(std::span<const double> x, std::span<double> y) const;
  bool pinned(int i, int j, int k) const;
  /// True when constants lie in the kernel (no Dirichlet axis).
  bool singular() const;
};

LaplaceStencil cell_stencil(const GridSpec& grid);
/// Stencil for velocity component `axis` under no-slip walls (or periodic).
LaplaceStencil velocity_stencil(const GridSpec& grid, int axis);

}  // namespace nspnp
