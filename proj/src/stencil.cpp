#include "nspnp/stencil.hpp"

namespace nspnp {

LaplaceStencil cell_stencil(const GridSpec& grid) {
  LaplaceStencil s;
  s.layout = cell_layout(grid);
  s.dims = grid.dims;
  for (int a = 0; a < grid.dims; ++a) {
    s.bc[a] = grid.periodic() ? AxisBC::periodic : AxisBC::neumann_cell;
    s.inv_h2[a] = 1.0 / (grid.spacing(a) * grid.spacing(a));
  }
  return s;
}

LaplaceStencil velocity_stencil(const GridSpec& grid, int axis) {
  LaplaceStencil s;
  s.layout = face_layout(grid, axis);
  s.dims = grid.dims;
  for (int a = 0; a < grid.dims; ++a) {
    if (grid.periodic())
      s.bc[a] = AxisBC::periodic;
    else
      s.bc[a] = (a == axis) ? AxisBC::dirichlet_node : AxisBC::dirichlet_cell;
    s.inv_h2[a] = 1.0 / (grid.spacing(a) * grid.spacing(a));
  }
  return s;
}

bool LaplaceStencil::pinned(int i, int j, int k) const {
  const std::array<int, 3> idx{i, j, k};
  for (int a = 0; a < dims; ++a)
    if (bc[a] == AxisBC::dirichlet_node && (idx[a] == 0 || idx[a] == layout.shape[a] - 1))
      return true;
  return false;
}

bool LaplaceStencil::singular() const {
  for (int a = 0; a < dims; ++a)
    if (bc[a] == AxisBC::dirichlet_cell || bc[a] == AxisBC::dirichlet_node) return false;
  return true;
}

void LaplaceStencil::apply(std::span<const double> x, std::span<double> y) const {
  const auto stride = layout.strides();
  const auto& n = layout.shape;
  for (int i = 0; i < n[0]; ++i)
    for (int j = 0; j < n[1]; ++j)
      for (int k = 0; k < n[2]; ++k) {
        const std::array<int, 3> idx{i, j, k};
        const std::size_t c = layout.index(i, j, k);
        if (pinned(i, j, k)) {
          y[c] = 0.0;
          continue;
        }
        const double xc = x[c];
        double acc = 0.0;
        for (int a = 0; a < dims; ++a) {
          const int m = idx[a];
          const int last = n[a] - 1;
          double lo = 0.0;
          double hi = 0.0;
          switch (bc[a]) {
            case AxisBC::periodic:
              lo = x[m == 0 ? c + last * stride[a] : c - stride[a]];
              hi = x[m == last ? c - last * stride[a] : c + stride[a]];
              break;
            case AxisBC::neumann_cell:
              lo = m == 0 ? xc : x[c - stride[a]];
              hi = m == last ? xc : x[c + stride[a]];
              break;
            case AxisBC::dirichlet_cell:
              lo = m == 0 ? -xc : x[c - stride[a]];
              hi = m == last ? -xc : x[c + stride[a]];
              break;
            case AxisBC::dirichlet_node:
              // neighbours of interior nodes; pinned boundary nodes hold zero
              lo = m - 1 == 0 ? 0.0 : x[c - stride[a]];
              hi = m + 1 == last ? 0.0 : x[c + stride[a]];
              break;
          }
          acc += (lo - 2.0 * xc + hi) * inv_h2[a];
        }
        y[c] = acc;
      }
}

}  // namespace nspnp
