#include "nspnp/operators.hpp"

#include <cmath>
#include <stdexcept>

#include "nspnp/stencil.hpp"

namespace nspnp {

namespace {

int wrap(int m, int n) { return ((m % n) + n) % n; }

}  // namespace

VectorField gradient(const ScalarField& f) {
  const GridSpec& g = f.grid();
  VectorField out(g);
  for (int a = 0; a < g.dims; ++a) {
    const Layout fl = out.layout(a);
    const double inv_h = 1.0 / g.spacing(a);
    auto comp = out.component(a);
    for_each_index(fl, [&](int i, int j, int k) {
      std::array<int, 3> hi{i, j, k};
      const int m = hi[a];
      if (!g.periodic() && (m == 0 || m == g.cells[a])) return;  // stays zero
      std::array<int, 3> lo = hi;
      lo[a] = g.periodic() ? wrap(m - 1, g.cells[a]) : m - 1;
      comp[fl.index(i, j, k)] =
          (f(hi[0], hi[1], hi[2]) - f(lo[0], lo[1], lo[2])) * inv_h;
    });
  }
  return out;
}

ScalarField divergence(const VectorField& v) {
  const GridSpec& g = v.grid();
  ScalarField out(g);
  const Layout cl = cell_layout(g);
  auto vals = out.values();
  for (int a = 0; a < g.dims; ++a) {
    const Layout fl = v.layout(a);
    const double inv_h = 1.0 / g.spacing(a);
    const auto comp = v.component(a);
    for_each_index(cl, [&](int i, int j, int k) {
      std::array<int, 3> up{i, j, k};
      up[a] += 1;
      if (g.periodic() && up[a] == g.cells[a]) up[a] = 0;
      vals[cl.index(i, j, k)] +=
          (comp[fl.index(up[0], up[1], up[2])] - comp[fl.index(i, j, k)]) * inv_h;
    });
  }
  return out;
}

ScalarField laplacian(const ScalarField& f) {
  ScalarField out(f.grid());
  cell_stencil(f.grid()).apply(f.values(), out.values());
  return out;
}

bool ball_inside(const GridSpec& grid, const Ball& ball) {
  for (int a = 0; a < grid.dims; ++a) {
    if (grid.periodic()) {
      if (2.0 * ball.radius > grid.lengths[a]) return false;
    } else if (!(ball.center[a] - ball.radius > 0.0 && ball.center[a] + ball.radius < grid.lengths[a])) {
      return false;
    }
  }
  return true;
}

std::vector<std::size_t> ball_cells(const GridSpec& grid, const Ball& ball) {
  if (!(ball.radius > 0.0)) throw std::invalid_argument("ball radius must be positive");
  if (!ball_inside(grid, ball)) throw std::domain_error("ball does not fit inside the domain");
  std::array<int, 3> lo{0, 0, 0};
  std::array<int, 3> hi{0, 0, 0};
  for (int a = 0; a < grid.dims; ++a) {
    const double h = grid.spacing(a);
    lo[a] = static_cast<int>(std::floor((ball.center[a] - ball.radius) / h - 0.5));
    hi[a] = static_cast<int>(std::ceil((ball.center[a] + ball.radius) / h - 0.5));
    if (!grid.periodic()) {
      lo[a] = std::max(lo[a], 0);
      hi[a] = std::min(hi[a], grid.cells[a] - 1);
    }
  }
  const Layout cl = cell_layout(grid);
  const double r2 = ball.radius * ball.radius;
  std::vector<std::size_t> out;
  for (int i = lo[0]; i <= hi[0]; ++i)
    for (int j = lo[1]; j <= hi[1]; ++j)
      for (int k = lo[2]; k <= hi[2]; ++k) {
        const std::array<int, 3> idx{i, j, k};
        double d2 = 0.0;
        for (int a = 0; a < grid.dims; ++a) {
          const double x = (idx[a] + 0.5) * grid.spacing(a) - ball.center[a];
          d2 += x * x;
        }
        if (d2 >= r2) continue;
        std::array<int, 3> w = idx;
        for (int a = 0; a < grid.dims; ++a)
          if (grid.periodic()) w[a] = wrap(w[a], grid.cells[a]);
        out.push_back(cl.index(w[0], w[1], w[2]));
      }
  return out;
}

namespace {

double lp_from_cells(const GridSpec& grid, const std::vector<double>& magnitude, double p,
                     const std::optional<Ball>& region) {
  if (!(p >= 1.0)) throw std::invalid_argument("lp_norm requires p >= 1");
  double acc = 0.0;
  if (region) {
    for (std::size_t n : ball_cells(grid, *region)) acc += std::pow(magnitude[n], p);
  } else {
    for (double m : magnitude) acc += std::pow(m, p);
  }
  return std::pow(acc * grid.cell_volume(), 1.0 / p);
}

}  // namespace

double lp_norm(const ScalarField& f, double p, const std::optional<Ball>& region) {
  std::vector<double> mag(f.size());
  for (std::size_t n = 0; n < f.size(); ++n) mag[n] = std::abs(f[n]);
  return lp_from_cells(f.grid(), mag, p, region);
}

double lp_norm(const VectorField& v, double p, const std::optional<Ball>& region) {
  const auto cc = cell_centered(v);
  const std::size_t count = v.grid().cell_count();
  std::vector<double> mag(count, 0.0);
  for (int a = 0; a < v.dims(); ++a)
    for (std::size_t n = 0; n < count; ++n) mag[n] += cc[a][n] * cc[a][n];
  for (double& m : mag) m = std::sqrt(m);
  return lp_from_cells(v.grid(), mag, p, region);
}

TensorArrays velocity_gradient(const VectorField& u) {
  const GridSpec& g = u.grid();
  const Layout cl = cell_layout(g);
  const auto stride = cl.strides();
  const auto cc = cell_centered(u);
  TensorArrays out;
  for (int a = 0; a < g.dims; ++a) {
    const Layout fl = u.layout(a);
    const auto comp = u.component(a);
    for (int b = 0; b < g.dims; ++b) {
      auto& dst = out[a][b];
      dst.assign(cl.size(), 0.0);
      const double h = g.spacing(b);
      for_each_index(cl, [&](int i, int j, int k) {
        const std::size_t c = cl.index(i, j, k);
        const std::array<int, 3> idx{i, j, k};
        if (a == b) {
          std::array<int, 3> up = idx;
          up[a] += 1;
          if (g.periodic() && up[a] == g.cells[a]) up[a] = 0;
          dst[c] = (comp[fl.index(up[0], up[1], up[2])] - comp[fl.index(i, j, k)]) / h;
          return;
        }
        const int m = idx[b];
        const int last = g.cells[b] - 1;
        const auto& ua = cc[a];
        if (g.periodic()) {
          const std::size_t lo = m == 0 ? c + last * stride[b] : c - stride[b];
          const std::size_t hi = m == last ? c - last * stride[b] : c + stride[b];
          dst[c] = (ua[hi] - ua[lo]) / (2.0 * h);
        } else if (m == 0) {
          dst[c] = (-3.0 * ua[c] + 4.0 * ua[c + stride[b]] - ua[c + 2 * stride[b]]) / (2.0 * h);
        } else if (m == last) {
          dst[c] = (3.0 * ua[c] - 4.0 * ua[c - stride[b]] + ua[c - 2 * stride[b]]) / (2.0 * h);
        } else {
          dst[c] = (ua[c + stride[b]] - ua[c - stride[b]]) / (2.0 * h);
        }
      });
    }
  }
  return out;
}

std::vector<double> velocity_gradient_sq(const VectorField& u) {
  const auto grad = velocity_gradient(u);
  std::vector<double> out(u.grid().cell_count(), 0.0);
  for (int a = 0; a < u.dims(); ++a)
    for (int b = 0; b < u.dims(); ++b)
      for (std::size_t n = 0; n < out.size(); ++n) out[n] += grad[a][b][n] * grad[a][b][n];
  return out;
}

std::array<std::vector<double>, 3> cell_gradient(const ScalarField& f) {
  return cell_centered(gradient(f));
}

double dirichlet_energy(const VectorField& u) {
  const GridSpec& g = u.grid();
  double acc = 0.0;
  for (int a = 0; a < g.dims; ++a) {
    const LaplaceStencil s = velocity_stencil(g, a);
    const auto comp = u.component(a);
    std::vector<double> lap(comp.size());
    s.apply(comp, lap);
    for (std::size_t n = 0; n < lap.size(); ++n) acc -= comp[n] * lap[n];
  }
  return acc * g.cell_volume();
}

double hessian_energy(const ScalarField& psi) {
  const GridSpec& g = psi.grid();
  const Layout cl = cell_layout(g);
  const auto stride = cl.strides();
  double acc = 0.0;
  for (int a = 0; a < g.dims; ++a) {
    const double inv_h2 = 1.0 / (g.spacing(a) * g.spacing(a));
    for_each_index(cl, [&](int i, int j, int k) {
      const std::size_t c = cl.index(i, j, k);
      const std::array<int, 3> idx{i, j, k};
      const int m = idx[a];
      const int last = g.cells[a] - 1;
      double lo;
      double hi;
      if (g.periodic()) {
        lo = psi[m == 0 ? c + last * stride[a] : c - stride[a]];
        hi = psi[m == last ? c - last * stride[a] : c + stride[a]];
      } else {
        lo = m == 0 ? psi[c] : psi[c - stride[a]];
        hi = m == last ? psi[c] : psi[c + stride[a]];
      }
      const double d = (lo - 2.0 * psi[c] + hi) * inv_h2;
      acc += d * d;
    });
  }
  // Mixed derivatives at interior cell corners (zero at walls by Neumann).
  for (int a = 0; a < g.dims; ++a)
    for (int b = a + 1; b < g.dims; ++b) {
      const double inv = 1.0 / (g.spacing(a) * g.spacing(b));
      for_each_index(cl, [&](int i, int j, int k) {
        std::array<int, 3> idx{i, j, k};
        if (!g.periodic() && (idx[a] == 0 || idx[b] == 0)) return;
        auto at = [&](int da, int db) {
          std::array<int, 3> q = idx;
          q[a] = wrap(q[a] - da, g.cells[a]);
          q[b] = wrap(q[b] - db, g.cells[b]);
          return psi(q[0], q[1], q[2]);
        };
        const double d = (at(0, 0) - at(1, 0) - at(0, 1) + at(1, 1)) * inv;
        acc += 2.0 * d * d;
      });
    }
  return acc * g.cell_volume();
}

}  // namespace nspnp
