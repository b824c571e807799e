#include "nspnp/momentum.hpp"

#include <cmath>
#include <stdexcept>

#include "nspnp/errors.hpp"
#include "nspnp/operators.hpp"

namespace nspnp {

namespace {

int wrap(int m, int n) { return ((m % n) + n) % n; }

/// Reads component c at a possibly out-of-range index: wraps on periodic
/// grids, returns zero beyond walls.
double read(const VectorField& v, int c, std::array<int, 3> idx) {
  const GridSpec& g = v.grid();
  const Layout l = v.layout(c);
  for (int b = 0; b < g.dims; ++b) {
    if (g.periodic())
      idx[b] = wrap(idx[b], l.shape[b]);
    else if (idx[b] < 0 || idx[b] >= l.shape[b])
      return 0.0;
  }
  return v.component(c)[l.index(idx[0], idx[1], idx[2])];
}

bool wall_face(const GridSpec& g, int a, const std::array<int, 3>& idx) {
  return !g.periodic() && (idx[a] == 0 || idx[a] == g.cells[a]);
}

/// Transported value at a flux point between samples lo and hi.
double face_value(double lo, double hi, double velocity, Advection scheme) {
  if (scheme == Advection::centered) return 0.5 * (lo + hi);
  return velocity >= 0.0 ? lo : hi;
}

VectorField transport(const VectorField& u, const VectorField& w, Advection scheme) {
  const GridSpec& g = u.grid();
  VectorField out(g);
  for (int a = 0; a < g.dims; ++a) {
    const Layout l = out.layout(a);
    auto dst = out.component(a);
    for_each_index(l, [&](int i, int j, int k) {
      const std::array<int, 3> idx{i, j, k};
      if (wall_face(g, a, idx)) return;
      double acc = 0.0;
      for (int b = 0; b < g.dims; ++b) {
        // fluxes through the two b-sides of the control volume around this face
        auto flux = [&](int side) {
          std::array<int, 3> p = idx;
          if (b == a) {
            // cell centre between faces p+side-1 and p+side along a
            std::array<int, 3> lo = idx;
            std::array<int, 3> hi = idx;
            lo[a] += side - 1;
            hi[a] += side;
            const double vel = 0.5 * (read(w, a, lo) + read(w, a, hi));
            return vel * face_value(read(u, a, lo), read(u, a, hi), vel, scheme);
          }
          // edge at b-node idx[b] + side, between a-cells idx[a]-1 and idx[a]
          p[b] += side;
          if (!g.periodic() && (p[b] == 0 || p[b] == g.cells[b])) return 0.0;
          std::array<int, 3> wl = p;
          wl[a] -= 1;
          const double vel = 0.5 * (read(w, b, wl) + read(w, b, p));
          std::array<int, 3> ul = idx;
          std::array<int, 3> uh = idx;
          ul[b] += side - 1;
          uh[b] += side;
          return vel * face_value(read(u, a, ul), read(u, a, uh), vel, scheme);
        };
        acc += (flux(1) - flux(0)) / g.spacing(b);
      }
      dst[l.index(i, j, k)] = acc;
    });
  }
  return out;
}

}  // namespace

void NSStepParams::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("ns_step dt must be positive");
}

VectorField drift_advection(const VectorField& u, const VectorField& w) {
  return transport(u, w, Advection::centered);
}

VectorField electro_force(const ScalarField& n_plus, const ScalarField& n_minus,
                          const ScalarField& psi, ForceForm form) {
  const GridSpec& g = psi.grid();
  const VectorField e = gradient(psi);
  if (form == ForceForm::charge_gradient) {
    VectorField out(g);
    const ScalarField rho = n_plus - n_minus;
    for (int a = 0; a < g.dims; ++a) {
      const Layout l = out.layout(a);
      auto dst = out.component(a);
      const auto ea = e.component(a);
      for_each_index(l, [&](int i, int j, int k) {
        std::array<int, 3> hi{i, j, k};
        if (wall_face(g, a, hi)) return;
        std::array<int, 3> lo = hi;
        lo[a] = wrap(hi[a] - 1, g.cells[a]);
        const std::size_t f = l.index(i, j, k);
        dst[f] = -0.5 * (rho(lo[0], lo[1], lo[2]) + rho(hi[0], hi[1], hi[2])) * ea[f];
      });
    }
    return out;
  }
  // div(E⊗E) minus the gradient of ½|E|² at cell centres
  VectorField out = transport(e, e, Advection::centered);
  const auto ec = cell_centered(e);
  ScalarField half_sq(g);
  for (int a = 0; a < g.dims; ++a)
    for (std::size_t n = 0; n < half_sq.size(); ++n) half_sq[n] += 0.5 * ec[a][n] * ec[a][n];
  out -= gradient(half_sq);
  return out;
}

std::pair<VectorField, ScalarField> project(const VectorField& u, double dt, EllipticSolver& solver) {
  const GridSpec& g = u.grid();
  VectorField out = u;
  for (int a = 0; a < g.dims; ++a) {
    const Layout l = out.layout(a);
    auto c = out.component(a);
    for_each_index(l, [&](int i, int j, int k) {
      if (wall_face(g, a, {i, j, k})) c[l.index(i, j, k)] = 0.0;
    });
  }
  ScalarField rhs = divergence(out);
  rhs -= ScalarField(rhs.grid(), rhs.mean());
  rhs *= -1.0 / dt;
  ScalarField phi = solver.solve_neumann_poisson(rhs).solution;
  out -= dt * gradient(phi);
  return {std::move(out), std::move(phi)};
}

NSStepResult ns_step(const VectorField& u, const VectorField& w, const VectorField& force,
                     const NSStepParams& params, EllipticSolver& solver) {
  params.validate();
  const GridSpec& g = u.grid();
  if (!(w.grid() == g) || !(force.grid() == g))
    throw std::invalid_argument("ns_step fields must share one grid");
  if (!u.finite() || !w.finite() || !force.finite())
    throw std::invalid_argument("ns_step inputs must be finite");
  const double dt = params.dt;

  VectorField rhs = u;
  rhs -= dt * transport(u, w, params.advection);
  rhs += dt * force;
  const VectorField star = solver.solve_velocity_helmholtz(rhs, dt);
  auto [u_new, phi] = project(star, dt, solver);

  NSStepResult out;
  double div2 = 0.0;
  for (double v : divergence(u_new).values()) div2 += v * v;
  out.divergence_l2 = std::sqrt(div2 * g.cell_volume());
  if (!u_new.finite() || !phi.finite()) throw StabilityError("ns_step produced non-finite velocity");
  if (u_new.max_abs() > 10.0 * (u.max_abs() + dt * force.max_abs()))
    throw StabilityError("ns_step velocity grew more than tenfold in one step");
  out.u = std::move(u_new);
  out.pressure = std::move(phi);
  return out;
}

NSStepResult ns_step(const VectorField& u, const VectorField& w, const VectorField& force,
                     const NSStepParams& params) {
  EllipticSolver solver;
  return ns_step(u, w, force, params, solver);
}

}  // namespace nspnp
