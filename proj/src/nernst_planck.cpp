#include "nspnp/nernst_planck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nspnp/errors.hpp"
#include "nspnp/operators.hpp"

namespace nspnp {

namespace {

int wrap(int m, int n) { return ((m % n) + n) % n; }

/// Visits interior faces of component `a` with the linear indices of the
/// cells on either side.
template <typename F>
void for_each_face(const GridSpec& g, int a, F&& f) {
  const Layout fl = face_layout(g, a);
  const Layout cl = cell_layout(g);
  for_each_index(fl, [&](int i, int j, int k) {
    std::array<int, 3> hi{i, j, k};
    const int m = hi[a];
    if (!g.periodic() && (m == 0 || m == g.cells[a])) return;
    std::array<int, 3> lo = hi;
    lo[a] = g.periodic() ? wrap(m - 1, g.cells[a]) : m - 1;
    f(fl.index(i, j, k), cl.index(lo[0], lo[1], lo[2]), cl.index(hi[0], hi[1], hi[2]));
  });
}

ScalarField step_species(const ScalarField& n, const VectorField& w, const VectorField& grad_psi,
                         double sign, const NPStepParams& p, EllipticSolver& solver) {
  const GridSpec& g = n.grid();
  VectorField flux = advective_flux(n, w, p.advection);
  for (int a = 0; a < g.dims; ++a) {
    auto fa = flux.component(a);
    const auto ga = grad_psi.component(a);
    for_each_face(g, a, [&](std::size_t f, std::size_t lo, std::size_t hi) {
      const double nl = p.clip_in_flux ? std::max(n[lo], 0.0) : n[lo];
      const double nh = p.clip_in_flux ? std::max(n[hi], 0.0) : n[hi];
      fa[f] -= sign * 0.5 * (nl + nh) * ga[f];
    });
  }
  ScalarField rhs = n;
  rhs -= p.dt * divergence(flux);
  const HelmholtzBC bc = g.periodic() ? HelmholtzBC::periodic : HelmholtzBC::neumann;
  return solver.solve_helmholtz(rhs, p.dt, bc).solution;
}

}  // namespace

void NPStepParams::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("np_step dt must be positive");
  if (!(drift_divergence_tol > 0.0)) throw std::invalid_argument("drift divergence tolerance must be positive");
}

VectorField advective_flux(const ScalarField& n, const VectorField& w, Advection scheme) {
  const GridSpec& g = n.grid();
  VectorField flux(g);
  for (int a = 0; a < g.dims; ++a) {
    auto fa = flux.component(a);
    const auto wa = w.component(a);
    for_each_face(g, a, [&](std::size_t f, std::size_t lo, std::size_t hi) {
      double face;
      if (scheme == Advection::centered)
        face = 0.5 * (n[lo] + n[hi]);
      else
        face = wa[f] >= 0.0 ? n[lo] : n[hi];
      fa[f] = face * wa[f];
    });
  }
  return flux;
}

NPStepResult np_step(const ScalarField& n_plus, const ScalarField& n_minus, const VectorField& w,
                     const ScalarField& psi, const NPStepParams& params, EllipticSolver& solver) {
  params.validate();
  const GridSpec& g = n_plus.grid();
  if (!(n_minus.grid() == g) || !(w.grid() == g) || !(psi.grid() == g))
    throw std::invalid_argument("np_step fields must share one grid");
  if (!n_plus.finite() || !n_minus.finite() || !w.finite() || !psi.finite())
    throw std::invalid_argument("np_step inputs must be finite");
  const double div_w = std::sqrt(g.cell_volume()) * [&] {
    double s = 0.0;
    for (double v : divergence(w).values()) s += v * v;
    return std::sqrt(s);
  }();
  if (div_w > params.drift_divergence_tol)
    throw std::invalid_argument("np_step drift is not divergence free");

  const VectorField grad_psi = gradient(psi);
  NPStepResult out;
  out.n_plus = step_species(n_plus, w, grad_psi, +1.0, params, solver);
  out.n_minus = step_species(n_minus, w, grad_psi, -1.0, params, solver);
  out.cfl = params.dt * w.max_abs() / g.min_spacing();

  const double before = std::max(n_plus.max_abs(), n_minus.max_abs());
  const double after = std::max(out.n_plus.max_abs(), out.n_minus.max_abs());
  if (!out.n_plus.finite() || !out.n_minus.finite())
    throw StabilityError("np_step produced non-finite concentrations");
  if (after > 10.0 * before)
    throw StabilityError("np_step concentration grew more than tenfold in one step");
  return out;
}

NPStepResult np_step(const ScalarField& n_plus, const ScalarField& n_minus, const VectorField& w,
                     const ScalarField& psi, const NPStepParams& params) {
  EllipticSolver solver;
  return np_step(n_plus, n_minus, w, psi, params, solver);
}

double lp_ledger(const ScalarField& n_plus, const ScalarField& n_minus, double p) {
  if (!(p >= 2.0)) throw std::invalid_argument("lp_ledger requires p >= 2");
  double acc = 0.0;
  for (std::size_t n = 0; n < n_plus.size(); ++n)
    acc += std::pow(std::abs(n_plus[n]), p) + std::pow(std::abs(n_minus[n]), p);
  return acc * n_plus.grid().cell_volume();
}

}  // namespace nspnp
