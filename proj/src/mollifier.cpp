#include "nspnp/mollifier.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "nspnp/errors.hpp"
#include "nspnp/operators.hpp"

namespace nspnp {

namespace {

double chi(double s) { return s < 1.0 ? std::exp(-1.0 / (1.0 - s)) : 0.0; }

double phi(double tau) {
  if (!(tau > 1.0 && tau < 2.0)) return 0.0;
  const double s = 2.0 * tau - 3.0;
  return std::exp(-1.0 / (1.0 - s * s));
}

/// Composite Simpson rule; the integrands vanish to all orders at the ends.
template <typename F>
double simpson(F&& f, double a, double b, int intervals) {
  const double h = (b - a) / intervals;
  double acc = f(a) + f(b);
  for (int n = 1; n < intervals; ++n) acc += (n % 2 ? 4.0 : 2.0) * f(a + n * h);
  return acc * h / 3.0;
}

double compute_normalization(int dims) {
  const double sphere = dims == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi;
  const double radial =
      simpson([&](double r) { return chi(r * r) * std::pow(r, dims - 1); }, 0.0, 1.0, 20000);
  const double temporal =
      simpson([&](double t) { return phi(t) * std::pow(t, 0.5 * dims); }, 1.0, 2.0, 20000);
  return 1.0 / (sphere * radial * temporal);
}

int wrap(int m, int n) { return ((m % n) + n) % n; }

}  // namespace

double zeta_profile(const Point& y, double tau, int dims) {
  if (!(tau > 1.0 && tau < 2.0)) return 0.0;
  double r2 = 0.0;
  for (int a = 0; a < dims; ++a) r2 += y[a] * y[a];
  return chi(r2 / tau) * phi(tau);
}

double zeta_normalization(int dims) {
  if (dims != 2 && dims != 3) throw std::invalid_argument("zeta is defined for 2 or 3 dimensions");
  static const double c2 = compute_normalization(2);
  static const double c3 = compute_normalization(3);
  return dims == 2 ? c2 : c3;
}

double zeta(const Point& y, double tau, int dims) {
  return zeta_normalization(dims) * zeta_profile(y, tau, dims);
}

int MollifierSpec::kernel_resolution() const { return static_cast<int>(std::lround(epsilon / dt)); }

void MollifierSpec::validate() const {
  if (!(epsilon > 0.0) || !(dt > 0.0)) throw std::invalid_argument("mollifier epsilon and dt must be positive");
  if (!(length_scale > 0.0)) throw std::invalid_argument("mollifier length_scale must be positive");
  const double ratio = epsilon / dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
    throw std::invalid_argument("mollifier epsilon must be an integer multiple of dt");
  if (kernel_resolution() < 2)
    throw std::invalid_argument("mollifier needs at least two history steps per epsilon");
}

Mollifier::Mollifier(const MollifierSpec& spec, const GridSpec& grid) : spec_(spec), grid_(grid) {
  spec_.validate();
  grid_.validate();
  const int m = spec_.kernel_resolution();
  const int d = grid_.dims;
  const double eps = spec_.epsilon;
  const double ell = spec_.length_scale;
  // ε^{-(d+1)} ζ(y/(εℓ), τ/ε) ℓ^{-d} · cell volume · dt, later renormalised
  const double scale = zeta_normalization(d) * grid_.cell_volume() * spec_.dt /
                       (std::pow(eps * ell, d) * eps);
  double total = 0.0;
  for (int j = m + 1; j < 2 * m; ++j) {
    const double tau = j * spec_.dt;
    const double r2max = tau * eps * ell * ell;
    std::array<int, 3> reach{0, 0, 0};
    for (int a = 0; a < d; ++a) reach[a] = static_cast<int>(std::ceil(std::sqrt(r2max) / grid_.spacing(a)));
    for (int di = -reach[0]; di <= reach[0]; ++di)
      for (int dj = -reach[1]; dj <= reach[1]; ++dj)
        for (int dk = -reach[2]; dk <= reach[2]; ++dk) {
          const std::array<int, 3> off{di, dj, dk};
          double r2 = 0.0;
          for (int a = 0; a < d; ++a) r2 += std::pow(off[a] * grid_.spacing(a), 2);
          const double s = r2 / r2max;
          if (s >= 1.0) continue;
          const double w = scale * chi(s) * phi(tau / eps);
          if (w <= 0.0) continue;
          taps_.push_back({j, off, w});
          total += w;
        }
  }
  if (!(total > 0.0)) throw std::invalid_argument("mollifier kernel has no support on this grid");
  for (Tap& tap : taps_) tap.weight /= total;
}

double Mollifier::weight_sum() const {
  double s = 0.0;
  for (const Tap& t : taps_) s += t.weight;
  return s;
}

void Mollifier::accumulate(const VectorField& src, const Tap& tap, VectorField& out) const {
  const bool periodic = grid_.periodic();
  for (int a = 0; a < grid_.dims; ++a) {
    const Layout l = out.layout(a);
    const auto in = src.component(a);
    auto dst = out.component(a);
    for_each_index(l, [&](int i, int j, int k) {
      std::array<int, 3> s{i - tap.offset[0], j - tap.offset[1], k - tap.offset[2]};
      for (int b = 0; b < grid_.dims; ++b) {
        if (periodic) {
          s[b] = wrap(s[b], l.shape[b]);
        } else if (s[b] < 0 || s[b] >= l.shape[b]) {
          return;  // zero extension outside the box
        }
      }
      dst[l.index(i, j, k)] += tap.weight * in[l.index(s[0], s[1], s[2])];
    });
  }
}

VectorField Mollifier::theta(const FieldHistory& history, double t) const {
  if (!history.empty() && !(history.grid() == grid_))
    throw std::invalid_argument("history grid differs from the mollifier grid");
  const double slack = 1e-9 * spec_.dt;
  return apply([&](int lag) -> const VectorField* {
    const double s = t - lag * spec_.dt;
    if (s < -slack) return nullptr;
    const auto n = history.find(std::max(s, 0.0));
    if (!n) throw CoverageError("mollifier history lacks a slice at t = " + std::to_string(s));
    return &history[*n].state->u;
  });
}

VectorField Mollifier::theta_hat(const FieldHistory& history, double t,
                                 EllipticSolver& solver) const {
  VectorField v = theta(history, t);
  if (!grid_.periodic()) v = shrink_compose(v, 2.0 * spec_.epsilon);
  return divergence_correct(v, solver);
}

VectorField shrink_compose(const VectorField& f, double delta) {
  if (!(delta >= 0.0)) throw std::invalid_argument("shrink delta must be non-negative");
  const GridSpec& g = f.grid();
  if (delta == 0.0 || g.periodic()) return f;
  const double ratio = 1.0 + 2.0 * delta / g.min_length();
  const Point c = g.center();
  VectorField out(g);
  for (int a = 0; a < g.dims; ++a) {
    const Layout l = out.layout(a);
    const auto in = f.component(a);
    auto dst = out.component(a);
    for_each_index(l, [&](int i, int j, int k) {
      const Point x = out.face_position(a, i, j, k);
      std::array<int, 3> base{0, 0, 0};
      std::array<double, 3> frac{0.0, 0.0, 0.0};
      for (int b = 0; b < g.dims; ++b) {
        const double xb = c[b] + ratio * (x[b] - c[b]);
        if (xb < 0.0 || xb > g.lengths[b]) return;  // zero outside the box
        const int top = l.shape[b] - 1;
        double q = xb / g.spacing(b) - (b == a ? 0.0 : 0.5);
        q = std::clamp(q, 0.0, static_cast<double>(top));
        base[b] = std::min(static_cast<int>(std::floor(q)), top - 1);
        frac[b] = q - base[b];
      }
      double acc = 0.0;
      for (int corner = 0; corner < (1 << g.dims); ++corner) {
        std::array<int, 3> idx = base;
        double w = 1.0;
        for (int b = 0; b < g.dims; ++b) {
          const int bit = (corner >> b) & 1;
          idx[b] += bit;
          w *= bit ? frac[b] : 1.0 - frac[b];
        }
        if (w != 0.0) acc += w * in[l.index(idx[0], idx[1], idx[2])];
      }
      dst[l.index(i, j, k)] = acc;
    });
  }
  return out;
}

VectorField divergence_correct(const VectorField& f, EllipticSolver& solver, double* gradient_norm) {
  ScalarField rhs = divergence(f);
  // zero in exact arithmetic by telescoping; drop the roundoff
  rhs -= ScalarField(rhs.grid(), rhs.mean());
  const auto g = solver.solve_neumann_poisson(rhs);
  const VectorField grad = gradient(g.solution);
  if (gradient_norm) *gradient_norm = grad.norm_l2();
  return f + grad;
}

}  // namespace nspnp
