#include "nspnp/regularity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include "nspnp/errors.hpp"
#include "nspnp/operators.hpp"

namespace nspnp {

namespace {

bool usable(CylinderIntegrator& integrator, const ParabolicCylinder& cyl) {
  try {
    integrator.require_cover(cyl);
    return true;
  } catch (const CoverageError&) {
    return false;
  } catch (const std::domain_error&) {
    return false;
  }
}

struct Quantities {
  double A, B, C, D;
};

Quantities abcd(CylinderIntegrator& integrator, const ParabolicCylinder& cyl) {
  const double r = cyl.radius;
  return {integrator.max_over_window(FieldSelector::velocity, 2.0, cyl) / r,
          integrator.integrate(FieldSelector::velocity_gradient, 2.0, cyl).integral / r,
          integrator.integrate(FieldSelector::velocity, 3.0, cyl).integral / (r * r),
          integrator.integrate(FieldSelector::pressure, 1.5, cyl).integral / (r * r)};
}

auto center_key(const Point& x, double t) { return std::make_tuple(t, x[0], x[1], x[2]); }

bool cylinder_less(const ParabolicCylinder& a, const ParabolicCylinder& b) {
  if (a.radius != b.radius) return a.radius > b.radius;
  return center_key(a.center, a.time) < center_key(b.center, b.time);
}

// ---- resampling ----

int wrap(int m, int n) { return ((m % n) + n) % n; }

/// Multilinear sample of a staggered array at physical point x. `offset[b]`
/// is 0.5 for cell-centred axes and 0 for the face-normal axis.
double sample(std::span<const double> values, const Layout& l, const GridSpec& g,
              const std::array<double, 3>& offset, const Point& x) {
  std::array<int, 3> i0{0, 0, 0};
  std::array<double, 3> w{0.0, 0.0, 0.0};
  for (int b = 0; b < g.dims; ++b) {
    const double h = g.spacing(b);
    double pos = x[b] / h - offset[b];
    if (g.periodic()) {
      const double f = std::floor(pos);
      i0[b] = static_cast<int>(f);
      w[b] = pos - f;
      continue;
    }
    const double slack = 1e-9;
    if (x[b] < -slack * h || x[b] > g.lengths[b] + slack * h)
      throw std::domain_error("rescale sample point lies outside the walled source box");
    const int last = l.shape[b] - 1;
    pos = std::clamp(pos, 0.0, static_cast<double>(last));
    i0[b] = std::min(static_cast<int>(std::floor(pos)), std::max(last - 1, 0));
    w[b] = last == 0 ? 0.0 : pos - i0[b];
  }
  double acc = 0.0;
  const int corners = 1 << g.dims;
  for (int c = 0; c < corners; ++c) {
    double weight = 1.0;
    std::array<int, 3> idx{0, 0, 0};
    for (int b = 0; b < g.dims; ++b) {
      const int bit = (c >> b) & 1;
      weight *= bit ? w[b] : 1.0 - w[b];
      idx[b] = i0[b] + bit;
      if (g.periodic()) idx[b] = wrap(idx[b], l.shape[b]);
    }
    if (weight == 0.0) continue;
    acc += weight * values[l.index(idx[0], idx[1], idx[2])];
  }
  return acc;
}

Point map_point(const Point& x0, double r0, const Point& y, int dims) {
  Point x{0.0, 0.0, 0.0};
  for (int b = 0; b < dims; ++b) x[b] = x0[b] + r0 * y[b];
  return x;
}

ScalarField resample_scalar(const ScalarField& src, const GridSpec& target, const Point& x0,
                            double r0, double amplitude) {
  const GridSpec& g = src.grid();
  const std::array<double, 3> offset{0.5, 0.5, 0.5};
  ScalarField out(target);
  const Layout tl = out.layout();
  for_each_index(tl, [&](int i, int j, int k) {
    const Point x = map_point(x0, r0, target.cell_center(i, j, k), g.dims);
    out(i, j, k) = amplitude * sample(src.values(), src.layout(), g, offset, x);
  });
  return out;
}

VectorField resample_vector(const VectorField& src, const GridSpec& target, const Point& x0,
                            double r0, double amplitude) {
  const GridSpec& g = src.grid();
  VectorField out(target);
  for (int a = 0; a < g.dims; ++a) {
    std::array<double, 3> offset{0.5, 0.5, 0.5};
    offset[a] = 0.0;
    const Layout tl = out.layout(a);
    auto dst = out.component(a);
    for_each_index(tl, [&](int i, int j, int k) {
      const Point x = map_point(x0, r0, out.face_position(a, i, j, k), g.dims);
      dst[tl.index(i, j, k)] = amplitude * sample(src.component(a), src.layout(a), g, offset, x);
    });
  }
  return out;
}

State resample_state(const State& s, const GridSpec& target, const Point& x0, double r0) {
  State out;
  out.u = resample_vector(s.u, target, x0, r0, r0);
  out.pressure = resample_scalar(s.pressure, target, x0, r0, r0 * r0);
  out.n_plus = resample_scalar(s.n_plus, target, x0, r0, 1.0);
  out.n_minus = resample_scalar(s.n_minus, target, x0, r0, 1.0);
  out.psi = resample_scalar(s.psi, target, x0, r0, 1.0);
  return out;
}

State blend(const State& a, const State& b, double w) {
  State out = a;
  out.u *= 1.0 - w;
  out.u += w * b.u;
  auto mix = [w](ScalarField& x, const ScalarField& y) {
    x *= 1.0 - w;
    x += w * y;
  };
  mix(out.pressure, b.pressure);
  mix(out.n_plus, b.n_plus);
  mix(out.n_minus, b.n_minus);
  mix(out.psi, b.psi);
  return out;
}

// ---- local energy ----

struct BumpDerivs {
  double a, da, d2a;
};

BumpDerivs bump_derivs(double s) {
  if (!(s < 1.0)) return {0.0, 0.0, 0.0};
  const double q = 1.0 / (1.0 - s);
  const double a = std::exp(-q);
  return {a, -a * q * q, a * (q * q * q * q - 2.0 * q * q * q)};
}

Point displacement(const GridSpec& g, const Point& x, const Point& c) {
  Point d{0.0, 0.0, 0.0};
  for (int b = 0; b < g.dims; ++b) {
    d[b] = x[b] - c[b];
    if (g.periodic()) d[b] -= g.lengths[b] * std::round(d[b] / g.lengths[b]);
  }
  return d;
}

struct EnergyTerms {
  double signed_sum = 0.0;
  double abs_sum = 0.0;
};

EnergyTerms energy_terms(const FieldHistory& history, const LocalEnergyProbe& probe) {
  probe.validate();
  if (history.size() < 2 || !history.covers(probe.time - probe.half_width, probe.time + probe.half_width))
    throw CoverageError("history does not cover the probe support");
  const GridSpec& g = history.grid();
  if (!ball_inside(g, {probe.center, probe.radius}))
    throw std::domain_error("probe support leaves the domain");
  const double dt = history.dt();
  const Layout cl = cell_layout(g);
  EnergyTerms out;
  for (std::size_t n = 0; n < history.size(); ++n) {
    const double t = history[n].time;
    const double tau = (t - probe.time) / probe.half_width;
    if (!(tau * tau < 1.0)) continue;
    const double weight = (n == 0 || n + 1 == history.size() ? 0.5 : 1.0) * dt * g.cell_volume();
    const State& s = *history[n].state;
    const auto uc = cell_centered(s.u);
    const auto grad = velocity_gradient(s.u);
    const auto e = cell_gradient(s.psi);
    for_each_index(cl, [&](int i, int j, int k) {
      const Point y = displacement(g, g.cell_center(i, j, k), probe.center);
      double y2 = 0.0;
      for (int b = 0; b < g.dims; ++b) y2 += y[b] * y[b];
      if (!(y2 < probe.radius * probe.radius)) return;
      const auto v = probe.evaluate(y, t, g.dims);
      const std::size_t c = cl.index(i, j, k);
      double u2 = 0.0, grad2 = 0.0, e2 = 0.0, u_dot_gphi = 0.0;
      for (int a = 0; a < g.dims; ++a) {
        u2 += uc[a][c] * uc[a][c];
        e2 += e[a][c] * e[a][c];
        u_dot_gphi += uc[a][c] * v.grad[a];
        for (int b = 0; b < g.dims; ++b) grad2 += grad[a][b][c] * grad[a][b][c];
      }
      double stress = 0.0;
      for (int a = 0; a < g.dims; ++a)
        for (int b = 0; b < g.dims; ++b) {
          const double tab = e[a][c] * e[b][c] - (a == b ? 0.5 * e2 : 0.0);
          stress += tab * (grad[a][b][c] * v.phi + uc[a][c] * v.grad[b]);
        }
      const double terms[4] = {u2 * (v.dt + v.lap), (u2 + 2.0 * s.pressure[c]) * u_dot_gphi,
                                -2.0 * stress, -2.0 * grad2 * v.phi};
      for (double term : terms) {
        out.signed_sum += weight * term;
        out.abs_sum += weight * std::abs(term);
      }
    });
  }
  return out;
}

}  // namespace

// ---- config ----

void RegularityConfig::validate() const {
  if (radii.size() < 2) throw std::invalid_argument("regularity needs at least two radii");
  for (std::size_t n = 0; n < radii.size(); ++n) {
    if (!(radii[n] > 0.0) || !std::isfinite(radii[n]))
      throw std::invalid_argument("regularity radii must be positive");
    if (n > 0 && !(radii[n] < radii[n - 1]))
      throw std::invalid_argument("regularity radii must be strictly decreasing");
  }
  if (stride_space < 1 || stride_time < 1) throw std::invalid_argument("scan strides must be at least 1");
  if (!(epsilon0 > 0.0) || !(epsilon1 > 0.0)) throw std::invalid_argument("epsilon0 and epsilon1 must be positive");
  if (!(theta0 > 0.0 && theta0 < 0.5)) throw std::invalid_argument("theta0 must lie in (0, 1/2)");
}

void RegularityConfig::validate(const GridSpec& grid) const {
  validate();
  if (radii.back() < 4.0 * grid.min_spacing() * (1.0 - 1e-12))
    throw std::invalid_argument("regularity radii must be at least four cells");
}

std::pair<double, double> RegularityConfig::limsup_radii() const {
  validate();
  return {radii[radii.size() - 2], radii.back()};
}

std::vector<MorreyKey> default_morrey_keys() {
  return {{FieldSelector::grad_psi, 4.0, 2.0}, {FieldSelector::velocity, 3.0, 3.0}};
}

// ---- CKN quantities ----

CKNReport ckn(CylinderIntegrator& integrator, const ParabolicCylinder& cyl,
              std::span<const MorreyKey> morrey_keys) {
  integrator.require_cover(cyl);
  CKNReport out;
  out.cylinder = cyl;
  const double r = cyl.radius;
  const auto q = abcd(integrator, cyl);
  out.A = q.A;
  out.B = q.B;
  out.C = q.C;
  out.D = q.D;
  out.gradpsi_L4 = integrator.integrate(FieldSelector::grad_psi, 4.0, cyl).integral;
  for (const auto& key : morrey_keys)
    out.morrey[key] = std::pow(r, key.lambda - 5.0) * integrator.integrate(key.field, key.p, cyl).integral;
  out.l3_criterion_value = out.C + std::pow(out.gradpsi_L4 / r, 0.75) + out.D * out.D;
  out.grad_criterion_value = out.B;
  return out;
}

CKNReport ckn(const FieldHistory& history, const ParabolicCylinder& cyl) {
  CylinderIntegrator integrator(history);
  const auto keys = default_morrey_keys();
  return ckn(integrator, cyl, keys);
}

bool criterion_l3(const CKNReport& report, double epsilon0) {
  return report.l3_criterion_value < epsilon0 * epsilon0 * epsilon0;
}

double grad_criterion_value(CylinderIntegrator& integrator, const Point& x0, double t0,
                            std::span<const double> radii) {
  if (radii.size() < 2) throw std::invalid_argument("criterion_grad needs at least two radii");
  std::vector<double> sorted(radii.begin(), radii.end());
  std::sort(sorted.begin(), sorted.end());
  double best = 0.0;
  for (std::size_t n = 0; n < 2; ++n) {
    const ParabolicCylinder cyl{x0, t0, sorted[n]};
    best = std::max(best, integrator.integrate(FieldSelector::velocity_gradient, 2.0, cyl).integral / cyl.radius);
  }
  return best;
}

bool criterion_grad(CylinderIntegrator& integrator, const Point& x0, double t0,
                    std::span<const double> radii, double epsilon1) {
  return grad_criterion_value(integrator, x0, t0, radii) < epsilon1 * epsilon1;
}

bool criterion_grad(const FieldHistory& history, const Point& x0, double t0,
                    std::span<const double> radii, double epsilon1) {
  CylinderIntegrator integrator(history);
  return criterion_grad(integrator, x0, t0, radii, epsilon1);
}

// ---- scan ----

std::vector<ParabolicCylinder> ScanResult::flagged() const {
  std::vector<ParabolicCylinder> out;
  for (const auto& e : entries)
    if (e.flagged) out.push_back(e.cylinder);
  return out;
}

std::vector<std::pair<Point, double>> scan_centers(const FieldHistory& history,
                                                   const RegularityConfig& config) {
  std::vector<std::pair<Point, double>> out;
  if (history.empty()) return out;
  config.validate();
  const GridSpec& g = history.grid();
  const int s = config.stride_space;
  auto axis = [&](int b) {
    std::vector<int> idx;
    if (b >= g.dims) return std::vector<int>{0};
    for (int i = s / 2; i < g.cells[b]; i += s) idx.push_back(i);
    return idx;
  };
  const auto xi = axis(0), yi = axis(1), zi = axis(2);
  for (std::size_t n = 0; n < history.size(); n += static_cast<std::size_t>(config.stride_time))
    for (int i : xi)
      for (int j : yi)
        for (int k : zi) out.emplace_back(g.cell_center(i, j, k), history[n].time);
  return out;
}

ScanResult scan(const FieldHistory& history, const RegularityConfig& config) {
  ScanResult out;
  config.validate();
  if (history.empty()) {
    out.errors.emplace_back("history is empty: no cylinder can be covered");
    return out;
  }
  config.validate(history.grid());
  CylinderIntegrator integrator(history);
  const auto [r_big, r_small] = config.limsup_radii();
  const auto keys = default_morrey_keys();
  const double eps1_sq = config.epsilon1 * config.epsilon1;
  for (const auto& [x, t] : scan_centers(history, config)) {
    const ParabolicCylinder big{x, t, r_big};
    const ParabolicCylinder small{x, t, r_small};
    if (!usable(integrator, big) || !usable(integrator, small)) {
      ++out.skipped;
      continue;
    }
    ScanEntry entry;
    entry.cylinder = small;
    entry.report = ckn(integrator, small, keys);
    const double b_big = integrator.integrate(FieldSelector::velocity_gradient, 2.0, big).integral / r_big;
    entry.report.grad_criterion_value = std::max(entry.report.B, b_big);
    entry.report.grad_small = entry.report.grad_criterion_value < eps1_sq;
    entry.report.l3_small = criterion_l3(entry.report, config.epsilon0);
    entry.flagged = !entry.report.grad_small;
    out.entries.push_back(std::move(entry));
  }
  std::sort(out.entries.begin(), out.entries.end(), [](const ScanEntry& a, const ScanEntry& b) {
    return center_key(a.cylinder.center, a.cylinder.time) < center_key(b.cylinder.center, b.cylinder.time);
  });
  return out;
}

// ---- covering ----

std::vector<ParabolicCylinder> vitali_select(std::span<const ParabolicCylinder> flags,
                                             const GridSpec* periodic_grid) {
  std::vector<ParabolicCylinder> order(flags.begin(), flags.end());
  std::sort(order.begin(), order.end(), cylinder_less);
  std::vector<ParabolicCylinder> chosen;
  for (const auto& c : order) {
    const bool disjoint = std::all_of(chosen.begin(), chosen.end(), [&](const ParabolicCylinder& s) {
      return parabolic_distance(c.center, c.time, s.center, s.time, periodic_grid) >= c.radius + s.radius;
    });
    if (disjoint) chosen.push_back(c);
  }
  return chosen;
}

double vitali_cover(std::span<const ParabolicCylinder> flags, const GridSpec* periodic_grid) {
  double sum = 0.0;
  for (const auto& c : vitali_select(flags, periodic_grid)) sum += 5.0 * c.radius;
  return sum;
}

// ---- rescaling ----

FieldHistory rescale(const FieldHistory& history, const Point& x0, double t0, double r0,
                     const RescaleTarget& target) {
  if (!(r0 > 0.0) || !std::isfinite(r0)) throw std::invalid_argument("rescale factor must be positive");
  if (history.empty()) throw CoverageError("cannot rescale an empty history");
  const GridSpec& g = history.grid();
  GridSpec tg = g;
  if (target.grid) {
    tg = *target.grid;
    tg.validate();
    if (tg.dims != g.dims) throw std::invalid_argument("rescale target must keep the dimension");
  } else {
    for (int b = 0; b < g.dims; ++b) tg.lengths[b] = g.lengths[b] / r0;
  }
  std::vector<double> times;
  if (target.times) {
    times = *target.times;
  } else {
    for (const auto& s : history) times.push_back((s.time - t0) / (r0 * r0));
  }

  FieldHistory out;
  const double dt = history.dt();
  for (double s : times) {
    const double t = t0 + r0 * r0 * s;
    if (!history.covers(t, t)) throw CoverageError("rescale target time lies outside the history");
    State src;
    if (auto n = history.find(t)) {
      src = *history[*n].state;
    } else {
      const double pos = (t - history.front().time) / dt;
      const std::size_t i = std::min(static_cast<std::size_t>(std::floor(pos)), history.size() - 2);
      src = blend(*history[i].state, *history[i + 1].state, (t - history[i].time) / dt);
    }
    out.push(s, resample_state(src, tg, x0, r0));
  }
  return out;
}

// ---- local energy ----

void LocalEnergyProbe::validate() const {
  if (!(radius > 0.0) || !(half_width > 0.0) || !std::isfinite(radius) || !std::isfinite(half_width))
    throw std::invalid_argument("probe radii must be positive");
}

LocalEnergyProbe::Values LocalEnergyProbe::evaluate(const Point& y, double t, int dims) const {
  double y2 = 0.0;
  for (int b = 0; b < dims; ++b) y2 += y[b] * y[b];
  const double r2 = radius * radius;
  const double tau = t - time;
  const double tw2 = half_width * half_width;
  const auto space = bump_derivs(y2 / r2);
  const auto temporal = bump_derivs(tau * tau / tw2);
  Values v;
  v.phi = space.a * temporal.a;
  v.dt = space.a * temporal.da * 2.0 * tau / tw2;
  for (int b = 0; b < dims; ++b) v.grad[b] = temporal.a * space.da * 2.0 * y[b] / r2;
  v.lap = temporal.a * (space.d2a * 4.0 * y2 / (r2 * r2) + space.da * 2.0 * dims / r2);
  return v;
}

double local_energy_residual(const FieldHistory& history, const LocalEnergyProbe& probe) {
  return energy_terms(history, probe).signed_sum;
}

double local_energy_scale(const FieldHistory& history, const LocalEnergyProbe& probe) {
  return energy_terms(history, probe).abs_sum;
}

// ---- lemma checks ----

namespace {

LemmaCheck make_check(double lhs, double rhs) {
  return {lhs, rhs, lhs == 0.0 ? 0.0 : lhs / rhs};
}

}  // namespace

LemmaCheck check_interpolation(const VectorField& u, const Ball& ball, double q, double constant) {
  if (!(q >= 2.0 && q <= 6.0)) throw std::invalid_argument("interpolation exponent must lie in [2, 6]");
  const GridSpec& g = u.grid();
  const auto uc = cell_centered(u);
  const auto grad2 = velocity_gradient_sq(u);
  double lq = 0.0, l2 = 0.0, g2 = 0.0;
  for (std::size_t n : ball_cells(g, ball)) {
    double m2 = 0.0;
    for (int a = 0; a < g.dims; ++a) m2 += uc[a][n] * uc[a][n];
    l2 += m2;
    lq += std::pow(m2, 0.5 * q);
    g2 += grad2[n];
  }
  const double vol = g.cell_volume();
  lq *= vol;
  l2 *= vol;
  g2 *= vol;
  const double a = 1.5 * (1.0 - q / 6.0);
  const double rhs = constant * std::pow(g2, 0.5 * q - a) * std::pow(l2, a) +
                     constant * std::pow(ball.radius, 3.0 * (1.0 - 0.5 * q)) * std::pow(l2, 0.5 * q);
  return make_check(lq, rhs);
}

LemmaCheck check_Cr(CylinderIntegrator& integrator, const Point& x0, double t0, double r, double rho,
                    double constant) {
  if (!(r > 0.0 && r <= rho)) throw std::invalid_argument("check_Cr needs 0 < r <= rho");
  const auto small = abcd(integrator, {x0, t0, r});
  const auto big = abcd(integrator, {x0, t0, rho});
  const double rhs = constant * (std::pow(r / rho, 3.0) * std::pow(big.A, 1.5) +
                                 std::pow(rho / r, 3.0) * std::pow(big.A, 0.75) * std::pow(big.B, 0.75));
  return make_check(small.C, rhs);
}

LemmaCheck check_Dr(CylinderIntegrator& integrator, const Point& x0, double t0, double r, double rho,
                    double constant) {
  if (!(r > 0.0 && 2.0 * r <= rho)) throw std::invalid_argument("check_Dr needs 0 < r <= rho/2");
  const auto small = abcd(integrator, {x0, t0, r});
  const auto big = abcd(integrator, {x0, t0, rho});
  const double k = (rho / r) * (rho / r);
  const double rhs = constant * ((r / rho) * big.D + k * std::pow(big.A, 0.75) * std::pow(big.B, 0.75) +
                                 k * std::pow(rho, 1.5));
  return make_check(small.D, rhs);
}

double morrey_norm(CylinderIntegrator& integrator, FieldSelector field, double p, double lambda,
                   std::span<const std::pair<Point, double>> centers, std::span<const double> radii) {
  if (!(p >= 1.0)) throw std::invalid_argument("Morrey exponent p must be at least 1");
  if (!(lambda >= 0.0 && lambda <= 5.0)) throw std::invalid_argument("Morrey lambda must lie in [0, 5]");
  double best = 0.0;
  std::size_t used = 0;
  for (const auto& [x, t] : centers)
    for (double r : radii) {
      const ParabolicCylinder cyl{x, t, r};
      if (!(r > 0.0) || !usable(integrator, cyl)) continue;
      ++used;
      best = std::max(best, std::pow(r, lambda - 5.0) * integrator.integrate(field, p, cyl).integral);
    }
  if (used == 0) throw CoverageError("no sampled cylinder is covered by the history");
  return best;
}

}  // namespace nspnp
