#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "nspnp/coupled.hpp"
#include "nspnp/errors.hpp"
#include "nspnp/operators.hpp"
#include "nspnp/regularity.hpp"
#include "support.hpp"

using namespace nspnp;
using testing::kPi;

namespace {

constexpr double kBall = 4.0 * kPi / 3.0;

enum class Quantity { kinetic, gradient, cubic, pressure };

/// Cell-centre samples computed directly from the faces.
std::vector<double> brute_integrand(const State& s, Quantity q) {
  const GridSpec& g = s.grid();
  const Layout cl = cell_layout(g);
  std::vector<double> out(cl.size(), 0.0);
  if (q == Quantity::gradient) return velocity_gradient_sq(s.u);
  if (q == Quantity::pressure) {
    for (std::size_t n = 0; n < out.size(); ++n) out[n] = std::pow(std::abs(s.pressure[n]), 1.5);
    return out;
  }
  for_each_index(cl, [&](int i, int j, int k) {
    double m2 = 0.0;
    for (int a = 0; a < g.dims; ++a) {
      const Layout fl = s.u.layout(a);
      std::array<int, 3> hi{i, j, k};
      hi[a] += 1;
      if (g.periodic()) hi[a] %= g.cells[a];
      const double v = 0.5 * (s.u.component(a)[fl.index(i, j, k)] + s.u.component(a)[fl.index(hi[0], hi[1], hi[2])]);
      m2 += v * v;
    }
    out[cl.index(i, j, k)] = q == Quantity::kinetic ? m2 : m2 * std::sqrt(m2);
  });
  return out;
}

double brute_ball(const GridSpec& g, const std::vector<double>& f, const Ball& ball) {
  const Layout cl = cell_layout(g);
  double acc = 0.0;
  for_each_index(cl, [&](int i, int j, int k) {
    const Point x = g.cell_center(i, j, k);
    double d2 = 0.0;
    for (int b = 0; b < g.dims; ++b) {
      double d = x[b] - ball.center[b];
      if (g.periodic()) d -= g.lengths[b] * std::round(d / g.lengths[b]);
      d2 += d * d;
    }
    if (d2 < ball.radius * ball.radius) acc += f[cl.index(i, j, k)];
  });
  return acc * g.cell_volume();
}

/// Exact integral of the piecewise-linear interpolant of the slice values.
double brute_time(const FieldHistory& h, const std::vector<double>& g, double a, double b) {
  double acc = 0.0;
  for (std::size_t n = 0; n + 1 < h.size(); ++n) {
    const double t0 = h[n].time, t1 = h[n + 1].time;
    const double lo = std::max(a, t0), hi = std::min(b, t1);
    if (!(hi > lo)) continue;
    auto at = [&](double t) { return g[n] + (g[n + 1] - g[n]) * (t - t0) / (t1 - t0); };
    acc += 0.5 * (at(lo) + at(hi)) * (hi - lo);
  }
  return acc;
}

struct Brute {
  double A, B, C, D;
};

Brute brute_ckn(const FieldHistory& h, const ParabolicCylinder& cyl) {
  const GridSpec& g = h.grid();
  auto series = [&](Quantity q) {
    std::vector<double> out;
    for (const auto& s : h) out.push_back(brute_ball(g, brute_integrand(*s.state, q), cyl.ball()));
    return out;
  };
  const auto kin = series(Quantity::kinetic);
  double sup = 0.0;
  for (std::size_t n = 0; n < h.size(); ++n)
    if (h[n].time >= cyl.t_begin() - 1e-12 && h[n].time <= cyl.time + 1e-12) sup = std::max(sup, kin[n]);
  const double r = cyl.radius;
  return {sup / r, brute_time(h, series(Quantity::gradient), cyl.t_begin(), cyl.time) / r,
          brute_time(h, series(Quantity::cubic), cyl.t_begin(), cyl.time) / (r * r),
          brute_time(h, series(Quantity::pressure), cyl.t_begin(), cyl.time) / (r * r)};
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

Point taylor_green_3d(const Point& x, double t) {
  const double d = std::exp(-3.0 * t);
  return {std::sin(x[0]) * std::cos(x[1]) * std::cos(x[2]) * d, -std::cos(x[0]) * std::sin(x[1]) * std::cos(x[2]) * d,
          0.0};
}

double pressure_3d(const Point& x, double t) {
  return (std::cos(2.0 * x[0]) + std::cos(2.0 * x[1])) * (std::cos(2.0 * x[2]) + 2.0) * std::exp(-6.0 * t) / 16.0;
}

/// Velocity whose gradient concentrates at `c` on the scale σ.
Point spike(const Point& x, const Point& c, double sigma, double amplitude) {
  const double dx = x[0] - c[0], dy = x[1] - c[1];
  const double g = std::exp(-(dx * dx + dy * dy) / (sigma * sigma));
  return {amplitude * g * dy / sigma, -amplitude * g * dx / sigma, 0.0};
}

}  // namespace

TEST_CASE("regularity config validation") {
  RegularityConfig c;
  CHECK_NOTHROW(c.validate());
  c.radii = {0.2};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.radii = {0.2, 0.3};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = RegularityConfig{};
  c.theta0 = 0.5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = RegularityConfig{};
  c.stride_space = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = RegularityConfig{};
  CHECK_THROWS_AS(c.validate(GridSpec::square(8, 1.0, Boundary::wall)), std::invalid_argument);
  CHECK_NOTHROW(c.validate(GridSpec::square(64, 1.0, Boundary::wall)));
  const auto [big, small] = c.limsup_radii();
  CHECK(big == 0.3);
  CHECK(small == 0.2);
}

TEST_CASE("ckn of a zero history vanishes") {
  const GridSpec g = GridSpec::cube(16, 1.0, Boundary::wall);
  const auto h = testing::analytic_history(g, 0.0, 0.01, 10, [](const Point&, double) { return Point{}; });
  const auto r = ckn(h, {{0.5, 0.5, 0.5}, 0.1, 0.3});
  CHECK(r.A == 0.0);
  CHECK(r.B == 0.0);
  CHECK(r.C == 0.0);
  CHECK(r.D == 0.0);
  CHECK(r.l3_criterion_value == 0.0);
  CHECK(criterion_l3(r, 0.1));
  CHECK_THROWS_AS(ckn(h, {{0.5, 0.5, 0.5}, 0.05, 0.3}), CoverageError);
}

TEST_CASE("ckn of a constant field matches ball volumes") {
  const GridSpec g = GridSpec::cube(24, 1.0, Boundary::periodic);
  const Point c{0.3, -0.4, 0.5};
  const auto h = testing::analytic_history(g, 0.0, 0.02, 10, [&](const Point&, double) { return c; });
  const double m = std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
  for (double r : {0.3, 0.4}) {
    const auto rep = ckn(h, {{0.5, 0.5, 0.5}, 0.2, r});
    const double tol = g.spacing(0) / r;
    CHECK(rel(rep.A, kBall * m * m * r * r) <= tol);
    CHECK(rep.B <= 1e-24);
    CHECK(rel(rep.C, kBall * m * m * m * r * r * r) <= tol);
    CHECK(rep.D == 0.0);
    CHECK(rep.morrey.at({FieldSelector::velocity, 3.0, 3.0}) == doctest::Approx(rep.C).epsilon(1e-12));
  }
}

TEST_CASE("ckn agrees with a brute-force integrator") {
  const GridSpec g = GridSpec::square(32, 2.0 * kPi, Boundary::periodic);
  const auto h = testing::analytic_history(g, 0.0, 0.01, 50, testing::taylor_green_velocity,
                                           testing::taylor_green_pressure);
  for (const ParabolicCylinder cyl : {ParabolicCylinder{{2.0, 3.1, 0.0}, 0.437, 0.6},
                                      ParabolicCylinder{{5.5, 0.4, 0.0}, 0.5, 0.7},
                                      ParabolicCylinder{{1.0, 1.0, 0.0}, 0.2, 0.41}}) {
    const auto rep = ckn(h, cyl);
    const auto ref = brute_ckn(h, cyl);
    CHECK(rel(rep.A, ref.A) <= 1e-10);
    CHECK(rel(rep.B, ref.B) <= 1e-10);
    CHECK(rel(rep.C, ref.C) <= 1e-10);
    CHECK(rel(rep.D, ref.D) <= 1e-10);
  }
}

TEST_CASE("cylinder integrals grow with the cylinder") {
  const GridSpec g = GridSpec::square(32, 1.0, Boundary::wall);
  FieldHistory h;
  for (int n = 0; n <= 20; ++n) {
    State s = State::zero(g);
    s.u = testing::random_vector(g, 100 + n);
    s.pressure = testing::random_field(g, 200 + n);
    h.push(0.005 * n, std::move(s));
  }
  CylinderIntegrator integ(h);
  double prev[3] = {0.0, 0.0, 0.0};
  for (double r : {0.15, 0.2, 0.25, 0.3}) {
    const ParabolicCylinder cyl{{0.5, 0.5, 0.0}, 0.1, r};
    const double now[3] = {integ.integrate(FieldSelector::velocity, 3.0, cyl).integral,
                           integ.integrate(FieldSelector::velocity_gradient, 2.0, cyl).integral,
                           integ.integrate(FieldSelector::pressure, 1.5, cyl).integral};
    for (int q = 0; q < 3; ++q) {
      CHECK(now[q] >= prev[q]);
      prev[q] = now[q];
    }
  }
}

TEST_CASE("criterion_l3") {
  CKNReport zero;
  CHECK(criterion_l3(zero, 1e-6));
  CKNReport edge;
  const double eps = 0.1;
  edge.l3_criterion_value = eps * eps * eps;
  CHECK_FALSE(criterion_l3(edge, eps));
  CHECK(criterion_l3(edge, std::nextafter(eps, 1.0)));

  const GridSpec g = GridSpec::cube(16, 1.0, Boundary::periodic);
  const auto h = testing::analytic_history(g, 0.0, 0.02, 10, [](const Point&, double) { return Point{5.0, 0.0, 0.0}; });
  const auto rep = ckn(h, {{0.5, 0.5, 0.5}, 0.2, 0.3});
  CHECK(rep.l3_criterion_value == doctest::Approx(rep.C + std::pow(rep.gradpsi_L4 / 0.3, 0.75) + rep.D * rep.D));
  CHECK_FALSE(criterion_l3(rep, 0.1));
  // monotone in ε₀
  bool seen_true = false;
  for (double e = 0.1; e < 10.0; e *= 1.3) {
    const bool ok = criterion_l3(rep, e);
    if (seen_true) CHECK(ok);
    seen_true = seen_true || ok;
  }
  CHECK(seen_true);
}

TEST_CASE("criterion_grad closed forms") {
  const std::vector<double> radii{0.3, 0.25, 0.2};
  const GridSpec g = GridSpec::cube(24, 1.0, Boundary::wall);
  const auto zero = testing::analytic_history(g, 0.0, 0.02, 6, [](const Point&, double) { return Point{}; });
  CHECK(criterion_grad(zero, {0.5, 0.5, 0.5}, 0.1, radii, 0.1));

  const double gamma = 0.5;
  const auto shear = testing::analytic_history(g, 0.0, 0.02, 6, [&](const Point& x, double) {
    return Point{gamma * (x[1] - 0.5), 0.0, 0.0};
  });
  CylinderIntegrator integ(shear);
  for (double r : radii) {
    const ParabolicCylinder cyl{{0.5, 0.5, 0.5}, 0.1, r};
    const double b = integ.integrate(FieldSelector::velocity_gradient, 2.0, cyl).integral / r;
    CHECK(rel(b, kBall * gamma * gamma * r * r * r * r) <= g.spacing(0) / r);
  }
  CHECK(criterion_grad(shear, {0.5, 0.5, 0.5}, 0.1, radii, 0.1));
  CHECK_THROWS_AS(criterion_grad(shear, {0.5, 0.5, 0.5}, 0.1, std::vector<double>{0.2}, 0.1), std::invalid_argument);
}

TEST_CASE("criterion_grad rejects a concentrated gradient") {
  const GridSpec g = GridSpec::square(64, 1.0, Boundary::periodic);
  const Point c = g.cell_center(33, 33, 0);
  const double h = g.spacing(0);
  const double eps1 = 0.1;
  const std::vector<double> radii{0.1, 0.08, 0.0625};
  const auto unit = testing::analytic_history(g, 0.0, 0.004, 4, [&](const Point& x, double) { return spike(x, c, h, 1.0); });
  const ParabolicCylinder small{c, 0.016, radii.back()};
  const double b_unit = brute_ckn(unit, small).B;
  const double amplitude = 2.0 * eps1 / std::sqrt(b_unit);
  const auto strong = testing::analytic_history(g, 0.0, 0.004, 4, [&](const Point& x, double) {
    return spike(x, c, h, amplitude);
  });
  CHECK(brute_ckn(strong, small).B == doctest::Approx(4.0 * eps1 * eps1).epsilon(1e-9));
  CHECK_FALSE(criterion_grad(strong, c, 0.016, radii, eps1));
  const auto weak = testing::analytic_history(g, 0.0, 0.004, 4, [&](const Point& x, double) {
    return spike(x, c, h, 0.1 * amplitude);
  });
  CHECK(criterion_grad(weak, c, 0.016, radii, eps1));
}

TEST_CASE("scan flags cluster around a singular insert") {
  const GridSpec g = GridSpec::square(64, 1.0, Boundary::periodic);
  const Point c = g.cell_center(33, 33, 0);
  const double h = g.spacing(0);
  RegularityConfig cfg;
  cfg.radii = {0.1, 0.08, 0.0625};
  cfg.stride_space = 2;
  const auto unit = testing::analytic_history(g, 0.0, 0.004, 4, [&](const Point& x, double) { return spike(x, c, h, 1.0); });
  const double amplitude = 2.0 * cfg.epsilon1 / std::sqrt(brute_ckn(unit, {c, 0.016, 0.0625}).B);
  const auto hist = testing::analytic_history(g, 0.0, 0.004, 4, [&](const Point& x, double) {
    return spike(x, c, h, amplitude);
  });
  const auto result = scan(hist, cfg);
  CHECK(result.errors.empty());
  CHECK(result.skipped > 0);  // early slices cannot hold the window
  const auto flags = result.flagged();
  REQUIRE_FALSE(flags.empty());
  bool has_center = false;
  for (const auto& f : flags) {
    CHECK(parabolic_distance(f.center, 0.0, c, 0.0, &g) <= 2.0 * cfg.radii.front());
    has_center = has_center || (f.center == c);
  }
  CHECK(has_center);
  for (std::size_t n = 1; n < result.entries.size(); ++n) {
    const auto& a = result.entries[n - 1].cylinder;
    const auto& b = result.entries[n].cylinder;
    CHECK(std::make_tuple(a.time, a.center[0], a.center[1]) < std::make_tuple(b.time, b.center[0], b.center[1]));
  }
  CHECK(vitali_cover(flags, &g) > 0.0);
}

TEST_CASE("scan of a smooth decaying run has no flags") {
  SimConfig sim;
  sim.grid = GridSpec::square(32, 1.0, Boundary::wall);
  sim.t_end = 0.04;
  sim.dt = 1e-3;
  sim.blocks = 4;
  sim.initial.velocity = VelocityPreset::cell_flow;
  sim.initial.velocity_amplitude = 0.05;
  sim.initial.charges = ChargePreset::sinusoidal;
  sim.initial.charge_amplitude = 0.05;
  const auto out = run(sim);
  RegularityConfig cfg;
  cfg.radii = {0.2, 0.15, 0.125};
  cfg.stride_space = 4;
  cfg.stride_time = 5;
  const auto result = scan(out.snapshots, cfg);
  CHECK(result.entries.size() > 0);
  CHECK(result.flagged().empty());
  CHECK(vitali_cover(result.flagged()) == 0.0);
  for (const auto& e : result.entries) {
    CHECK(std::isfinite(e.report.l3_criterion_value));
    CHECK(e.report.grad_criterion_value >= e.report.B);
  }
}

TEST_CASE("scan of an empty history reports coverage") {
  const auto result = scan(FieldHistory{}, RegularityConfig{});
  CHECK(result.entries.empty());
  CHECK_FALSE(result.errors.empty());
}

TEST_CASE("vitali cover") {
  CHECK(vitali_cover(std::vector<ParabolicCylinder>{}) == 0.0);
  const ParabolicCylinder a{{0.5, 0.5, 0.0}, 1.0, 0.1};
  CHECK(vitali_cover(std::vector{a}) == doctest::Approx(0.5));
  ParabolicCylinder b = a;
  b.center[0] += 0.05;
  CHECK(vitali_cover(std::vector{a, b}) == doctest::Approx(0.5));
  ParabolicCylinder far = a;
  far.center[1] += 0.5;
  CHECK(vitali_cover(std::vector{a, far}) == doctest::Approx(1.0));
  ParabolicCylinder big = a;
  big.radius = 0.3;
  big.center[0] += 0.2;
  // the larger cylinder is chosen first and absorbs the one it overlaps
  CHECK(vitali_cover(std::vector{a, far, big}) == doctest::Approx(2.0));

  std::vector<ParabolicCylinder> family{a, b, far, big, a, far};
  const double reference = vitali_cover(family);
  std::sort(family.begin(), family.end(), [](const auto& x, const auto& y) { return x.center[1] > y.center[1]; });
  CHECK(vitali_cover(family) == reference);
  std::reverse(family.begin(), family.end());
  CHECK(vitali_cover(family) == reference);
  family.push_back(big);
  CHECK(vitali_cover(family) == reference);
}

TEST_CASE("rescale identity and amplitude scalings") {
  const GridSpec g = GridSpec::square(16, 2.0 * kPi, Boundary::periodic);
  FieldHistory h = testing::analytic_history(g, 0.0, 0.01, 4, testing::taylor_green_velocity,
                                             testing::taylor_green_pressure,
                                             [](const Point& x, double t) { return std::sin(x[0] + t); });
  const auto same = rescale(h, {0.0, 0.0, 0.0}, 0.0, 1.0);
  REQUIRE(same.size() == h.size());
  for (std::size_t n = 0; n < h.size(); ++n) {
    CHECK(same[n].time == h[n].time);
    CHECK((same[n].state->u - h[n].state->u).max_abs() <= 1e-13);
    CHECK((same[n].state->pressure - h[n].state->pressure).max_abs() <= 1e-13);
    CHECK((same[n].state->psi - h[n].state->psi).max_abs() <= 1e-13);
  }

  // r₀ = ½ with x₀ on the lattice samples source points exactly
  const double h0 = g.spacing(0);
  const Point x0{3 * h0, 5 * h0, 0.0};
  const auto half = rescale(h, x0, 0.02, 0.5);
  CHECK(half.grid().lengths[0] == doctest::Approx(4.0 * kPi));
  CHECK(half.front().time == doctest::Approx(-0.08));
  const auto idx = h.find(0.02);
  const auto jdx = half.find(0.0);
  REQUIRE(idx);
  REQUIRE(jdx);
  const State& src = *h[*idx].state;
  const State& dst = *half[*jdx].state;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      const int si = (3 + i) % 16, sj = (5 + j) % 16;
      CHECK(dst.psi(i, j, 0) == doctest::Approx(src.psi(si, sj, 0)).epsilon(1e-12));
      CHECK(dst.pressure(i, j, 0) == doctest::Approx(0.25 * src.pressure(si, sj, 0)).epsilon(1e-12));
      const Layout lx = dst.u.layout(0);
      CHECK(dst.u.component(0)[lx.index(i, j, 0)] ==
            doctest::Approx(0.5 * src.u.component(0)[lx.index(si, sj, 0)]).epsilon(1e-12));
    }
  CHECK_THROWS_AS(rescale(h, x0, 0.02, 0.5, {std::nullopt, std::vector<double>{1.0}}), CoverageError);
  CHECK_THROWS_AS(rescale(h, x0, 0.02, 0.0), std::invalid_argument);
}

TEST_CASE("ckn is covariant under rescaling") {
  const double r0 = 0.5;
  const double rr = 0.8;  // radius in source units
  auto error_at = [&](int n, const Point& x0) {
    const GridSpec g = GridSpec::cube(n, 2.0 * kPi, Boundary::periodic);
    const auto h = testing::analytic_history(g, 0.0, 0.05, 15, taylor_green_3d, pressure_3d);
    const auto s = rescale(h, x0, 0.0, r0);
    const Point xc{2.1, 2.3, 1.9};
    const double tc = h.back().time;
    const auto b = ckn(h, {xc, tc, rr});
    const Point yc{(xc[0] - x0[0]) / r0, (xc[1] - x0[1]) / r0, (xc[2] - x0[2]) / r0};
    const auto a = ckn(s, {yc, tc / (r0 * r0), rr / r0});
    return std::max({rel(a.A, b.A), rel(a.B, b.B), rel(a.C, b.C), rel(a.D, b.D)});
  };
  // on-lattice: algebraic identity up to roundoff
  CHECK(error_at(16, {0.0, 0.0, 0.0}) <= 1e-10);
  // off-lattice: resampling and ball quadrature error shrink with resolution
  const Point x0{0.3, 0.7, 1.1};
  const double coarse = error_at(16, x0);
  const double fine = error_at(32, x0);
  MESSAGE("rescale covariance error N=16: " << coarse << ", N=32: " << fine);
  CHECK(fine < coarse);
}

TEST_CASE("local energy probe derivatives") {
  const LocalEnergyProbe p{{0.0, 0.0, 0.0}, 0.5, 0.8, 0.3};
  const Point y{0.21, -0.33, 0.1};
  const double t = 0.57;
  const double d = 1e-5;
  for (int dims : {2, 3}) {
    const auto v = p.evaluate(y, t, dims);
    CHECK(v.phi > 0.0);
    CHECK((p.evaluate(y, t + d, dims).phi - p.evaluate(y, t - d, dims).phi) / (2 * d) ==
          doctest::Approx(v.dt).epsilon(1e-7));
    double lap = 0.0;
    for (int b = 0; b < dims; ++b) {
      Point yp = y, ym = y;
      yp[b] += d;
      ym[b] -= d;
      const double fp = p.evaluate(yp, t, dims).phi, fm = p.evaluate(ym, t, dims).phi;
      CHECK((fp - fm) / (2 * d) == doctest::Approx(v.grad[b]).epsilon(1e-7));
      lap += (fp - 2 * v.phi + fm) / (d * d);
    }
    CHECK(lap == doctest::Approx(v.lap).epsilon(1e-4));
  }
  CHECK(p.evaluate({0.8, 0.0, 0.0}, 0.5, 3).phi == 0.0);
  CHECK(p.evaluate(y, 0.9, 3).phi == 0.0);
}

TEST_CASE("local energy residual") {
  const GridSpec g0 = GridSpec::square(16, 2.0 * kPi, Boundary::periodic);
  const auto zero = testing::analytic_history(g0, 0.0, 0.01, 40, [](const Point&, double) { return Point{}; });
  const LocalEnergyProbe probe{{2.0, 2.5, 0.0}, 0.2, 2.8, 0.19};
  CHECK(local_energy_residual(zero, probe) == 0.0);

  // exact Taylor–Green samples: only the spatial discretisation remains
  double previous = 0.0;
  for (int n : {32, 64}) {
    const GridSpec g = GridSpec::square(n, 2.0 * kPi, Boundary::periodic);
    const auto h = testing::analytic_history(g, 0.0, 0.005, 80, testing::taylor_green_velocity,
                                             testing::taylor_green_pressure);
    const double res = std::abs(local_energy_residual(h, probe));
    const double scale = local_energy_scale(h, probe);
    CHECK(res <= 1e-2 * scale);
    if (previous > 0.0) CHECK(res < previous / 3.0);
    previous = res;
  }
  const LocalEnergyProbe late{{2.0, 2.5, 0.0}, 0.35, 2.8, 0.19};
  CHECK_THROWS_AS(local_energy_residual(zero, late), CoverageError);
  const LocalEnergyProbe wide{{2.0, 2.5, 0.0}, 0.2, 3.5, 0.19};
  CHECK_THROWS_AS(local_energy_residual(zero, wide), std::domain_error);
}

TEST_CASE("interpolation inequality check") {
  const GridSpec g = GridSpec::cube(16, 1.0, Boundary::periodic);
  const Ball ball{{0.5, 0.5, 0.5}, 0.4};
  const auto z = check_interpolation(VectorField(g), ball, 3.0);
  CHECK(z.lhs == 0.0);
  CHECK(z.rhs == 0.0);
  CHECK(z.ratio == 0.0);
  double worst = 0.0;
  for (int s = 0; s < 20; ++s) {
    testing::UniformPhases phases(s);
    const auto u = VectorField::from_function(g, [&](const Point& x) { return phases.velocity(x); });
    const auto two = check_interpolation(u, ball, 2.0, 1.0);
    CHECK(two.ratio <= 1.0);
    worst = std::max(worst, check_interpolation(u, ball, 3.0).ratio);
  }
  MESSAGE("max interpolation ratio (q=3): " << worst);
  CHECK(worst < 1.0);
  CHECK_THROWS_AS(check_interpolation(VectorField(g), ball, 7.0), std::invalid_argument);
}

TEST_CASE("Cr and Dr checks") {
  const GridSpec g = GridSpec::cube(24, 1.0, Boundary::periodic);
  const Point c{0.3, -0.4, 0.5};
  const auto h = testing::analytic_history(g, 0.0, 0.02, 15, [&](const Point&, double) { return c; });
  CylinderIntegrator integ(h);
  const Point x0{0.5, 0.5, 0.5};
  for (auto [r, rho] : {std::pair{0.2, 0.4}, std::pair{0.3, 0.45}}) {
    const auto chk = check_Cr(integ, x0, 0.25, r, rho);
    CHECK(rel(chk.ratio, 1.0 / (std::sqrt(kBall) * 100.0)) <= 3.0 * g.spacing(0) / r);
  }
  const auto zero = testing::analytic_history(g, 0.0, 0.02, 10, [](const Point&, double) { return Point{}; });
  CylinderIntegrator zi(zero);
  const auto cz = check_Cr(zi, x0, 0.2, 0.2, 0.4);
  CHECK(cz.lhs == 0.0);
  CHECK(cz.rhs == 0.0);
  const auto dz = check_Dr(zi, x0, 0.2, 0.2, 0.4);
  CHECK(dz.lhs == 0.0);
  CHECK(dz.rhs == doctest::Approx(100.0 * 4.0 * std::pow(0.4, 1.5)));
  CHECK(dz.ratio == 0.0);
  CHECK_THROWS_AS(check_Dr(zi, x0, 0.2, 0.3, 0.4), std::invalid_argument);
  CHECK_THROWS_AS(check_Cr(zi, x0, 0.2, 0.5, 0.4), std::invalid_argument);
  CHECK_THROWS_AS(check_Cr(zi, x0, 0.1, 0.2, 0.4), CoverageError);
}

TEST_CASE("morrey norm") {
  const GridSpec g = GridSpec::cube(24, 1.0, Boundary::periodic);
  const double c = 0.7;
  const auto h = testing::analytic_history(g, 0.0, 0.02, 10, [&](const Point&, double) { return Point{c, 0.0, 0.0}; });
  CylinderIntegrator integ(h);
  const std::vector<std::pair<Point, double>> centers{{{0.5, 0.5, 0.5}, 0.2}, {{0.25, 0.5, 0.5}, 0.2}};
  const std::vector<double> radii{0.2, 0.3, 0.4};
  const double m = morrey_norm(integ, FieldSelector::velocity, 3.0, 3.0, centers, radii);
  CHECK(rel(m, kBall * c * c * c * std::pow(0.4, 3)) <= g.spacing(0) / 0.4);
  CHECK(morrey_norm(integ, FieldSelector::grad_psi, 4.0, 2.0, centers, radii) == 0.0);
  const std::vector<std::pair<Point, double>> early{{{0.5, 0.5, 0.5}, 0.01}};
  CHECK_THROWS_AS(morrey_norm(integ, FieldSelector::velocity, 3.0, 3.0, early, radii), CoverageError);
  CHECK_THROWS_AS(morrey_norm(integ, FieldSelector::velocity, 3.0, 6.0, centers, radii), std::invalid_argument);
}
