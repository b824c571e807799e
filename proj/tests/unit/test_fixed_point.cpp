#include <cmath>
#include <sstream>

#include "doctest.h"
#include "nspnp/errors.hpp"
#include "nspnp/fixed_point.hpp"
#include "support.hpp"

using namespace nspnp;
using testing::kPi;

namespace {

/// Zero-sum perturbation so shifted pairs stay mean-compatible.
ScalarField zero_mean(ScalarField f) {
  f -= ScalarField(f.grid(), f.mean());
  return f;
}

PicardProblem sinusoidal_problem(const GridSpec& g, double amplitude, int steps) {
  PicardProblem p;
  const double k = 2.0 * kPi / g.lengths[0];
  p.n0_plus = ScalarField::from_function(g, [&](const Point& x) { return 1.0 + amplitude * std::cos(k * x[0]); });
  p.n0_minus = ScalarField::from_function(g, [&](const Point& x) { return 1.0 - amplitude * std::cos(k * x[0]); });
  p.steps = steps;
  p.elliptic.tol = 1e-12;
  return p;
}

/// Explicitly coupled evolution: Ψ from the current charges, then one step.
YTState direct_evolution(const PicardProblem& p, double dt) {
  EllipticSolver solver(p.elliptic);
  NPStepParams np = p.np;
  np.dt = dt;
  YTState y;
  y.dt = dt;
  y.n_plus.push_back(p.n0_plus);
  y.n_minus.push_back(p.n0_minus);
  const VectorField zero(p.n0_plus.grid());
  for (int k = 0; k < p.steps; ++k) {
    ScalarField rho = y.n_plus[k] - y.n_minus[k];
    rho -= ScalarField(rho.grid(), rho.mean());
    const ScalarField psi = solver.solve_neumann_poisson(rho).solution;
    auto r = np_step(y.n_plus[k], y.n_minus[k], zero, psi, np, solver);
    y.n_plus.push_back(std::move(r.n_plus));
    y.n_minus.push_back(std::move(r.n_minus));
  }
  return y;
}

}  // namespace

TEST_CASE("yt norm") {
  const GridSpec g = GridSpec::square(8, 2.0, Boundary::wall);
  CHECK(yt_norm(YTState::constant(ScalarField(g), ScalarField(g), 0.1, 4)) == 0.0);
  const double c = 1.5;
  const double horizon = 0.4;
  const YTState y = YTState::constant(ScalarField(g, c), ScalarField(g), 0.1, 4);
  CHECK(yt_norm(y) == doctest::Approx(std::pow(horizon * std::pow(c * c * g.volume(), 2), 0.25)).epsilon(1e-13));
  YTState r;
  r.dt = 0.05;
  for (int k = 0; k <= 6; ++k) {
    r.n_plus.push_back(testing::random_field(g, 10 + k));
    r.n_minus.push_back(testing::random_field(g, 30 + k));
  }
  for (double alpha : {-3.0, 0.25, 7.0})
    CHECK(std::abs(yt_norm(alpha * r) - std::abs(alpha) * yt_norm(r)) <= 1e-13 * std::abs(alpha) * yt_norm(r));
  CHECK_THROWS_AS(YTState::constant(ScalarField(g), ScalarField(g), 0.1, 0), std::invalid_argument);
}

TEST_CASE("map_F with neutral ybar is pure diffusion") {
  const GridSpec g = GridSpec::square(16, 1.0, Boundary::wall);
  PicardProblem p = sinusoidal_problem(g, 0.3, 5);
  const ScalarField same = testing::random_field(g, 4, 0.0, 1.0);
  const YTState ybar = YTState::constant(same, same, 1e-3, p.steps);
  const YTState out = map_F(ybar, p);
  NPStepParams np;
  np.dt = 1e-3;
  ScalarField a = p.n0_plus;
  ScalarField b = p.n0_minus;
  for (int k = 1; k <= p.steps; ++k) {
    auto r = np_step(a, b, VectorField(g), ScalarField(g), np);
    a = std::move(r.n_plus);
    b = std::move(r.n_minus);
    CHECK((out.n_plus[k] - a).max_abs() <= 1e-12);
    CHECK((out.n_minus[k] - b).max_abs() <= 1e-12);
  }
}

TEST_CASE("map_F keeps constants for zero ybar") {
  const GridSpec g = GridSpec::square(16, 1.0, Boundary::periodic);
  PicardProblem p;
  p.n0_plus = ScalarField(g, 2.0);
  p.n0_minus = ScalarField(g, 2.0);
  p.steps = 4;
  const YTState out = map_F(YTState::constant(ScalarField(g), ScalarField(g), 1e-2, 4), p);
  for (int k = 0; k <= 4; ++k) {
    CHECK((out.n_plus[k] - p.n0_plus).max_abs() <= 1e-13);
    CHECK((out.n_minus[k] - p.n0_minus).max_abs() <= 1e-13);
  }
}

TEST_CASE("contraction ratio") {
  const GridSpec g = GridSpec::square(16, 1.0, Boundary::wall);
  PicardProblem p = sinusoidal_problem(g, 0.2, 6);
  const YTState y = YTState::constant(p.n0_plus, p.n0_minus, 1e-3, p.steps);
  CHECK_THROWS_AS(contraction_ratio(y, y, p), DegeneratePair);

  const ScalarField d1 = zero_mean(testing::random_field(g, 1));
  const ScalarField d2 = zero_mean(testing::random_field(g, 2));
  double previous = std::numeric_limits<double>::infinity();
  double horizon = 0.1;
  for (int n = 0; n < 6; ++n, horizon *= 0.5) {
    PicardProblem q = p;
    const double dt = horizon / q.steps;
    const YTState y1 = YTState::constant(q.n0_plus + d1, q.n0_minus, dt, q.steps);
    const YTState y2 = YTState::constant(q.n0_plus + d2, q.n0_minus - d1, dt, q.steps);
    const double ratio = contraction_ratio(y1, y2, q);
    CHECK(ratio < 1.0);
    CHECK(ratio <= previous);
    previous = ratio;
  }
}

TEST_CASE("contraction threshold reaches one half") {
  const GridSpec g = GridSpec::square(16, 1.0, Boundary::wall);
  PicardProblem p = sinusoidal_problem(g, 0.3, 6);
  p.n0_plus *= 10.0;
  p.n0_minus *= 10.0;
  // smooth perturbations move the potential; cell noise barely does
  const auto d = ScalarField::from_function(g, [](const Point& x) { return 0.2 * std::cos(kPi * x[1]); });
  const ScalarField zero(g);
  const auto threshold = find_contraction_threshold(p, d, zero, zero, d, 8.0, 0.5, 20);
  CHECK(threshold.ratio <= 0.5);
  CHECK(threshold.ratio >= 0.45);
  CHECK(threshold.horizon < 8.0);
  CHECK(threshold.samples.size() >= 10);
  for (const auto& [horizon, ratio] : threshold.samples)
    if (horizon < threshold.horizon) CHECK(ratio <= 0.5);
}

TEST_CASE("picard with zero charges") {
  const GridSpec g = GridSpec::square(16, 1.0, Boundary::wall);
  PicardProblem p;
  p.n0_plus = ScalarField(g);
  p.n0_minus = ScalarField(g);
  p.steps = 5;
  const auto out = picard_solve(YTState::constant(p.n0_plus, p.n0_minus, 1e-3, 5), p, PicardConfig{});
  CHECK(out.iterations <= 2);
  CHECK(yt_norm(out.solution) == 0.0);
  CHECK(out.restarts == 0);
}

TEST_CASE("picard matches the direct coupled evolution") {
  const GridSpec g = GridSpec::square(16, 1.0, Boundary::wall);
  PicardProblem p = sinusoidal_problem(g, 0.3, 10);
  PicardConfig cfg;
  const double dt = 1e-3;
  const auto out = picard_solve(YTState::constant(p.n0_plus, p.n0_minus, dt, p.steps), p, cfg);
  CHECK(out.restarts == 0);
  const YTState direct = direct_evolution(p, dt);
  CHECK(yt_norm(out.solution - direct) <= 10.0 * cfg.tol * yt_norm(direct));
  // fixed-point residual
  CHECK(yt_norm(map_F(out.solution, p) - out.solution) <= cfg.tol * yt_norm(out.solution));

  // restarting from the limit converges at once
  const auto again = picard_solve(out.solution, p, cfg);
  CHECK(again.iterations == 1);

  // a different start reaches the same fixed point
  const ScalarField shift = zero_mean(testing::random_field(g, 77, -0.5, 0.5));
  const auto other = picard_solve(YTState::constant(p.n0_plus + shift, p.n0_minus, dt, p.steps), p, cfg);
  CHECK(yt_norm(other.solution - out.solution) <= 10.0 * cfg.tol * yt_norm(out.solution));
  CHECK(std::isnan(out.history.front().ratio));
}

TEST_CASE("picard shrinks the horizon when the iteration stalls") {
  const GridSpec g = GridSpec::square(16, 1.0, Boundary::wall);
  PicardProblem p = sinusoidal_problem(g, 0.9, 8);
  p.n0_plus *= 400.0;
  p.n0_minus *= 400.0;
  PicardConfig cfg;
  cfg.max_iters = 200;
  const auto out = picard_solve(YTState::constant(p.n0_plus, p.n0_minus, 0.05, p.steps), p, cfg);
  CHECK(out.restarts >= 1);
  CHECK(out.solution.horizon() < 0.05 * p.steps);
  CHECK(out.history.back().horizon == doctest::Approx(out.solution.horizon()));
}

TEST_CASE("picard gives up after max_iters") {
  const GridSpec g = GridSpec::square(16, 1.0, Boundary::wall);
  PicardProblem p = sinusoidal_problem(g, 0.3, 10);
  PicardConfig cfg;
  cfg.max_iters = 2;
  try {
    picard_solve(YTState::constant(p.n0_plus, p.n0_minus, 1e-3, p.steps), p, cfg);
    FAIL("expected MaxItersExceeded");
  } catch (const MaxItersExceeded& e) {
    CHECK(e.history().size() == 2);
  }
  cfg.t_shrink = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("ratio csv") {
  std::ostringstream out;
  write_ratio_csv(out, {{1, std::numeric_limits<double>::quiet_NaN(), 0.5, 0.01}, {2, 0.25, 0.125, 0.01}});
  const std::string text = out.str();
  CHECK(text.rfind("iter,ratio,yt_increment,T\n", 0) == 0);
  CHECK(text.find("2,0.25,0.125,0.01") != std::string::npos);
}
