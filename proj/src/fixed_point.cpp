#include "nspnp/fixed_point.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "nspnp/errors.hpp"

namespace nspnp {

YTState YTState::constant(const ScalarField& n_plus, const ScalarField& n_minus, double dt, int steps) {
  if (steps < 1) throw std::invalid_argument("trajectory needs at least one step");
  YTState y;
  y.dt = dt;
  y.n_plus.assign(steps + 1, n_plus);
  y.n_minus.assign(steps + 1, n_minus);
  y.validate();
  return y;
}

void YTState::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("trajectory dt must be positive");
  if (n_plus.size() < 2 || n_plus.size() != n_minus.size())
    throw std::invalid_argument("trajectory species must share a time axis of at least two levels");
  for (std::size_t k = 0; k < n_plus.size(); ++k)
    if (!(n_plus[k].grid() == grid()) || !(n_minus[k].grid() == grid()))
      throw std::invalid_argument("trajectory slices must share one grid");
}

YTState& YTState::operator-=(const YTState& o) {
  if (o.n_plus.size() != n_plus.size()) throw std::invalid_argument("trajectory lengths differ");
  for (std::size_t k = 0; k < n_plus.size(); ++k) {
    n_plus[k] -= o.n_plus[k];
    n_minus[k] -= o.n_minus[k];
  }
  return *this;
}

YTState& YTState::operator*=(double s) {
  for (std::size_t k = 0; k < n_plus.size(); ++k) {
    n_plus[k] *= s;
    n_minus[k] *= s;
  }
  return *this;
}

YTState operator-(YTState a, const YTState& b) { return a -= b; }
YTState operator*(double s, YTState a) { return a *= s; }

double yt_norm(const YTState& y) {
  auto level = [&](std::size_t k) {
    double s = 0.0;
    for (double v : y.n_plus[k].values()) s += v * v;
    for (double v : y.n_minus[k].values()) s += v * v;
    s *= y.grid().cell_volume();
    return s * s;
  };
  double acc = 0.0;
  for (std::size_t k = 1; k < y.n_plus.size(); ++k) acc += 0.5 * (level(k - 1) + level(k)) * y.dt;
  return std::pow(acc, 0.25);
}

void PicardProblem::validate() const {
  np.validate();
  elliptic.validate();
  if (steps < 1) throw std::invalid_argument("picard problem needs at least one step");
  if (!(n0_plus.grid() == n0_minus.grid())) throw std::invalid_argument("initial charges must share a grid");
  if (!drift.empty() && static_cast<int>(drift.size()) < steps)
    throw std::invalid_argument("drift trajectory shorter than the step count");
}

YTState map_F(const YTState& ybar, const PicardProblem& problem) {
  problem.validate();
  ybar.validate();
  if (ybar.steps() != problem.steps) throw std::invalid_argument("trajectory step count differs from the problem");
  const GridSpec& g = problem.n0_plus.grid();
  EllipticSolver solver(problem.elliptic);
  NPStepParams np = problem.np;
  np.dt = ybar.dt;
  const VectorField zero(g);

  YTState out;
  out.dt = ybar.dt;
  out.n_plus.reserve(problem.steps + 1);
  out.n_minus.reserve(problem.steps + 1);
  out.n_plus.push_back(problem.n0_plus);
  out.n_minus.push_back(problem.n0_minus);
  for (int k = 0; k < problem.steps; ++k) {
    const ScalarField psi_bar = solver.solve_neumann_poisson(ybar.n_plus[k] - ybar.n_minus[k]).solution;
    const VectorField& w = problem.drift.empty() ? zero : problem.drift[k];
    auto next = np_step(out.n_plus[k], out.n_minus[k], w, psi_bar, np, solver);
    out.n_plus.push_back(std::move(next.n_plus));
    out.n_minus.push_back(std::move(next.n_minus));
  }
  return out;
}

double contraction_ratio(const YTState& y1, const YTState& y2, const PicardProblem& problem) {
  const double denominator = yt_norm(y1 - y2);
  if (denominator < 1e-14) throw DegeneratePair("contraction ratio of a degenerate pair");
  return yt_norm(map_F(y1, problem) - map_F(y2, problem)) / denominator;
}

void PicardConfig::validate() const {
  if (!(tol > 0.0)) throw std::invalid_argument("picard tol must be positive");
  if (max_iters < 1) throw std::invalid_argument("picard max_iters must be at least 1");
  if (!(t_shrink > 0.0 && t_shrink < 1.0)) throw std::invalid_argument("picard t_shrink must lie in (0, 1)");
}

PicardOutcome picard_solve(const YTState& y0, PicardProblem problem, const PicardConfig& config) {
  config.validate();
  y0.validate();
  problem.steps = y0.steps();
  PicardOutcome outcome;
  YTState y = y0;
  double previous = std::numeric_limits<double>::quiet_NaN();
  int stalls = 0;
  int total = 0;
  int since_restart = 0;

  auto restart = [&] {
    const double dt = y.dt * config.t_shrink;
    y = YTState::constant(problem.n0_plus, problem.n0_minus, dt, problem.steps);
    previous = std::numeric_limits<double>::quiet_NaN();
    stalls = 0;
    since_restart = 0;
    ++outcome.restarts;
  };

  while (total < config.max_iters) {
    ++total;
    ++since_restart;
    YTState next;
    try {
      next = map_F(y, problem);
    } catch (const StabilityError&) {
      outcome.history.push_back({total, std::numeric_limits<double>::infinity(),
                                 std::numeric_limits<double>::infinity(), y.horizon()});
      restart();
      continue;
    }
    const double increment = yt_norm(next - y);
    const double ratio = std::isnan(previous) || previous == 0.0
                             ? std::numeric_limits<double>::quiet_NaN()
                             : increment / previous;
    outcome.history.push_back({total, ratio, increment, y.horizon()});
    const double size = yt_norm(next);
    y = std::move(next);
    if (increment <= config.tol * size || increment == 0.0) {
      outcome.solution = std::move(y);
      outcome.iterations = since_restart;
      return outcome;
    }
    stalls = ratio >= 1.0 ? stalls + 1 : 0;
    previous = increment;
    if (stalls >= 2) restart();
  }
  throw MaxItersExceeded("picard iteration did not converge within max_iters", outcome.history);
}

void write_ratio_csv(std::ostream& out, const std::vector<PicardRecord>& history) {
  out << "iter,ratio,yt_increment,T\n";
  char line[160];
  for (const auto& r : history) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g\n", r.iter, r.ratio, r.yt_increment, r.horizon);
    out << line;
  }
}

ContractionThreshold find_contraction_threshold(const PicardProblem& problem, const ScalarField& d1_plus,
                                                const ScalarField& d1_minus, const ScalarField& d2_plus,
                                                const ScalarField& d2_minus, double t_max, double target,
                                                int bisections) {
  if (!(t_max > 0.0)) throw std::invalid_argument("threshold search needs a positive horizon");
  ContractionThreshold result;
  auto ratio_at = [&](double horizon) {
    PicardProblem p = problem;
    const double dt = horizon / p.steps;
    p.np.dt = dt;
    const YTState y1 = YTState::constant(p.n0_plus + d1_plus, p.n0_minus + d1_minus, dt, p.steps);
    const YTState y2 = YTState::constant(p.n0_plus + d2_plus, p.n0_minus + d2_minus, dt, p.steps);
    const double r = contraction_ratio(y1, y2, p);
    result.samples.emplace_back(horizon, r);
    return r;
  };

  double hi = t_max;
  double r_hi = ratio_at(hi);
  if (r_hi <= target) {
    result.horizon = hi;
    result.ratio = r_hi;
    return result;
  }
  double lo = hi;
  double r_lo = r_hi;
  for (int n = 0; n < 60 && r_lo > target; ++n) {
    hi = lo;
    lo *= 0.5;
    r_lo = ratio_at(lo);
  }
  if (r_lo > target) throw std::runtime_error("no horizon with the target contraction ratio found");
  for (int n = 0; n < bisections; ++n) {
    const double mid = 0.5 * (lo + hi);
    const double r = ratio_at(mid);
    if (r <= target) {
      lo = mid;
      r_lo = r;
    } else {
      hi = mid;
    }
  }
  result.horizon = lo;
  result.ratio = r_lo;
  return result;
}

}  // namespace nspnp
