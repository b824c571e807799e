#include "nspnp/state.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nspnp/errors.hpp"

namespace nspnp {

State State::zero(const GridSpec& grid) {
  return State{VectorField(grid), ScalarField(grid), ScalarField(grid), ScalarField(grid),
               ScalarField(grid)};
}

bool State::finite() const {
  return u.finite() && pressure.finite() && n_plus.finite() && n_minus.finite() && psi.finite();
}

void FieldHistory::push(double time, State state) {
  push(time, std::make_shared<const State>(std::move(state)));
}

void FieldHistory::push(double time, std::shared_ptr<const State> state) {
  if (!state) throw std::invalid_argument("history slice is null");
  if (!std::isfinite(time)) throw std::invalid_argument("history time must be finite");
  if (!slices_.empty()) {
    if (!(state->grid() == grid())) throw std::invalid_argument("history slices must share a grid");
    const double step = time - slices_.back().time;
    if (!(step > 0.0)) throw std::invalid_argument("history times must increase strictly");
    if (slices_.size() == 1) {
      dt_ = step;
    } else if (std::abs(step - dt_) > 1e-6 * dt_) {
      throw std::invalid_argument("history times must be uniformly spaced");
    }
  }
  slices_.push_back({time, std::move(state)});
}

const GridSpec& FieldHistory::grid() const {
  if (slices_.empty()) throw CoverageError("history is empty");
  return slices_.front().state->grid();
}

double FieldHistory::time_slack() const {
  if (dt_ > 0.0) return 1e-6 * dt_;
  return slices_.empty() ? 0.0 : 1e-12 * std::max(1.0, std::abs(slices_.front().time));
}

std::optional<std::size_t> FieldHistory::find(double t) const {
  if (slices_.empty()) return std::nullopt;
  const double slack = time_slack();
  if (slices_.size() == 1)
    return std::abs(slices_[0].time - t) <= slack ? std::optional<std::size_t>(0) : std::nullopt;
  const double pos = (t - slices_.front().time) / dt_;
  const long n = std::lround(pos);
  if (n < 0 || n >= static_cast<long>(slices_.size())) return std::nullopt;
  if (std::abs(slices_[n].time - t) > slack) return std::nullopt;
  return static_cast<std::size_t>(n);
}

bool FieldHistory::covers(double t0, double t1) const {
  if (slices_.empty()) return false;
  const double slack = time_slack();
  return slices_.front().time <= t0 + slack && slices_.back().time >= t1 - slack;
}

void FieldHistory::replace_back(std::shared_ptr<const State> state) {
  if (slices_.empty()) throw CoverageError("history is empty");
  if (!state || !(state->grid() == grid())) throw std::invalid_argument("replacement slice must share the grid");
  slices_.back().state = std::move(state);
}

void FieldHistory::drop_before(double t) {
  const double slack = time_slack();
  auto keep = std::find_if(slices_.begin(), slices_.end(),
                           [&](const Slice& s) { return s.time >= t - slack; });
  slices_.erase(slices_.begin(), keep);
  if (slices_.empty()) dt_ = 0.0;
}

double parabolic_distance(const Point& x, double t, const Point& y, double s,
                          const GridSpec* periodic_grid) {
  double d2 = 0.0;
  for (int a = 0; a < 3; ++a) {
    double d = std::abs(x[a] - y[a]);
    if (periodic_grid && periodic_grid->periodic() && a < periodic_grid->dims) {
      const double len = periodic_grid->lengths[a];
      d = std::fmod(d, len);
      d = std::min(d, len - d);
    }
    d2 += d * d;
  }
  return std::max(std::sqrt(d2), std::sqrt(std::abs(t - s)));
}

std::vector<double> cell_magnitude(const State& state, FieldSelector what) {
  const GridSpec& g = state.grid();
  const std::size_t count = g.cell_count();
  std::vector<double> out(count, 0.0);
  auto vector_magnitude = [&](const std::array<std::vector<double>, 3>& cc) {
    for (int a = 0; a < g.dims; ++a)
      for (std::size_t n = 0; n < count; ++n) out[n] += cc[a][n] * cc[a][n];
    for (double& m : out) m = std::sqrt(m);
  };
  auto scalar_magnitude = [&](const ScalarField& f) {
    for (std::size_t n = 0; n < count; ++n) out[n] = std::abs(f[n]);
  };
  switch (what) {
    case FieldSelector::velocity: vector_magnitude(cell_centered(state.u)); break;
    case FieldSelector::velocity_gradient: {
      out = velocity_gradient_sq(state.u);
      for (double& m : out) m = std::sqrt(m);
      break;
    }
    case FieldSelector::pressure: scalar_magnitude(state.pressure); break;
    case FieldSelector::n_plus: scalar_magnitude(state.n_plus); break;
    case FieldSelector::n_minus: scalar_magnitude(state.n_minus); break;
    case FieldSelector::psi: scalar_magnitude(state.psi); break;
    case FieldSelector::grad_psi: vector_magnitude(cell_gradient(state.psi)); break;
  }
  return out;
}

CylinderIntegrator::CylinderIntegrator(const FieldHistory& history) : history_(history) {}

const std::vector<double>& CylinderIntegrator::magnitude(std::size_t slice, FieldSelector what) {
  const auto key = std::make_pair(slice, what);
  auto it = cache_.find(key);
  if (it == cache_.end())
    it = cache_.emplace(key, cell_magnitude(*history_[slice].state, what)).first;
  return it->second;
}

double CylinderIntegrator::ball_integral(std::size_t slice, FieldSelector what, double p,
                                         const Ball& ball) {
  if (!(p >= 1.0)) throw std::invalid_argument("integration exponent must be at least 1");
  const GridSpec& g = history_.grid();
  const auto& mag = magnitude(slice, what);
  double acc = 0.0;
  if (p == 2.0) {
    for (std::size_t n : ball_cells(g, ball)) acc += mag[n] * mag[n];
  } else {
    for (std::size_t n : ball_cells(g, ball)) acc += std::pow(mag[n], p);
  }
  return acc * g.cell_volume();
}

void CylinderIntegrator::require_cover(const ParabolicCylinder& cyl) const {
  if (!(cyl.radius > 0.0)) throw std::invalid_argument("cylinder radius must be positive");
  if (history_.size() < 2 || !history_.covers(cyl.t_begin(), cyl.time))
    throw CoverageError("history does not cover the cylinder time window");
  if (!ball_inside(history_.grid(), cyl.ball()))
    throw std::domain_error("cylinder ball does not fit inside the domain");
}

SpacetimeIntegral CylinderIntegrator::integrate(FieldSelector what, double p,
                                                const ParabolicCylinder& cyl) {
  require_cover(cyl);
  const double a = cyl.t_begin();
  const double b = cyl.time;
  const double t_first = history_.front().time;
  const double dt = history_.dt();
  const double slack = 1e-6 * dt;
  const Ball ball = cyl.ball();

  // g(t) piecewise linear through the slice values.
  auto value_at = [&](double t) {
    if (auto n = history_.find(t)) return ball_integral(*n, what, p, ball);
    const double pos = (t - t_first) / dt;
    std::size_t i = static_cast<std::size_t>(std::clamp(std::floor(pos), 0.0,
                                                        static_cast<double>(history_.size() - 2)));
    const double w = (t - history_[i].time) / dt;
    return (1.0 - w) * ball_integral(i, what, p, ball) + w * ball_integral(i + 1, what, p, ball);
  };

  std::vector<std::pair<double, double>> nodes;
  nodes.emplace_back(a, value_at(a));
  for (std::size_t n = 0; n < history_.size(); ++n) {
    const double t = history_[n].time;
    if (t > a + slack && t < b - slack) nodes.emplace_back(t, ball_integral(n, what, p, ball));
  }
  nodes.emplace_back(b, value_at(b));

  double integral = 0.0;
  for (std::size_t n = 1; n < nodes.size(); ++n)
    integral += 0.5 * (nodes[n].second + nodes[n - 1].second) * (nodes[n].first - nodes[n - 1].first);
  return {std::pow(integral, 1.0 / p), integral};
}

double CylinderIntegrator::max_over_window(FieldSelector what, double p,
                                           const ParabolicCylinder& cyl) {
  require_cover(cyl);
  const double slack = 1e-6 * history_.dt();
  double best = 0.0;
  for (std::size_t n = 0; n < history_.size(); ++n) {
    const double t = history_[n].time;
    if (t >= cyl.t_begin() - slack && t <= cyl.time + slack)
      best = std::max(best, ball_integral(n, what, p, cyl.ball()));
  }
  return best;
}

SpacetimeIntegral spacetime_lp(const FieldHistory& history, FieldSelector what, double p,
                               const ParabolicCylinder& cyl) {
  CylinderIntegrator integrator(history);
  return integrator.integrate(what, p, cyl);
}

}  // namespace nspnp
