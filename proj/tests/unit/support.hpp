#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include "nspnp/grid.hpp"

namespace testing {

inline constexpr double kPi = std::numbers::pi;

/// Max-norm of the difference between an array and an analytic sample.
template <typename Values, typename F>
double max_error(const Values& values, F&& exact) {
  double e = 0.0;
  for (std::size_t n = 0; n < values.size(); ++n) e = std::max(e, std::abs(values[n] - exact(n)));
  return e;
}

template <typename Values>
double l2(const Values& values) {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

inline nspnp::ScalarField random_field(const nspnp::GridSpec& g, std::uint64_t seed,
                                       double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  nspnp::ScalarField f(g);
  for (double& v : f.values()) v = dist(rng);
  return f;
}

inline nspnp::VectorField random_vector(const nspnp::GridSpec& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  nspnp::VectorField v(g);
  for (int a = 0; a < g.dims; ++a) {
    auto c = v.component(a);
    for (double& x : c) x = dist(rng);
  }
  return v;
}

}  // namespace testing

#include <functional>

#include "nspnp/state.hpp"

namespace testing {

using VelocityFn = std::function<nspnp::Point(const nspnp::Point&, double)>;
using ScalarFn = std::function<double(const nspnp::Point&, double)>;

/// History sampled from closed-form fields at t0, t0 + dt, ..., t0 + slices·dt.
inline nspnp::FieldHistory analytic_history(const nspnp::GridSpec& g, double t0, double dt, int slices,
                                            const VelocityFn& u, const ScalarFn& p = {},
                                            const ScalarFn& psi = {}) {
  nspnp::FieldHistory h;
  for (int n = 0; n <= slices; ++n) {
    const double t = t0 + n * dt;
    nspnp::State s = nspnp::State::zero(g);
    s.u = nspnp::VectorField::from_function(g, [&](const nspnp::Point& x) { return u(x, t); });
    if (p) s.pressure = nspnp::ScalarField::from_function(g, [&](const nspnp::Point& x) { return p(x, t); });
    if (psi) s.psi = nspnp::ScalarField::from_function(g, [&](const nspnp::Point& x) { return psi(x, t); });
    h.push(t, std::move(s));
  }
  return h;
}

/// 2D Taylor–Green vortex in the 2π box with unit viscosity.
inline nspnp::Point taylor_green_velocity(const nspnp::Point& x, double t) {
  const double decay = std::exp(-2.0 * t);
  return {std::sin(x[0]) * std::cos(x[1]) * decay, -std::cos(x[0]) * std::sin(x[1]) * decay, 0.0};
}

inline double taylor_green_pressure(const nspnp::Point& x, double t) {
  return 0.25 * (std::cos(2.0 * x[0]) + std::cos(2.0 * x[1])) * std::exp(-4.0 * t);
}

}  // namespace testing

namespace testing {

/// Smooth periodic velocity on the unit box from a few random Fourier modes.
class UniformPhases {
 public:
  explicit UniformPhases(std::uint64_t seed, double length = 1.0) : k_(2.0 * kPi / length) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (auto& m : modes_) {
      for (double& w : m.wave) w = std::round(2.0 * dist(rng));
      m.amplitude = dist(rng);
      m.phase = kPi * dist(rng);
      m.component = static_cast<int>(3.0 * (0.5 + 0.5 * dist(rng))) % 3;
    }
  }

  nspnp::Point velocity(const nspnp::Point& x) const {
    nspnp::Point v{0.0, 0.0, 0.0};
    for (const auto& m : modes_)
      v[m.component] += m.amplitude * std::sin(k_ * (m.wave[0] * x[0] + m.wave[1] * x[1] + m.wave[2] * x[2]) + m.phase);
    return v;
  }

 private:
  struct Mode {
    std::array<double, 3> wave{};
    double amplitude = 0.0;
    double phase = 0.0;
    int component = 0;
  };
  double k_;
  std::array<Mode, 6> modes_{};
};

}  // namespace testing
