#pragma once

#include <map>
#include <memory>
#include <optional>
#include <tuple>
#include <vector>

#include "nspnp/grid.hpp"
#include "nspnp/operators.hpp"

namespace nspnp {

/// (u, P, n⁺, n⁻, Ψ) on one grid at one instant.
struct State {
  VectorField u;
  ScalarField pressure;
  ScalarField n_plus;
  ScalarField n_minus;
  ScalarField psi;

  static State zero(const GridSpec& grid);
  const GridSpec& grid() const { return pressure.grid(); }
  bool finite() const;
};

/// Time-ordered slices with strictly increasing, uniformly spaced times.
class FieldHistory {
 public:
  struct Slice {
    double time;
    std::shared_ptr<const State> state;
  };

  FieldHistory() = default;

  /// Appends a slice. Throws std::invalid_argument on grid mismatch,
  /// non-increasing time or a spacing that departs from the established dt.
  void push(double time, State state);
  void push(double time, std::shared_ptr<const State> state);

  bool empty() const { return slices_.empty(); }
  std::size_t size() const { return slices_.size(); }
  const Slice& operator[](std::size_t n) const { return slices_[n]; }
  const Slice& front() const { return slices_.front(); }
  const Slice& back() const { return slices_.back(); }
  const GridSpec& grid() const;
  /// Spacing between slices; 0 with fewer than two slices.
  double dt() const { return dt_; }

  /// Slice whose time matches `t` to a small fraction of dt, if any.
  std::optional<std::size_t> find(double t) const;
  /// True when [t0, t1] lies within [front, back] up to roundoff.
  bool covers(double t0, double t1) const;
  /// Swaps the state of the newest slice, keeping its time.
  void replace_back(std::shared_ptr<const State> state);
  /// Drops slices strictly older than `t` (up to roundoff).
  void drop_before(double t);

  auto begin() const { return slices_.begin(); }
  auto end() const { return slices_.end(); }

 private:
  double time_slack() const;

  std::vector<Slice> slices_;
  double dt_ = 0.0;
};

/// Q_r(z₀) = B_r(x₀) × (t₀ − r², t₀].
struct ParabolicCylinder {
  Point center{0.0, 0.0, 0.0};
  double time = 0.0;
  double radius = 0.0;

  Ball ball() const { return {center, radius}; }
  double t_begin() const { return time - radius * radius; }
};

/// max{|x − y|, √|t − s|}, using minimum-image distances on periodic grids
/// when a grid is supplied.
double parabolic_distance(const Point& x, double t, const Point& y, double s,
                          const GridSpec* periodic_grid = nullptr);

/// Quantity integrated over cylinders, evaluated at cell centres.
enum class FieldSelector { velocity, velocity_gradient, pressure, n_plus, n_minus, psi, grad_psi };

struct SpacetimeIntegral {
  double norm = 0.0;      // integral^{1/p}
  double integral = 0.0;  // ∫∫ |f|^p
};

/// Caches per-slice cell magnitudes so many cylinders can share them.
class CylinderIntegrator {
 public:
  explicit CylinderIntegrator(const FieldHistory& history);

  const FieldHistory& history() const { return history_; }

  /// ∫_{B} |f|^p on one slice, centre-inclusion quadrature.
  double ball_integral(std::size_t slice, FieldSelector what, double p, const Ball& ball);
  /// Time trapezoid of the ball integral over (t₀ − r², t₀]. The integrand is
  /// linearly interpolated at window ends that fall between slices.
  SpacetimeIntegral integrate(FieldSelector what, double p, const ParabolicCylinder& cyl);
  /// Discrete max over slices inside the window of ∫_{B} |f|^p.
  double max_over_window(FieldSelector what, double p, const ParabolicCylinder& cyl);

  /// Throws CoverageError when the history does not span the window, and
  /// std::domain_error when the ball leaves the domain.
  void require_cover(const ParabolicCylinder& cyl) const;

 private:
  const std::vector<double>& magnitude(std::size_t slice, FieldSelector what);

  const FieldHistory& history_;
  std::map<std::pair<std::size_t, FieldSelector>, std::vector<double>> cache_;
};

/// Cell-centred |f| for one selector on one state.
std::vector<double> cell_magnitude(const State& state, FieldSelector what);

SpacetimeIntegral spacetime_lp(const FieldHistory& history, FieldSelector what, double p,
                               const ParabolicCylinder& cyl);

}  // namespace nspnp
