#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "nspnp/elliptic.hpp"
#include "nspnp/nernst_planck.hpp"

namespace nspnp {

/// Charge pair trajectory (n⁺, n⁻) at times k·dt, k = 0..steps.
struct YTState {
  double dt = 0.0;
  std::vector<ScalarField> n_plus;
  std::vector<ScalarField> n_minus;

  /// The same pair repeated at every time level.
  static YTState constant(const ScalarField& n_plus, const ScalarField& n_minus, double dt, int steps);

  int steps() const { return static_cast<int>(n_plus.size()) - 1; }
  double horizon() const { return dt * steps(); }
  const GridSpec& grid() const { return n_plus.front().grid(); }
  void validate() const;

  YTState& operator-=(const YTState& o);
  YTState& operator*=(double s);
};

YTState operator-(YTState a, const YTState& b);
YTState operator*(double s, YTState a);

/// (∫₀ᵀ (‖n⁺‖₂² + ‖n⁻‖₂²)² dt)^{1/4}, trapezoid in time.
double yt_norm(const YTState& y);

/// Data defining the map F besides its argument.
struct PicardProblem {
  ScalarField n0_plus;
  ScalarField n0_minus;
  /// Drift at each step; empty means w ≡ 0.
  std::vector<VectorField> drift;
  NPStepParams np;
  EllipticConfig elliptic;
  int steps = 8;  // time levels after the initial one

  void validate() const;
};

/// F(ȳ): for each step, Ψ̄ from the Poisson solve on the ȳ slice at the
/// current time, then one Nernst-Planck step driven by ∇Ψ̄ from the previous
/// output level. The output starts from (n₀⁺, n₀⁻).
YTState map_F(const YTState& ybar, const PicardProblem& problem);

/// yt_norm(F(y₁) − F(y₂)) / yt_norm(y₁ − y₂). Throws DegeneratePair when
/// the denominator is below 1e−14.
double contraction_ratio(const YTState& y1, const YTState& y2, const PicardProblem& problem);

struct PicardConfig {
  double tol = 1e-8;  // relative Y_T increment
  int max_iters = 50;
  double t_shrink = 0.5;

  void validate() const;
};

struct PicardRecord {
  int iter = 0;
  double ratio = 0.0;  // increment over previous increment; NaN on the first iteration
  double yt_increment = 0.0;
  double horizon = 0.0;
};

class MaxItersExceeded : public std::runtime_error {
 public:
  MaxItersExceeded(const std::string& what, std::vector<PicardRecord> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<PicardRecord>& history() const { return history_; }

 private:
  std::vector<PicardRecord> history_;
};

struct PicardOutcome {
  YTState solution;
  std::vector<PicardRecord> history;
  int restarts = 0;  // number of horizon reductions
  int iterations = 0;  // since the last restart
};

/// Iterates y ← F(y) from y0 until the relative increment is at most tol.
/// A stall (ratio ≥ 1 twice in a row, or a StabilityError) multiplies the
/// horizon by t_shrink and restarts from constant initial data.
PicardOutcome picard_solve(const YTState& y0, PicardProblem problem, const PicardConfig& config);

/// Writes iter,ratio,yt_increment,T rows.
void write_ratio_csv(std::ostream& out, const std::vector<PicardRecord>& history);

/// Largest horizon (steps fixed, dt varied) with contraction ratio ≤ target,
/// for the time-constant pair (base + d1, base + d2).
struct ContractionThreshold {
  double horizon = 0.0;
  double ratio = 0.0;
  std::vector<std::pair<double, double>> samples;  // (T, ratio) evaluated
};
ContractionThreshold find_contraction_threshold(const PicardProblem& problem, const ScalarField& d1_plus,
                                                const ScalarField& d1_minus, const ScalarField& d2_plus,
                                                const ScalarField& d2_minus, double t_max,
                                                double target = 0.5, int bisections = 30);

}  // namespace nspnp
