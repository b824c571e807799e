#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nspnp/elliptic.hpp"
#include "nspnp/errors.hpp"
#include "nspnp/mollifier.hpp"
#include "nspnp/momentum.hpp"
#include "nspnp/nernst_planck.hpp"
#include "nspnp/state.hpp"

namespace nspnp {

enum class VelocityPreset { zero, taylor_green, cell_flow, random };
enum class ChargePreset { none, uniform, blob, sinusoidal, random };

struct InitialCondition {
  VelocityPreset velocity = VelocityPreset::zero;
  ChargePreset charges = ChargePreset::none;
  double velocity_amplitude = 1.0;
  double background = 1.0;      // uniform part of n±
  double charge_amplitude = 0.1;
  double blob_width = 0.1;      // Gaussian standard deviation, fraction of L_min
  double blob_separation = 0.2; // distance between the ± centres, fraction of L_min
  int modes = 3;                // highest wavenumber used by random presets
};

struct SimConfig {
  GridSpec grid = GridSpec::square(32, 1.0, Boundary::wall);
  double t_end = 0.1;
  double dt = 1e-3;
  int blocks = 4;  // ε = t_end / blocks
  bool mollified = true;
  double length_scale = 1.0;
  InitialCondition initial;
  int output_every = 1;  // steps between snapshots and ledger rows
  std::uint64_t seed = 0;
  ForceForm force_form = ForceForm::maxwell_stress;
  Advection advection = Advection::centered;
  EllipticConfig elliptic;
  /// Steps whose advective CFL number exceeds this are rejected.
  double max_cfl = 10.0;

  double epsilon() const { return t_end / blocks; }
  int total_steps() const;
  int steps_per_block() const;
  /// Throws ConfigError describing the first violated constraint.
  void validate() const;
};

/// Initial state with Ψ from the Poisson solve and zero pressure.
/// Charges satisfy ∫n⁺ = ∫n⁻ to roundoff.
State initial_state(const SimConfig& config);

/// Deterministic uniform doubles in [0, 1) built from the top 53 bits of a
/// 64-bit Mersenne twister, so streams match across standard libraries.
class UniformSource {
 public:
  explicit UniformSource(std::uint64_t seed) : engine_(seed) {}
  double next() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform in [lo, hi).
  double next(double lo, double hi) { return lo + (hi - lo) * next(); }

 private:
  std::mt19937_64 engine_;
};

struct LedgerRow {
  double t = 0.0;
  double kinetic = 0.0;        // ∫|u|²
  double electrostatic = 0.0;  // ∫|∇Ψ|²
  double dissipation_cum = 0.0;
  double global_ei_residual = 0.0;
  double min_nplus = 0.0;
  double min_nminus = 0.0;
  double mass_nplus = 0.0;
  double mass_nminus = 0.0;
  double div_u_l2 = 0.0;
};

struct EnergyLedger {
  std::vector<LedgerRow> rows;
  double initial_energy = 0.0;
  double e1 = 0.0;  // sup over steps of ∫(|u|² + |∇Ψ|²)
  double e2 = 0.0;  // ∫∫(|∇u|² + |∇²Ψ|²)

  void write_csv(std::ostream& out) const;
};

/// Per-state terms of the energy balance.
struct EnergyTerms {
  double kinetic = 0.0;
  double electrostatic = 0.0;
  double viscous = 0.0;  // ∫|∇u|²
  double charge_sq = 0.0;  // ∫(n⁺ − n⁻)²
  double drift = 0.0;  // ∫(n⁺ + n⁻)|∇Ψ|²
  double hessian = 0.0;  // ∫|∇²Ψ|²
};
EnergyTerms energy_terms(const State& state);

/// Time marching of the coupled system. In mollified mode the drift inside
/// block m is Θ̂_ε(u) built from the previous blocks (zero in the first
/// block); otherwise the drift is the current velocity.
class Simulation {
 public:
  explicit Simulation(const SimConfig& config);

  const SimConfig& config() const { return config_; }
  /// Current state; Ψ is consistent with the current charges.
  const State& state() const { return *current_; }
  double time() const { return step_ * config_.dt; }
  int step_index() const { return step_; }
  bool finished() const { return step_ >= config_.total_steps(); }
  /// Drift used by the most recent step.
  const VectorField& last_drift() const { return drift_; }
  const EnergyLedger& ledger() const { return ledger_; }

  /// Replaces the current velocity and charges (Ψ is recomputed). The
  /// mollifier history of earlier steps is kept, so later drifts only see
  /// the change once it is older than ε.
  void set_state(const State& state);

  /// Advances one step. Throws StabilityError or NoConvergence and leaves
  /// the current state untouched on failure.
  void step();

  /// Adds a ledger row for the current state.
  void record_ledger_row();

 private:
  void refresh_potential(State& s);
  VectorField compute_drift();

  SimConfig config_;
  EllipticSolver solver_;
  std::optional<Mollifier> mollifier_;
  std::shared_ptr<const State> current_;
  FieldHistory ring_;
  VectorField drift_;
  EnergyLedger ledger_;
  EnergyTerms last_terms_;
  double dissipation_cum_ = 0.0;
  int step_ = 0;
};

struct RunResult {
  FieldHistory snapshots;
  EnergyLedger ledger;
};

/// Numerical failure during a run, carrying everything up to the last good state.
class RunFailure : public StabilityError {
 public:
  RunFailure(const std::string& what, RunResult partial, State last_good, double time)
      : StabilityError(what), partial_(std::move(partial)), last_good_(std::move(last_good)), time_(time) {}
  const RunResult& partial() const { return partial_; }
  const State& last_good() const { return last_good_; }
  double time() const { return time_; }

 private:
  RunResult partial_;
  State last_good_;
  double time_;
};

/// Runs to t_end. Snapshots and ledger rows are taken every `output_every`
/// steps including t = 0 and t_end. `on_snapshot` (optional) sees each one.
RunResult run(const SimConfig& config,
              const std::function<void(double, const State&)>& on_snapshot = {});

}  // namespace nspnp
