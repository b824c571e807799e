#include "nspnp/coupled.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

#include "nspnp/operators.hpp"

namespace nspnp {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool is_multiple(double a, double b) {
  const double ratio = a / b;
  return std::abs(ratio - std::round(ratio)) <= 1e-9 * std::max(1.0, ratio);
}

[[noreturn]] void reject(const std::string& what) { throw ConfigError(what); }

/// Smooth random scalar: a few Fourier modes with random amplitudes and
/// phases, normalised to max |f| = 1. Cosine modes on walled grids keep
/// zero normal derivative.
ScalarField random_smooth(const GridSpec& g, int modes, UniformSource& rng) {
  struct Mode {
    std::array<int, 3> k;
    double amplitude;
    double phase;
  };
  std::vector<Mode> list;
  for (int a = 0; a <= modes; ++a)
    for (int b = 0; b <= modes; ++b)
      for (int c = 0; c <= (g.dims == 3 ? modes : 0); ++c) {
        if (a + b + c == 0) continue;
        Mode m{{a, b, c}, rng.next(-1.0, 1.0), rng.next(0.0, kTwoPi)};
        list.push_back(m);
      }
  ScalarField f = ScalarField::from_function(g, [&](const Point& x) {
    double acc = 0.0;
    for (const Mode& m : list) {
      if (g.periodic()) {
        double arg = m.phase;
        for (int a = 0; a < g.dims; ++a) arg += kTwoPi * m.k[a] * x[a] / g.lengths[a];
        acc += m.amplitude * std::cos(arg);
      } else {
        double prod = m.amplitude;
        for (int a = 0; a < g.dims; ++a) prod *= std::cos(std::numbers::pi * m.k[a] * x[a] / g.lengths[a]);
        acc += prod;
      }
    }
    return acc;
  });
  const double peak = f.max_abs();
  if (peak > 0.0) f *= 1.0 / peak;
  return f;
}

VectorField taylor_green(const GridSpec& g, double amplitude) {
  const double k0 = kTwoPi / g.lengths[0];
  const double k1 = kTwoPi / g.lengths[1];
  const double k2 = kTwoPi / g.lengths[2];
  return VectorField::from_function(g, [&](const Point& x) {
    const double z = g.dims == 3 ? std::cos(k2 * x[2]) : 1.0;
    return Point{amplitude * std::sin(k0 * x[0]) * std::cos(k1 * x[1]) * z,
                 -amplitude * (k0 / k1) * std::cos(k0 * x[0]) * std::sin(k1 * x[1]) * z, 0.0};
  });
}

/// Circulating flow in the x-y plane from a streamfunction that vanishes on
/// the walls; differences of nodal values make it discretely solenoidal.
VectorField cell_flow(const GridSpec& g, double amplitude) {
  auto stream = [&](double x, double y, double z) {
    double s = std::pow(std::sin(std::numbers::pi * x / g.lengths[0]), 2) *
               std::pow(std::sin(std::numbers::pi * y / g.lengths[1]), 2);
    if (g.dims == 3) s *= std::sin(std::numbers::pi * z / g.lengths[2]);
    return amplitude * g.min_length() / std::numbers::pi * s;
  };
  VectorField u(g);
  const double h0 = g.spacing(0);
  const double h1 = g.spacing(1);
  const double h2 = g.spacing(2);
  const Layout l0 = u.layout(0);
  for_each_index(l0, [&](int i, int j, int k) {
    const double z = (k + 0.5) * h2;
    u.component(0)[l0.index(i, j, k)] = (stream(i * h0, (j + 1) * h1, z) - stream(i * h0, j * h1, z)) / h1;
  });
  const Layout l1 = u.layout(1);
  for_each_index(l1, [&](int i, int j, int k) {
    const double z = (k + 0.5) * h2;
    u.component(1)[l1.index(i, j, k)] = -(stream((i + 1) * h0, j * h1, z) - stream(i * h0, j * h1, z)) / h0;
  });
  // wall faces carry exact zeros
  for_each_index(l0, [&](int i, int j, int k) {
    if (i == 0 || i == g.cells[0]) u.component(0)[l0.index(i, j, k)] = 0.0;
  });
  for_each_index(l1, [&](int i, int j, int k) {
    if (j == 0 || j == g.cells[1]) u.component(1)[l1.index(i, j, k)] = 0.0;
  });
  return u;
}

VectorField random_velocity(const GridSpec& g, double amplitude, int modes, UniformSource& rng,
                            EllipticSolver& solver) {
  std::array<ScalarField, 3> potentials;
  for (int a = 0; a < g.dims; ++a) potentials[a] = random_smooth(g, modes, rng);
  // sample each component at faces by averaging the adjacent cell values
  VectorField raw(g);
  for (int a = 0; a < g.dims; ++a) {
    const Layout l = raw.layout(a);
    const ScalarField& f = potentials[a];
    for_each_index(l, [&](int i, int j, int k) {
      std::array<int, 3> hi{i, j, k};
      const int m = hi[a];
      if (!g.periodic() && (m == 0 || m == g.cells[a])) return;
      std::array<int, 3> lo = hi;
      lo[a] = (m - 1 + g.cells[a]) % g.cells[a];
      raw.component(a)[l.index(i, j, k)] = 0.5 * (f(lo[0], lo[1], lo[2]) + f(hi[0], hi[1], hi[2]));
    });
  }
  VectorField u = project(raw, 1.0, solver).first;
  const double peak = u.max_abs();
  if (peak > 0.0) u *= amplitude / peak;
  return u;
}

void balance_charges(ScalarField& n_plus, ScalarField& n_minus) {
  const double plus = n_plus.sum();
  const double minus = n_minus.sum();
  if (minus > 0.0) n_minus *= plus / minus;
}

}  // namespace

int SimConfig::total_steps() const { return static_cast<int>(std::lround(t_end / dt)); }

int SimConfig::steps_per_block() const { return static_cast<int>(std::lround(epsilon() / dt)); }

void SimConfig::validate() const {
  try {
    grid.validate();
  } catch (const std::invalid_argument& e) {
    reject(std::string("grid: ") + e.what());
  }
  if (!(t_end > 0.0) || !std::isfinite(t_end)) reject("time.t_end must be positive");
  if (!(dt > 0.0) || !std::isfinite(dt)) reject("time.dt must be positive");
  if (blocks < 1) reject("mollifier.blocks must be at least 1");
  if (!is_multiple(t_end, dt)) reject("time.dt must divide time.t_end");
  if (!is_multiple(epsilon(), dt)) reject("time.dt must divide epsilon = t_end / blocks");
  if (mollified && steps_per_block() < 2) reject("mollified runs need at least two steps per block");
  if (!(length_scale > 0.0)) reject("mollifier.length_scale must be positive");
  if (output_every < 1) reject("output.every must be at least 1");
  if (total_steps() % output_every != 0) reject("output.every must divide the number of steps");
  if (!(max_cfl > 0.0)) reject("solver.max_cfl must be positive");
  try {
    elliptic.validate();
  } catch (const std::invalid_argument& e) {
    reject(std::string("solver: ") + e.what());
  }
  const InitialCondition& ic = initial;
  if (!std::isfinite(ic.velocity_amplitude)) reject("initial.velocity_amplitude must be finite");
  if (!(ic.background >= 0.0) || !std::isfinite(ic.background)) reject("initial.background must be non-negative");
  if (!(ic.charge_amplitude >= 0.0) || !std::isfinite(ic.charge_amplitude))
    reject("initial.charge_amplitude must be non-negative");
  if ((ic.charges == ChargePreset::sinusoidal || ic.charges == ChargePreset::random) &&
      ic.charge_amplitude > ic.background)
    reject("initial.charge_amplitude may not exceed initial.background for this preset");
  if (!(ic.blob_width > 0.0)) reject("initial.blob_width must be positive");
  if (!(ic.blob_separation >= 0.0) || ic.blob_separation >= 1.0) reject("initial.blob_separation must lie in [0, 1)");
  if (ic.modes < 1) reject("initial.modes must be at least 1");
  if (ic.velocity == VelocityPreset::taylor_green && !grid.periodic())
    reject("taylor_green velocity needs a periodic grid");
  if (ic.velocity == VelocityPreset::cell_flow && grid.periodic())
    reject("cell_flow velocity needs a walled grid");
}

State initial_state(const SimConfig& config) {
  config.validate();
  const GridSpec& g = config.grid;
  const InitialCondition& ic = config.initial;
  UniformSource rng(config.seed);
  EllipticSolver solver(config.elliptic);
  State s = State::zero(g);

  switch (ic.velocity) {
    case VelocityPreset::zero: break;
    case VelocityPreset::taylor_green: s.u = taylor_green(g, ic.velocity_amplitude); break;
    case VelocityPreset::cell_flow: s.u = cell_flow(g, ic.velocity_amplitude); break;
    case VelocityPreset::random:
      s.u = random_velocity(g, ic.velocity_amplitude, ic.modes, rng, solver);
      break;
  }

  const double b = ic.background;
  const double a = ic.charge_amplitude;
  switch (ic.charges) {
    case ChargePreset::none: break;
    case ChargePreset::uniform:
      s.n_plus = ScalarField(g, b);
      s.n_minus = ScalarField(g, b);
      break;
    case ChargePreset::blob: {
      const double width = ic.blob_width * g.min_length();
      const double shift = 0.5 * ic.blob_separation * g.min_length();
      auto blob = [&](double sign) {
        Point c = g.center();
        c[0] += sign * shift;
        return ScalarField::from_function(g, [&](const Point& x) {
          double r2 = 0.0;
          for (int d = 0; d < g.dims; ++d) r2 += (x[d] - c[d]) * (x[d] - c[d]);
          return b + a * std::exp(-0.5 * r2 / (width * width));
        });
      };
      s.n_plus = blob(+1.0);
      s.n_minus = blob(-1.0);
      break;
    }
    case ChargePreset::sinusoidal: {
      const double k = kTwoPi / g.lengths[0];
      s.n_plus = ScalarField::from_function(g, [&](const Point& x) { return b + a * std::cos(k * x[0]); });
      s.n_minus = ScalarField::from_function(g, [&](const Point& x) { return b - a * std::cos(k * x[0]); });
      break;
    }
    case ChargePreset::random: {
      s.n_plus = ScalarField(g, b) + a * random_smooth(g, ic.modes, rng);
      s.n_minus = ScalarField(g, b) + a * random_smooth(g, ic.modes, rng);
      break;
    }
  }
  balance_charges(s.n_plus, s.n_minus);
  ScalarField rho = s.n_plus - s.n_minus;
  rho -= ScalarField(g, rho.mean());
  s.psi = solver.solve_neumann_poisson(rho).solution;
  return s;
}

EnergyTerms energy_terms(const State& s) {
  const GridSpec& g = s.grid();
  EnergyTerms t;
  t.kinetic = s.u.dot(s.u);
  const VectorField e = gradient(s.psi);
  t.electrostatic = e.dot(e);
  t.viscous = dirichlet_energy(s.u);
  for (std::size_t n = 0; n < s.n_plus.size(); ++n) {
    const double rho = s.n_plus[n] - s.n_minus[n];
    t.charge_sq += rho * rho;
  }
  t.charge_sq *= g.cell_volume();
  const ScalarField total = s.n_plus + s.n_minus;
  for (int a = 0; a < g.dims; ++a) {
    const Layout l = e.layout(a);
    const auto ea = e.component(a);
    for_each_index(l, [&](int i, int j, int k) {
      std::array<int, 3> hi{i, j, k};
      const int m = hi[a];
      if (!g.periodic() && (m == 0 || m == g.cells[a])) return;
      std::array<int, 3> lo = hi;
      lo[a] = (m - 1 + g.cells[a]) % g.cells[a];
      const double f = ea[l.index(i, j, k)];
      t.drift += 0.5 * (total(lo[0], lo[1], lo[2]) + total(hi[0], hi[1], hi[2])) * f * f;
    });
  }
  t.drift *= g.cell_volume();
  t.hessian = hessian_energy(s.psi);
  return t;
}

void EnergyLedger::write_csv(std::ostream& out) const {
  out << "t,kinetic,electrostatic,dissipation_cum,global_ei_residual,min_nplus,min_nminus,"
         "mass_nplus,mass_nminus,div_u_l2\n";
  char line[512];
  for (const LedgerRow& r : rows) {
    std::snprintf(line, sizeof line,
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.t, r.kinetic,
                  r.electrostatic, r.dissipation_cum, r.global_ei_residual, r.min_nplus, r.min_nminus,
                  r.mass_nplus, r.mass_nminus, r.div_u_l2);
    out << line;
  }
}

Simulation::Simulation(const SimConfig& config) : config_(config), solver_(config.elliptic) {
  config_.validate();
  if (config_.mollified)
    mollifier_.emplace(MollifierSpec{config_.epsilon(), config_.dt, config_.length_scale}, config_.grid);
  current_ = std::make_shared<const State>(initial_state(config_));
  ring_.push(0.0, current_);
  drift_ = VectorField(config_.grid);
  last_terms_ = energy_terms(*current_);
  ledger_.initial_energy = last_terms_.kinetic + last_terms_.electrostatic;
  ledger_.e1 = ledger_.initial_energy;
}

void Simulation::refresh_potential(State& s) {
  ScalarField rho = s.n_plus - s.n_minus;
  rho -= ScalarField(rho.grid(), rho.mean());
  s.psi = solver_.solve_neumann_poisson(rho).solution;
}

void Simulation::set_state(const State& state) {
  if (!(state.grid() == config_.grid)) throw std::invalid_argument("replacement state is on another grid");
  auto next = std::make_shared<State>(state);
  refresh_potential(*next);
  current_ = next;
  ring_.replace_back(current_);
  last_terms_ = energy_terms(*current_);
}

VectorField Simulation::compute_drift() {
  if (!mollifier_) return current_->u;
  if (time() < config_.epsilon() - 1e-9 * config_.dt) return VectorField(config_.grid);
  return mollifier_->theta_hat(ring_, time(), solver_);
}

void Simulation::step() {
  const double dt = config_.dt;
  const State& s = *current_;
  VectorField w = compute_drift();

  const double cfl = dt * std::max(s.u.max_abs(), w.max_abs()) / config_.grid.min_spacing();
  if (!(cfl <= config_.max_cfl))
    throw StabilityError("advective CFL number " + std::to_string(cfl) + " exceeds solver.max_cfl at t = " +
                         std::to_string(time()));

  NPStepParams np;
  np.dt = dt;
  np.advection = config_.advection;
  auto charges = np_step(s.n_plus, s.n_minus, w, s.psi, np, solver_);

  NSStepParams ns;
  ns.dt = dt;
  ns.force_form = config_.force_form;
  ns.advection = config_.advection;
  const VectorField force = electro_force(s.n_plus, s.n_minus, s.psi, config_.force_form);
  auto flow = ns_step(s.u, w, force, ns, solver_);

  auto next = std::make_shared<State>();
  next->u = std::move(flow.u);
  next->pressure = std::move(flow.pressure);
  next->n_plus = std::move(charges.n_plus);
  next->n_minus = std::move(charges.n_minus);
  refresh_potential(*next);
  if (!next->finite()) throw StabilityError("non-finite state at t = " + std::to_string(time() + dt));

  // Implicit terms are charged at the new level, the explicit migration term at the old one.
  const EnergyTerms terms = energy_terms(*next);
  dissipation_cum_ += 2.0 * dt * (terms.viscous + terms.charge_sq + last_terms_.drift);
  ledger_.e2 += dt * (terms.viscous + terms.hessian);
  ledger_.e1 = std::max(ledger_.e1, terms.kinetic + terms.electrostatic);

  last_terms_ = terms;
  current_ = std::move(next);
  drift_ = std::move(w);
  ++step_;
  ring_.push(time(), current_);
  if (mollifier_) ring_.drop_before(time() - 2.0 * config_.epsilon() - 0.5 * dt);
}

void Simulation::record_ledger_row() {
  const State& s = *current_;
  LedgerRow r;
  r.t = time();
  r.kinetic = last_terms_.kinetic;
  r.electrostatic = last_terms_.electrostatic;
  r.dissipation_cum = dissipation_cum_;
  r.global_ei_residual = r.kinetic + r.electrostatic + r.dissipation_cum - ledger_.initial_energy;
  r.min_nplus = s.n_plus.min();
  r.min_nminus = s.n_minus.min();
  r.mass_nplus = s.n_plus.integral();
  r.mass_nminus = s.n_minus.integral();
  double div2 = 0.0;
  for (double v : divergence(s.u).values()) div2 += v * v;
  r.div_u_l2 = std::sqrt(div2 * config_.grid.cell_volume());
  ledger_.rows.push_back(r);
}

RunResult run(const SimConfig& config, const std::function<void(double, const State&)>& on_snapshot) {
  Simulation sim(config);
  RunResult result;
  auto emit = [&] {
    sim.record_ledger_row();
    result.snapshots.push(sim.time(), std::make_shared<const State>(sim.state()));
    if (on_snapshot) on_snapshot(sim.time(), sim.state());
  };
  emit();
  while (!sim.finished()) {
    try {
      sim.step();
    } catch (const std::exception& e) {
      const char* kind = dynamic_cast<const StabilityError*>(&e)    ? "StabilityError"
                         : dynamic_cast<const NoConvergence*>(&e)   ? "NoConvergence"
                         : dynamic_cast<const IncompatibleRHS*>(&e) ? "IncompatibleRHS"
                                                                    : nullptr;
      if (!kind) throw;
      result.ledger = sim.ledger();
      throw RunFailure(std::string(kind) + ": " + e.what(), std::move(result), sim.state(), sim.time());
    }
    if (sim.step_index() % config.output_every == 0) emit();
  }
  result.ledger = sim.ledger();
  return result;
}

}  // namespace nspnp
