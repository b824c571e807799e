#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nspnp/state.hpp"

namespace nspnp {

/// Morrey sample key: r^{λ−5}∫_{Q_r}|f|^p for one field.
struct MorreyKey {
  FieldSelector field = FieldSelector::grad_psi;
  double p = 4.0;
  double lambda = 2.0;

  auto operator<=>(const MorreyKey&) const = default;
};

/// Scale-invariant cylinder quantities at one parabolic cylinder.
struct CKNReport {
  ParabolicCylinder cylinder;
  double A = 0.0;           // sup_t r⁻¹∫_{B_r}|u|²
  double B = 0.0;           // r⁻¹∫∫|∇u|²
  double C = 0.0;           // r⁻²∫∫|u|³
  double D = 0.0;           // r⁻²∫∫|P|^{3/2}
  double gradpsi_L4 = 0.0;  // ∫∫|∇Ψ|⁴
  std::map<MorreyKey, double> morrey;
  double l3_criterion_value = 0.0;    // C + (r⁻¹·gradpsi_L4)^{3/4} + D²
  double grad_criterion_value = 0.0;  // B here; the two-radius max once scanned
  bool l3_small = false;
  bool grad_small = false;
};

struct RegularityConfig {
  std::vector<double> radii{0.4, 0.3, 0.2};  // strictly decreasing
  int stride_space = 4;                      // cells between lattice centres
  int stride_time = 1;                       // slices between lattice times
  double epsilon0 = 0.1;
  double epsilon1 = 0.1;
  double theta0 = 0.25;

  /// Throws std::invalid_argument on malformed values.
  void validate() const;
  /// Additionally requires every radius to resolve at least four cells.
  void validate(const GridSpec& grid) const;
  /// The two smallest radii, larger first.
  std::pair<double, double> limsup_radii() const;
};

/// Samples taken by default for CKNReport::morrey.
std::vector<MorreyKey> default_morrey_keys();

CKNReport ckn(CylinderIntegrator& integrator, const ParabolicCylinder& cyl,
              std::span<const MorreyKey> morrey_keys = {});
CKNReport ckn(const FieldHistory& history, const ParabolicCylinder& cyl);

/// Strictly below ε₀³.
bool criterion_l3(const CKNReport& report, double epsilon0);

/// max of B over the two smallest radii.
double grad_criterion_value(CylinderIntegrator& integrator, const Point& x0, double t0,
                            std::span<const double> radii);
/// Strictly below ε₁². Needs at least two radii.
bool criterion_grad(CylinderIntegrator& integrator, const Point& x0, double t0,
                    std::span<const double> radii, double epsilon1);
bool criterion_grad(const FieldHistory& history, const Point& x0, double t0,
                    std::span<const double> radii, double epsilon1);

struct ScanEntry {
  ParabolicCylinder cylinder;  // smallest radius at this centre
  CKNReport report;
  bool flagged = false;
};

struct ScanResult {
  std::vector<ScanEntry> entries;  // sorted by (time, x, y, z)
  std::size_t skipped = 0;         // centres whose cylinders leave the domain or history
  std::vector<std::string> errors;

  std::vector<ParabolicCylinder> flagged() const;
};

/// Space-time lattice of candidate centres: cell centres every
/// stride_space cells and slice times every stride_time slices.
std::vector<std::pair<Point, double>> scan_centers(const FieldHistory& history,
                                                   const RegularityConfig& config);

ScanResult scan(const FieldHistory& history, const RegularityConfig& config);

/// Greedy disjoint subfamily by decreasing radius; returns Σ 5r_i.
/// Two cylinders count as disjoint when their parabolic distance is at
/// least r_i + r_j.
double vitali_cover(std::span<const ParabolicCylinder> flags,
                    const GridSpec* periodic_grid = nullptr);
std::vector<ParabolicCylinder> vitali_select(std::span<const ParabolicCylinder> flags,
                                             const GridSpec* periodic_grid = nullptr);

/// Resampling target for `rescale`. Target coordinates y map to source
/// points x₀ + r₀·y and target times s to t₀ + r₀²·s.
struct RescaleTarget {
  std::optional<GridSpec> grid;        // default: same cells, lengths L/r₀
  std::optional<std::vector<double>> times;  // default: (t_n − t₀)/r₀²
};

/// (r₀u, r₀²P, n⁺, n⁻, Ψ)(x₀ + r₀y, t₀ + r₀²s), multilinear in space and
/// linear in time. Periodic sources wrap; on walled sources every sample
/// point must lie in the closed box (std::domain_error otherwise).
/// Throws CoverageError when a target time falls outside the history.
FieldHistory rescale(const FieldHistory& history, const Point& x0, double t0, double r0,
                     const RescaleTarget& target = {});

/// Smooth bump φ(x,t) = a(|x−x_c|²/R²)·a((t−t_c)²/T²), a(s) = exp(−1/(1−s)).
struct LocalEnergyProbe {
  Point center{0.0, 0.0, 0.0};
  double time = 0.0;
  double radius = 0.0;      // R
  double half_width = 0.0;  // T

  struct Values {
    double phi = 0.0;
    double dt = 0.0;
    Point grad{0.0, 0.0, 0.0};
    double lap = 0.0;
  };

  /// `displacement` is x − x_c.
  Values evaluate(const Point& displacement, double t, int dims) const;
  void validate() const;
};

/// RHS − LHS of the local energy balance tested against the probe:
/// ∫∫|u|²(∂_tφ + Δφ) + ∫∫(|u|² + 2P)u·∇φ − 2∫∫T:∇(uφ) − 2∫∫|∇u|²φ
/// with T = ∇Ψ⊗∇Ψ − ½|∇Ψ|²I.
/// Throws CoverageError when the history does not span the probe support in
/// time and std::domain_error when the spatial support leaves the box.
double local_energy_residual(const FieldHistory& history, const LocalEnergyProbe& probe);
/// Scale for the residual: ∫∫ of the absolute values of each term.
double local_energy_scale(const FieldHistory& history, const LocalEnergyProbe& probe);

struct LemmaCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;  // lhs / rhs; 0 when lhs vanishes
};

/// ∫|u|^q ≤ C(∫|∇u|²)^{q/2−a}(∫|u|²)^a + C·r^{3(1−q/2)}(∫|u|²)^{q/2} on the
/// ball, a = (3/2)(1 − q/6).
LemmaCheck check_interpolation(const VectorField& u, const Ball& ball, double q,
                               double constant = 100.0);
/// C(r) ≤ C₀[(r/ρ)³A^{3/2}(ρ) + (ρ/r)³A^{3/4}(ρ)B^{3/4}(ρ)].
LemmaCheck check_Cr(CylinderIntegrator& integrator, const Point& x0, double t0, double r,
                    double rho, double constant = 100.0);
/// D(r) ≤ C[(r/ρ)D(ρ) + (ρ/r)²A^{3/4}(ρ)B^{3/4}(ρ) + (ρ/r)²ρ^{3/2}], r ≤ ρ/2.
LemmaCheck check_Dr(CylinderIntegrator& integrator, const Point& x0, double t0, double r,
                    double rho, double constant = 100.0);

/// max over usable (centre, radius) pairs of r^{λ−5}∫_{Q_r}|f|^p. Pairs
/// whose cylinder leaves the domain or the history are skipped; throws
/// CoverageError when none is usable.
double morrey_norm(CylinderIntegrator& integrator, FieldSelector field, double p, double lambda,
                   std::span<const std::pair<Point, double>> centers,
                   std::span<const double> radii);

}  // namespace nspnp
