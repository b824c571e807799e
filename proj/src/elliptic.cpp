#include "nspnp/elliptic.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "nspnp/errors.hpp"

namespace nspnp {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) s += a[n] * b[n];
  return s;
}

void remove_mean(std::span<double> x) {
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  for (double& v : x) v -= m;
}

/// y = A x with A = -Δ (poisson) or I - αΔ; pinned nodes act as identity.
void apply_operator(const LaplaceStencil& s, double alpha, bool poisson,
                    std::span<const double> x, std::span<double> y) {
  s.apply(x, y);
  if (poisson) {
    for (std::size_t n = 0; n < y.size(); ++n) y[n] = -y[n];
  } else {
    for (std::size_t n = 0; n < y.size(); ++n) y[n] = x[n] - alpha * y[n];
  }
  if (s.singular()) return;
  for_each_index(s.layout, [&](int i, int j, int k) {
    if (s.pinned(i, j, k)) {
      const std::size_t c = s.layout.index(i, j, k);
      y[c] = x[c];
    }
  });
}

constexpr int kDenseLimit = 16;

LaplaceStencil scalar_stencil(const GridSpec& grid, HelmholtzBC bc) {
  LaplaceStencil s = cell_stencil(grid);
  for (int a = 0; a < grid.dims; ++a) {
    switch (bc) {
      case HelmholtzBC::neumann: s.bc[a] = AxisBC::neumann_cell; break;
      case HelmholtzBC::dirichlet: s.bc[a] = AxisBC::dirichlet_cell; break;
      case HelmholtzBC::periodic: s.bc[a] = AxisBC::periodic; break;
    }
  }
  return s;
}

}  // namespace

void EllipticConfig::validate() const {
  if (!(tol > 0.0)) throw std::invalid_argument("elliptic tol must be positive");
  if (max_iter < 1) throw std::invalid_argument("elliptic max_iter must be at least 1");
  if (!(compat_tol > 0.0)) throw std::invalid_argument("elliptic compat_tol must be positive");
}

EllipticSolver::EllipticSolver(EllipticConfig config) : config_(config) { config_.validate(); }

std::pair<double, int> EllipticSolver::solve_array(const LaplaceStencil& stencil, double alpha,
                                                   bool poisson, std::span<const double> rhs,
                                                   std::span<double> x) {
  if (!poisson && !(alpha > 0.0)) throw std::invalid_argument("helmholtz alpha must be positive");
  if (config_.method == EllipticMethod::direct_small) {
    for (int a = 0; a < stencil.dims; ++a)
      if (stencil.layout.shape[a] > kDenseLimit + 1)
        throw std::invalid_argument("direct_small is limited to 16 cells per axis");
    return solve_dense(stencil, alpha, poisson, rhs, x);
  }
  return solve_cg(stencil, alpha, poisson, rhs, x);
}

std::pair<double, int> EllipticSolver::solve_cg(const LaplaceStencil& stencil, double alpha,
                                                bool poisson, std::span<const double> rhs,
                                                std::span<double> x) {
  const std::size_t n = rhs.size();
  const bool project = poisson && stencil.singular();
  r_.assign(rhs.begin(), rhs.end());
  if (project) remove_mean(r_);
  std::fill(x.begin(), x.end(), 0.0);
  const double bnorm = std::sqrt(dot(r_, r_));
  if (bnorm == 0.0) return {0.0, 0};

  p_ = r_;
  ap_.assign(n, 0.0);
  double rr = bnorm * bnorm;
  const double target = config_.tol * bnorm;
  int it = 0;
  while (std::sqrt(rr) > target) {
    if (it >= config_.max_iter)
      throw NoConvergence("conjugate gradient did not converge", std::sqrt(rr) / bnorm, it);
    apply_operator(stencil, alpha, poisson, p_, ap_);
    if (project) remove_mean(ap_);
    const double pap = dot(p_, ap_);
    if (!(pap > 0.0))
      throw NoConvergence("conjugate gradient breakdown", std::sqrt(rr) / bnorm, it);
    const double step = rr / pap;
    for (std::size_t m = 0; m < n; ++m) {
      x[m] += step * p_[m];
      r_[m] -= step * ap_[m];
    }
    const double rr_new = dot(r_, r_);
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t m = 0; m < n; ++m) p_[m] = r_[m] + beta * p_[m];
    ++it;
  }
  if (project) remove_mean(x);

  // true residual against the (projected) right-hand side
  apply_operator(stencil, alpha, poisson, x, ap_);
  double res = 0.0;
  const double shift = project ? std::accumulate(rhs.begin(), rhs.end(), 0.0) / n : 0.0;
  for (std::size_t m = 0; m < n; ++m) {
    const double d = rhs[m] - shift - ap_[m];
    res += d * d;
  }
  return {std::sqrt(res) / bnorm, it};
}

std::pair<double, int> EllipticSolver::solve_dense(const LaplaceStencil& stencil, double alpha,
                                                   bool poisson, std::span<const double> rhs,
                                                   std::span<double> x) {
  const std::size_t n = rhs.size();
  const bool project = poisson && stencil.singular();
  Eigen::MatrixXd a(n, n);
  std::vector<double> e(n, 0.0);
  std::vector<double> col(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    apply_operator(stencil, alpha, poisson, e, col);
    for (std::size_t i = 0; i < n; ++i) a(i, j) = col[i];
    e[j] = 0.0;
  }
  // Rank-one completion fixes the constant mode at zero mean.
  if (project) a.array() += 1.0;
  Eigen::VectorXd b(n);
  for (std::size_t i = 0; i < n; ++i) b[i] = rhs[i];
  if (project) b.array() -= b.mean();
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    return {0.0, 0};
  }
  Eigen::VectorXd sol = a.partialPivLu().solve(b);
  if (project) sol.array() -= sol.mean();
  for (std::size_t i = 0; i < n; ++i) x[i] = sol[i];
  apply_operator(stencil, alpha, poisson, x, col);
  double res = 0.0;
  for (std::size_t i = 0; i < n; ++i) res += (b[i] - col[i]) * (b[i] - col[i]);
  return {std::sqrt(res) / bnorm, 1};
}

EllipticResult EllipticSolver::solve_neumann_poisson(const ScalarField& rhs) {
  const GridSpec& g = rhs.grid();
  double total = 0.0;
  double mass = 0.0;
  for (double v : rhs.values()) {
    total += v;
    mass += std::abs(v);
  }
  if (std::abs(total) > config_.compat_tol * mass)
    throw IncompatibleRHS("Poisson right-hand side has non-zero mean");
  EllipticResult out{ScalarField(g), 0.0, 0};
  const auto [res, it] = solve_array(cell_stencil(g), 0.0, true, rhs.values(), out.solution.values());
  out.residual = res;
  out.iterations = it;
  return out;
}

EllipticResult EllipticSolver::solve_helmholtz(const ScalarField& rhs, double alpha,
                                               HelmholtzBC bc) {
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw std::invalid_argument("helmholtz alpha must be positive");
  const GridSpec& g = rhs.grid();
  EllipticResult out{ScalarField(g), 0.0, 0};
  const LaplaceStencil s = scalar_stencil(g, bc);
  const auto [res, it] = solve_array(s, alpha, false, rhs.values(), out.solution.values());
  out.residual = res;
  out.iterations = it;
  if (s.singular()) {
    // The exact operator preserves the sum; restore it to roundoff.
    const double shift = (rhs.sum() - out.solution.sum()) / static_cast<double>(rhs.size());
    for (double& v : out.solution.values()) v += shift;
  }
  return out;
}

VectorField EllipticSolver::solve_velocity_helmholtz(const VectorField& rhs, double alpha,
                                                     double* max_residual) {
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw std::invalid_argument("helmholtz alpha must be positive");
  const GridSpec& g = rhs.grid();
  VectorField out(g);
  double worst = 0.0;
  for (int a = 0; a < g.dims; ++a) {
    const LaplaceStencil s = velocity_stencil(g, a);
    std::vector<double> b(rhs.component(a).begin(), rhs.component(a).end());
    for_each_index(s.layout, [&](int i, int j, int k) {
      if (s.pinned(i, j, k)) b[s.layout.index(i, j, k)] = 0.0;
    });
    const auto [res, it] = solve_array(s, alpha, false, b, out.component(a));
    (void)it;
    worst = std::max(worst, res);
    if (s.singular()) {
      auto comp = out.component(a);
      const double shift =
          (std::accumulate(b.begin(), b.end(), 0.0) - std::accumulate(comp.begin(), comp.end(), 0.0)) /
          static_cast<double>(b.size());
      for (double& v : comp) v += shift;
    }
  }
  if (max_residual) *max_residual = worst;
  return out;
}

EllipticResult solve_neumann_poisson(const ScalarField& rhs, const EllipticConfig& config) {
  EllipticSolver solver(config);
  return solver.solve_neumann_poisson(rhs);
}

EllipticResult solve_helmholtz(const ScalarField& rhs, double alpha, HelmholtzBC bc,
                               const EllipticConfig& config) {
  EllipticSolver solver(config);
  return solver.solve_helmholtz(rhs, alpha, bc);
}

}  // namespace nspnp
