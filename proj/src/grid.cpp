#include "nspnp/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace nspnp {

GridSpec GridSpec::square(int n, double length, Boundary bc) {
  GridSpec g;
  g.dims = 2;
  g.cells = {n, n, 1};
  g.lengths = {length, length, 1.0};
  g.bc = bc;
  g.validate();
  return g;
}

GridSpec GridSpec::cube(int n, double length, Boundary bc) {
  GridSpec g;
  g.dims = 3;
  g.cells = {n, n, n};
  g.lengths = {length, length, length};
  g.bc = bc;
  g.validate();
  return g;
}

void GridSpec::validate() const {
  if (dims != 2 && dims != 3)
    throw std::invalid_argument("grid dims must be 2 or 3, got " + std::to_string(dims));
  for (int a = 0; a < dims; ++a) {
    if (cells[a] < 8)
      throw std::invalid_argument("grid axis " + std::to_string(a) + " has " +
                                  std::to_string(cells[a]) + " cells, need >= 8");
    if (!(lengths[a] > 0.0) || !std::isfinite(lengths[a]))
      throw std::invalid_argument("grid axis " + std::to_string(a) + " length must be > 0");
  }
  if (dims == 2 && (cells[2] != 1 || lengths[2] != 1.0))
    throw std::invalid_argument("2D grid must carry a unit dummy third axis");
}

double GridSpec::min_spacing() const {
  double h = spacing(0);
  for (int a = 1; a < dims; ++a) h = std::min(h, spacing(a));
  return h;
}

double GridSpec::min_length() const {
  double l = lengths[0];
  for (int a = 1; a < dims; ++a) l = std::min(l, lengths[a]);
  return l;
}

double GridSpec::cell_volume() const {
  double v = 1.0;
  for (int a = 0; a < dims; ++a) v *= spacing(a);
  return v;
}

double GridSpec::volume() const {
  double v = 1.0;
  for (int a = 0; a < dims; ++a) v *= lengths[a];
  return v;
}

std::size_t GridSpec::cell_count() const {
  return static_cast<std::size_t>(cells[0]) * cells[1] * cells[2];
}

Point GridSpec::cell_center(int i, int j, int k) const {
  Point p{(i + 0.5) * spacing(0), (j + 0.5) * spacing(1), 0.0};
  if (dims == 3) p[2] = (k + 0.5) * spacing(2);
  return p;
}

Point GridSpec::center() const {
  Point c{0.5 * lengths[0], 0.5 * lengths[1], 0.0};
  if (dims == 3) c[2] = 0.5 * lengths[2];
  return c;
}

Layout cell_layout(const GridSpec& grid) { return Layout{grid.cells}; }

Layout face_layout(const GridSpec& grid, int axis) {
  Layout l{grid.cells};
  if (grid.bc == Boundary::wall) l.shape[axis] += 1;
  return l;
}

// ---------------------------------------------------------------------------

ScalarField::ScalarField(const GridSpec& grid, double value)
    : grid_(grid), values_(grid.cell_count(), value) {}

ScalarField::ScalarField(const GridSpec& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.cell_count())
    throw std::invalid_argument("scalar field value count does not match grid");
}

ScalarField ScalarField::from_function(const GridSpec& grid,
                                       const std::function<double(const Point&)>& f) {
  ScalarField s(grid);
  const Layout l = s.layout();
  for_each_index(l, [&](int i, int j, int k) {
    s.values_[l.index(i, j, k)] = f(grid.cell_center(i, j, k));
  });
  return s;
}

double ScalarField::sum() const {
  double s = 0.0;
  for (double v : values_) s += v;
  return s;
}

double ScalarField::integral() const { return sum() * grid_.cell_volume(); }

double ScalarField::mean() const { return sum() / static_cast<double>(values_.size()); }

double ScalarField::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

double ScalarField::min() const { return *std::min_element(values_.begin(), values_.end()); }
double ScalarField::max() const { return *std::max_element(values_.begin(), values_.end()); }

bool ScalarField::finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

ScalarField& ScalarField::operator+=(const ScalarField& o) {
  for (std::size_t n = 0; n < values_.size(); ++n) values_[n] += o.values_[n];
  return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& o) {
  for (std::size_t n = 0; n < values_.size(); ++n) values_[n] -= o.values_[n];
  return *this;
}

ScalarField& ScalarField::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
ScalarField operator*(double s, ScalarField a) { return a *= s; }
ScalarField operator*(ScalarField a, double s) { return a *= s; }

// ---------------------------------------------------------------------------

VectorField::VectorField(const GridSpec& grid) : grid_(grid) {
  for (int a = 0; a < grid.dims; ++a) components_[a].assign(face_layout(grid, a).size(), 0.0);
}

Point VectorField::face_position(int axis, int i, int j, int k) const {
  const std::array<int, 3> idx{i, j, k};
  Point p{0.0, 0.0, 0.0};
  for (int b = 0; b < grid_.dims; ++b)
    p[b] = (b == axis ? idx[b] : idx[b] + 0.5) * grid_.spacing(b);
  return p;
}

VectorField VectorField::from_function(const GridSpec& grid,
                                       const std::function<Point(const Point&)>& f) {
  VectorField v(grid);
  for (int a = 0; a < grid.dims; ++a) {
    const Layout l = v.layout(a);
    const bool wall = grid.bc == Boundary::wall;
    for_each_index(l, [&](int i, int j, int k) {
      const std::array<int, 3> idx{i, j, k};
      double value = 0.0;
      if (!(wall && (idx[a] == 0 || idx[a] == grid.cells[a])))
        value = f(v.face_position(a, i, j, k))[a];
      v.components_[a][l.index(i, j, k)] = value;
    });
  }
  return v;
}

double VectorField::max_abs() const {
  double m = 0.0;
  for (int a = 0; a < grid_.dims; ++a)
    for (double x : components_[a]) m = std::max(m, std::abs(x));
  return m;
}

bool VectorField::finite() const {
  for (int a = 0; a < grid_.dims; ++a)
    for (double x : components_[a])
      if (!std::isfinite(x)) return false;
  return true;
}

double VectorField::dot(const VectorField& o) const {
  double s = 0.0;
  for (int a = 0; a < grid_.dims; ++a)
    for (std::size_t n = 0; n < components_[a].size(); ++n)
      s += components_[a][n] * o.components_[a][n];
  return s * grid_.cell_volume();
}

double VectorField::norm_l2() const { return std::sqrt(dot(*this)); }

VectorField& VectorField::operator+=(const VectorField& o) {
  for (int a = 0; a < grid_.dims; ++a)
    for (std::size_t n = 0; n < components_[a].size(); ++n)
      components_[a][n] += o.components_[a][n];
  return *this;
}

VectorField& VectorField::operator-=(const VectorField& o) {
  for (int a = 0; a < grid_.dims; ++a)
    for (std::size_t n = 0; n < components_[a].size(); ++n)
      components_[a][n] -= o.components_[a][n];
  return *this;
}

VectorField& VectorField::operator*=(double s) {
  for (int a = 0; a < grid_.dims; ++a)
    for (double& x : components_[a]) x *= s;
  return *this;
}

VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }
VectorField operator*(double s, VectorField a) { return a *= s; }

std::array<std::vector<double>, 3> cell_centered(const VectorField& v) {
  const GridSpec& g = v.grid();
  const Layout cl = cell_layout(g);
  std::array<std::vector<double>, 3> out;
  for (int a = 0; a < g.dims; ++a) {
    out[a].assign(cl.size(), 0.0);
    const Layout fl = v.layout(a);
    const auto comp = v.component(a);
    for_each_index(cl, [&](int i, int j, int k) {
      std::array<int, 3> up{i, j, k};
      up[a] += 1;
      if (g.periodic() && up[a] == g.cells[a]) up[a] = 0;
      out[a][cl.index(i, j, k)] =
          0.5 * (comp[fl.index(i, j, k)] + comp[fl.index(up[0], up[1], up[2])]);
    });
  }
  return out;
}

}  // namespace nspnp
