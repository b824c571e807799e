#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace nspnp {

using Point = std::array<double, 3>;

enum class Boundary : std::uint8_t { periodic = 0, wall = 1 };

/// Uniform box grid in two or three dimensions.
///
/// For dims == 2 the third axis is a dummy of one cell and unit length, so
/// cell volumes and counts can always be formed over three axes.
struct GridSpec {
  int dims = 2;
  std::array<int, 3> cells{8, 8, 1};
  std::array<double, 3> lengths{1.0, 1.0, 1.0};
  Boundary bc = Boundary::periodic;

  static GridSpec square(int n, double length, Boundary bc);
  static GridSpec cube(int n, double length, Boundary bc);

  /// Throws std::invalid_argument on dims outside {2,3}, N_i < 8 or L_i <= 0.
  void validate() const;

  double spacing(int axis) const { return lengths[axis] / cells[axis]; }
  double min_spacing() const;
  double min_length() const;
  double cell_volume() const;
  double volume() const;
  std::size_t cell_count() const;

  Point cell_center(int i, int j, int k) const;
  Point center() const;

  bool periodic() const { return bc == Boundary::periodic; }
  bool operator==(const GridSpec&) const = default;
};

/// Row-major index space of one staggered array (last axis fastest).
struct Layout {
  std::array<int, 3> shape{1, 1, 1};

  std::size_t size() const {
    return static_cast<std::size_t>(shape[0]) * shape[1] * shape[2];
  }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k;
  }
  std::array<std::size_t, 3> strides() const {
    return {static_cast<std::size_t>(shape[1]) * shape[2],
            static_cast<std::size_t>(shape[2]), 1};
  }
};

Layout cell_layout(const GridSpec& grid);
/// Face-normal component along `axis`: one extra face on that axis for walls.
Layout face_layout(const GridSpec& grid, int axis);

class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(const GridSpec& grid, double value = 0.0);
  ScalarField(const GridSpec& grid, std::vector<double> values);

  static ScalarField from_function(const GridSpec& grid,
                                   const std::function<double(const Point&)>& f);

  const GridSpec& grid() const { return grid_; }
  Layout layout() const { return cell_layout(grid_); }
  std::size_t size() const { return values_.size(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  double& operator()(int i, int j, int k) { return values_[layout().index(i, j, k)]; }
  double operator()(int i, int j, int k) const { return values_[layout().index(i, j, k)]; }
  double& operator[](std::size_t n) { return values_[n]; }
  double operator[](std::size_t n) const { return values_[n]; }

  double sum() const;
  /// Σ f · cell volume.
  double integral() const;
  double mean() const;
  double max_abs() const;
  double min() const;
  double max() const;
  bool finite() const;

  ScalarField& operator+=(const ScalarField& o);
  ScalarField& operator-=(const ScalarField& o);
  ScalarField& operator*=(double s);

 private:
  GridSpec grid_;
  std::vector<double> values_;
};

ScalarField operator+(ScalarField a, const ScalarField& b);
ScalarField operator-(ScalarField a, const ScalarField& b);
ScalarField operator*(double s, ScalarField a);
ScalarField operator*(ScalarField a, double s);

/// Face-staggered (MAC) vector field. Component `a` lives on faces normal to
/// axis `a`; face index f along that axis sits at coordinate f·h_a.
class VectorField {
 public:
  VectorField() = default;
  explicit VectorField(const GridSpec& grid);

  /// Samples each component of `f` at its face centers.
  static VectorField from_function(const GridSpec& grid,
                                   const std::function<Point(const Point&)>& f);

  const GridSpec& grid() const { return grid_; }
  int dims() const { return grid_.dims; }
  Layout layout(int axis) const { return face_layout(grid_, axis); }

  std::span<double> component(int axis) { return components_[axis]; }
  std::span<const double> component(int axis) const { return components_[axis]; }

  /// Coordinates of face (i,j,k) of component `axis`.
  Point face_position(int axis, int i, int j, int k) const;

  double max_abs() const;
  bool finite() const;
  /// Σ_a Σ_faces v_a² · cell volume (MAC kinetic inner product).
  double dot(const VectorField& o) const;
  double norm_l2() const;

  VectorField& operator+=(const VectorField& o);
  VectorField& operator-=(const VectorField& o);
  VectorField& operator*=(double s);

 private:
  GridSpec grid_;
  std::array<std::vector<double>, 3> components_;
};

VectorField operator+(VectorField a, const VectorField& b);
VectorField operator-(VectorField a, const VectorField& b);
VectorField operator*(double s, VectorField a);

/// Cell-center average of a MAC field, one array per component.
std::array<std::vector<double>, 3> cell_centered(const VectorField& v);

/// Iterates i,j,k over a layout.
template <typename F>
void for_each_index(const Layout& l, F&& f) {
  for (int i = 0; i < l.shape[0]; ++i)
    for (int j = 0; j < l.shape[1]; ++j)
      for (int k = 0; k < l.shape[2]; ++k) f(i, j, k);
}

}  // namespace nspnp
