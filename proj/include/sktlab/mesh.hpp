// Cell-centered uniform meshes, fields on them, parabolic cubes and midpoint
// quadrature. Everything here is immutable once constructed.
#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace sktlab {

using Point = std::array<double, 2>;

/// Uniform rectangular grid in one or two dimensions.
///
/// Cells are stored row-major over the axes: flat index = i0 * n1 + i1, so
/// axis 1 varies fastest. A 1D grid has a single degenerate second axis of
/// unit length so that volumes and indexing stay uniform.
class Grid {
 public:
  static Grid line(double lo, double hi, std::size_t cells);
  static Grid rect(Point lo, Point hi, std::array<std::size_t, 2> cells);

  int dim() const { return dim_; }
  std::size_t cells(int axis) const { return cells_[axis]; }
  double lo(int axis) const { return lo_[axis]; }
  double hi(int axis) const { return hi_[axis]; }
  double h(int axis) const { return h_[axis]; }
  double min_spacing() const;
  std::size_t size() const { return cells_[0] * cells_[1]; }
  double cell_volume() const { return h_[0] * h_[1]; }
  double measure() const { return cell_volume() * static_cast<double>(size()); }
  double diameter() const;

  std::size_t index(std::size_t i0, std::size_t i1) const { return i0 * cells_[1] + i1; }
  std::array<std::size_t, 2> coords(std::size_t flat) const {
    return {flat / cells_[1], flat % cells_[1]};
  }
  Point center(std::size_t flat) const;
  /// Cell whose closed box contains p, clamped to the grid.
  std::size_t locate(Point p) const;

  bool operator==(const Grid&) const = default;

 private:
  Grid() = default;
  int dim_ = 1;
  Point lo_{0.0, 0.0};
  Point hi_{1.0, 1.0};
  std::array<std::size_t, 2> cells_{1, 1};
  Point h_{1.0, 1.0};
};

/// Uniform discretization of [t0, T]. Slice k sits at t0 + k*dt; slices
/// 1..steps tile the open-closed interval (t0, T], slice k owning
/// (t_{k-1}, t_k].
class TimeAxis {
 public:
  TimeAxis(double t0, double T, std::size_t steps);

  double t0() const { return t0_; }
  double T() const { return T_; }
  std::size_t steps() const { return steps_; }
  double dt() const { return dt_; }
  std::size_t slices() const { return steps_ + 1; }
  double time(std::size_t k) const { return t0_ + static_cast<double>(k) * dt_; }

  bool operator==(const TimeAxis&) const = default;

 private:
  double t0_;
  double T_;
  std::size_t steps_;
  double dt_;
};

/// One finite value per cell.
class Field {
 public:
  Field(Grid grid, std::vector<double> values);
  static Field constant(const Grid& grid, double value);
  static Field from_function(const Grid& grid, const std::function<double(Point)>& f);

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }
  double min() const;
  double max() const;

 private:
  Grid grid_;
  std::vector<double> values_;
};

/// One Field per time slice, slice 0 being the datum at t0.
class SpaceTimeField {
 public:
  SpaceTimeField(TimeAxis axis, std::vector<Field> slices);
  static SpaceTimeField constant(const Grid& grid, const TimeAxis& axis, double value);
  static SpaceTimeField from_function(const Grid& grid, const TimeAxis& axis,
                                     const std::function<double(Point, double)>& f);

  const Grid& grid() const { return slices_.front().grid(); }
  const TimeAxis& axis() const { return axis_; }
  std::size_t slices() const { return slices_.size(); }
  const Field& slice(std::size_t k) const { return slices_[k]; }
  double min() const;
  double max() const;

 private:
  TimeAxis axis_;
  std::vector<Field> slices_;
};

/// Symmetric 2x2 matrix; in 1D only xx is meaningful.
struct SymMat {
  double xx = 0.0;
  double xy = 0.0;
  double yy = 0.0;

  SymMat operator+(const SymMat& o) const { return {xx + o.xx, xy + o.xy, yy + o.yy}; }
  SymMat operator-(const SymMat& o) const { return {xx - o.xx, xy - o.xy, yy - o.yy}; }
  SymMat operator*(double s) const { return {xx * s, xy * s, yy * s}; }
};

/// Frobenius norm squared of a symmetric matrix in dimension dim.
double frobenius_sq(const SymMat& m, int dim);
/// Eigenvalues (ascending) of a symmetric matrix in dimension dim.
std::array<double, 2> eigenvalues(const SymMat& m, int dim);

/// Symmetric coefficient tensor per cell with eigenvalues in [1/Lambda, Lambda].
/// Either time-independent (one slice) or one slice per time level.
class TensorField {
 public:
  TensorField(Grid grid, double ellipticity, std::vector<std::vector<SymMat>> slices,
              std::optional<TimeAxis> axis = std::nullopt);
  static TensorField identity(const Grid& grid, double ellipticity = 1.0);
  static TensorField from_function(const Grid& grid, double ellipticity,
                                   const std::function<SymMat(Point)>& f);

  const Grid& grid() const { return grid_; }
  double ellipticity() const { return ellipticity_; }
  bool time_dependent() const { return slices_.size() > 1; }
  const std::optional<TimeAxis>& axis() const { return axis_; }
  std::size_t slices() const { return slices_.size(); }
  /// Coefficient at time slice k (k ignored when time-independent).
  const SymMat& at(std::size_t k, std::size_t cell) const {
    return slices_[slices_.size() == 1 ? 0 : k][cell];
  }
  /// True when every off-diagonal entry vanishes.
  bool diagonal() const;

 private:
  Grid grid_;
  double ellipticity_;
  std::vector<std::vector<SymMat>> slices_;
  std::optional<TimeAxis> axis_;
};

/// Relative tolerance used by every ball/interval membership test so that
/// cells sitting exactly on a sphere of radius rho are treated as outside.
inline constexpr double kMembershipTol = 1e-9;

/// Spatial ball B_rho(center) (open). Membership is decided on cell centers.
struct Ball {
  Point center{0.0, 0.0};
  double radius = 0.0;

  bool contains(const Grid& grid, Point p) const;
};

enum class CubeVariant { centered, backward };

/// Parabolic cube B_rho(y) x (s - rho^2, s + rho^2] (centered) or
/// B_rho(y) x (s - rho^2, s] (backward). Only slices 1..steps of a time axis
/// can belong to a cube, which is how the cube is intersected with Omega_T.
struct ParabolicCube {
  Point center{0.0, 0.0};
  double time = 0.0;
  double radius = 0.0;
  CubeVariant variant = CubeVariant::centered;

  Ball ball() const { return {center, radius}; }
  bool contains_time(const TimeAxis& axis, std::size_t k) const;
  /// Inclusive slice range [first, last] of the intersection with (t0, T];
  /// empty optional when no slice qualifies.
  std::optional<std::pair<std::size_t, std::size_t>> slice_range(const TimeAxis& axis) const;
};

/// Cells of the grid whose centers lie inside the ball.
std::vector<std::size_t> cells_in(const Grid& grid, const Ball& ball);

double integrate(const Field& f);
double integrate(const Field& f, const Ball& ball);
/// Integral over Omega_T (slices 1..steps, each weighted by dt).
double integrate(const SpaceTimeField& f);
double integrate(const SpaceTimeField& f, const ParabolicCube& cube);
double average(const Field& f, const Ball& ball);
double average(const SpaceTimeField& f, const ParabolicCube& cube);
/// Measure of the cube intersected with the grid and Omega_T.
double measure(const Grid& grid, const TimeAxis& axis, const ParabolicCube& cube);

/// Face-normal gradient components. Axis a has (n_a + 1) faces along a; the
/// outermost faces carry the homogeneous Neumann value 0.
class FaceField {
 public:
  explicit FaceField(const Grid& grid);

  const Grid& grid() const { return grid_; }
  std::size_t faces(int axis) const { return values_[axis].size(); }
  /// Face between cell (i0-1, i1) and (i0, i1) for axis 0, i0 in [0, n0].
  std::size_t face_index(int axis, std::size_t i0, std::size_t i1) const;
  double& at(int axis, std::size_t face) { return values_[axis][face]; }
  double at(int axis, std::size_t face) const { return values_[axis][face]; }
  std::span<const double> values(int axis) const { return values_[axis]; }

 private:
  Grid grid_;
  std::array<std::vector<double>, 2> values_;
};

FaceField face_gradient(const Field& f);
/// Per-cell gradient: each component is the mean of the two bounding face
/// values (boundary faces contribute 0).
std::vector<Point> cell_gradient(const Field& f);
/// Discrete Dirichlet energy sum_faces g^2 * cell volume.
double dirichlet_energy(const Field& f);

}  // namespace sktlab
