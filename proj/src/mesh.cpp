#include "sktlab/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sktlab {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

Grid Grid::line(double lo, double hi, std::size_t cells) {
  require(std::isfinite(lo) && std::isfinite(hi) && hi > lo, "grid: extent must be positive");
  require(cells >= 2, "grid: at least 2 cells per axis");
  Grid g;
  g.dim_ = 1;
  g.lo_ = {lo, 0.0};
  g.hi_ = {hi, 1.0};
  g.cells_ = {cells, 1};
  g.h_ = {(hi - lo) / static_cast<double>(cells), 1.0};
  return g;
}

Grid Grid::rect(Point lo, Point hi, std::array<std::size_t, 2> cells) {
  Grid g;
  g.dim_ = 2;
  for (int a = 0; a < 2; ++a) {
    require(std::isfinite(lo[a]) && std::isfinite(hi[a]) && hi[a] > lo[a],
            "grid: extent must be positive");
    require(cells[a] >= 2, "grid: at least 2 cells per axis");
    g.h_[a] = (hi[a] - lo[a]) / static_cast<double>(cells[a]);
  }
  g.lo_ = lo;
  g.hi_ = hi;
  g.cells_ = cells;
  return g;
}

double Grid::min_spacing() const { return dim_ == 1 ? h_[0] : std::min(h_[0], h_[1]); }

double Grid::diameter() const {
  if (dim_ == 1) return hi_[0] - lo_[0];
  return std::hypot(hi_[0] - lo_[0], hi_[1] - lo_[1]);
}

Point Grid::center(std::size_t flat) const {
  auto [i0, i1] = coords(flat);
  Point p{lo_[0] + (static_cast<double>(i0) + 0.5) * h_[0], 0.0};
  if (dim_ == 2) p[1] = lo_[1] + (static_cast<double>(i1) + 0.5) * h_[1];
  return p;
}

std::size_t Grid::locate(Point p) const {
  std::array<std::size_t, 2> idx{0, 0};
  for (int a = 0; a < dim_; ++a) {
    double s = std::floor((p[a] - lo_[a]) / h_[a]);
    s = std::clamp(s, 0.0, static_cast<double>(cells_[a] - 1));
    idx[a] = static_cast<std::size_t>(s);
  }
  return index(idx[0], idx[1]);
}

TimeAxis::TimeAxis(double t0, double T, std::size_t steps)
    : t0_(t0), T_(T), steps_(steps), dt_(0.0) {
  require(std::isfinite(t0) && std::isfinite(T) && T > t0, "time axis: T must exceed t0");
  require(steps >= 1, "time axis: at least one step");
  dt_ = (T - t0) / static_cast<double>(steps);
}

Field::Field(Grid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  require(values_.size() == grid_.size(), "field: value count differs from cell count");
  for (double v : values_) require(std::isfinite(v), "field: non-finite value");
}

Field Field::constant(const Grid& grid, double value) {
  return Field(grid, std::vector<double>(grid.size(), value));
}

Field Field::from_function(const Grid& grid, const std::function<double(Point)>& f) {
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(grid.center(i));
  return Field(grid, std::move(v));
}

double Field::min() const { return *std::min_element(values_.begin(), values_.end()); }
double Field::max() const { return *std::max_element(values_.begin(), values_.end()); }

SpaceTimeField::SpaceTimeField(TimeAxis axis, std::vector<Field> slices)
    : axis_(axis), slices_(std::move(slices)) {
  require(slices_.size() == axis_.slices(), "space-time field: slice count must be steps + 1");
  for (const auto& s : slices_)
    require(s.grid() == slices_.front().grid(), "space-time field: slices must share the grid");
}

SpaceTimeField SpaceTimeField::constant(const Grid& grid, const TimeAxis& axis, double value) {
  return SpaceTimeField(axis, std::vector<Field>(axis.slices(), Field::constant(grid, value)));
}

SpaceTimeField SpaceTimeField::from_function(const Grid& grid, const TimeAxis& axis,
                                             const std::function<double(Point, double)>& f) {
  std::vector<Field> s;
  s.reserve(axis.slices());
  for (std::size_t k = 0; k < axis.slices(); ++k) {
    const double t = axis.time(k);
    s.push_back(Field::from_function(grid, [&](Point p) { return f(p, t); }));
  }
  return SpaceTimeField(axis, std::move(s));
}

double SpaceTimeField::min() const {
  double m = slices_.front().min();
  for (const auto& s : slices_) m = std::min(m, s.min());
  return m;
}

double SpaceTimeField::max() const {
  double m = slices_.front().max();
  for (const auto& s : slices_) m = std::max(m, s.max());
  return m;
}

double frobenius_sq(const SymMat& m, int dim) {
  if (dim == 1) return m.xx * m.xx;
  return m.xx * m.xx + 2.0 * m.xy * m.xy + m.yy * m.yy;
}

std::array<double, 2> eigenvalues(const SymMat& m, int dim) {
  if (dim == 1) return {m.xx, m.xx};
  const double mean = 0.5 * (m.xx + m.yy);
  const double r = std::hypot(0.5 * (m.xx - m.yy), m.xy);
  return {mean - r, mean + r};
}

TensorField::TensorField(Grid grid, double ellipticity, std::vector<std::vector<SymMat>> slices,
                         std::optional<TimeAxis> axis)
    : grid_(std::move(grid)),
      ellipticity_(ellipticity),
      slices_(std::move(slices)),
      axis_(axis) {
  require(std::isfinite(ellipticity_) && ellipticity_ >= 1.0, "tensor field: Lambda must be >= 1");
  require(!slices_.empty(), "tensor field: no slices");
  if (slices_.size() > 1)
    require(axis_ && axis_->slices() == slices_.size(),
            "tensor field: time-dependent tensor needs a matching time axis");
  // Eigenvalue bounds checked with a small relative slack for round-off.
  const double lo = (1.0 / ellipticity_) * (1.0 - 1e-12);
  const double hi = ellipticity_ * (1.0 + 1e-12);
  for (const auto& s : slices_) {
    require(s.size() == grid_.size(), "tensor field: value count differs from cell count");
    for (const auto& m : s) {
      require(std::isfinite(m.xx) && std::isfinite(m.xy) && std::isfinite(m.yy),
              "tensor field: non-finite entry");
      auto ev = eigenvalues(m, grid_.dim());
      require(ev[0] >= lo && ev[1] <= hi, "tensor field: ellipticity bound violated");
    }
  }
}

TensorField TensorField::identity(const Grid& grid, double ellipticity) {
  return TensorField(grid, ellipticity, {std::vector<SymMat>(grid.size(), SymMat{1.0, 0.0, 1.0})});
}

TensorField TensorField::from_function(const Grid& grid, double ellipticity,
                                       const std::function<SymMat(Point)>& f) {
  std::vector<SymMat> v(grid.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(grid.center(i));
  return TensorField(grid, ellipticity, {std::move(v)});
}

bool TensorField::diagonal() const {
  if (grid_.dim() == 1) return true;
  for (const auto& s : slices_)
    for (const auto& m : s)
      if (m.xy != 0.0) return false;
  return true;
}

bool Ball::contains(const Grid& grid, Point p) const {
  double d2 = 0.0;
  for (int a = 0; a < grid.dim(); ++a) d2 += (p[a] - center[a]) * (p[a] - center[a]);
  return d2 < radius * radius * (1.0 - kMembershipTol);
}

bool ParabolicCube::contains_time(const TimeAxis& axis, std::size_t k) const {
  if (k == 0 || k > axis.steps()) return false;
  const double t = axis.time(k);
  const double r2 = radius * radius;
  const double slack = kMembershipTol * axis.dt();
  const double upper = variant == CubeVariant::centered ? time + r2 : time;
  return t > time - r2 + slack && t <= upper + slack;
}

std::optional<std::pair<std::size_t, std::size_t>> ParabolicCube::slice_range(
    const TimeAxis& axis) const {
  std::optional<std::size_t> first;
  std::size_t last = 0;
  for (std::size_t k = 1; k <= axis.steps(); ++k) {
    if (contains_time(axis, k)) {
      if (!first) first = k;
      last = k;
    }
  }
  if (!first) return std::nullopt;
  return std::make_pair(*first, last);
}

std::vector<std::size_t> cells_in(const Grid& grid, const Ball& ball) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (ball.contains(grid, grid.center(i))) out.push_back(i);
  return out;
}

double integrate(const Field& f) {
  double s = 0.0;
  for (double v : f.values()) s += v;
  return s * f.grid().cell_volume();
}

double integrate(const Field& f, const Ball& ball) {
  auto cells = cells_in(f.grid(), ball);
  if (cells.empty()) throw std::domain_error("empty region");
  double s = 0.0;
  for (auto i : cells) s += f[i];
  return s * f.grid().cell_volume();
}

double integrate(const SpaceTimeField& f) {
  double s = 0.0;
  for (std::size_t k = 1; k < f.slices(); ++k) s += integrate(f.slice(k));
  return s * f.axis().dt();
}

double integrate(const SpaceTimeField& f, const ParabolicCube& cube) {
  auto range = cube.slice_range(f.axis());
  auto cells = cells_in(f.grid(), cube.ball());
  if (!range || cells.empty()) throw std::domain_error("empty region");
  double s = 0.0;
  for (std::size_t k = range->first; k <= range->second; ++k)
    for (auto i : cells) s += f.slice(k)[i];
  return s * f.grid().cell_volume() * f.axis().dt();
}

double average(const Field& f, const Ball& ball) {
  auto cells = cells_in(f.grid(), ball);
  if (cells.empty()) throw std::domain_error("empty region");
  return integrate(f, ball) / (static_cast<double>(cells.size()) * f.grid().cell_volume());
}

double measure(const Grid& grid, const TimeAxis& axis, const ParabolicCube& cube) {
  auto range = cube.slice_range(axis);
  auto cells = cells_in(grid, cube.ball());
  if (!range) return 0.0;
  return static_cast<double>(cells.size()) * grid.cell_volume() *
         static_cast<double>(range->second - range->first + 1) * axis.dt();
}

double average(const SpaceTimeField& f, const ParabolicCube& cube) {
  const double m = measure(f.grid(), f.axis(), cube);
  if (m == 0.0) throw std::domain_error("empty region");
  return integrate(f, cube) / m;
}

FaceField::FaceField(const Grid& grid) : grid_(grid) {
  values_[0].assign((grid.cells(0) + 1) * grid.cells(1), 0.0);
  if (grid.dim() == 2) values_[1].assign(grid.cells(0) * (grid.cells(1) + 1), 0.0);
}

std::size_t FaceField::face_index(int axis, std::size_t i0, std::size_t i1) const {
  if (axis == 0) return i0 * grid_.cells(1) + i1;
  return i0 * (grid_.cells(1) + 1) + i1;
}

FaceField face_gradient(const Field& f) {
  const Grid& g = f.grid();
  FaceField out(g);
  const std::size_t n0 = g.cells(0), n1 = g.cells(1);
  for (std::size_t i0 = 1; i0 < n0; ++i0)
    for (std::size_t i1 = 0; i1 < n1; ++i1)
      out.at(0, out.face_index(0, i0, i1)) = (f[g.index(i0, i1)] - f[g.index(i0 - 1, i1)]) / g.h(0);
  if (g.dim() == 2) {
    for (std::size_t i0 = 0; i0 < n0; ++i0)
      for (std::size_t i1 = 1; i1 < n1; ++i1)
        out.at(1, out.face_index(1, i0, i1)) =
            (f[g.index(i0, i1)] - f[g.index(i0, i1 - 1)]) / g.h(1);
  }
  return out;
}

std::vector<Point> cell_gradient(const Field& f) {
  const Grid& g = f.grid();
  auto faces = face_gradient(f);
  std::vector<Point> out(g.size(), Point{0.0, 0.0});
  for (std::size_t c = 0; c < g.size(); ++c) {
    auto [i0, i1] = g.coords(c);
    out[c][0] = 0.5 * (faces.at(0, faces.face_index(0, i0, i1)) +
                       faces.at(0, faces.face_index(0, i0 + 1, i1)));
    if (g.dim() == 2)
      out[c][1] = 0.5 * (faces.at(1, faces.face_index(1, i0, i1)) +
                         faces.at(1, faces.face_index(1, i0, i1 + 1)));
  }
  return out;
}

double dirichlet_energy(const Field& f) {
  auto faces = face_gradient(f);
  double s = 0.0;
  for (int a = 0; a < f.grid().dim(); ++a)
    for (double v : faces.values(a)) s += v * v;
  return s * f.grid().cell_volume();
}

}  // namespace sktlab
