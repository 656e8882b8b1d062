#include "sktlab/sparse.hpp"

#include <algorithm>
#include <cmath>

namespace sktlab {

SparseMatrix::SparseMatrix(std::size_t dim, std::vector<std::size_t> row_offsets,
                           std::vector<std::size_t> columns, std::vector<double> values)
    : dim_(dim),
      row_offsets_(std::move(row_offsets)),
      columns_(std::move(columns)),
      values_(std::move(values)),
      diagonal_(dim, 0.0) {
  if (row_offsets_.size() != dim_ + 1 || row_offsets_.front() != 0 ||
      row_offsets_.back() != columns_.size() || columns_.size() != values_.size())
    throw std::invalid_argument("sparse matrix: inconsistent row offsets");
  for (std::size_t i = 0; i < dim_; ++i) {
    if (row_offsets_[i] > row_offsets_[i + 1])
      throw std::invalid_argument("sparse matrix: decreasing row offsets");
    for (std::size_t p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) {
      if (columns_[p] >= dim_) throw std::invalid_argument("sparse matrix: column out of range");
      if (p > row_offsets_[i] && columns_[p] <= columns_[p - 1])
        throw std::invalid_argument("sparse matrix: unsorted columns");
      if (!std::isfinite(values_[p])) throw std::invalid_argument("sparse matrix: non-finite entry");
      if (columns_[p] == i) diagonal_[i] = values_[p];
    }
    if (!(diagonal_[i] > 0.0)) throw std::invalid_argument("sparse matrix: diagonal not positive");
  }
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) {
      const std::size_t j = columns_[p];
      if (j <= i) continue;
      const double aij = values_[p];
      const double aji = at(j, i);
      if (std::abs(aij - aji) > 1e-14 * std::max({std::abs(aij), std::abs(aji), 1e-300}))
        throw std::invalid_argument("sparse matrix: not symmetric");
    }
  }
}

double SparseMatrix::at(std::size_t i, std::size_t j) const {
  auto first = columns_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i]);
  auto last = columns_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i + 1]);
  auto it = std::lower_bound(first, last, j);
  if (it == last || *it != j) return 0.0;
  return values_[static_cast<std::size_t>(it - columns_.begin())];
}

void SparseMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  for (std::size_t i = 0; i < dim_; ++i) {
    double s = 0.0;
    for (std::size_t p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) s += values_[p] * x[columns_[p]];
    y[i] = s;
  }
}

FaceField face_mean(const Grid& grid, std::span<const double> cell_x, std::span<const double> cell_y) {
  FaceField out(grid);
  const std::size_t n0 = grid.cells(0), n1 = grid.cells(1);
  for (std::size_t i0 = 1; i0 < n0; ++i0)
    for (std::size_t i1 = 0; i1 < n1; ++i1)
      out.at(0, out.face_index(0, i0, i1)) =
          0.5 * (cell_x[grid.index(i0 - 1, i1)] + cell_x[grid.index(i0, i1)]);
  if (grid.dim() == 2)
    for (std::size_t i0 = 0; i0 < n0; ++i0)
      for (std::size_t i1 = 1; i1 < n1; ++i1)
        out.at(1, out.face_index(1, i0, i1)) =
            0.5 * (cell_y[grid.index(i0, i1 - 1)] + cell_y[grid.index(i0, i1)]);
  return out;
}

FaceField face_mean(const Grid& grid, std::span<const double> cell) { return face_mean(grid, cell, cell); }

namespace {

void check_coefficients(const Grid& grid, const FaceField& d, std::span<const double> reaction, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("implicit step: dt must be positive");
  if (reaction.size() != grid.size()) throw std::invalid_argument("implicit step: reaction size");
  if (!(d.grid() == grid)) throw std::invalid_argument("implicit step: face field on another grid");
  for (int a = 0; a < grid.dim(); ++a)
    for (double v : d.values(a))
      if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("coefficient sign");
  for (double v : reaction)
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("coefficient sign");
}

struct Neighbour {
  std::size_t cell;
  double weight;  // D_face / h^2
};

// Neighbours of a cell in ascending flat-index order.
std::size_t neighbours(const Grid& grid, const FaceField& d, std::size_t c, Neighbour (&out)[4]) {
  auto [i0, i1] = grid.coords(c);
  const double w0 = 1.0 / (grid.h(0) * grid.h(0));
  std::size_t n = 0;
  if (i0 > 0) out[n++] = {grid.index(i0 - 1, i1), d.at(0, d.face_index(0, i0, i1)) * w0};
  if (grid.dim() == 2) {
    const double w1 = 1.0 / (grid.h(1) * grid.h(1));
    if (i1 > 0) out[n++] = {grid.index(i0, i1 - 1), d.at(1, d.face_index(1, i0, i1)) * w1};
    if (i1 + 1 < grid.cells(1)) out[n++] = {grid.index(i0, i1 + 1), d.at(1, d.face_index(1, i0, i1 + 1)) * w1};
  }
  if (i0 + 1 < grid.cells(0)) out[n++] = {grid.index(i0 + 1, i1), d.at(0, d.face_index(0, i0 + 1, i1)) * w0};
  return n;
}

}  // namespace

SparseMatrix assemble_implicit_step(const Grid& grid, const FaceField& face_diffusivity,
                                    std::span<const double> cell_reaction, double dt) {
  check_coefficients(grid, face_diffusivity, cell_reaction, dt);
  const std::size_t n = grid.size();
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> cols;
  std::vector<double> vals;
  cols.reserve(5 * n);
  vals.reserve(5 * n);
  Neighbour nb[4];
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t count = neighbours(grid, face_diffusivity, c, nb);
    double diag = 1.0 / dt + cell_reaction[c];
    for (std::size_t k = 0; k < count; ++k) diag += nb[k].weight;
    bool placed = false;
    for (std::size_t k = 0; k < count; ++k) {
      if (!placed && nb[k].cell > c) {
        cols.push_back(c);
        vals.push_back(diag);
        placed = true;
      }
      cols.push_back(nb[k].cell);
      vals.push_back(-nb[k].weight);
    }
    if (!placed) {
      cols.push_back(c);
      vals.push_back(diag);
    }
    offsets.push_back(cols.size());
  }
  return SparseMatrix(n, std::move(offsets), std::move(cols), std::move(vals));
}

MaskedSystem assemble_masked_step(const Grid& grid, const FaceField& face_diffusivity,
                                  std::span<const double> cell_reaction, double dt,
                                  const std::vector<char>& active, std::span<const double> frozen_values) {
  check_coefficients(grid, face_diffusivity, cell_reaction, dt);
  if (active.size() != grid.size() || frozen_values.size() != grid.size())
    throw std::invalid_argument("masked step: mask or frozen values have wrong size");
  std::vector<long> local(grid.size(), -1);
  std::vector<std::size_t> cells;
  for (std::size_t c = 0; c < grid.size(); ++c)
    if (active[c]) {
      local[c] = static_cast<long>(cells.size());
      cells.push_back(c);
    }
  if (cells.empty()) throw std::invalid_argument("masked step: no active cells");
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> cols;
  std::vector<double> vals;
  std::vector<double> source(cells.size(), 0.0);
  Neighbour nb[4];
  for (std::size_t r = 0; r < cells.size(); ++r) {
    const std::size_t c = cells[r];
    const std::size_t count = neighbours(grid, face_diffusivity, c, nb);
    double diag = 1.0 / dt + cell_reaction[c];
    for (std::size_t k = 0; k < count; ++k) {
      diag += nb[k].weight;
      if (local[nb[k].cell] < 0) source[r] += nb[k].weight * frozen_values[nb[k].cell];
    }
    bool placed = false;
    for (std::size_t k = 0; k < count; ++k) {
      if (local[nb[k].cell] < 0) continue;
      const auto lc = static_cast<std::size_t>(local[nb[k].cell]);
      if (!placed && lc > r) {
        cols.push_back(r);
        vals.push_back(diag);
        placed = true;
      }
      cols.push_back(lc);
      vals.push_back(-nb[k].weight);
    }
    if (!placed) {
      cols.push_back(r);
      vals.push_back(diag);
    }
    offsets.push_back(cols.size());
  }
  return {SparseMatrix(cells.size(), std::move(offsets), std::move(cols), std::move(vals)),
          std::move(cells), std::move(source)};
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

SolveResult solve_spd(const SparseMatrix& a, std::span<const double> b, double rel_tol,
                      std::span<const double> guess) {
  if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw std::invalid_argument("solve: rel_tol must lie in (0,1)");
  const std::size_t n = a.dim();
  if (b.size() != n || (!guess.empty() && guess.size() != n))
    throw std::invalid_argument("solve: vector size differs from matrix dimension");

  SolveResult out;
  out.x.assign(n, 0.0);
  const double bnorm = std::sqrt(dot(b, b));
  if (bnorm == 0.0) return out;
  if (!guess.empty()) std::copy(guess.begin(), guess.end(), out.x.begin());

  auto& x = out.x;
  std::vector<double> r(n), z(n), p(n), ap(n);
  const std::size_t budget = 10 * n;
  std::size_t it = 0;
  const double target = rel_tol * bnorm;

  // Outer loop restarts from the true residual whenever the recursively
  // updated one has drifted below the target while the true one has not.
  while (true) {
    a.multiply(x, r);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
    double rnorm = std::sqrt(dot(r, r));
    if (rnorm <= target) {
      out.stats = {it, rnorm / bnorm};
      return out;
    }
    if (it >= budget) throw SolveError("solve: no convergence", rnorm / bnorm);
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / a.diagonal(i);
    p = z;
    double rz = dot(r, z);
    const std::size_t restart_at = it;
    while (it < budget) {
      a.multiply(p, ap);
      const double pap = dot(p, ap);
      if (!(pap > 0.0)) break;
      const double alpha = rz / pap;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += alpha * p[i];
        r[i] -= alpha * ap[i];
      }
      ++it;
      rnorm = std::sqrt(dot(r, r));
      if (rnorm <= target) break;
      for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / a.diagonal(i);
      const double rz_next = dot(r, z);
      const double beta = rz_next / rz;
      rz = rz_next;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    if (it == restart_at) throw SolveError("solve: breakdown", rnorm / bnorm);
  }
}

}  // namespace sktlab
