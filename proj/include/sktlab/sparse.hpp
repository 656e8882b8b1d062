// Symmetric M-matrix assembly for backward-Euler diffusion-reaction steps and
// a Jacobi-preconditioned conjugate gradient solver.
#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "sktlab/mesh.hpp"

namespace sktlab {

/// Compressed-row symmetric matrix with strictly positive diagonal.
/// Column indices are sorted within each row.
class SparseMatrix {
 public:
  SparseMatrix(std::size_t dim, std::vector<std::size_t> row_offsets,
               std::vector<std::size_t> columns, std::vector<double> values);

  std::size_t dim() const { return dim_; }
  std::span<const std::size_t> row_offsets() const { return row_offsets_; }
  std::span<const std::size_t> columns() const { return columns_; }
  std::span<const double> values() const { return values_; }
  double diagonal(std::size_t row) const { return diagonal_[row]; }
  /// Entry (i, j), 0 when not stored.
  double at(std::size_t i, std::size_t j) const;
  void multiply(std::span<const double> x, std::span<double> y) const;

 private:
  std::size_t dim_;
  std::vector<std::size_t> row_offsets_;
  std::vector<std::size_t> columns_;
  std::vector<double> values_;
  std::vector<double> diagonal_;
};

struct SolveStats {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
};

struct SolveResult {
  std::vector<double> x;
  SolveStats stats;
};

/// Raised when CG exhausts its iteration budget (10 x dimension).
class SolveError : public std::runtime_error {
 public:
  SolveError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

inline constexpr double kDefaultSolveTolerance = 1e-10;

/// Arithmetic mean of per-cell diffusivities onto interior faces; boundary
/// faces stay 0. `cell_x` drives axis-0 faces and `cell_y` axis-1 faces.
FaceField face_mean(const Grid& grid, std::span<const double> cell_x,
                    std::span<const double> cell_y);
FaceField face_mean(const Grid& grid, std::span<const double> cell);

/// I/dt + stiffness(D) + diag(reaction) with zero-flux boundaries.
SparseMatrix assemble_implicit_step(const Grid& grid, const FaceField& face_diffusivity,
                                    std::span<const double> cell_reaction, double dt);

/// Same operator restricted to the active cells. Couplings to inactive
/// in-grid neighbours are kept on the diagonal and their frozen values are
/// moved into `boundary_source` (Dirichlet data).
struct MaskedSystem {
  SparseMatrix matrix;
  std::vector<std::size_t> cells;
  std::vector<double> boundary_source;
};

MaskedSystem assemble_masked_step(const Grid& grid, const FaceField& face_diffusivity,
                                  std::span<const double> cell_reaction, double dt,
                                  const std::vector<char>& active,
                                  std::span<const double> frozen_values);

/// Solves A x = b to ||Ax - b|| <= rel_tol ||b||. `guess` may be empty.
SolveResult solve_spd(const SparseMatrix& a, std::span<const double> b,
                      double rel_tol = kDefaultSolveTolerance,
                      std::span<const double> guess = {});

}  // namespace sktlab
