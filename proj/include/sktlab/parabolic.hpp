// Backward-Euler stepping of linear parabolic problems
//   w_t = div(A grad w) - c w + f,   dw/dnu = 0,
// plus the truncation device, the discrete weak form of the scalar model and
// the energy functionals.
#pragma once

#include <span>
#include <utility>
#include <vector>

#include "sktlab/mesh.hpp"
#include "sktlab/model.hpp"
#include "sktlab/sparse.hpp"

namespace sktlab {

/// Coefficient data (A, c, f, g) of a linear problem. g's first slice is the
/// initial datum.
class LinearProblem {
 public:
  LinearProblem(TensorField coefficient, SpaceTimeField reaction, SpaceTimeField source,
                SpaceTimeField datum, double rel_tol = kDefaultSolveTolerance);

  const Grid& grid() const { return datum_.grid(); }
  const TimeAxis& axis() const { return datum_.axis(); }
  const TensorField& coefficient() const { return coefficient_; }
  const SpaceTimeField& reaction() const { return reaction_; }
  const SpaceTimeField& source() const { return source_; }
  const SpaceTimeField& datum() const { return datum_; }
  double rel_tol() const { return rel_tol_; }

 private:
  TensorField coefficient_;
  SpaceTimeField reaction_;
  SpaceTimeField source_;
  SpaceTimeField datum_;
  double rel_tol_;
};

/// Face diffusivities from the diagonal of A at slice k, each cell value
/// optionally scaled by multiplier[cell]. Off-diagonal entries are rejected:
/// they would break the M-matrix structure of the five-point stencil.
FaceField tensor_faces(const TensorField& a, std::size_t k, std::span<const double> multiplier = {});

/// One implicit step of w_t = div(D grad w) - r w + s from w_prev.
std::vector<double> diffusion_reaction_step(const Grid& grid, const FaceField& diffusivity,
                                            std::span<const double> reaction,
                                            std::span<const double> source,
                                            std::span<const double> w_prev, double dt,
                                            double rel_tol = kDefaultSolveTolerance,
                                            std::span<const double> guess = {});

/// Solution at slice k from w_prev at slice k-1; c and f are taken at slice k.
Field linear_step(const LinearProblem& problem, const Field& w_prev, std::size_t k);
/// All slices, starting from the datum's first slice.
SpaceTimeField linear_solve(const LinearProblem& problem);

/// Pointwise (min(c, k), min(f, k)).
std::pair<SpaceTimeField, SpaceTimeField> truncate(const SpaceTimeField& c, const SpaceTimeField& f,
                                                  double k);

/// Discrete weak form of the scalar model tested against `test`:
///   sum_k [ <u^k - u^{k-1}, phi^k> + dt <(1 + alpha lambda u^k) A grad u^k, grad phi^k>
///           - dt <theta^2 u^k (1 - lambda u^k) - lambda theta c^k u^k + f^k, phi^k> ].
/// The test field must vanish on the first slice. `forcing` may be null.
double weak_residual(const SpaceTimeField& u, const ModelParams& params, const TensorField& a,
                     const SpaceTimeField& c, const SpaceTimeField& test,
                     const SpaceTimeField* forcing = nullptr);

struct EnergyReport {
  double sup_l2_sq = 0.0;       ///< max_k int u_k^2
  double gradient_sq = 0.0;     ///< int over Omega_T of |grad u|^2
  double lhs = 0.0;             ///< sum of the two above
  double domain_measure = 0.0;  ///< |Omega|
  double reaction_l2_sq = 0.0;  ///< ||c||^2 over Omega_T
  double datum_l2_sq = 0.0;     ///< ||g||^2 over Omega

  double rhs_sum() const { return domain_measure + reaction_l2_sq + datum_l2_sq; }
};

EnergyReport energy_report(const SpaceTimeField& u, const SpaceTimeField& c, const Field& g);

}  // namespace sktlab
