// Boundary flattening for domains lying above a Lipschitz graph x_2 > gamma(x_1):
// the maps Phi(x', x_n) = (x', x_n - gamma(x')) and its inverse Psi, their
// Jacobians, and coefficient tensors pushed forward through Phi.
#pragma once

#include <vector>

#include "sktlab/mesh.hpp"

namespace sktlab {

/// General (non-symmetric) 2x2 matrix, row-major.
struct Mat2 {
  double a00 = 1.0, a01 = 0.0;
  double a10 = 0.0, a11 = 1.0;

  double det() const { return a00 * a11 - a01 * a10; }
  double frobenius_sq() const { return a00 * a00 + a01 * a01 + a10 * a10 + a11 * a11; }
};

/// J S J^T for symmetric S.
SymMat congruence(const Mat2& j, const SymMat& s);

/// Piecewise-linear gamma through uniformly spaced nodal samples on [lo, hi].
class LipschitzGraph {
 public:
  /// Throws when the measured Lipschitz constant exceeds `declared_lip`.
  LipschitzGraph(double lo, double hi, std::vector<double> samples, double declared_lip, double locality_radius);
  static LipschitzGraph from_function(double lo, double hi, std::size_t segments,
                                      const std::function<double(double)>& gamma, double declared_lip,
                                      double locality_radius);

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  const std::vector<double>& samples() const { return samples_; }
  /// Largest slope between adjacent samples.
  double measured_lip() const { return measured_lip_; }
  double declared_lip() const { return declared_lip_; }
  double locality_radius() const { return radius_; }

  /// Throws std::out_of_range outside [lo, hi].
  double value(double x) const;
  /// Slope of the segment containing x (right segment at interior nodes).
  double slope(double x) const;

 private:
  std::size_t segment(double x) const;

  double lo_, hi_;
  std::vector<double> samples_;
  double declared_lip_;
  double radius_;
  double measured_lip_ = 0.0;
};

Point flatten(const LipschitzGraph& graph, Point x);
Point unflatten(const LipschitzGraph& graph, Point y);
/// grad Phi = [[1, 0], [-gamma', 1]] at x.
Mat2 flatten_jacobian(const LipschitzGraph& graph, Point x);
/// grad Psi = [[1, 0], [gamma', 1]] at y.
Mat2 unflatten_jacobian(const LipschitzGraph& graph, Point y);

/// Ahat(y, t) = grad Phi(Psi y) A(Psi y, t) grad Phi(Psi y)^T on the grid of
/// `a` read as y-coordinates; A at Psi(y) is taken from the containing cell
/// (clamped to the grid). The result carries ellipticity (n + 1) Lambda.
/// Throws when Lip(gamma) > 1 or the tensor is not two-dimensional.
TensorField pushforward_coefficient(const TensorField& a, const LipschitzGraph& graph);

}  // namespace sktlab
