// Constructive solver for the scalar self-diffusion model by frozen-coefficient
// fixed-point iteration, and the frozen-coefficient reference problem on a cube.
//
// In the normalized unknown U = lambda*u the iteration maps an iterate V with
// 0 <= V <= 1 to the solution W of the linear problem
//   W_t = div[(1 + alpha V) A grad W] - (theta^2 + lambda theta c) W + theta^2 (2V - V^2),
// whose data satisfy 0 <= source <= reaction, so every image stays in [0, 1].
// A fixed point solves the fully implicit backward-Euler discretization.
#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "sktlab/mesh.hpp"
#include "sktlab/model.hpp"

namespace sktlab {

enum class StartIterate {
  datum,  ///< initial datum held constant in time
  zero,   ///< v = 0
  upper,  ///< v = 1/lambda
};

struct PicardConfig {
  std::size_t max_iterations = 200;
  double l2_tolerance = 1e-8;
  double relaxation = 1.0;
  StartIterate start = StartIterate::datum;
  double solve_tolerance = 1e-12;

  void validate() const;
};

struct PicardResult {
  SpaceTimeField u;
  std::vector<double> gaps;  ///< L2(Omega_T) distance between successive iterates
};

/// Raised when the iteration budget runs out; carries the gap history.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> gaps)
      : std::runtime_error(what), gaps_(std::move(gaps)) {}
  const std::vector<double>& gaps() const { return gaps_; }

 private:
  std::vector<double> gaps_;
};

/// Called with (iteration, image) after every application of the map.
using IterateObserver = std::function<void(std::size_t, const SpaceTimeField&)>;

/// Solves the scalar model on the time axis of `c`. `forcing`, when given, is
/// an additional source f on the right-hand side (manufactured solutions);
/// the bracket guarantee only holds without it.
PicardResult picard_solve(const ModelParams& params, const TensorField& a, const SpaceTimeField& c,
                          const Field& u0, const PicardConfig& cfg = {},
                          const SpaceTimeField* forcing = nullptr,
                          const IterateObserver& observer = {});

/// Spatial mean of A over the cells of a ball, one matrix per tensor slice.
std::vector<SymMat> ball_average(const TensorField& a, const Ball& ball);

/// Solves v_t = div[(1 + alpha lambda v) Abar(t) grad v] + theta^2 v (1 - lambda v)
/// on the cube with v = u on its parabolic boundary (ring cells of the ball
/// and the slice preceding the cube). Outside the cube the result equals u.
SpaceTimeField reference_solve(const ModelParams& params, const TensorField& a,
                               const ParabolicCube& cube, const SpaceTimeField& u,
                               const PicardConfig& cfg = {});

struct ApproximationGap {
  double l2_gap = 0.0;  ///< ||u - v||^2 over the cube
  double h1_gap = 0.0;  ///< ||grad u - grad v||^2 over the cube
};

ApproximationGap approximation_gap(const SpaceTimeField& u, const SpaceTimeField& v,
                                   const ParabolicCube& cube);

}  // namespace sktlab
