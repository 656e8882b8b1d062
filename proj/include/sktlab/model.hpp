#pragma once

namespace sktlab {

/// Parameters of the scalar self-diffusion equation
///   u_t = div[(1 + alpha*lambda*u) A grad u] + theta^2 u (1 - lambda u) - lambda*theta*c*u.
struct ModelParams {
  double alpha = 0.0;       ///< self-diffusion weight, >= 0
  double lambda = 1.0;      ///< carrying-capacity scale, > 0
  double theta = 1.0;       ///< rate scale, in (0, 1]
  double ellipticity = 1.0; ///< Lambda of the coefficient tensor, >= 1

  /// Throws std::invalid_argument naming the first violated bound.
  void validate() const;
};

}  // namespace sktlab
