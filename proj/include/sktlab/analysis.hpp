// Regularity diagnostics: L^p norms, parabolic maximal functions, BMO
// seminorms of coefficient tensors, level-set distribution sums, De Giorgi
// truncation traces, bootstrap exponent ladders, parabolic rescaling and the
// gradient-estimate ratios.
#pragma once

#include <optional>
#include <vector>

#include "sktlab/mesh.hpp"
#include "sktlab/model.hpp"

namespace sktlab {

double lp_norm(const Field& f, double p);
/// Over Omega_T (slices 1..steps).
double lp_norm(const SpaceTimeField& f, double p);
double lp_norm(const SpaceTimeField& f, double p, const ParabolicCube& cube);
/// L^p(Omega_T) norm of |grad f| (cell gradients).
double gradient_lp_norm(const SpaceTimeField& f, double p);

struct MaximalConfig {
  std::vector<double> radii;  ///< ascending, positive
  CubeVariant variant = CubeVariant::centered;
  std::size_t threads = 1;    ///< worker threads over output slices

  /// h, 2h, 4h, ... up to the grid diameter, h the smallest spacing.
  static MaximalConfig dyadic(const Grid& grid, CubeVariant variant = CubeVariant::centered);
  void validate() const;
};

/// (M_U f)(x,t) = max over the radius set of the average of |f| chi_U over
/// the cube at (x,t) clipped to the grid and Omega_T. `region` empty means
/// U is the whole of Omega_T. Points whose cubes are all empty get 0.
SpaceTimeField parabolic_maximal(const SpaceTimeField& f, const std::optional<ParabolicCube>& region,
                                 const MaximalConfig& cfg);

/// sup over radii rho <= R (from `radii`, default dyadic multiples of h) and
/// grid points (y, s), s a slice of `axis` in Omega_T, of
///   |K_rho|^{-1} int_{K_rho(y,s) cap Omega_T} |A(x,t) - mean_{B_rho(y)}A(t)|_F^2,
/// with backward cubes K_rho and |K_rho| the unclipped discrete measure.
double bmo_seminorm(const TensorField& a, const TimeAxis& axis, double R, std::vector<double> radii = {});

struct LevelSetSum {
  double sum = 0.0;
  double bound = 0.0;
};

/// Both sides of
///   sum_{j=0}^{j_max} (N^q - 1) delta^q N^{q(j-1)} |{M(f^2) > delta N^j}|  <=  int (M(f^2))^q
/// over Omega_T.
LevelSetSum level_set_sum(const SpaceTimeField& f, double delta, double N, double q, std::size_t j_max,
                          const std::optional<MaximalConfig>& cfg = std::nullopt);
/// Same sums given M(f^2) directly, so one maximal field serves many (delta, N, q).
LevelSetSum level_set_sum_from_maximal(const SpaceTimeField& maximal, double delta, double N, double q,
                                       std::size_t j_max);

struct DeGiorgiConstants {
  int n = 2;
  double ellipticity = 1.0;
  double m0 = 1.0;
  double m1 = 1.0;
  double theta = 1.0;
  double c0 = 1.0;  ///< parabolic Sobolev constant (calibrated)
  double c1 = 1.0;  ///< cutoff gradient constant
};

struct DeGiorgiTrace {
  double K = 0.0;
  std::vector<double> levels;  ///< k_j = K (1 - 2^-j)
  std::vector<double> radii;   ///< reference radii 3 + 2^{-j-2}
  std::vector<double> energies;///< Y_j = ||(w - k_j)^+||_{L2(Q_{r_j})}, reference measure
  double r = 0.0;              ///< 2(n+2)/n
  double mu = 0.0;             ///< 2(1 - 2/r)
  double c2 = 0.0;
  double A = 0.0;              ///< 32 C0 C2 / K^mu
  double B = 16.0;
  double threshold = 0.0;      ///< A^{-1/mu} B^{-1/mu^2}
  double fitted_A = 0.0;       ///< max_j Y_{j+1} / (B^j Y_j^{1+mu}) over Y_j > 0
  std::size_t exceed_inner = 0;///< cells of Q_3 x slices where w > K
};

inline constexpr std::size_t kMaxDeGiorgiLevel = 52;

/// C2 with C2^2 = 8 Lambda C1^2 (1 + (1 + M0 + M1^2) Lambda^3 + theta^2).
double degiorgi_c2(const DeGiorgiConstants& k);
std::pair<double, double> degiorgi_exponents(int n);

/// `cube` is a centered cube playing the role of Q_4; the reference radii are
/// scaled by cube.radius / 4 and measures are taken in reference units.
DeGiorgiTrace degiorgi_trace(const SpaceTimeField& w, const ParabolicCube& cube, double K, std::size_t j_max,
                             const DeGiorgiConstants& consts);
/// K = ||w||_{L2(Q_4)} 16^{1/mu^2} (32 C0 C2)^{1/mu}.
double degiorgi_level(const SpaceTimeField& w, const ParabolicCube& cube, const DeGiorgiConstants& consts);
/// Largest embedding ratio ||phi||_{L^r(Q4)} / (sup_t ||phi||_{L2(B4)} + ||grad phi||_{L2(Q4)})
/// over a family of smooth bumps supported in the cube, in reference units.
double calibrate_sobolev_constant(const Grid& grid, const TimeAxis& axis, const ParabolicCube& cube, int n);

struct BootstrapLadder {
  int n = 0;
  double l1 = 0.0;
  double p0 = 0.0;
  std::vector<double> terms;  ///< l_1, l_2, ..., l_k
  std::size_t terminal = 0;   ///< k (1-based)
  bool unbounded = false;     ///< (n + 2 - l_k)_+ = 0
};

/// l_{i+1} = l_i (n+1) / (n+2-l_i) until l_k >= min(p0, n+2) or the
/// denominator vanishes.
BootstrapLadder bootstrap_ladder(int n, double l1, double p0);
/// 2(q-1)/(qbar (q+1)) (2/n + 1) with qbar = 2 + 4q/(n(q+1)).
double bootstrap_mu(double q, int n);

struct ScaledField {
  SpaceTimeField u;
  ModelParams params;
};

/// u'(x,t) = u(s x, s^2 t) / s on the grid shrunk by s (same cell counts),
/// with lambda' = lambda s and theta' = theta s.
ScaledField scale_transform(const SpaceTimeField& u, const ModelParams& params, double s);
/// c'(x,t) = c(s x, s^2 t) on the shrunk grid.
SpaceTimeField scale_coefficient(const SpaceTimeField& c, double s);
TensorField scale_coefficient(const TensorField& a, double s);

/// int_{Omega x [tbar, T]} |grad u|^p / ((theta/lambda v ||u||_{L2})^p + int |c|^p).
double estimate_ratio(const SpaceTimeField& u, const ModelParams& params, const SpaceTimeField& c, double p,
                      double tbar);

/// max_{inner} |grad v|^2 / mean_{outer} |grad v|^2; 0 when both vanish.
double w1infty_ratio(const SpaceTimeField& v, const ParabolicCube& inner, const ParabolicCube& outer);

}  // namespace sktlab
