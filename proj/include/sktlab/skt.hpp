// Time integration of the restricted SKT system in divergence form
//   u_t = div[(d1 + 2 a11 u + a12 v) grad u + a12 u grad v] + u (a1 - b1 u - c1 v)
//   v_t = div[(d2 + 2 a22 v) grad v] + v (a2 - c2 v) - b2 u v
// with homogeneous Neumann boundaries.
#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "sktlab/mesh.hpp"

namespace sktlab {

struct SKTParams {
  double d1 = 1.0, d2 = 1.0;
  double a11 = 0.0, a12 = 0.0, a22 = 0.0;
  double a1 = 1.0, a2 = 1.0;
  double b1 = 1.0, b2 = 0.0;
  double c1 = 0.0, c2 = 1.0;

  /// d_k, a_k, b1, c2 > 0; a_ij, b2, c1 >= 0.
  void validate() const;
};

struct SKTState {
  SpaceTimeField u;
  SpaceTimeField v;
  SKTParams params;
};

/// Discrete blow-up: a non-finite value or a value below -1e-12.
class BlowupError : public std::runtime_error {
 public:
  BlowupError(const std::string& what, std::size_t slice)
      : std::runtime_error(what), slice_(slice) {}
  std::size_t slice() const { return slice_; }

 private:
  std::size_t slice_;
};

inline constexpr double kNegativityFloor = -1e-12;

/// max(a2/c2, max v0).
double m0_bound(const SKTParams& params, const Field& v0);

struct SKTOptions {
  double solve_tolerance = 1e-13;
};

/// Per step: v first with coefficients frozen at the previous slice, then u
/// using grad v from the new slice. Diffusion and quadratic sinks are
/// implicit, linear sources explicit. The cross term a12 div(u grad v) is
/// upwinded: outflow from a cell is implicit on the diagonal, inflow from the
/// upwind neighbour is an explicit non-negative source.
SKTState skt_run(const SKTParams& params, const Field& u0, const Field& v0, const TimeAxis& axis,
                 const SKTOptions& options = {});

/// (int |w|^p + int |grad w|^p)^{1/p} of one slice.
double w1p_norm(const Field& w, double p);

/// One value per slice: ||u||_{W^{1,p0}} + ||v||_{W^{1,p0}}.
std::vector<double> blowup_monitor(const SKTState& state, double p0);

struct MonitorRow {
  double t, norm_u, norm_v, min_u, max_u, min_v, max_v, mass_u, mass_v;
};

std::vector<MonitorRow> monitor_rows(const SKTState& state, double p0);
/// CSV with header t,normW1p_u,normW1p_v,min_u,max_u,min_v,max_v,mass_u,mass_v.
std::string monitor_csv(const std::vector<MonitorRow>& rows);

}  // namespace sktlab
