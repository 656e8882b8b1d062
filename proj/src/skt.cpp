#include "sktlab/skt.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "sktlab/parabolic.hpp"
#include "sktlab/sparse.hpp"

namespace sktlab {

void SKTParams::validate() const {
  auto pos = [](double x, const char* name) {
    if (!(std::isfinite(x) && x > 0.0)) throw std::invalid_argument(std::string("skt: ") + name + " must be > 0");
  };
  auto nonneg = [](double x, const char* name) {
    if (!(std::isfinite(x) && x >= 0.0)) throw std::invalid_argument(std::string("skt: ") + name + " must be >= 0");
  };
  pos(d1, "d1");
  pos(d2, "d2");
  nonneg(a11, "a11");
  nonneg(a12, "a12");
  nonneg(a22, "a22");
  pos(a1, "a1");
  pos(a2, "a2");
  pos(b1, "b1");
  nonneg(b2, "b2");
  nonneg(c1, "c1");
  pos(c2, "c2");
}

double m0_bound(const SKTParams& params, const Field& v0) {
  params.validate();
  if (v0.min() < 0.0) throw std::invalid_argument("m0 bound: v0 must be non-negative");
  return std::max(params.a2 / params.c2, v0.max());
}

namespace {

void check_slice(const std::vector<double>& w, std::size_t k, const char* name) {
  for (double x : w) {
    if (!std::isfinite(x))
      throw BlowupError(std::string("blow-up detected: non-finite ") + name + " at slice " + std::to_string(k), k);
    if (x < kNegativityFloor)
      throw BlowupError(std::string("blow-up detected: negative ") + name + " at slice " + std::to_string(k), k);
  }
}

}  // namespace

SKTState skt_run(const SKTParams& params, const Field& u0, const Field& v0, const TimeAxis& axis,
                 const SKTOptions& options) {
  params.validate();
  const Grid& g = u0.grid();
  if (!(v0.grid() == g)) throw std::invalid_argument("skt: u0 and v0 on different grids");
  if (u0.min() < 0.0 || v0.min() < 0.0) throw std::invalid_argument("skt: initial data must be non-negative");

  const std::size_t n = g.size();
  const double dt = axis.dt();
  std::vector<Field> us{u0}, vs{v0};
  std::vector<double> d(n), reaction(n), source(n);

  for (std::size_t k = 1; k <= axis.steps(); ++k) {
    const auto& up = us.back().values();
    const auto& vp = vs.back().values();

    for (std::size_t i = 0; i < n; ++i) {
      d[i] = params.d2 + 2.0 * params.a22 * vp[i];
      reaction[i] = params.c2 * vp[i] + params.b2 * up[i];
      source[i] = params.a2 * vp[i];
    }
    auto vn = diffusion_reaction_step(g, face_mean(g, d), reaction, source, vp, dt, options.solve_tolerance);
    check_slice(vn, k, "v");

    for (std::size_t i = 0; i < n; ++i) {
      d[i] = params.d1 + 2.0 * params.a11 * up[i] + params.a12 * vp[i];
      reaction[i] = params.b1 * up[i] + params.c1 * vn[i];
      source[i] = params.a1 * up[i];
    }
    if (params.a12 > 0.0) {
      // Face flux a12 * u_upwind * (v_j - v_i) / h^2 into cell i.
      for (int ax = 0; ax < g.dim(); ++ax) {
        const double w = params.a12 / (g.h(ax) * g.h(ax));
        for (std::size_t c = 0; c < n; ++c) {
          auto [i0, i1] = g.coords(c);
          const std::size_t hi_idx = ax == 0 ? i0 : i1;
          if (hi_idx + 1 >= g.cells(ax)) continue;
          const std::size_t nb = ax == 0 ? g.index(i0 + 1, i1) : g.index(i0, i1 + 1);
          const double gap = vn[nb] - vn[c];
          if (gap > 0.0) {
            // u flows from nb (high v) into c.
            source[c] += w * gap * up[nb];
            reaction[nb] += w * gap;
          } else if (gap < 0.0) {
            source[nb] += w * (-gap) * up[c];
            reaction[c] += w * (-gap);
          }
        }
      }
    }
    auto un = diffusion_reaction_step(g, face_mean(g, d), reaction, source, up, dt, options.solve_tolerance);
    check_slice(un, k, "u");

    us.emplace_back(g, std::move(un));
    vs.emplace_back(g, std::move(vn));
  }
  return {SpaceTimeField(axis, std::move(us)), SpaceTimeField(axis, std::move(vs)), params};
}

double w1p_norm(const Field& w, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("w1p norm: p must be >= 1");
  const auto grad = cell_gradient(w);
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    s += std::pow(std::abs(w[i]), p);
    s += std::pow(std::hypot(grad[i][0], grad[i][1]), p);
  }
  return std::pow(s * w.grid().cell_volume(), 1.0 / p);
}

std::vector<double> blowup_monitor(const SKTState& state, double p0) {
  std::vector<double> out;
  for (std::size_t k = 0; k < state.u.slices(); ++k)
    out.push_back(w1p_norm(state.u.slice(k), p0) + w1p_norm(state.v.slice(k), p0));
  return out;
}

std::vector<MonitorRow> monitor_rows(const SKTState& state, double p0) {
  std::vector<MonitorRow> rows;
  for (std::size_t k = 0; k < state.u.slices(); ++k) {
    const Field& u = state.u.slice(k);
    const Field& v = state.v.slice(k);
    rows.push_back({state.u.axis().time(k), w1p_norm(u, p0), w1p_norm(v, p0), u.min(), u.max(), v.min(),
                    v.max(), integrate(u), integrate(v)});
  }
  return rows;
}

std::string monitor_csv(const std::vector<MonitorRow>& rows) {
  std::ostringstream s;
  s << "t,normW1p_u,normW1p_v,min_u,max_u,min_v,max_v,mass_u,mass_v\n";
  s << std::setprecision(17);
  for (const auto& r : rows)
    s << r.t << ',' << r.norm_u << ',' << r.norm_v << ',' << r.min_u << ',' << r.max_u << ',' << r.min_v << ','
      << r.max_v << ',' << r.mass_u << ',' << r.mass_v << '\n';
  return s.str();
}

}  // namespace sktlab
