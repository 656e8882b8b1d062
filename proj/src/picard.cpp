#include "sktlab/picard.hpp"

#include <cmath>
#include <optional>

#include "sktlab/parabolic.hpp"
#include "sktlab/sparse.hpp"

namespace sktlab {

void PicardConfig::validate() const {
  if (max_iterations == 0) throw std::invalid_argument("picard: max_iterations must be positive");
  if (!(l2_tolerance > 0.0)) throw std::invalid_argument("picard: tolerance must be positive");
  if (!(relaxation > 0.0 && relaxation <= 1.0)) throw std::invalid_argument("picard: relaxation must lie in (0, 1]");
  if (!(solve_tolerance > 0.0 && solve_tolerance < 1.0)) throw std::invalid_argument("picard: bad solve tolerance");
}

namespace {

using Slices = std::vector<std::vector<double>>;

struct FixedPointProblem {
  const ModelParams& params;
  const TensorField& a;
  const SpaceTimeField* c = nullptr;
  const SpaceTimeField* forcing = nullptr;
  Grid grid;
  TimeAxis axis;
  std::size_t first = 1;
  std::size_t last = 1;
  std::vector<double> start;                   // U at slice first-1
  const std::vector<char>* active = nullptr;   // null: every cell is unknown
  const SpaceTimeField* frozen = nullptr;      // u-valued Dirichlet data
};

SpaceTimeField to_field(const FixedPointProblem& p, const Slices& w, const SpaceTimeField* outside) {
  std::vector<Field> out;
  out.reserve(p.axis.slices());
  const double inv = 1.0 / p.params.lambda;
  for (std::size_t k = 0; k < p.axis.slices(); ++k) {
    if (k + 1 == p.first) {
      std::vector<double> s(p.start);
      for (auto& e : s) e *= inv;
      out.emplace_back(p.grid, std::move(s));
    } else if (k >= p.first && k <= p.last) {
      std::vector<double> s(w[k - p.first]);
      for (auto& e : s) e *= inv;
      out.emplace_back(p.grid, std::move(s));
    } else {
      out.push_back(outside->slice(k));
    }
  }
  return SpaceTimeField(p.axis, std::move(out));
}

PicardResult run_fixed_point(const FixedPointProblem& p, const PicardConfig& cfg,
                             const IterateObserver& observer) {
  const std::size_t n = p.grid.size();
  const std::size_t count = p.last - p.first + 1;
  const double lam = p.params.lambda;
  const double th2 = p.params.theta * p.params.theta;
  const double lt = p.params.lambda * p.params.theta;
  const double dt = p.axis.dt();
  const double weight = p.grid.cell_volume() * dt;

  auto frozen_value = [&](std::size_t k, std::size_t i) { return lam * p.frozen->slice(k)[i]; };
  auto is_active = [&](std::size_t i) { return p.active == nullptr || (*p.active)[i]; };

  Slices v(count, std::vector<double>(n));
  for (std::size_t s = 0; s < count; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!is_active(i)) {
        v[s][i] = frozen_value(p.first + s, i);
        continue;
      }
      switch (cfg.start) {
        case StartIterate::datum: v[s][i] = p.start[i]; break;
        case StartIterate::zero: v[s][i] = 0.0; break;
        case StartIterate::upper: v[s][i] = 1.0; break;
      }
    }
  }

  std::vector<double> gaps;
  Slices w(count, std::vector<double>(n));
  std::vector<double> mult(n), reaction(n), source(n), frozen(n);
  for (std::size_t it = 1; it <= cfg.max_iterations; ++it) {
    const std::vector<double>* prev = &p.start;
    for (std::size_t s = 0; s < count; ++s) {
      const std::size_t k = p.first + s;
      for (std::size_t i = 0; i < n; ++i) {
        const double vi = v[s][i];
        mult[i] = 1.0 + p.params.alpha * vi;
        const double ci = p.c ? p.c->slice(k)[i] : 0.0;
        reaction[i] = th2 + lt * ci;
        source[i] = th2 * (2.0 * vi - vi * vi);
        if (p.forcing) source[i] += lam * p.forcing->slice(k)[i];
      }
      const auto faces = tensor_faces(p.a, k, mult);
      if (p.active == nullptr) {
        w[s] = diffusion_reaction_step(p.grid, faces, reaction, source, *prev, dt, cfg.solve_tolerance, w[s]);
      } else {
        for (std::size_t i = 0; i < n; ++i) frozen[i] = is_active(i) ? 0.0 : frozen_value(k, i);
        auto sys = assemble_masked_step(p.grid, faces, reaction, dt, *p.active, frozen);
        std::vector<double> rhs(sys.cells.size()), guess(sys.cells.size());
        for (std::size_t r = 0; r < sys.cells.size(); ++r) {
          const std::size_t i = sys.cells[r];
          rhs[r] = (*prev)[i] / dt + source[i] + sys.boundary_source[r];
          guess[r] = v[s][i];
        }
        auto sol = solve_spd(sys.matrix, rhs, cfg.solve_tolerance, guess).x;
        w[s] = frozen;
        for (std::size_t r = 0; r < sys.cells.size(); ++r) w[s][sys.cells[r]] = sol[r];
      }
      prev = &w[s];
    }

    double gap = 0.0;
    for (std::size_t s = 0; s < count; ++s)
      for (std::size_t i = 0; i < n; ++i) gap += (w[s][i] - v[s][i]) * (w[s][i] - v[s][i]);
    gap = std::sqrt(gap * weight) / lam;
    gaps.push_back(gap);
    if (observer) observer(it, to_field(p, w, p.frozen ? p.frozen : nullptr));
    if (gap <= cfg.l2_tolerance) {
      return {to_field(p, w, p.frozen ? p.frozen : nullptr), std::move(gaps)};
    }
    const double om = cfg.relaxation;
    for (std::size_t s = 0; s < count; ++s)
      for (std::size_t i = 0; i < n; ++i)
        if (is_active(i)) v[s][i] = (1.0 - om) * v[s][i] + om * w[s][i];
  }
  throw ConvergenceError("picard: no convergence", std::move(gaps));
}

}  // namespace

PicardResult picard_solve(const ModelParams& params, const TensorField& a, const SpaceTimeField& c,
                          const Field& u0, const PicardConfig& cfg, const SpaceTimeField* forcing,
                          const IterateObserver& observer) {
  params.validate();
  cfg.validate();
  if (!(u0.grid() == c.grid()) || !(a.grid() == c.grid())) throw std::invalid_argument("picard: grids differ");
  if (a.time_dependent() && !(*a.axis() == c.axis())) throw std::invalid_argument("picard: tensor time axis");
  if (forcing && (!(forcing->grid() == c.grid()) || !(forcing->axis() == c.axis())))
    throw std::invalid_argument("picard: forcing shape");
  if (c.min() < 0.0) throw std::invalid_argument("picard: c must be non-negative");
  if (!a.diagonal()) throw std::invalid_argument("picard: A must be diagonal");
  const double tol = 1e-12;
  if (u0.min() * params.lambda < -tol || u0.max() * params.lambda > 1.0 + tol)
    throw std::invalid_argument("picard: initial datum outside [0, 1/lambda]");

  FixedPointProblem p{params, a, &c, forcing, c.grid(), c.axis(), 1, 1, {}};
  p.first = 1;
  p.last = c.axis().steps();
  p.start.assign(u0.values().begin(), u0.values().end());
  for (auto& e : p.start) e *= params.lambda;
  return run_fixed_point(p, cfg, observer);
}

std::vector<SymMat> ball_average(const TensorField& a, const Ball& ball) {
  const auto cells = cells_in(a.grid(), ball);
  if (cells.empty()) throw std::domain_error("empty region");
  std::vector<SymMat> out;
  for (std::size_t k = 0; k < a.slices(); ++k) {
    SymMat s;
    for (auto c : cells) s = s + a.at(k, c);
    out.push_back(s * (1.0 / static_cast<double>(cells.size())));
  }
  return out;
}

SpaceTimeField reference_solve(const ModelParams& params, const TensorField& a, const ParabolicCube& cube,
                               const SpaceTimeField& u, const PicardConfig& cfg) {
  params.validate();
  cfg.validate();
  const Grid& g = u.grid();
  const TimeAxis& axis = u.axis();
  if (!(a.grid() == g)) throw std::invalid_argument("reference solve: tensor grid");
  const double slack = kMembershipTol * g.min_spacing();
  for (int ax = 0; ax < g.dim(); ++ax)
    if (cube.center[ax] - cube.radius < g.lo(ax) - slack || cube.center[ax] + cube.radius > g.hi(ax) + slack)
      throw std::domain_error("reference solve: cube leaves domain");
  const double r2 = cube.radius * cube.radius;
  const double top = cube.variant == CubeVariant::centered ? cube.time + r2 : cube.time;
  const double tslack = kMembershipTol * axis.dt();
  if (cube.time - r2 < axis.t0() - tslack || top > axis.T() + tslack)
    throw std::domain_error("reference solve: cube leaves domain");
  const auto range = cube.slice_range(axis);
  if (!range) throw std::domain_error("reference solve: cube contains no time slice");

  const double tol = 1e-9;
  if (u.min() * params.lambda < -tol || u.max() * params.lambda > 1.0 + tol)
    throw std::invalid_argument("reference solve: boundary data outside [0, 1/lambda]");

  const Ball ball = cube.ball();
  std::vector<char> in_ball(g.size(), 0), active(g.size(), 0);
  for (auto c : cells_in(g, ball)) in_ball[c] = 1;
  bool any = false;
  for (std::size_t c = 0; c < g.size(); ++c) {
    if (!in_ball[c]) continue;
    auto [i0, i1] = g.coords(c);
    bool interior = true;
    if (i0 > 0 && !in_ball[g.index(i0 - 1, i1)]) interior = false;
    if (i0 + 1 < g.cells(0) && !in_ball[g.index(i0 + 1, i1)]) interior = false;
    if (g.dim() == 2) {
      if (i1 > 0 && !in_ball[g.index(i0, i1 - 1)]) interior = false;
      if (i1 + 1 < g.cells(1) && !in_ball[g.index(i0, i1 + 1)]) interior = false;
    }
    active[c] = interior ? 1 : 0;
    any = any || interior;
  }
  if (!any) throw std::domain_error("reference solve: cube has no interior cells");

  const auto mean = ball_average(a, ball);
  std::vector<std::vector<SymMat>> slices;
  for (const auto& m : mean) slices.emplace_back(g.size(), m);
  TensorField abar(g, a.ellipticity(), std::move(slices), a.time_dependent() ? a.axis() : std::nullopt);
  if (!abar.diagonal()) throw std::invalid_argument("reference solve: averaged tensor must be diagonal");

  FixedPointProblem p{params, abar, nullptr, nullptr, g, axis, 1, 1, {}};
  p.first = range->first;
  p.last = range->second;
  p.start.assign(u.slice(p.first - 1).values().begin(), u.slice(p.first - 1).values().end());
  for (auto& e : p.start) e *= params.lambda;
  p.active = &active;
  p.frozen = &u;
  return run_fixed_point(p, cfg, {}).u;
}

ApproximationGap approximation_gap(const SpaceTimeField& u, const SpaceTimeField& v, const ParabolicCube& cube) {
  if (!(u.grid() == v.grid()) || !(u.axis() == v.axis())) throw std::invalid_argument("approximation gap: shapes");
  const auto range = cube.slice_range(u.axis());
  const auto cells = cells_in(u.grid(), cube.ball());
  ApproximationGap out;
  if (!range || cells.empty()) return out;
  const double w = u.grid().cell_volume() * u.axis().dt();
  for (std::size_t k = range->first; k <= range->second; ++k) {
    std::vector<double> d(u.grid().size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = u.slice(k)[i] - v.slice(k)[i];
    const auto grad = cell_gradient(Field(u.grid(), d));
    for (auto c : cells) {
      out.l2_gap += d[c] * d[c] * w;
      out.h1_gap += (grad[c][0] * grad[c][0] + grad[c][1] * grad[c][1]) * w;
    }
  }
  return out;
}

}  // namespace sktlab
