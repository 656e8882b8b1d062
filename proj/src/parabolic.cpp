#include "sktlab/parabolic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sktlab {

void ModelParams::validate() const {
  if (!(std::isfinite(alpha) && alpha >= 0.0)) throw std::invalid_argument("model: alpha must be >= 0");
  if (!(std::isfinite(lambda) && lambda > 0.0)) throw std::invalid_argument("model: lambda must be > 0");
  if (!(std::isfinite(theta) && theta > 0.0 && theta <= 1.0))
    throw std::invalid_argument("model: theta must lie in (0, 1]");
  if (!(std::isfinite(ellipticity) && ellipticity >= 1.0))
    throw std::invalid_argument("model: Lambda must be >= 1");
}

namespace {

void require_same_shape(const SpaceTimeField& a, const SpaceTimeField& b, const char* what) {
  if (!(a.grid() == b.grid()) || !(a.axis() == b.axis())) throw std::invalid_argument(what);
}

void require_tensor_on(const TensorField& a, const Grid& grid, const TimeAxis& axis) {
  if (!(a.grid() == grid)) throw std::invalid_argument("coefficient tensor lives on another grid");
  if (a.time_dependent() && !(*a.axis() == axis))
    throw std::invalid_argument("coefficient tensor has another time axis");
}

}  // namespace

LinearProblem::LinearProblem(TensorField coefficient, SpaceTimeField reaction, SpaceTimeField source,
                             SpaceTimeField datum, double rel_tol)
    : coefficient_(std::move(coefficient)),
      reaction_(std::move(reaction)),
      source_(std::move(source)),
      datum_(std::move(datum)),
      rel_tol_(rel_tol) {
  require_same_shape(reaction_, datum_, "linear problem: c has another shape");
  require_same_shape(source_, datum_, "linear problem: f has another shape");
  require_tensor_on(coefficient_, datum_.grid(), datum_.axis());
  if (!coefficient_.diagonal()) throw std::invalid_argument("linear problem: A must be diagonal");
  if (reaction_.min() < 0.0) throw std::invalid_argument("linear problem: c must be non-negative");
}

FaceField tensor_faces(const TensorField& a, std::size_t k, std::span<const double> multiplier) {
  const Grid& g = a.grid();
  std::vector<double> dx(g.size()), dy(g.size());
  for (std::size_t c = 0; c < g.size(); ++c) {
    const SymMat& m = a.at(k, c);
    if (g.dim() == 2 && m.xy != 0.0) throw std::invalid_argument("coefficient tensor must be diagonal");
    const double s = multiplier.empty() ? 1.0 : multiplier[c];
    dx[c] = s * m.xx;
    dy[c] = s * m.yy;
  }
  return face_mean(g, dx, dy);
}

std::vector<double> diffusion_reaction_step(const Grid& grid, const FaceField& diffusivity,
                                            std::span<const double> reaction,
                                            std::span<const double> source,
                                            std::span<const double> w_prev, double dt, double rel_tol,
                                            std::span<const double> guess) {
  const auto m = assemble_implicit_step(grid, diffusivity, reaction, dt);
  std::vector<double> rhs(grid.size());
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = w_prev[i] / dt + source[i];
  return solve_spd(m, rhs, rel_tol, guess.empty() ? w_prev : guess).x;
}

Field linear_step(const LinearProblem& problem, const Field& w_prev, std::size_t k) {
  if (k == 0 || k > problem.axis().steps()) throw std::out_of_range("linear step: slice index");
  if (!(w_prev.grid() == problem.grid())) throw std::invalid_argument("linear step: w_prev grid");
  const auto faces = tensor_faces(problem.coefficient(), k);
  auto w = diffusion_reaction_step(problem.grid(), faces, problem.reaction().slice(k).values(),
                                   problem.source().slice(k).values(), w_prev.values(),
                                   problem.axis().dt(), problem.rel_tol());
  return Field(problem.grid(), std::move(w));
}

SpaceTimeField linear_solve(const LinearProblem& problem) {
  std::vector<Field> out;
  out.reserve(problem.axis().slices());
  out.push_back(problem.datum().slice(0));
  for (std::size_t k = 1; k <= problem.axis().steps(); ++k) out.push_back(linear_step(problem, out.back(), k));
  return SpaceTimeField(problem.axis(), std::move(out));
}

std::pair<SpaceTimeField, SpaceTimeField> truncate(const SpaceTimeField& c, const SpaceTimeField& f, double k) {
  if (!(k > 0.0)) throw std::invalid_argument("truncate: k must be positive");
  require_same_shape(c, f, "truncate: c and f differ in shape");
  auto cap = [k](const SpaceTimeField& x) {
    std::vector<Field> s;
    for (std::size_t t = 0; t < x.slices(); ++t) {
      std::vector<double> v(x.slice(t).values().begin(), x.slice(t).values().end());
      for (auto& e : v) e = std::min(e, k);
      s.emplace_back(x.grid(), std::move(v));
    }
    return SpaceTimeField(x.axis(), std::move(s));
  };
  return {cap(c), cap(f)};
}

double weak_residual(const SpaceTimeField& u, const ModelParams& params, const TensorField& a,
                     const SpaceTimeField& c, const SpaceTimeField& test, const SpaceTimeField* forcing) {
  params.validate();
  require_same_shape(u, c, "weak residual: shape mismatch (c)");
  require_same_shape(u, test, "weak residual: shape mismatch (test)");
  if (forcing) require_same_shape(u, *forcing, "weak residual: shape mismatch (f)");
  require_tensor_on(a, u.grid(), u.axis());
  for (double v : test.slice(0).values())
    if (v != 0.0) throw std::invalid_argument("weak residual: test function must vanish at t0");

  const Grid& g = u.grid();
  const double vol = g.cell_volume();
  const double dt = u.axis().dt();
  const double th2 = params.theta * params.theta;
  const double lt = params.lambda * params.theta;
  std::vector<double> mult(g.size());
  double total = 0.0;
  for (std::size_t k = 1; k < u.slices(); ++k) {
    const Field& uk = u.slice(k);
    const Field& up = u.slice(k - 1);
    const Field& phi = test.slice(k);
    double time_part = 0.0, reaction_part = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      mult[i] = 1.0 + params.alpha * params.lambda * uk[i];
      time_part += (uk[i] - up[i]) * phi[i];
      double r = th2 * uk[i] * (1.0 - params.lambda * uk[i]) - lt * c.slice(k)[i] * uk[i];
      if (forcing) r += forcing->slice(k)[i];
      reaction_part += r * phi[i];
    }
    const auto d = tensor_faces(a, k, mult);
    const auto gu = face_gradient(uk);
    const auto gp = face_gradient(phi);
    double flux_part = 0.0;
    for (int ax = 0; ax < g.dim(); ++ax)
      for (std::size_t f = 0; f < d.faces(ax); ++f) flux_part += d.at(ax, f) * gu.at(ax, f) * gp.at(ax, f);
    total += vol * (time_part + dt * flux_part - dt * reaction_part);
  }
  return total;
}

EnergyReport energy_report(const SpaceTimeField& u, const SpaceTimeField& c, const Field& g) {
  require_same_shape(u, c, "energy report: shape mismatch");
  if (!(g.grid() == u.grid())) throw std::invalid_argument("energy report: datum grid");
  EnergyReport r;
  for (std::size_t k = 0; k < u.slices(); ++k) {
    double s = 0.0;
    for (double v : u.slice(k).values()) s += v * v;
    r.sup_l2_sq = std::max(r.sup_l2_sq, s * u.grid().cell_volume());
    if (k > 0) r.gradient_sq += dirichlet_energy(u.slice(k)) * u.axis().dt();
  }
  r.lhs = r.sup_l2_sq + r.gradient_sq;
  r.domain_measure = u.grid().measure();
  for (std::size_t k = 1; k < c.slices(); ++k)
    for (double v : c.slice(k).values()) r.reaction_l2_sq += v * v;
  r.reaction_l2_sq *= u.grid().cell_volume() * u.axis().dt();
  for (double v : g.values()) r.datum_l2_sq += v * v;
  r.datum_l2_sq *= g.grid().cell_volume();
  return r;
}

}  // namespace sktlab
