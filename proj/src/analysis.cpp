#include "sktlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>

namespace sktlab {

namespace {

void check_exponent(double p) {
  if (!(std::isfinite(p) && p >= 1.0)) throw std::invalid_argument("lp norm: p must be finite and >= 1");
}

double grad_sq(const Point& g) { return g[0] * g[0] + g[1] * g[1]; }

/// Integer cell offsets whose centers lie in the open ball of radius rho,
/// ordered so that flat indices ascend for any host cell.
struct Stencil {
  std::vector<std::array<long, 2>> offsets;
};

Stencil ball_stencil(const Grid& g, double rho) {
  Stencil st;
  const double lim = rho * rho * (1.0 - kMembershipTol);
  const long r0 = static_cast<long>(std::ceil(rho / g.h(0)));
  const long r1 = g.dim() == 2 ? static_cast<long>(std::ceil(rho / g.h(1))) : 0;
  for (long d0 = -r0; d0 <= r0; ++d0) {
    for (long d1 = -r1; d1 <= r1; ++d1) {
      const double x = static_cast<double>(d0) * g.h(0);
      const double y = static_cast<double>(d1) * g.h(1);
      const double d2 = x * x + (g.dim() == 2 ? y * y : 0.0);
      if (d2 < lim) st.offsets.push_back({d0, d1});
    }
  }
  return st;
}

/// Cells of the stencil around `host` that fall inside the grid, in
/// ascending flat order.
void stencil_cells(const Grid& g, const Stencil& st, std::size_t host, std::vector<std::size_t>& out) {
  out.clear();
  auto [i0, i1] = g.coords(host);
  const long n0 = static_cast<long>(g.cells(0));
  const long n1 = static_cast<long>(g.cells(1));
  for (const auto& o : st.offsets) {
    const long j0 = static_cast<long>(i0) + o[0];
    const long j1 = static_cast<long>(i1) + o[1];
    if (j0 < 0 || j0 >= n0 || j1 < 0 || j1 >= n1) continue;
    out.push_back(g.index(static_cast<std::size_t>(j0), static_cast<std::size_t>(j1)));
  }
}

template <class Fn>
void parallel_slices(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (std::size_t k = t; k < count; k += threads) fn(k);
    });
  for (auto& th : pool) th.join();
}

Grid shrink(const Grid& g, double s) {
  if (g.dim() == 1) return Grid::line(g.lo(0) / s, g.hi(0) / s, g.cells(0));
  return Grid::rect({g.lo(0) / s, g.lo(1) / s}, {g.hi(0) / s, g.hi(1) / s}, {g.cells(0), g.cells(1)});
}

TimeAxis shrink(const TimeAxis& a, double s) { return TimeAxis(a.t0() / (s * s), a.T() / (s * s), a.steps()); }

void check_scale(double s) {
  if (!(std::isfinite(s) && s > 0.0)) throw std::invalid_argument("scale: factor must be positive");
  const bool integer = std::abs(s - std::round(s)) <= 1e-12 * s;
  const bool reciprocal = std::abs(1.0 / s - std::round(1.0 / s)) <= 1e-12 / s;
  if (!integer && !reciprocal) throw std::invalid_argument("scale: factor must be an integer or its reciprocal");
}

}  // namespace

double lp_norm(const Field& f, double p) {
  check_exponent(p);
  double s = 0.0;
  for (double v : f.values()) s += std::pow(std::abs(v), p);
  return std::pow(s * f.grid().cell_volume(), 1.0 / p);
}

double lp_norm(const SpaceTimeField& f, double p) {
  check_exponent(p);
  double s = 0.0;
  for (std::size_t k = 1; k < f.slices(); ++k)
    for (double v : f.slice(k).values()) s += std::pow(std::abs(v), p);
  return std::pow(s * f.grid().cell_volume() * f.axis().dt(), 1.0 / p);
}

double lp_norm(const SpaceTimeField& f, double p, const ParabolicCube& cube) {
  check_exponent(p);
  const auto range = cube.slice_range(f.axis());
  const auto cells = cells_in(f.grid(), cube.ball());
  if (!range || cells.empty()) throw std::domain_error("empty region");
  double s = 0.0;
  for (std::size_t k = range->first; k <= range->second; ++k)
    for (auto c : cells) s += std::pow(std::abs(f.slice(k)[c]), p);
  return std::pow(s * f.grid().cell_volume() * f.axis().dt(), 1.0 / p);
}

double gradient_lp_norm(const SpaceTimeField& f, double p) {
  check_exponent(p);
  double s = 0.0;
  for (std::size_t k = 1; k < f.slices(); ++k)
    for (const auto& g : cell_gradient(f.slice(k))) s += std::pow(std::sqrt(grad_sq(g)), p);
  return std::pow(s * f.grid().cell_volume() * f.axis().dt(), 1.0 / p);
}

// ---------------------------------------------------------------------------
// Maximal function

MaximalConfig MaximalConfig::dyadic(const Grid& grid, CubeVariant variant) {
  MaximalConfig cfg;
  cfg.variant = variant;
  const double diam = grid.diameter();
  for (double r = grid.min_spacing(); r <= diam * (1.0 + 1e-12); r *= 2.0) cfg.radii.push_back(r);
  return cfg;
}

void MaximalConfig::validate() const {
  if (radii.empty()) throw std::invalid_argument("maximal: empty radius set");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(std::isfinite(radii[i]) && radii[i] > 0.0)) throw std::invalid_argument("maximal: radii must be positive");
    if (i > 0 && !(radii[i] > radii[i - 1])) throw std::invalid_argument("maximal: radii must ascend");
  }
  if (threads == 0) throw std::invalid_argument("maximal: threads must be positive");
}

SpaceTimeField parabolic_maximal(const SpaceTimeField& f, const std::optional<ParabolicCube>& region,
                                 const MaximalConfig& cfg) {
  cfg.validate();
  const Grid& g = f.grid();
  const TimeAxis& axis = f.axis();
  const std::size_t n = g.size();
  const std::size_t slices = f.slices();

  // |f| chi_U, with chi_U = 1 on Omega_T when no region is given.
  std::vector<std::vector<double>> masked(slices, std::vector<double>(n, 0.0));
  std::vector<char> in_region(n, 1);
  if (region) {
    std::fill(in_region.begin(), in_region.end(), 0);
    for (auto c : cells_in(g, region->ball())) in_region[c] = 1;
  }
  for (std::size_t k = 1; k < slices; ++k) {
    if (region && !region->contains_time(axis, k)) continue;
    for (std::size_t i = 0; i < n; ++i)
      if (in_region[i]) masked[k][i] = std::abs(f.slice(k)[i]);
  }

  std::vector<Stencil> stencils;
  for (double r : cfg.radii) stencils.push_back(ball_stencil(g, r));

  const double vol = g.cell_volume();
  const double dt = axis.dt();
  std::vector<std::vector<double>> out(slices, std::vector<double>(n, 0.0));
  parallel_slices(slices, cfg.threads, [&](std::size_t k) {
    std::vector<std::size_t> cells;
    for (std::size_t r = 0; r < cfg.radii.size(); ++r) {
      const ParabolicCube cube{g.center(0), axis.time(k), cfg.radii[r], cfg.variant};
      const auto range = cube.slice_range(axis);
      if (!range) continue;
      const double nslices = static_cast<double>(range->second - range->first + 1);
      for (std::size_t i = 0; i < n; ++i) {
        stencil_cells(g, stencils[r], i, cells);
        double s = 0.0;
        for (std::size_t kk = range->first; kk <= range->second; ++kk)
          for (auto c : cells) s += masked[kk][c];
        const double avg = (s * vol * dt) / (static_cast<double>(cells.size()) * vol * nslices * dt);
        out[k][i] = std::max(out[k][i], avg);
      }
    }
  });

  std::vector<Field> fields;
  fields.reserve(slices);
  for (auto& s : out) fields.emplace_back(g, std::move(s));
  return SpaceTimeField(axis, std::move(fields));
}

// ---------------------------------------------------------------------------
// BMO

double bmo_seminorm(const TensorField& a, const TimeAxis& axis, double R, std::vector<double> radii) {
  const Grid& g = a.grid();
  if (a.time_dependent() && !(*a.axis() == axis)) throw std::invalid_argument("bmo: tensor time axis differs");
  if (radii.empty()) radii = MaximalConfig::dyadic(g).radii;
  std::vector<double> used;
  for (double r : radii)
    if (r <= R * (1.0 + 1e-12)) used.push_back(r);
  if (used.empty()) throw std::invalid_argument("bmo: R below the smallest radius");
  const int dim = g.dim();
  const std::size_t n = g.size();
  const double dt = axis.dt();

  double best = 0.0;
  std::vector<std::size_t> cells;
  for (double rho : used) {
    const Stencil st = ball_stencil(g, rho);
    // Number of lattice slices in (s - rho^2, s] irrespective of clipping.
    std::size_t full_slices = 0;
    for (long j = 0;; --j) {
      if (static_cast<double>(j) * dt > -rho * rho + kMembershipTol * dt) ++full_slices;
      else break;
    }
    const double full = static_cast<double>(st.offsets.size()) * static_cast<double>(full_slices);

    for (std::size_t k = 1; k <= axis.steps(); ++k) {
      const ParabolicCube cube{g.center(0), axis.time(k), rho, CubeVariant::backward};
      const auto range = cube.slice_range(axis);
      for (std::size_t y = 0; y < n; ++y) {
        stencil_cells(g, st, y, cells);
        double s = 0.0;
        for (std::size_t kk = range->first; kk <= range->second; ++kk) {
          SymMat mean;
          for (auto c : cells) mean = mean + a.at(kk, c);
          mean = mean * (1.0 / static_cast<double>(cells.size()));
          for (auto c : cells) s += frobenius_sq(a.at(kk, c) - mean, dim);
        }
        best = std::max(best, s / full);
      }
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Level sets

LevelSetSum level_set_sum_from_maximal(const SpaceTimeField& m, double delta, double N, double q,
                                       std::size_t j_max) {
  if (!(delta > 0.0)) throw std::invalid_argument("level sets: delta must be positive");
  if (!(N > 1.0)) throw std::invalid_argument("level sets: N must exceed 1");
  if (!(q > 1.0)) throw std::invalid_argument("level sets: q must exceed 1");
  const double w = m.grid().cell_volume() * m.axis().dt();
  LevelSetSum out;
  for (std::size_t k = 1; k < m.slices(); ++k)
    for (double v : m.slice(k).values()) out.bound += std::pow(v, q) * w;
  const double nq = std::pow(N, q);
  for (std::size_t j = 0; j <= j_max; ++j) {
    const double level = delta * std::pow(N, static_cast<double>(j));
    std::size_t count = 0;
    for (std::size_t k = 1; k < m.slices(); ++k)
      for (double v : m.slice(k).values())
        if (v > level) ++count;
    if (count == 0) continue;
    out.sum += (nq - 1.0) * std::pow(delta, q) * std::pow(N, q * (static_cast<double>(j) - 1.0)) *
               static_cast<double>(count) * w;
  }
  return out;
}

LevelSetSum level_set_sum(const SpaceTimeField& f, double delta, double N, double q, std::size_t j_max,
                          const std::optional<MaximalConfig>& cfg) {
  std::vector<Field> sq;
  for (std::size_t k = 0; k < f.slices(); ++k) {
    std::vector<double> v(f.slice(k).values().begin(), f.slice(k).values().end());
    for (auto& e : v) e *= e;
    sq.emplace_back(f.grid(), std::move(v));
  }
  const SpaceTimeField f2(f.axis(), std::move(sq));
  const auto m = parabolic_maximal(f2, std::nullopt, cfg ? *cfg : MaximalConfig::dyadic(f.grid()));
  return level_set_sum_from_maximal(m, delta, N, q, j_max);
}

// ---------------------------------------------------------------------------
// De Giorgi

std::pair<double, double> degiorgi_exponents(int n) {
  if (n < 1) throw std::invalid_argument("de giorgi: dimension must be positive");
  const double r = 2.0 * (n + 2) / n;
  return {r, 2.0 * (1.0 - 2.0 / r)};
}

double degiorgi_c2(const DeGiorgiConstants& k) {
  const double lam = k.ellipticity;
  return std::sqrt(8.0 * lam * k.c1 * k.c1 * (1.0 + (1.0 + k.m0 + k.m1 * k.m1) * lam * lam * lam + k.theta * k.theta));
}

namespace {

struct ReferenceCube {
  double sigma;
  double weight;  // reference measure of one space-time cell
};

ReferenceCube reference_cube(const SpaceTimeField& w, const ParabolicCube& cube) {
  if (cube.variant != CubeVariant::centered) throw std::invalid_argument("de giorgi: cube must be centered");
  if (!(cube.radius > 0.0)) throw std::invalid_argument("de giorgi: radius must be positive");
  const Grid& g = w.grid();
  const TimeAxis& axis = w.axis();
  const double slack = kMembershipTol * g.min_spacing();
  for (int ax = 0; ax < g.dim(); ++ax)
    if (cube.center[ax] - cube.radius < g.lo(ax) - slack || cube.center[ax] + cube.radius > g.hi(ax) + slack)
      throw std::domain_error("de giorgi: cube leaves the domain");
  const double r2 = cube.radius * cube.radius;
  const double tslack = kMembershipTol * axis.dt();
  if (cube.time - r2 < axis.t0() - tslack || cube.time + r2 > axis.T() + tslack)
    throw std::domain_error("de giorgi: cube leaves the time interval");
  const double sigma = cube.radius / 4.0;
  return {sigma, g.cell_volume() * axis.dt() / std::pow(sigma, g.dim() + 2)};
}

/// sqrt(sum over the cube of ((w - level)^+)^2) in reference measure.
double truncated_l2(const SpaceTimeField& w, const ParabolicCube& cube, double level, double weight) {
  const auto range = cube.slice_range(w.axis());
  const auto cells = cells_in(w.grid(), cube.ball());
  if (!range || cells.empty()) throw std::domain_error("de giorgi: grid too coarse, nested cube is empty");
  double s = 0.0;
  for (std::size_t k = range->first; k <= range->second; ++k)
    for (auto c : cells) {
      const double e = std::max(w.slice(k)[c] - level, 0.0);
      s += e * e;
    }
  return std::sqrt(s * weight);
}

}  // namespace

double degiorgi_level(const SpaceTimeField& w, const ParabolicCube& cube, const DeGiorgiConstants& consts) {
  const auto ref = reference_cube(w, cube);
  const auto [r, mu] = degiorgi_exponents(consts.n);
  (void)r;
  const auto range = cube.slice_range(w.axis());
  const auto cells = cells_in(w.grid(), cube.ball());
  if (!range || cells.empty()) throw std::domain_error("de giorgi: grid too coarse, cube is empty");
  double s = 0.0;
  for (std::size_t k = range->first; k <= range->second; ++k)
    for (auto c : cells) s += w.slice(k)[c] * w.slice(k)[c];
  const double norm = std::sqrt(s * ref.weight);
  return norm * std::pow(16.0, 1.0 / (mu * mu)) * std::pow(32.0 * consts.c0 * degiorgi_c2(consts), 1.0 / mu);
}

DeGiorgiTrace degiorgi_trace(const SpaceTimeField& w, const ParabolicCube& cube, double K, std::size_t j_max,
                             const DeGiorgiConstants& consts) {
  if (!(std::isfinite(K) && K > 0.0)) throw std::invalid_argument("de giorgi: K must be positive");
  if (j_max > kMaxDeGiorgiLevel)
    throw std::invalid_argument("de giorgi: levels indistinguishable beyond j = " +
                                std::to_string(kMaxDeGiorgiLevel) + " (max feasible j)");
  const auto ref = reference_cube(w, cube);

  DeGiorgiTrace t;
  t.K = K;
  std::tie(t.r, t.mu) = degiorgi_exponents(consts.n);
  t.c2 = degiorgi_c2(consts);
  t.A = 32.0 * consts.c0 * t.c2 / std::pow(K, t.mu);
  t.threshold = std::pow(t.A, -1.0 / t.mu) * std::pow(t.B, -1.0 / (t.mu * t.mu));

  const ParabolicCube inner{cube.center, cube.time, 3.0 * ref.sigma, CubeVariant::centered};
  if (cells_in(w.grid(), inner.ball()).empty() || !inner.slice_range(w.axis()))
    throw std::domain_error("de giorgi: grid too coarse, inner cube is empty (max feasible j: none)");

  for (std::size_t j = 0; j <= j_max; ++j) {
    const double level = K * (1.0 - std::ldexp(1.0, -static_cast<int>(j)));
    const double rj = 3.0 + std::ldexp(1.0, -static_cast<int>(j) - 2);
    const ParabolicCube qj{cube.center, cube.time, rj * ref.sigma, CubeVariant::centered};
    t.levels.push_back(level);
    t.radii.push_back(rj);
    t.energies.push_back(truncated_l2(w, qj, level, ref.weight));
  }
  for (std::size_t j = 0; j + 1 < t.energies.size(); ++j) {
    if (t.energies[j] <= 0.0) continue;
    const double ratio =
        t.energies[j + 1] / (std::pow(t.B, static_cast<double>(j)) * std::pow(t.energies[j], 1.0 + t.mu));
    t.fitted_A = std::max(t.fitted_A, ratio);
  }

  const auto range = inner.slice_range(w.axis());
  for (std::size_t k = range->first; k <= range->second; ++k)
    for (auto c : cells_in(w.grid(), inner.ball()))
      if (w.slice(k)[c] > K) ++t.exceed_inner;
  return t;
}

double calibrate_sobolev_constant(const Grid& grid, const TimeAxis& axis, const ParabolicCube& cube, int n) {
  if (n != grid.dim()) throw std::invalid_argument("sobolev calibration: dimension mismatch");
  SpaceTimeField probe = SpaceTimeField::constant(grid, axis, 0.0);
  const auto ref = reference_cube(probe, cube);
  const auto [r, mu] = degiorgi_exponents(n);
  (void)mu;
  const auto range = cube.slice_range(axis);
  const auto cells = cells_in(grid, cube.ball());
  if (!range || cells.empty()) throw std::domain_error("sobolev calibration: empty cube");
  const double sigma = ref.sigma;
  const double wx = grid.cell_volume() / std::pow(sigma, n);

  // Separable cos^2 bumps of half-width a (space) and b (time), fully
  // supported in B_4 x (-16, 16] in reference coordinates.
  const double pi = std::numbers::pi;
  auto bump = [pi](double z, double half) {
    if (std::abs(z) >= half) return std::pair{0.0, 0.0};
    const double c = std::cos(pi * z / (2.0 * half));
    const double s = std::sin(pi * z / (2.0 * half));
    return std::pair{c * c, -pi / half * c * s};
  };
  const double max_half = n == 1 ? 3.9 : 2.75;
  const std::vector<double> spatial = {0.5, 1.0, 2.0, max_half};
  const std::vector<double> temporal = {1.0, 4.0, 8.0, 15.9};
  const std::vector<double> shifts = {-0.5, 0.0, 0.5};

  double best = 0.0;
  for (double a : spatial) {
    for (double b : temporal) {
      for (double shift : shifts) {
        const double cx = shift * (4.0 - a * std::sqrt(static_cast<double>(n))) ;
        const double ct = shift * (16.0 - b);
        double lr = 0.0, grad = 0.0, sup = 0.0;
        for (std::size_t k = range->first; k <= range->second; ++k) {
          const double tau = (axis.time(k) - cube.time) / (sigma * sigma);
          const double pt = bump(tau - ct, b).first;
          double slice_l2 = 0.0;
          for (auto c : cells) {
            const Point p = grid.center(c);
            const double y0 = (p[0] - cube.center[0]) / sigma - cx;
            const auto [f0, d0] = bump(y0, a);
            double f1 = 1.0, d1 = 0.0;
            if (n == 2) std::tie(f1, d1) = bump((p[1] - cube.center[1]) / sigma, a);
            const double phi = f0 * f1 * pt;
            const double g0 = d0 * f1 * pt;
            const double g1 = f0 * d1 * pt;
            lr += std::pow(std::abs(phi), r);
            grad += g0 * g0 + g1 * g1;
            slice_l2 += phi * phi;
          }
          sup = std::max(sup, slice_l2 * wx);
        }
        const double denom = std::sqrt(sup) + std::sqrt(grad * ref.weight);
        if (denom <= 0.0) continue;
        best = std::max(best, std::pow(lr * ref.weight, 1.0 / r) / denom);
      }
    }
  }
  if (best <= 0.0) throw std::domain_error("sobolev calibration: grid too coarse to resolve any bump");
  return best;
}

// ---------------------------------------------------------------------------
// Bootstrap

BootstrapLadder bootstrap_ladder(int n, double l1, double p0) {
  if (n < 2) throw std::invalid_argument("ladder: n must be >= 2");
  if (!(l1 > 2.0)) throw std::invalid_argument("ladder: l1 must exceed 2");
  if (!(p0 > n)) throw std::invalid_argument("ladder: p0 must exceed n");
  BootstrapLadder out{n, l1, p0, {l1}, 1, false};
  const double target = std::min(p0, static_cast<double>(n + 2));
  while (out.terms.back() < target) {
    const double denom = n + 2 - out.terms.back();
    if (denom <= 0.0) break;
    out.terms.push_back(out.terms.back() * (n + 1) / denom);
  }
  out.terminal = out.terms.size();
  out.unbounded = n + 2 - out.terms.back() <= 0.0;
  return out;
}

double bootstrap_mu(double q, int n) {
  if (!(q > 1.0)) throw std::invalid_argument("bootstrap mu: q must exceed 1");
  if (n < 1) throw std::invalid_argument("bootstrap mu: n must be positive");
  const double qbar = 2.0 + 4.0 * q / (n * (q + 1.0));
  return 2.0 * (q - 1.0) / (qbar * (q + 1.0)) * (2.0 / n + 1.0);
}

// ---------------------------------------------------------------------------
// Scaling

ScaledField scale_transform(const SpaceTimeField& u, const ModelParams& params, double s) {
  check_scale(s);
  params.validate();
  ModelParams scaled = params;
  scaled.lambda = params.lambda * s;
  scaled.theta = params.theta * s;
  scaled.validate();
  const Grid g = shrink(u.grid(), s);
  std::vector<Field> slices;
  for (std::size_t k = 0; k < u.slices(); ++k) {
    std::vector<double> v(u.slice(k).values().begin(), u.slice(k).values().end());
    for (auto& e : v) e /= s;
    slices.emplace_back(g, std::move(v));
  }
  return {SpaceTimeField(shrink(u.axis(), s), std::move(slices)), scaled};
}

SpaceTimeField scale_coefficient(const SpaceTimeField& c, double s) {
  check_scale(s);
  const Grid g = shrink(c.grid(), s);
  std::vector<Field> slices;
  for (std::size_t k = 0; k < c.slices(); ++k)
    slices.emplace_back(g, std::vector<double>(c.slice(k).values().begin(), c.slice(k).values().end()));
  return SpaceTimeField(shrink(c.axis(), s), std::move(slices));
}

TensorField scale_coefficient(const TensorField& a, double s) {
  check_scale(s);
  const Grid g = shrink(a.grid(), s);
  std::vector<std::vector<SymMat>> slices;
  for (std::size_t k = 0; k < a.slices(); ++k) {
    std::vector<SymMat> m(a.grid().size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = a.at(k, i);
    slices.push_back(std::move(m));
  }
  std::optional<TimeAxis> axis;
  if (a.axis()) axis = shrink(*a.axis(), s);
  return TensorField(g, a.ellipticity(), std::move(slices), axis);
}

// ---------------------------------------------------------------------------
// Ratios

double estimate_ratio(const SpaceTimeField& u, const ModelParams& params, const SpaceTimeField& c, double p,
                      double tbar) {
  params.validate();
  if (!(p > 2.0)) throw std::invalid_argument("estimate ratio: p must exceed 2");
  const TimeAxis& axis = u.axis();
  if (!(tbar > axis.t0() && tbar < axis.T())) throw std::invalid_argument("estimate ratio: tbar outside (t0, T)");
  if (!(c.grid() == u.grid()) || !(c.axis() == axis)) throw std::invalid_argument("estimate ratio: shapes differ");
  const double w = u.grid().cell_volume() * axis.dt();
  double num = 0.0;
  for (std::size_t k = 1; k < u.slices(); ++k) {
    if (axis.time(k) < tbar - kMembershipTol * axis.dt()) continue;
    for (const auto& g : cell_gradient(u.slice(k))) num += std::pow(std::sqrt(grad_sq(g)), p) * w;
  }
  const double base = std::max(params.theta / params.lambda, lp_norm(u, 2.0));
  const double cp = std::pow(lp_norm(c, p), p);
  return num / (std::pow(base, p) + cp);
}

double w1infty_ratio(const SpaceTimeField& v, const ParabolicCube& inner, const ParabolicCube& outer) {
  const Grid& g = v.grid();
  const auto ri = inner.slice_range(v.axis());
  const auto ro = outer.slice_range(v.axis());
  const auto ci = cells_in(g, inner.ball());
  const auto co = cells_in(g, outer.ball());
  if (!ri || !ro || ci.empty() || co.empty()) throw std::domain_error("empty region");
  if (ri->first < ro->first || ri->second > ro->second ||
      !std::includes(co.begin(), co.end(), ci.begin(), ci.end()))
    throw std::invalid_argument("w1infty ratio: inner cube not contained in outer cube");
  double num = 0.0, sum = 0.0;
  for (std::size_t k = ro->first; k <= ro->second; ++k) {
    const auto grad = cell_gradient(v.slice(k));
    for (auto c : co) sum += grad_sq(grad[c]);
    if (k >= ri->first && k <= ri->second)
      for (auto c : ci) num = std::max(num, grad_sq(grad[c]));
  }
  const double mean = sum / (static_cast<double>(co.size()) * static_cast<double>(ro->second - ro->first + 1));
  if (mean == 0.0) {
    if (num == 0.0) return 0.0;
    throw std::domain_error("w1infty ratio: zero denominator");
  }
  return num / mean;
}

}  // namespace sktlab
