#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "sktlab/analysis.hpp"
#include "sktlab/parabolic.hpp"
#include "sktlab/picard.hpp"

using namespace sktlab;
using doctest::Approx;

namespace {

double l2_distance(const SpaceTimeField& a, const SpaceTimeField& b) {
  double s = 0.0;
  for (std::size_t k = 1; k < a.slices(); ++k)
    for (std::size_t i = 0; i < a.grid().size(); ++i) {
      const double d = a.slice(k)[i] - b.slice(k)[i];
      s += d * d;
    }
  return std::sqrt(s * a.grid().cell_volume() * a.axis().dt());
}

TensorField oscillatory(const Grid& g, double amplitude, double frequency) {
  return TensorField::from_function(g, 2.0, [=](Point p) {
    const double s = std::sin(frequency * p[0]) * std::sin(frequency * p[1]);
    return SymMat{1.0 + amplitude * s, 0.0, 1.0 - amplitude * s};
  });
}

SpaceTimeField random_field(std::mt19937& rng, const Grid& g, const TimeAxis& axis, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Field> s;
  for (std::size_t k = 0; k < axis.slices(); ++k) {
    std::vector<double> v(g.size());
    for (auto& e : v) e = u(rng);
    s.emplace_back(g, std::move(v));
  }
  return SpaceTimeField(axis, std::move(s));
}

}  // namespace

TEST_CASE("picard trivial fixed points") {
  const Grid g = Grid::rect({0, 0}, {1, 1}, {8, 8});
  const TimeAxis axis(0.0, 0.5, 8);
  const auto a = oscillatory(g, 0.5, 7.0);
  SUBCASE("zero datum") {
    std::mt19937 rng(3);
    const auto r = picard_solve({1.0, 2.0, 0.7, 2.0}, a, random_field(rng, g, axis, 0.0, 2.0), Field::constant(g, 0.0));
    CHECK(r.u.min() == 0.0);
    CHECK(r.u.max() == 0.0);
  }
  SUBCASE("logistic equilibrium") {
    const ModelParams m{1.0, 2.0, 0.7, 2.0};
    const auto r = picard_solve(m, a, SpaceTimeField::constant(g, axis, 0.0), Field::constant(g, 0.5));
    CHECK(r.u.min() == Approx(0.5).epsilon(1e-12));
    CHECK(r.u.max() == Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("picard matches a damped Newton solve of the coupled discrete system") {
  // 1D, 4 cells on [0, 1], 2 steps, alpha = lambda = theta = 1, c = 0.
  const Grid g = Grid::line(0.0, 1.0, 4);
  const TimeAxis axis(0.0, 0.1, 2);
  const ModelParams m{1.0, 1.0, 1.0, 1.0};
  const std::vector<double> u0{0.2, 0.4, 0.6, 0.8};
  PicardConfig cfg;
  cfg.l2_tolerance = 1e-13;
  cfg.solve_tolerance = 1e-14;
  const auto r = picard_solve(m, TensorField::identity(g), SpaceTimeField::constant(g, axis, 0.0), Field(g, u0), cfg);

  const double h = 0.25, dt = axis.dt();
  auto residual = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd f(8);
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < 4; ++i) {
        const double ui = x(4 * k + i);
        const double prev = k == 0 ? u0[i] : x(i);
        double div = 0.0;
        for (int j : {i - 1, i + 1}) {
          if (j < 0 || j > 3) continue;
          const double uj = x(4 * k + j);
          div += 0.5 * ((1.0 + ui) + (1.0 + uj)) * (uj - ui) / (h * h);
        }
        f(4 * k + i) = (ui - prev) / dt - div - ui * (1.0 - ui);
      }
    return f;
  };
  Eigen::VectorXd x(8);
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 4; ++i) x(4 * k + i) = u0[i];
  for (int it = 0; it < 50; ++it) {
    const Eigen::VectorXd f = residual(x);
    if (f.norm() < 1e-13) break;
    Eigen::MatrixXd jac(8, 8);
    for (int c = 0; c < 8; ++c) {
      Eigen::VectorXd xp = x, xm = x;
      xp(c) += 1e-7;
      xm(c) -= 1e-7;
      jac.col(c) = (residual(xp) - residual(xm)) / 2e-7;
    }
    const Eigen::VectorXd step = jac.fullPivLu().solve(-f);
    double damp = 1.0;
    while (damp > 1e-4 && residual(x + damp * step).norm() >= f.norm()) damp *= 0.5;
    x += damp * step;
  }
  REQUIRE(residual(x).norm() < 1e-10);
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 4; ++i) CHECK(r.u.slice(k + 1)[i] == Approx(x(4 * k + i)).epsilon(1e-6));
}

TEST_CASE("every picard iterate stays in the bracket") {
  std::mt19937 rng(5);
  const Grid g = Grid::rect({0, 0}, {1, 1}, {10, 10});
  const TimeAxis axis(0.0, 0.5, 10);
  for (double lambda : {0.5, 2.0, 8.0}) {
    const ModelParams m{2.0, lambda, 0.9, 2.0};
    std::uniform_real_distribution<double> u(0.0, 1.0 / lambda);
    std::vector<double> v(g.size());
    for (auto& e : v) e = u(rng);
    std::size_t seen = 0;
    double lo = 1.0, hi = -1.0;
    auto observer = [&](std::size_t, const SpaceTimeField& w) {
      ++seen;
      lo = std::min(lo, w.min());
      hi = std::max(hi, w.max());
    };
    for (auto start : {StartIterate::datum, StartIterate::zero, StartIterate::upper}) {
      PicardConfig cfg;
      cfg.start = start;
      picard_solve(m, oscillatory(g, 0.5, 9.0), random_field(rng, g, axis, 0.0, 3.0), Field(g, v), cfg, nullptr,
                   observer);
    }
    CHECK(seen > 3);
    CHECK(lo >= -1e-10);
    CHECK(hi <= 1.0 / lambda + 1e-10);
  }
}

TEST_CASE("picard gap history and failures") {
  const Grid g = Grid::rect({0, 0}, {1, 1}, {6, 6});
  const TimeAxis axis(0.0, 0.5, 6);
  const ModelParams m{1.0, 1.0, 1.0, 1.0};
  const auto c = SpaceTimeField::constant(g, axis, 0.5);
  const auto u0 = Field::from_function(g, [](Point p) { return 0.2 + 0.6 * p[0] * p[1]; });
  PicardConfig cfg;
  cfg.l2_tolerance = 1e-10;
  const auto r = picard_solve(m, TensorField::identity(g), c, u0, cfg);
  REQUIRE(!r.gaps.empty());
  CHECK(r.gaps.back() <= cfg.l2_tolerance);
  for (std::size_t i = 0; i + 1 < r.gaps.size(); ++i) CHECK(r.gaps[i] > cfg.l2_tolerance);

  cfg.max_iterations = 2;
  cfg.l2_tolerance = 1e-300;
  try {
    picard_solve(m, TensorField::identity(g), c, u0, cfg);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(std::string(e.what()).find("no convergence") != std::string::npos);
    CHECK(e.gaps().size() == 2);
  }

  CHECK_THROWS_AS(picard_solve(m, TensorField::identity(g), c, Field::constant(g, 1.5)), std::invalid_argument);
  CHECK_THROWS_AS(picard_solve(m, TensorField::identity(g), SpaceTimeField::constant(g, axis, -1.0), u0),
                  std::invalid_argument);
  PicardConfig bad;
  bad.relaxation = 0.0;
  CHECK_THROWS_AS(picard_solve(m, TensorField::identity(g), c, u0, bad), std::invalid_argument);
}

TEST_CASE("picard limits agree across starting iterates") {
  const Grid g = Grid::rect({0, 0}, {1, 1}, {12, 12});
  const TimeAxis axis(0.0, 0.5, 16);
  const ModelParams m{1.0, 2.0, 0.8, 2.0};
  std::mt19937 rng(11);
  const auto c = random_field(rng, g, axis, 0.0, 1.0);
  const auto u0 = Field::from_function(g, [](Point p) { return 0.25 * (1.0 + std::cos(3.0 * p[0]) * p[1]); });
  PicardConfig cfg;
  cfg.l2_tolerance = 1e-9;
  cfg.start = StartIterate::zero;
  const auto a = picard_solve(m, oscillatory(g, 0.4, 11.0), c, u0, cfg);
  cfg.start = StartIterate::upper;
  const auto b = picard_solve(m, oscillatory(g, 0.4, 11.0), c, u0, cfg);
  CHECK(l2_distance(a.u, b.u) <= 10.0 * cfg.l2_tolerance);
}

TEST_CASE("relaxation converges to the same limit") {
  const Grid g = Grid::rect({0, 0}, {1, 1}, {8, 8});
  const TimeAxis axis(0.0, 0.5, 8);
  const ModelParams m{3.0, 1.0, 1.0, 1.0};
  const auto c = SpaceTimeField::constant(g, axis, 0.0);
  const auto u0 = Field::from_function(g, [](Point p) { return p[0]; });
  PicardConfig cfg;
  cfg.l2_tolerance = 1e-11;
  const auto full = picard_solve(m, TensorField::identity(g), c, u0, cfg);
  cfg.relaxation = 0.6;
  const auto damped = picard_solve(m, TensorField::identity(g), c, u0, cfg);
  CHECK(l2_distance(full.u, damped.u) <= 1e-9);
}

TEST_CASE("reference solve with constant coefficient reproduces picard") {
  const Grid g = Grid::rect({0, 0}, {1, 1}, {16, 16});
  const TimeAxis axis(0.0, 0.25, 16);
  const ModelParams m{1.0, 1.0, 0.9, 3.0};
  const auto a = TensorField::from_function(g, 3.0, [](Point) { return SymMat{2.0, 0.0, 0.5}; });
  const auto u0 = Field::from_function(g, [](Point p) { return 0.3 + 0.4 * std::sin(3.0 * p[0] + p[1]); });
  PicardConfig cfg;
  cfg.l2_tolerance = 1e-12;
  cfg.solve_tolerance = 1e-13;
  const auto u = picard_solve(m, a, SpaceTimeField::constant(g, axis, 0.0), u0, cfg).u;
  const ParabolicCube cube{{0.5, 0.5}, 0.1, 0.3, CubeVariant::centered};
  const auto v = reference_solve(m, a, cube, u, cfg);
  for (std::size_t k = 0; k < axis.slices(); ++k)
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(v.slice(k)[i] == Approx(u.slice(k)[i]).epsilon(1e-8));
  CHECK(v.min() >= 0.0);
  CHECK(v.max() <= 1.0 / m.lambda + 1e-10);
}

TEST_CASE("reference solve with zero data is zero") {
  const Grid g = Grid::rect({0, 0}, {1, 1}, {12, 12});
  const TimeAxis axis(0.0, 0.25, 8);
  const auto zero = SpaceTimeField::constant(g, axis, 0.0);
  const ParabolicCube cube{{0.5, 0.5}, 0.1, 0.3, CubeVariant::centered};
  const auto v = reference_solve({1.0, 1.0, 1.0, 2.0}, oscillatory(g, 0.5, 13.0), cube, zero);
  CHECK(v.min() == 0.0);
  CHECK(v.max() == 0.0);
}

TEST_CASE("reference solve rejects cubes outside the domain") {
  const Grid g = Grid::rect({0, 0}, {1, 1}, {8, 8});
  const TimeAxis axis(0.0, 0.25, 8);
  const auto zero = SpaceTimeField::constant(g, axis, 0.0);
  const ModelParams m{1.0, 1.0, 1.0, 1.0};
  CHECK_THROWS_AS(reference_solve(m, TensorField::identity(g), {{0.9, 0.5}, 0.1, 0.3}, zero), std::domain_error);
  CHECK_THROWS_AS(reference_solve(m, TensorField::identity(g), {{0.5, 0.5}, 0.2, 0.3}, zero), std::domain_error);
}

TEST_CASE("approximation gap shrinks with the coefficient oscillation") {
  const Grid g = Grid::rect({0, 0}, {1, 1}, {24, 24});
  const TimeAxis axis(0.0, 0.25, 16);
  const ModelParams m{1.0, 1.0, 0.8, 2.0};
  const auto u0 = Field::from_function(g, [](Point p) { return 0.5 + 0.4 * std::cos(4.0 * p[0]) * std::sin(3.0 * p[1]); });
  const ParabolicCube cube{{0.5, 0.5}, 0.12, 0.3, CubeVariant::centered};
  std::vector<double> gaps;
  for (double amp : {0.45, 0.25, 0.1}) {
    const auto a = oscillatory(g, amp, 25.0);
    const auto u = picard_solve(m, a, SpaceTimeField::constant(g, axis, 0.0), u0).u;
    const auto v = reference_solve(m, a, cube, u);
    gaps.push_back(approximation_gap(u, v, cube).l2_gap);
  }
  CHECK(gaps[0] > gaps[1]);
  CHECK(gaps[1] > gaps[2]);
}

TEST_CASE("approximation gap examples") {
  const Grid g = Grid::rect({0, 0}, {1, 1}, {10, 10});
  const TimeAxis axis(0.0, 0.5, 10);
  const ParabolicCube cube{{0.5, 0.5}, 0.25, 0.3, CubeVariant::centered};
  std::mt19937 rng(17);
  const auto u = random_field(rng, g, axis, 0.0, 1.0);
  const auto same = approximation_gap(u, u, cube);
  CHECK(same.l2_gap == 0.0);
  CHECK(same.h1_gap == 0.0);

  std::vector<Field> shifted;
  for (std::size_t k = 0; k < axis.slices(); ++k) {
    std::vector<double> v(u.slice(k).values().begin(), u.slice(k).values().end());
    for (auto& e : v) e -= 1.0;
    shifted.emplace_back(g, v);
  }
  const auto one = approximation_gap(u, SpaceTimeField(axis, shifted), cube);
  CHECK(one.l2_gap == Approx(measure(g, axis, cube)).epsilon(1e-12));
  CHECK(one.h1_gap == Approx(0.0));

  // Independent quadrature with explicit central differences.
  const auto v = random_field(rng, g, axis, 0.0, 1.0);
  const auto gap = approximation_gap(u, v, cube);
  const auto range = cube.slice_range(axis);
  double l2 = 0.0, h1 = 0.0;
  const double h = 0.1;
  for (std::size_t k = range->first; k <= range->second; ++k) {
    auto d = [&](long i0, long i1) {
      return u.slice(k)[g.index(i0, i1)] - v.slice(k)[g.index(i0, i1)];
    };
    for (long i0 = 0; i0 < 10; ++i0)
      for (long i1 = 0; i1 < 10; ++i1) {
        const double x = (i0 + 0.5) * h - 0.5, y = (i1 + 0.5) * h - 0.5;
        if (x * x + y * y >= 0.3 * 0.3 * (1.0 - 1e-9)) continue;
        l2 += d(i0, i1) * d(i0, i1) * h * h * axis.dt();
        auto diff = [&](long a0, long a1, long b0, long b1, double span) {
          return (d(b0, b1) - d(a0, a1)) / span;
        };
        const double gx = i0 == 0 ? diff(0, i1, 1, i1, h) : i0 == 9 ? diff(8, i1, 9, i1, h)
                                                                     : diff(i0 - 1, i1, i0 + 1, i1, 2 * h);
        const double gy = i1 == 0 ? diff(i0, 0, i0, 1, h) : i1 == 9 ? diff(i0, 8, i0, 9, h)
                                                                     : diff(i0, i1 - 1, i0, i1 + 1, 2 * h);
        h1 += (gx * gx + gy * gy) * h * h * axis.dt();
      }
  }
  CHECK(gap.l2_gap == Approx(l2).epsilon(1e-12));
  CHECK(gap.h1_gap == Approx(h1).epsilon(1e-12));
}

TEST_CASE("weak residual is covariant under parabolic rescaling") {
  const Grid g = Grid::rect({0, 0}, {2, 2}, {12, 12});
  const TimeAxis axis(0.0, 1.0, 12);
  const ModelParams m{1.0, 1.0, 0.5, 1.0};
  const auto u0 = Field::from_function(g, [](Point p) { return 0.4 + 0.3 * std::cos(p[0]) * std::cos(2.0 * p[1]); });
  PicardConfig cfg;
  cfg.l2_tolerance = 1e-12;
  cfg.solve_tolerance = 1e-14;
  const auto c = SpaceTimeField::constant(g, axis, 0.0);
  const auto u = picard_solve(m, TensorField::identity(g), c, u0, cfg).u;
  auto phi = [](Point p, double t) { return t * (1.0 + p[0] * p[1]); };
  const auto test = SpaceTimeField::from_function(g, axis, phi);
  const double base = std::abs(weak_residual(u, m, TensorField::identity(g), c, test));

  // A non-solution exercises the exact scaling law of the residual itself.
  const auto rough = SpaceTimeField::from_function(g, axis, [](Point p, double t) { return 0.3 + 0.1 * t * p[0]; });
  const double rough_res = weak_residual(rough, m, TensorField::identity(g), c, test);

  const double s = 2.0;
  const auto scaled = scale_transform(u, m, s);
  const auto cs = scale_coefficient(c, s);
  const Grid& gs = scaled.u.grid();
  const auto test_s = SpaceTimeField::from_function(gs, scaled.u.axis(), [&](Point p, double t) {
    return phi({s * p[0], s * p[1]}, s * s * t);
  });
  const double factor = std::pow(s, -3.0);
  const double res = std::abs(weak_residual(scaled.u, scaled.params, TensorField::identity(gs), cs, test_s));
  CHECK(res <= factor * base + 1e-13);
  CHECK(res <= 1e-9);

  const auto rough_s = scale_transform(rough, m, s);
  CHECK(weak_residual(rough_s.u, rough_s.params, TensorField::identity(gs), cs, test_s) ==
        Approx(factor * rough_res).epsilon(1e-10));
}
