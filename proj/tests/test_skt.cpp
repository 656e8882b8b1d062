#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "sktlab/skt.hpp"

using namespace sktlab;
using doctest::Approx;

namespace {

Field random_positive(std::mt19937& rng, const Grid& g, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(g.size());
  for (auto& e : v) e = u(rng);
  return Field(g, v);
}

double logistic_error(double dt_target) {
  const Grid g = Grid::rect({0, 0}, {1, 1}, {4, 4});
  const std::size_t steps = static_cast<std::size_t>(std::lround(2.0 / dt_target));
  const TimeAxis axis(0.0, 2.0, steps);
  SKTParams p;
  p.a1 = 1.5;
  p.b1 = 2.0;
  const double u0 = 0.1;
  const auto s = skt_run(p, Field::constant(g, u0), Field::constant(g, 0.3), axis);
  const double t = 2.0;
  const double exact = p.a1 * u0 / (p.b1 * u0 + (p.a1 - p.b1 * u0) * std::exp(-p.a1 * t));
  double worst = 0.0;
  for (double x : s.u.slice(steps).values()) worst = std::max(worst, std::abs(x - exact) / exact);
  return worst;
}

}  // namespace

TEST_CASE("m0 bound examples") {
  const Grid g = Grid::line(0.0, 1.0, 3);
  SKTParams p;
  p.a2 = 1.0;
  p.c2 = 2.0;
  CHECK(m0_bound(p, Field(g, {0.1, 0.3, 0.2})) == 0.5);
  p.a2 = 2.0;
  p.c2 = 1.0;
  CHECK(m0_bound(p, Field(g, {1.0, 0.0, 0.5})) == 2.0);
  p.a2 = 0.25;
  CHECK(m0_bound(p, Field::constant(g, 0.0)) == 0.25);
  CHECK_THROWS_AS(m0_bound(p, Field(g, {0.1, -0.1, 0.0})), std::invalid_argument);
}

TEST_CASE("parameter validation") {
  SKTParams p;
  CHECK_NOTHROW(p.validate());
  p.d1 = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.a12 = -1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.c2 = std::nan("");
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);

  const Grid g = Grid::line(0.0, 1.0, 4);
  CHECK_THROWS_AS(skt_run({}, Field::constant(g, -0.1), Field::constant(g, 0.0), TimeAxis(0, 1, 2)),
                  std::invalid_argument);
}

TEST_CASE("decoupled constant data follow the logistic curve") {
  const double dt = 1.0 / 64.0;
  const double e1 = logistic_error(dt);
  const double e2 = logistic_error(dt / 2.0);
  CHECK(e1 <= 5.0 * dt);
  CHECK(e2 <= 5.0 * dt / 2.0);
  CHECK(e1 / e2 == Approx(2.0).epsilon(0.2));
}

TEST_CASE("logistic equilibrium is preserved") {
  const Grid g = Grid::rect({0, 0}, {1, 1}, {8, 8});
  SKTParams p;
  p.a1 = 2.0;
  p.b1 = 4.0;
  p.c1 = 3.0;
  p.a11 = 0.2;
  p.a12 = 0.7;
  const auto s = skt_run(p, Field::constant(g, 0.5), Field::constant(g, 0.0), TimeAxis(0.0, 1.0, 32));
  CHECK(s.u.min() == Approx(0.5).epsilon(1e-8));
  CHECK(s.u.max() == Approx(0.5).epsilon(1e-8));
  CHECK(s.v.max() == 0.0);
  CHECK(s.v.min() == 0.0);
}

TEST_CASE("v stays below M0 and both species stay non-negative") {
  std::mt19937 rng(23);
  const Grid g = Grid::rect({0, 0}, {1, 1}, {12, 12});
  const TimeAxis axis(0.0, 1.0, 64);
  std::uniform_real_distribution<double> coef(0.05, 2.0);
  for (int trial = 0; trial < 8; ++trial) {
    SKTParams p;
    p.d1 = coef(rng) * 0.1;
    p.d2 = coef(rng) * 0.1;
    p.a11 = coef(rng);
    p.a12 = coef(rng);
    p.a22 = coef(rng);
    p.a1 = coef(rng);
    p.a2 = coef(rng);
    p.b1 = coef(rng);
    p.b2 = coef(rng);
    p.c1 = coef(rng);
    p.c2 = coef(rng);
    const auto u0 = random_positive(rng, g, 0.0, 3.0);
    const auto v0 = random_positive(rng, g, 0.0, 3.0);
    const auto s = skt_run(p, u0, v0, axis);
    CHECK(s.v.max() <= m0_bound(p, v0) + 1e-10);
    CHECK(s.u.min() >= kNegativityFloor);
    CHECK(s.v.min() >= kNegativityFloor);
  }
}

TEST_CASE("mass of u obeys the Gronwall bound") {
  std::mt19937 rng(19);
  const Grid g = Grid::rect({0, 0}, {1, 1}, {10, 10});
  const TimeAxis axis(0.0, 2.0, 64);
  SKTParams p;
  p.a1 = 1.3;
  p.b1 = 0.2;
  p.a12 = 0.5;
  p.a11 = 0.1;
  p.c1 = 0.4;
  const auto u0 = random_positive(rng, g, 0.0, 1.0);
  const auto s = skt_run(p, u0, random_positive(rng, g, 0.0, 1.0), axis);
  const double m0 = integrate(u0);
  for (std::size_t k = 0; k < axis.slices(); ++k)
    CHECK(integrate(s.u.slice(k)) <= std::exp(p.a1 * axis.time(k)) * m0 * (1.0 + 5.0 * axis.dt()));
}

TEST_CASE("W1p norm and monitor examples") {
  const Grid g = Grid::rect({0, 0}, {1, 1}, {8, 8});
  const TimeAxis axis(0.0, 1.0, 3);
  SKTState zero{SpaceTimeField::constant(g, axis, 0.0), SpaceTimeField::constant(g, axis, 0.0), {}};
  for (double m : blowup_monitor(zero, 4.0)) CHECK(m == 0.0);

  SKTState one{SpaceTimeField::constant(g, axis, 1.0), SpaceTimeField::constant(g, axis, 0.0), {}};
  for (double m : blowup_monitor(one, 4.0)) CHECK(m == Approx(1.0).epsilon(1e-14));

  // u = x, v = 2y.
  const auto u = SpaceTimeField::from_function(g, axis, [](Point p, double) { return p[0]; });
  const auto v = SpaceTimeField::from_function(g, axis, [](Point p, double) { return 2.0 * p[1]; });
  double su = 0.0, sv = 0.0;
  for (int i = 0; i < 8; ++i) {
    // Boundary cells average one interior face with a zero Neumann face.
    const double x = (i + 0.5) / 8.0, slope = (i == 0 || i == 7) ? 0.5 : 1.0;
    su += 8.0 * (std::pow(x, 4) + std::pow(slope, 4)) / 64.0;
    sv += 8.0 * (std::pow(2.0 * x, 4) + std::pow(2.0 * slope, 4)) / 64.0;
  }
  SKTState lin{u, v, {}};
  for (double m : blowup_monitor(lin, 4.0)) CHECK(m == Approx(std::pow(su, 0.25) + std::pow(sv, 0.25)).epsilon(1e-12));
  CHECK_THROWS_AS(w1p_norm(u.slice(0), 0.5), std::invalid_argument);
}

TEST_CASE("monitor csv layout") {
  const Grid g = Grid::rect({0, 0}, {1, 1}, {4, 4});
  const TimeAxis axis(0.0, 0.5, 4);
  const auto s = skt_run({}, Field::constant(g, 0.5), Field::constant(g, 0.25), axis);
  const auto rows = monitor_rows(s, 4.0);
  REQUIRE(rows.size() == axis.slices());
  CHECK(rows[0].t == 0.0);
  CHECK(rows[0].mass_u == Approx(0.5));
  CHECK(rows[0].max_v == 0.25);
  const auto csv = monitor_csv(rows);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,normW1p_u,normW1p_v,min_u,max_u,min_v,max_v,mass_u,mass_v");
  std::size_t count = 0;
  while (std::getline(in, line)) {
    ++count;
    CHECK(std::count(line.begin(), line.end(), ',') == 8);
  }
  CHECK(count == rows.size());
}
