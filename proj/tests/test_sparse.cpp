#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "sktlab/sparse.hpp"

using namespace sktlab;
using doctest::Approx;

namespace {

Eigen::MatrixXd dense(const SparseMatrix& a) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(a.dim(), a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t p = a.row_offsets()[i]; p < a.row_offsets()[i + 1]; ++p) m(i, a.columns()[p]) = a.values()[p];
  return m;
}

std::vector<double> random_vector(std::mt19937& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& e : v) e = u(rng);
  return v;
}

SparseMatrix random_step(std::mt19937& rng, const Grid& g, double dt) {
  const auto d = random_vector(rng, g.size(), 0.0, 3.0);
  const auto c = random_vector(rng, g.size(), 0.0, 2.0);
  return assemble_implicit_step(g, face_mean(g, d), c, dt);
}

}  // namespace

TEST_CASE("three-cell implicit step matches hand assembly") {
  const Grid g = Grid::line(0.0, 3.0, 3);
  const std::vector<double> one(3, 1.0), zero(3, 0.0);
  const auto a = assemble_implicit_step(g, face_mean(g, one), zero, 1.0);
  Eigen::Matrix3d expect;
  expect << 2, -1, 0, -1, 3, -1, 0, -1, 2;
  CHECK((dense(a) - expect).norm() == 0.0);
}

TEST_CASE("pure time term gives a scaled identity") {
  const Grid g = Grid::rect({0, 0}, {1, 1}, {3, 4});
  const std::vector<double> zero(g.size(), 0.0);
  const auto a = assemble_implicit_step(g, face_mean(g, zero), zero, 0.25);
  CHECK((dense(a) - 4.0 * Eigen::MatrixXd::Identity(12, 12)).norm() == 0.0);
}

TEST_CASE("assembled matrices are symmetric M-matrices") {
  std::mt19937 rng(11);
  const Grid g = Grid::rect({0, 0}, {1, 2}, {5, 7});
  const double dt = 0.1;
  for (int trial = 0; trial < 10; ++trial) {
    const auto d = random_vector(rng, g.size(), 0.0, 3.0);
    const auto c = random_vector(rng, g.size(), 0.0, 2.0);
    const auto a = assemble_implicit_step(g, face_mean(g, d), c, dt);
    const auto m = dense(a);
    CHECK((m - m.transpose()).norm() == 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < g.size(); ++j) {
        if (i != j) CHECK(m(i, j) <= 0.0);
        row += m(i, j);
      }
      CHECK(m(i, i) > 0.0);
      CHECK(row >= (1.0 / dt + c[i]) * (1.0 - 1e-12));
    }
  }
}

TEST_CASE("negative coefficients are rejected") {
  const Grid g = Grid::line(0.0, 1.0, 4);
  std::vector<double> ok(4, 1.0), bad{1.0, -3.0, 1.0, 1.0};
  CHECK_THROWS_WITH(assemble_implicit_step(g, face_mean(g, bad), ok, 1.0), "coefficient sign");
  CHECK_THROWS_WITH(assemble_implicit_step(g, face_mean(g, ok), bad, 1.0), "coefficient sign");
  CHECK_THROWS_AS(assemble_implicit_step(g, face_mean(g, ok), ok, 0.0), std::invalid_argument);
}

TEST_CASE("matrix construction validates structure") {
  CHECK_THROWS_AS(SparseMatrix(2, {0, 2, 4}, {0, 1, 0, 1}, {2.0, -1.0, -0.5, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(SparseMatrix(2, {0, 1, 2}, {0, 1}, {0.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(SparseMatrix(2, {0, 2, 3}, {1, 0, 1}, {-1.0, 2.0, 1.0}), std::invalid_argument);
  CHECK_NOTHROW(SparseMatrix(2, {0, 2, 4}, {0, 1, 0, 1}, {2.0, -1.0, -1.0, 2.0}));
}

TEST_CASE("solver examples") {
  SUBCASE("identity converges in at most one iteration") {
    const SparseMatrix id(4, {0, 1, 2, 3, 4}, {0, 1, 2, 3}, {1.0, 1.0, 1.0, 1.0});
    const std::vector<double> b{1.0, -2.0, 3.5, 0.25};
    const auto r = solve_spd(id, b);
    CHECK(r.stats.iterations <= 1);
    for (int i = 0; i < 4; ++i) CHECK(r.x[i] == Approx(b[i]));
  }
  SUBCASE("three-cell system against a dense solve") {
    const Grid g = Grid::line(0.0, 3.0, 3);
    const std::vector<double> one(3, 1.0), zero(3, 0.0);
    const auto a = assemble_implicit_step(g, face_mean(g, one), zero, 1.0);
    const std::vector<double> b{1.0, 1.0, 1.0};
    const auto r = solve_spd(a, b);
    const Eigen::Vector3d oracle = dense(a).fullPivLu().solve(Eigen::Vector3d(1, 1, 1));
    // Every row of this matrix sums to 1, so the constant vector solves it;
    // (0.8, 0.6, 0.8) does not (its middle residual is 0.2 - 1).
    CHECK(oracle(0) == Approx(1.0));
    CHECK(oracle(1) == Approx(1.0));
    CHECK(oracle(2) == Approx(1.0));
    CHECK((dense(a) * Eigen::Vector3d(0.8, 0.6, 0.8))(1) == Approx(0.2));
    for (int i = 0; i < 3; ++i) CHECK(r.x[i] == Approx(oracle(i)).epsilon(1e-10));
    CHECK(r.stats.relative_residual <= 1e-10);
  }
  SUBCASE("zero right-hand side") {
    const Grid g = Grid::line(0.0, 3.0, 3);
    const std::vector<double> one(3, 1.0);
    const auto r = solve_spd(assemble_implicit_step(g, face_mean(g, one), one, 1.0), std::vector<double>(3, 0.0));
    for (double x : r.x) CHECK(x == 0.0);
  }
}

TEST_CASE("solver matches dense LU up to 200 unknowns") {
  std::mt19937 rng(3);
  for (auto cells : std::vector<std::array<std::size_t, 2>>{{2, 2}, {5, 8}, {10, 20}}) {
    const Grid g = Grid::rect({0, 0}, {1, 1}, cells);
    const auto a = random_step(rng, g, 0.01);
    const auto b = random_vector(rng, g.size(), -1.0, 1.0);
    const auto r = solve_spd(a, b);
    const Eigen::VectorXd oracle = dense(a).partialPivLu().solve(Eigen::Map<const Eigen::VectorXd>(b.data(), b.size()));
    double err = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) err = std::max(err, std::abs(r.x[i] - oracle(i)));
    CHECK(err <= 1e-8);
  }
}

TEST_CASE("non-negative right-hand sides give non-negative solutions") {
  std::mt19937 rng(17);
  const Grid g = Grid::rect({0, 0}, {1, 1}, {9, 9});
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_step(rng, g, 0.05);
    auto b = random_vector(rng, g.size(), 0.0, 1.0);
    for (std::size_t i = 0; i < b.size(); i += 3) b[i] = 0.0;
    const auto r = solve_spd(a, b, 1e-12);
    for (double x : r.x) CHECK(x >= -1e-12);
  }
}

TEST_CASE("solver is deterministic and reports failure") {
  std::mt19937 rng(23);
  const Grid g = Grid::rect({0, 0}, {1, 1}, {12, 12});
  const auto a = random_step(rng, g, 10.0);
  const auto b = random_vector(rng, g.size(), -1.0, 1.0);
  const auto r1 = solve_spd(a, b);
  const auto r2 = solve_spd(a, b);
  CHECK(r1.x == r2.x);
  CHECK(r1.stats.iterations == r2.stats.iterations);
  CHECK_THROWS_AS(solve_spd(a, b, 1e-300), SolveError);
  CHECK_THROWS_AS(solve_spd(a, b, 1.5), std::invalid_argument);
}

TEST_CASE("masked systems move frozen neighbours into the source") {
  const Grid g = Grid::line(0.0, 4.0, 4);
  const std::vector<double> one(4, 1.0), zero(4, 0.0);
  const std::vector<char> active{0, 1, 1, 0};
  const std::vector<double> frozen{2.0, 0.0, 0.0, 3.0};
  const auto sys = assemble_masked_step(g, face_mean(g, one), zero, 1.0, active, frozen);
  REQUIRE(sys.cells == std::vector<std::size_t>{1, 2});
  CHECK(sys.matrix.at(0, 0) == Approx(3.0));
  CHECK(sys.matrix.at(0, 1) == Approx(-1.0));
  CHECK(sys.boundary_source[0] == Approx(2.0));
  CHECK(sys.boundary_source[1] == Approx(3.0));
  // The masked solve equals the full system with the frozen rows pinned.
  const auto r = solve_spd(sys.matrix, std::vector<double>{sys.boundary_source[0], sys.boundary_source[1]}, 1e-14);
  Eigen::Matrix2d m;
  m << 3, -1, -1, 3;
  const Eigen::Vector2d oracle = m.lu().solve(Eigen::Vector2d(2.0, 3.0));
  CHECK(r.x[0] == Approx(oracle(0)));
  CHECK(r.x[1] == Approx(oracle(1)));
}
