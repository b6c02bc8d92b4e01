#include "fbmheat/fbm.hpp"
#include "fbmheat/fields.hpp"
#include "fbmheat/young.hpp"

#include <doctest.h>

#include <cmath>

using namespace fbmheat;

namespace {

HoelderPath from_function(const TimeGrid& grid, double exponent, auto&& f) {
  RowMatrix v(static_cast<Eigen::Index>(grid.n_points()), 1);
  for (std::size_t i = 0; i < grid.n_points(); ++i) v(static_cast<Eigen::Index>(i), 0) = f(grid.point(i));
  return {grid, v, exponent};
}

}  // namespace

TEST_CASE("Hoelder norm") {
  const TimeGrid grid(1.0, 64);
  const HoelderPath c = from_function(grid, 1.0, [](double) { return -2.5; });
  CHECK(hoelder_norm(c, 0.6, 1.0) == doctest::Approx(2.5));
  const HoelderPath id = from_function(grid, 1.0, [](double s) { return s; });
  CHECK(hoelder_norm(id, 0.6, 1.0) == doctest::Approx(2.0).epsilon(1e-12));
  double prev = 0.0;
  for (double t : {0.25, 0.5, 0.75, 1.0}) {
    const double v = hoelder_norm(id, 0.6, t);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("Young integral: constant integrand, chain rule, bilinearity") {
  const std::size_t n = 1 << 13;
  const TimeGrid grid(1.0, n);
  const FbmPathSet set = sample_fbm_cholesky(grid, 1, 1, Hurst(0.7), 3);
  const HoelderPath b{grid, RowMatrix(set.path(0)), 0.65};
  const HoelderPath one = from_function(grid, 1.0, [](double) { return 1.0; });

  const YoungIntegralResult r1 = young_integral(one, b);
  CHECK(r1.integral.values(static_cast<Eigen::Index>(n), 0) == doctest::Approx(b.values(static_cast<Eigen::Index>(n), 0)));

  YoungIntegralOptions trap;
  trap.rule = SumRule::trapezoid;
  const YoungIntegralResult bb = young_integral(b, b, trap);
  const double bt = b.values(static_cast<Eigen::Index>(n), 0);
  CHECK(std::abs(bb.integral.values(static_cast<Eigen::Index>(n), 0) - bt * bt / 2) < 1e-10);
  const YoungIntegralResult left = young_integral(b, b);
  // left sums miss exactly half the quadratic variation, which vanishes for H > 1/2
  double qv = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    qv += std::pow(b.values(static_cast<Eigen::Index>(i + 1), 0) - b.values(static_cast<Eigen::Index>(i), 0), 2);
  CHECK(bt * bt / 2 - left.integral.values(static_cast<Eigen::Index>(n), 0) == doctest::Approx(qv / 2).epsilon(1e-9));
  CHECK(qv < 0.1);

  HoelderPath g2 = from_function(grid, 1.0, [](double s) { return std::sin(3 * s); });
  HoelderPath comb = b;
  comb.values = 2.5 * b.values + g2.values;
  comb.exponent = 0.65;
  const double lhs = young_integral(comb, b).integral.values(static_cast<Eigen::Index>(n), 0);
  const double rhs = 2.5 * left.integral.values(static_cast<Eigen::Index>(n), 0) +
                     young_integral(g2, b).integral.values(static_cast<Eigen::Index>(n), 0);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("Young integral rejects exponent sums <= 1") {
  const TimeGrid grid(1.0, 16);
  const HoelderPath a = from_function(grid, 0.5, [](double s) { return s; });
  CHECK_THROWS_AS(young_integral(a, a), std::invalid_argument);
}

TEST_CASE("Young SDE: constant fields are exact") {
  const TimeGrid grid(1.0, 256);
  const FbmPathSet set = sample_fbm_cholesky(grid, 1, 5, Hurst(0.7), 4);
  Mat s(1, 1);
  s << 1.7;
  const VectorFieldSystem f = catalog::constant_general(s);
  const Vec x0 = Vec::Constant(1, 0.3);
  for (std::size_t p = 0; p < 5; ++p) {
    const RowMatrix b = set.path(p);
    const SdeSolution sol = solve_young_sde(f, grid, b, x0, 1.0);
    REQUIRE(sol.status == SolveStatus::ok);
    for (Eigen::Index i = 0; i < sol.path.rows(); ++i)
      CHECK(sol.path(i, 0) == doctest::Approx(0.3 + 1.7 * b(i, 0)).epsilon(1e-12));
  }
}

TEST_CASE("Young SDE: dX = X dB against x0 exp(B)") {
  const std::size_t n = 4096;
  const TimeGrid grid(1.0, n);
  const FbmPathSet set = sample_fbm_cholesky(grid, 1, 20, Hurst(0.7), 8);
  const VectorFieldSystem f = catalog::linear_1d();
  const Vec x0 = Vec::Constant(1, 1.0);
  for (std::size_t p = 0; p < set.n_paths; ++p) {
    const RowMatrix b = set.path(p);
    RowMatrix out;
    REQUIRE(young_sde_single(f, b, grid.dt(), 1, x0, 1.0, out) == SolveStatus::ok);
    double e = 0.0;
    for (Eigen::Index i = 0; i < out.rows(); ++i) e = std::max(e, std::abs(out(i, 0) - std::exp(b(i, 0))));
    CHECK(e <= 1e-3);
  }
}

TEST_CASE("Young SDE on a Cameron-Martin driver matches a fine RK4 reference") {
  const double H = 0.7;
  const TimeGrid grid(1.0, 1024);
  const ControlVector phi = ControlVector::constant(TimeGrid(1.0, 1024), Eigen::Vector3d(0.4, -0.3, 0.2));
  const RowMatrix k = cm_shift_from_control(phi, H);
  const VectorFieldSystem f = catalog::so3_frame();
  const Vec x0 = Eigen::Vector3d(0.1, 0.2, -0.1);
  SolverConfig cfg;
  cfg.base_steps = 256;
  cfg.refinement_levels = 3;
  const SdeSolution sol = solve_young_sde(f, grid, k, x0, 1.0, cfg);
  const RowMatrix ref = solve_skeleton(f, k, grid.dt(), x0, 8);
  CHECK((sol.path.bottomRows(1) - ref.bottomRows(1)).norm() < 1e-6);
}

TEST_CASE("skeleton flow: trivial drivers") {
  const VectorFieldSystem f = catalog::so3_frame();
  const Vec x0 = Eigen::Vector3d(0.2, -0.1, 0.3);
  const RowMatrix zero = RowMatrix::Zero(65, 3);
  CHECK((solve_skeleton(f, zero, 1.0 / 64, x0).bottomRows(1).transpose() - x0).norm() == 0.0);
  const double H = 0.7, T = 1.0;
  const Eigen::Vector2d y(0.3, -0.4);
  const ControlVector phi = ControlVector::constant(TimeGrid(T, 64), y / std::pow(T, 2 * H));
  const RowMatrix k = cm_shift_from_control(phi, H);
  const Vec x2 = Eigen::Vector2d(1.0, 2.0);
  const RowMatrix u = solve_skeleton(catalog::constant_orthonormal(2), k, T / 64, x2);
  CHECK((u.bottomRows(1).transpose() - (x2 + y)).norm() < 1e-12);
}

TEST_CASE("solver config validation") {
  SolverConfig cfg;
  cfg.refinement_levels = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
