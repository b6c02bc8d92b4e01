#include "fbmheat/fbm.hpp"
#include "fbmheat/quadrature.hpp"
#include "fbmheat/stats.hpp"

#include <doctest.h>

#include <cmath>

using namespace fbmheat;

TEST_CASE("covariance closed-form values") {
  CHECK(covariance(1.0, 1.0, 0.7) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(covariance(0.37, 0.0, 0.7) == doctest::Approx(0.0));
  CHECK(covariance(2.0, 1.0, 0.75) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK(covariance(0.3, 0.8, 0.6) == doctest::Approx(covariance(0.8, 0.3, 0.6)));
}

TEST_CASE("covariance_dt matches a central difference") {
  const double H = 0.7, t = 0.6, s = 0.35, h = 1e-6;
  const double fd = (covariance(t + h, s, H) - covariance(t - h, s, H)) / (2 * h);
  CHECK(covariance_dt(t, s, H) == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("Volterra kernel calibration and isometry") {
  const double H = 0.7;
  for (double s : {0.01, 0.3, 0.99}) CHECK(volterra_kernel(1.0, s, H) > 0.0);
  const double unit = integrate_ts([&](double u) { return std::pow(volterra_kernel(1.0, u, H), 2); }, 0.0, 1.0);
  CHECK(unit == doctest::Approx(1.0).epsilon(1e-6));
  const double cross =
      integrate_ts([&](double u) { return volterra_kernel(1.0, u, H) * volterra_kernel(0.5, u, H); }, 0.0, 0.5);
  CHECK(std::abs(cross - covariance(1.0, 0.5, H)) < 1e-4);
}

TEST_CASE("increment Gram matrix: persistence and Brownian limit") {
  const TimeGrid grid(1.0, 8);
  const Eigen::MatrixXd g = increment_gram(grid, 0.7);
  CHECK(g(0, 1) > 0.0);
  // brute force from R
  const double e01 = covariance(grid.point(1), grid.point(2), 0.7) - covariance(grid.point(1), grid.point(1), 0.7) -
                     covariance(grid.point(0), grid.point(2), 0.7) + covariance(grid.point(0), grid.point(1), 0.7);
  CHECK(g(0, 1) == doctest::Approx(e01).epsilon(1e-12));
  const Eigen::MatrixXd b = increment_gram(grid, 0.5 + 1e-9);
  CHECK(std::abs(b(0, 3)) < 1e-7);
  CHECK(g.llt().info() == Eigen::Success);
}

TEST_CASE("Cholesky sampler moments") {
  const TimeGrid grid(1.0, 16);
  const std::size_t n = 200000;
  const FbmPathSet set = sample_fbm_cholesky(grid, 1, n, Hurst(0.7), 5);
  for (std::size_t p = 0; p < 10; ++p) CHECK(set.at(p, 0, 0) == 0.0);
  std::vector<double> sq(n);
  for (std::size_t p = 0; p < n; ++p) sq[p] = std::pow(set.at(p, 16, 0), 2);
  const MeanEstimate v = mean_estimate(sq);
  CHECK(std::abs(v.mean - 1.0) <= 4 * v.stderr_);
  for (std::size_t i = 1; i <= 16; i += 5) {
    std::vector<double> x(n);
    for (std::size_t p = 0; p < n; ++p) x[p] = set.at(p, i, 0);
    const MeanEstimate m = mean_estimate(x);
    CHECK(std::abs(m.mean) <= 4 * m.stderr_);
  }
}

TEST_CASE("sampling is deterministic and thread-count independent") {
  const TimeGrid grid(1.0, 32);
  const FbmPathSet a = sample_fbm_cholesky(grid, 2, 3000, Hurst(0.7), 9, {1024, 1});
  const FbmPathSet b = sample_fbm_cholesky(grid, 2, 3000, Hurst(0.7), 9, {1024, 3});
  CHECK(a.values == b.values);
}

TEST_CASE("Volterra map reproduces R at n=256") {
  const TimeGrid grid(1.0, 256);
  const FbmGenerator v(grid, Hurst(0.7), SamplerKind::volterra);
  CHECK((v.generated_covariance() - covariance_matrix(grid, 0.7)).cwiseAbs().maxCoeff() <= 0.02);
}

TEST_CASE("Cameron-Martin shift of a constant control") {
  const double H = 0.7, T = 0.8;
  const TimeGrid grid(T, 32);
  const Eigen::Vector2d y(0.3, -0.5);
  const ControlVector phi = ControlVector::constant(grid, y / std::pow(T, 2 * H));
  const RowMatrix k = cm_shift_from_control(phi, H);
  for (std::size_t i = 0; i <= 32; i += 8)
    for (int c = 0; c < 2; ++c)
      CHECK(k(static_cast<Eigen::Index>(i), c) ==
            doctest::Approx(y(c) * covariance(grid.point(i), T, H) / std::pow(T, 2 * H)).epsilon(1e-10));
  CHECK(cm_norm_squared(phi, H) == doctest::Approx(y.squaredNorm() / std::pow(T, 2 * H)).epsilon(1e-10));
  const ControlVector zero(grid, 2);
  CHECK(cm_shift_from_control(zero, H).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Girsanov weight: zero control and martingale property") {
  const TimeGrid grid(1.0, 32);
  const FbmPathSet set = sample_fbm_cholesky(grid, 1, 100000, Hurst(0.7), 17);
  for (double w : girsanov_weight(set, ControlVector(grid, 1))) REQUIRE(w == 1.0);
  const ControlVector phi = ControlVector::constant(grid, Eigen::VectorXd::Constant(1, 0.6));
  const auto w = girsanov_weight(set, phi);
  const MeanEstimate m = mean_estimate(w);
  CHECK(std::abs(m.mean - 1.0) <= 4 * m.stderr_);
  std::vector<double> wb(set.n_paths);
  for (std::size_t p = 0; p < set.n_paths; ++p) wb[p] = w[p] * set.at(p, 32, 0);
  const MeanEstimate mb = mean_estimate(wb);
  CHECK(std::abs(mb.mean - cm_shift_from_control(phi, 0.7)(32, 0)) <= 4 * mb.stderr_);
}

TEST_CASE("Hurst precondition") {
  CHECK_THROWS_AS(Hurst(0.4), std::invalid_argument);
  CHECK_THROWS_AS(Hurst(1.0), std::invalid_argument);
  CHECK_NOTHROW(Hurst(0.55));
}
