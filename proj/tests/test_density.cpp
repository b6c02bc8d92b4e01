#include "fbmheat/density.hpp"
#include "fbmheat/geometry.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace fbmheat;

namespace {
constexpr double kH = 0.7;

double normal_pdf(double x, double var) { return std::exp(-x * x / (2 * var)) / std::sqrt(2 * std::numbers::pi * var); }
}  // namespace

TEST_CASE("closed-form leading coefficient") {
  CHECK(a0_closed_form(catalog::constant_orthonormal(1).scaled(2.0), Vec::Zero(1)) ==
        doctest::Approx(1.0 / (2.0 * std::sqrt(2 * std::numbers::pi))).epsilon(1e-12));
  CHECK(a0_closed_form(catalog::constant_orthonormal(1).scaled(2.0), Vec::Zero(1)) == doctest::Approx(0.19947).epsilon(1e-4));
  CHECK(a0_closed_form(catalog::constant_orthonormal(2), Vec::Zero(2)) == doctest::Approx(1 / (2 * std::numbers::pi)));
  const VectorFieldSystem f = catalog::so3_frame();
  const Vec x = Eigen::Vector3d(0.2, 0.1, 0.3);
  CHECK(a0_closed_form(f.scaled(1.5), x) == doctest::Approx(a0_closed_form(f, x) / std::pow(1.5, 3)));
}

TEST_CASE("bandwidths") {
  RowMatrix s(4, 1);
  s << -1.0, 0.0, 0.5, 2.0;
  const double sd = std::sqrt(((s.array() - s.mean()).square().sum()) / 3.0);
  const Vec h = reference_bandwidth(s);
  // robust scale: min(sd, IQR/1.349)
  CHECK(h(0) <= 1.06 * sd * std::pow(4.0, -0.2) + 1e-12);
}

TEST_CASE("KDE recovers the Gaussian law of x + sigma B_t") {
  const double sigma = 1.3, t = 0.6;
  const Vec x = Vec::Constant(1, 0.2);
  SamplingOptions so;
  so.n_steps = 16;
  so.seed = 3;
  const std::vector<Vec> pts{Vec::Constant(1, -0.5), Vec::Constant(1, 0.0), Vec::Constant(1, 0.2),
                             Vec::Constant(1, 0.6), Vec::Constant(1, 1.1)};
  const double var = sigma * sigma * std::pow(t, 2 * kH);
  for (Estimator e : {Estimator::kde, Estimator::kde_debiased}) {
    KdeOptions ko;
    ko.estimator = e;
    ko.bootstrap = 100;
    const DensityEstimate est = mc_density(catalog::constant_orthonormal(1).scaled(sigma), x, t, 50000, pts, so, ko);
    for (std::size_t q = 0; q < pts.size(); ++q) {
      const double exact = normal_pdf(pts[q](0) - 0.2, var);
      CHECK(std::abs(est.p_hat[q] - exact) <= 3 * (est.stderr_[q] + est.bias_bound[q]));
    }
  }
}

TEST_CASE("flat two-dimensional on-diagonal value and histogram mass") {
  SamplingOptions so;
  so.n_steps = 16;
  so.seed = 4;
  const std::vector<double> ts{0.5, 1.0};
  const EndpointSamples s = sample_endpoints(catalog::constant_orthonormal(2), Vec::Zero(2), ts, 100000, so);
  KdeOptions ko;
  ko.estimator = Estimator::kde_debiased;
  ko.bootstrap = 50;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const DensityEstimate e = estimate_density(s.samples[k], 100000, {Vec::Zero(2)}, ko);
    const double exact = 1 / (2 * std::numbers::pi * std::pow(ts[k], 2 * kH));
    CHECK(std::abs(e.p_hat[0] - exact) <= 3 * (e.stderr_[0] + e.bias_bound[0]));
  }
  const WorkingBox box{Vec::Constant(2, -4.0), Vec::Constant(2, 4.0)};
  const double mass = histogram(s.samples[0], 100000, box, 20).integral();
  CHECK(mass >= 0.97);
  CHECK(mass <= 1.0 + 1e-12);
}

TEST_CASE("on-diagonal fit in the exact Gaussian case") {
  SamplingOptions so;
  so.n_steps = 16;
  so.seed = 5;
  KdeOptions ko;
  ko.estimator = Estimator::kde_debiased;
  ko.bootstrap = 50;
  const AsymptoticsFit fit =
      ondiag_fit(catalog::constant_orthonormal(2), Vec::Zero(2), {1, 0.8, 0.6, 0.45, 0.3}, 100000, 1, so, ko);
  const double c0 = 1 / (2 * std::numbers::pi);
  CHECK(std::abs(fit.coefficients[0] - c0) <= fit.ci_half_width[0] + 0.01 * c0);
  CHECK(std::abs(fit.coefficients[1]) <= fit.ci_half_width[1] + 0.01);
  CHECK(std::abs(fit.c0_without_largest_t - fit.coefficients[0]) <= fit.ci_half_width[0]);
}

TEST_CASE("tangent density: first order matches the Gaussian value") {
  SamplingOptions so;
  so.n_steps = 32;
  so.seed = 6;
  for (double t : {0.5, 1.0}) {
    const TangentDensity n1 = tangent_density(StructureConstants(3), t, 1, 5000, so);
    const double g = std::pow(2 * std::numbers::pi * std::pow(t, 2 * kH), -1.5);
    CHECK(n1.density.mean == doctest::Approx(g).epsilon(1e-12));
    const TangentDensity n2 = tangent_density(StructureConstants(3), t, 2, 5000, so);
    CHECK(std::abs(n2.density.mean - g) <= 4 * n2.density.stderr_ + 1e-12);
    const TangentDensity e2 = tangent_density(StructureConstants::levi_civita(), t, 2, 20000, so);
    CHECK(e2.density.mean < g);
  }
}

TEST_CASE("q_H: zero structure and agreement of the two methods") {
  SamplingOptions so;
  so.n_steps = 64;
  CHECK(qh_estimate(StructureConstants(3), kH, 500, 1, QhMethod::fit, so).value == 0.0);
  CHECK(qh_estimate(StructureConstants(3), kH, 500, 2, QhMethod::quadrature, so).value == 0.0);
  const QhEstimate f = qh_estimate(StructureConstants::levi_civita(), kH, 20000, 3, QhMethod::fit, so);
  const QhEstimate q = qh_estimate(StructureConstants::levi_civita(), kH, 20000, 4, QhMethod::quadrature, so);
  CHECK(f.value > 0.0);
  CHECK(std::abs(f.value - q.value) <= 3 * std::hypot(f.stderr_, q.stderr_));
}

TEST_CASE("off-diagonal exponent") {
  SamplingOptions so;
  so.n_steps = 16;
  so.seed = 8;
  KdeOptions ko;
  ko.estimator = Estimator::kde_debiased;
  ko.bootstrap = 50;
  const std::vector<double> ts{1, 0.8, 0.6, 0.45, 0.3};
  const OffDiagonalFit same = offdiag_exponent(catalog::constant_orthonormal(1), Vec::Zero(1), Vec::Zero(1), ts, 100000, so, ko);
  CHECK(std::abs(same.slope) <= 3 * same.slope_stderr + 0.01);
  const OffDiagonalFit r =
      offdiag_exponent(catalog::constant_orthonormal(1), Vec::Zero(1), Vec::Constant(1, 0.5), ts, 100000, so, ko);
  CHECK(r.slope == doctest::Approx(0.25).epsilon(0.15));
}

TEST_CASE("estimator names round-trip") {
  for (Estimator e : {Estimator::kde, Estimator::kde_debiased, Estimator::histogram})
    CHECK(estimator_from_string(to_string(e)) == e);
  CHECK_THROWS_AS(estimator_from_string("box"), std::invalid_argument);
  CHECK(qh_method_from_string(to_string(QhMethod::quadrature)) == QhMethod::quadrature);
}
