#include "fbmheat/geometry.hpp"
#include "fbmheat/laplace.hpp"
#include "fbmheat/stats.hpp"

#include <doctest.h>

#include <cmath>

using namespace fbmheat;

namespace {
constexpr double kH = 0.7;
}

TEST_CASE("rate norm") {
  const TimeGrid grid(0.5, 16);
  CHECK(rate_norm(ControlVector(grid, 2), kH) == 0.0);
  const Eigen::Vector2d y(0.3, -0.4);
  const double T2H = std::pow(0.5, 2 * kH);
  CHECK(rate_norm(ControlVector::constant(grid, y / T2H), kH) == doctest::Approx(y.squaredNorm() / (2 * T2H)));
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(increment_gram(grid, kH));
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("endpoint minimizer: flat case and trivial target") {
  const Eigen::Vector2d y(0.3, -0.4);
  const RateProblem p{catalog::constant_orthonormal(2), Vec::Zero(2), TimeGrid(1.0, 32), kH, 4, Vec(y), {}};
  MinimizerOptions o;
  o.hessian_directions = 3;
  const MinimizerResult r = minimize_rate_endpoint(p, o);
  CHECK(r.converged);
  CHECK(r.value == doctest::Approx(y.squaredNorm() / 2).epsilon(1e-8));
  CHECK((r.phi.phi.rowwise() - y.transpose()).cwiseAbs().maxCoeff() < 1e-4);
  for (double h : r.hessian_sample) CHECK(h > 0.0);
  CHECK_FALSE(r.h2_violation);

  const RateProblem same{catalog::so3_frame(), Vec::Zero(3), TimeGrid(1.0, 16), kH, 4, Vec(Vec::Zero(3)), {}};
  const MinimizerResult z = minimize_rate_endpoint(same, o);
  CHECK(z.value == doctest::Approx(0.0));
  CHECK(z.phi.phi.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("free energy: zero functional and quadratic functional with constant fields") {
  MinimizerOptions o;
  o.hessian_directions = 0;
  o.starts = 1;
  const RateProblem zero{catalog::constant_orthonormal(2), Vec::Zero(2), TimeGrid(1.0, 16), kH, 4, std::nullopt,
                         [](const Vec&) { return 0.0; }};
  const MinimizerResult r0 = minimize_free_energy(zero, o);
  CHECK(r0.value == doctest::Approx(0.0));
  CHECK(r0.phi.phi.cwiseAbs().maxCoeff() < 1e-6);

  // F(z) = M/2 |z - y|^2 with Phi_T = k_T: minimum at k_T = M y / (M + T^{-2H}), value M/2 |y|^2 / (1 + M T^{2H})
  const double M = 3.0, T = 0.8;
  const Eigen::Vector2d y(0.5, -0.2);
  const RateProblem quad{catalog::constant_orthonormal(2), Vec::Zero(2), TimeGrid(T, 16), kH, 4, std::nullopt,
                         [=](const Vec& z) { return 0.5 * M * (z - y).squaredNorm(); }};
  const MinimizerResult rq = minimize_free_energy(quad, o);
  const double T2H = std::pow(T, 2 * kH);
  CHECK(rq.value == doctest::Approx(0.5 * M * y.squaredNorm() / (1 + M * T2H)).epsilon(1e-6));
  CHECK((rq.endpoint - M * T2H / (1 + M * T2H) * Vec(y)).norm() < 1e-6);
}

TEST_CASE("free energy approaches the endpoint rate as the penalty grows") {
  const VectorFieldSystem f = catalog::so3_frame();
  const Vec y = Eigen::Vector3d(0.2, -0.1, 0.15);
  const RateProblem ep{f, Vec::Zero(3), TimeGrid(1.0, 16), kH, 4, y, {}};
  MinimizerOptions o;
  o.hessian_directions = 0;
  o.starts = 1;
  const double target = minimize_rate_endpoint(ep, o).value;
  double prev = 0.0;
  for (double M : {10.0, 100.0, 1000.0}) {
    const RateProblem fe{f, Vec::Zero(3), TimeGrid(1.0, 16), kH, 4, std::nullopt,
                         [=](const Vec& z) { return 0.5 * M * (z - y).squaredNorm(); }};
    const double v = minimize_free_energy(fe, o).value;
    CHECK(v <= target + 1e-9);
    CHECK(v >= prev);
    prev = v;
  }
  CHECK(prev == doctest::Approx(target).epsilon(5e-3));
}

TEST_CASE("variations against finite differences") {
  const VectorFieldSystem f = catalog::so3_frame();
  const TimeGrid grid(1.0, 16);
  const Vec x0 = Eigen::Vector3d(0.1, 0.0, -0.1);
  const ControlVector gamma = ControlVector::constant(grid, Eigen::Vector3d(0.3, -0.2, 0.25));
  RowMatrix kv(16, 3);
  for (int j = 0; j < 16; ++j) kv.row(j) << std::sin(j * 0.4), 0.5 - j / 16.0, 0.2;
  const ControlVector k(grid, kv);
  const Variations v = variations(f, x0, gamma, k, kH);

  const ControlVector zero(grid, 3);
  const Variations v0 = variations(f, x0, gamma, zero, kH);
  CHECK(v0.chi.cwiseAbs().maxCoeff() == 0.0);
  CHECK(v0.psi.cwiseAbs().maxCoeff() == 0.0);

  const RateProblem p{f, x0, grid, kH, 4, std::nullopt, {}};
  const SkeletonMap map(p);
  auto end = [&](double h) { return map.endpoint(gamma.phi + h * kv); };
  double prev1 = 0.0, prev2 = 0.0;
  for (double h : {1e-2, 5e-3}) {
    const Vec d1 = (end(h) - end(0.0)) / h;
    const Vec d2 = (end(h) - 2 * end(0.0) + end(-h)) / (h * h);
    const double e1 = (d1 - v.chi.bottomRows(1).transpose()).norm();
    const double e2 = (d2 - v.psi.bottomRows(1).transpose()).norm();
    if (prev1 > 0.0) {
      CHECK(e1 / prev1 == doctest::Approx(0.5).epsilon(0.1));  // O(h)
      CHECK(e2 < prev2);
    }
    prev1 = e1;
    prev2 = e2;
  }
  CHECK(prev2 < 1e-3);
}

TEST_CASE("Taylor terms: constant fields and Gaussianity") {
  const TimeGrid grid(1.0, 8);
  const ControlVector gamma = ControlVector::constant(grid, Eigen::Vector2d(0.2, 0.1));
  Mat s(2, 2);
  s << 1.0, 0.4, 0.0, 0.7;
  const FbmPathSet paths = sample_fbm_cholesky(TimeGrid(1.0, 32), 2, 20, Hurst(kH), 31);
  const TaylorTerms tt = taylor_g(catalog::constant_general(s), Vec::Zero(2), gamma, kH, 4, paths);
  for (std::size_t p = 0; p < 20; ++p) {
    const RowMatrix expect = paths.path(p) * s.transpose();
    CHECK((tt.g1[p] - expect).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(tt.g2[p].cwiseAbs().maxCoeff() < 1e-12);
  }
  const FbmPathSet many = sample_fbm_cholesky(TimeGrid(1.0, 32), 3, 5000, Hurst(kH), 32);
  const TaylorTerms so3 = taylor_g(catalog::so3_frame(), Vec::Zero(3), ControlVector::constant(grid, Eigen::Vector3d(0.3, -0.2, 0.25)),
                                   kH, 4, many);
  std::vector<double> g1(5000);
  for (std::size_t p = 0; p < 5000; ++p) g1[p] = so3.g1[p](32, 0);
  CHECK(jarque_bera(g1) < 9.21);  // chi^2_2 1% quantile
}

TEST_CASE("critical-point identity") {
  const VectorFieldSystem f = catalog::constant_orthonormal(2);
  const Eigen::Vector2d y(0.4, -0.3);
  const RateProblem p{f, Vec::Zero(2), TimeGrid(1.0, 16), kH, 4, std::nullopt,
                      [=](const Vec& z) { return (z - y).squaredNorm(); }};
  MinimizerOptions o;
  o.hessian_directions = 0;
  o.starts = 1;
  const MinimizerResult r = minimize_free_energy(p, o);
  const FbmPathSet paths = sample_fbm_cholesky(TimeGrid(1.0, 64), 2, 200, Hurst(kH), 41);
  const ThetaIdentity th = theta_prime_identity(p, r.phi, paths);
  for (std::size_t i = 0; i < th.lhs.size(); ++i) CHECK(std::abs(th.lhs[i] - th.rhs[i]) < 1e-4);

  const RateProblem zero{f, Vec::Zero(2), TimeGrid(1.0, 16), kH, 4, std::nullopt, [](const Vec&) { return 0.0; }};
  const ThetaIdentity tz = theta_prime_identity(zero, ControlVector(TimeGrid(1.0, 16), 2), paths);
  for (std::size_t i = 0; i < tz.lhs.size(); ++i) {
    CHECK(tz.lhs[i] == doctest::Approx(0.0));
    CHECK(tz.rhs[i] == doctest::Approx(0.0));
  }
}

TEST_CASE("tail probe slopes steepen as t decreases") {
  const VectorFieldSystem f = catalog::so3_frame();
  const TimeGrid grid(1.0, 8);
  const ControlVector gamma = ControlVector::constant(grid, Eigen::Vector3d(0.3, -0.2, 0.25));
  TailProbeOptions o;
  o.n_paths = 20000;
  o.seed = 5;
  double prev = 0.0;
  for (double t : {1.0, 0.5, 0.25}) {
    const TailProbe tp = tail_probe(f, Vec::Zero(3), gamma, kH, 4, t, o);
    CHECK(tp.fit1.slope < 0.0);
    CHECK(tp.fit2.slope < 0.0);
    CHECK(std::abs(tp.fit1.slope) > prev);
    prev = std::abs(tp.fit1.slope);
  }
}
