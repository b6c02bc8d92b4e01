// Acceptance harness: one PASS/FAIL line per criterion.
//   acceptance            run all
//   acceptance 3 7        run a subset
#include "fbmheat/density.hpp"
#include "fbmheat/fbm.hpp"
#include "fbmheat/geometry.hpp"
#include "fbmheat/laplace.hpp"
#include "fbmheat/lie.hpp"
#include "fbmheat/stats.hpp"
#include "fbmheat/young.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <string>

using namespace fbmheat;

namespace {

constexpr double kH = 0.7;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1. fBm covariance fidelity
Outcome fbm_fidelity() {
  const TimeGrid grid(1.0, 16);
  const std::size_t n = 200000;
  const FbmPathSet set = sample_fbm_cholesky(grid, 1, n, Hurst(kH), 101);
  Eigen::MatrixXd emp = Eigen::MatrixXd::Zero(17, 17);
  for (std::size_t p = 0; p < n; ++p) {
    const auto b = set.path(p);
    emp.noalias() += b * b.transpose();
  }
  emp /= static_cast<double>(n);
  double max_z = 0.0;
  for (int i = 1; i <= 16; ++i)
    for (int j = i; j <= 16; ++j) {
      const double ti = grid.point(i), tj = grid.point(j);
      const double r = covariance(ti, tj, kH);
      const double se = std::sqrt((covariance(ti, ti, kH) * covariance(tj, tj, kH) + r * r) / static_cast<double>(n));
      max_z = std::max(max_z, std::abs(emp(i, j) - r) / se);
    }
  // Volterra map: covariance it generates against R, entrywise
  const TimeGrid fine(1.0, 256);
  const FbmGenerator vol(fine, Hurst(kH), SamplerKind::volterra);
  const Eigen::MatrixXd gen = vol.generated_covariance();
  const Eigen::MatrixXd exact = covariance_matrix(fine, kH);
  const double vdev = (gen - exact).cwiseAbs().maxCoeff();
  return {max_z <= 4.0 && vdev <= 0.02, fmt("cholesky max|z|=%.2f (<=4), volterra max|dR|=%.4f (<=0.02)", max_z, vdev)};
}

// 2. Young solver on dX = X dB
Outcome young_exactness() {
  const std::size_t n = 4096;
  const TimeGrid grid(1.0, n);
  const FbmPathSet set = sample_fbm_cholesky(grid, 1, 100, Hurst(kH), 202);
  const VectorFieldSystem f = catalog::linear_1d();
  const Vec x0 = Vec::Constant(1, 1.0);
  double sup = 0.0;
  const std::vector<std::size_t> strides{16, 8, 4, 2, 1};
  std::vector<double> err(strides.size(), 0.0);
  for (std::size_t p = 0; p < set.n_paths; ++p) {
    const RowMatrix b = set.path(p);
    for (std::size_t k = 0; k < strides.size(); ++k) {
      RowMatrix out;
      young_sde_single(f, b, grid.dt(), strides[k], x0, 1.0, out);
      double e = 0.0;
      for (Eigen::Index i = 0; i < out.rows(); ++i)
        e = std::max(e, std::abs(out(i, 0) - std::exp(b(i * static_cast<Eigen::Index>(strides[k]), 0))));
      err[k] += e / static_cast<double>(set.n_paths);
      if (strides[k] == 1) sup = std::max(sup, e);
    }
  }
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < strides.size(); ++k) {
    lx.push_back(std::log(static_cast<double>(strides[k]) / static_cast<double>(n)));
    ly.push_back(std::log(err[k]));
  }
  const double order = fit_line(lx, ly).slope;
  return {sup <= 1e-3 && order >= 1.3, fmt("sup error %.2e at n=4096 (<=1e-3), refinement order %.2f (>=1.3)", sup, order)};
}

// 3. Girsanov reweighting with two constant controls
Outcome girsanov() {
  const TimeGrid grid(1.0, 64);
  const FbmPathSet set = sample_fbm_cholesky(grid, 2, 100000, Hurst(kH), 303);
  std::vector<Eigen::VectorXd> controls{Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(-0.3, 0.4)};
  bool ok = true;
  std::string detail;
  for (const auto& c : controls) {
    const ControlVector phi = ControlVector::constant(grid, c);
    const auto w = girsanov_weight(set, phi);
    const MeanEstimate mw = mean_estimate(w);
    const RowMatrix k = cm_shift_from_control(phi, kH);
    double worst = std::abs(mw.mean - 1.0) / mw.stderr_;
    for (int i = 0; i < 2; ++i) {
      std::vector<double> v(set.n_paths);
      for (std::size_t p = 0; p < set.n_paths; ++p) v[p] = w[p] * set.at(p, 64, i);
      const MeanEstimate m = mean_estimate(v);
      worst = std::max(worst, std::abs(m.mean - k(64, i)) / m.stderr_);
    }
    ok = ok && worst <= 4.0;
    detail += fmt("E[w]=%.4f, max z=%.2f; ", mw.mean, worst);
  }
  return {ok, detail + "(z<=4)"};
}

// 4. rate minimization against the distance
Outcome rate_distance() {
  bool ok = true;
  std::string detail;
  const Vec x0 = Vec::Zero(2);
  Vec y(2);
  y << 0.3, -0.4;
  for (double T : {0.5, 1.0}) {
    const RateProblem p{catalog::constant_orthonormal(2), x0, TimeGrid(T, 64), kH, 4, y, {}};
    MinimizerOptions o;
    o.hessian_directions = 2;
    const MinimizerResult r = minimize_rate_endpoint(p, o);
    const double T2H = std::pow(T, 2 * kH);
    const double dv = std::abs(r.value - y.squaredNorm() / (2 * T2H));
    const double dphi = (r.phi.phi.rowwise() - (y / T2H).transpose()).cwiseAbs().maxCoeff();
    ok = ok && dv <= 1e-6 && dphi <= 1e-4;
    detail += fmt("flat T=%.1f |dvalue|=%.1e |dphi|=%.1e; ", T, dv, dphi);
  }
  const VectorFieldSystem f = catalog::so3_frame();
  const Vec x3 = Vec::Zero(3);
  Vec y3(3);
  y3 << 0.3, -0.2, 0.25;
  const DistanceResult d = distance(f, x3, y3);
  const RateProblem p{f, x3, TimeGrid(1.0, 64), kH, 4, y3, {}};
  MinimizerOptions o;
  o.hessian_directions = 2;
  const MinimizerResult r = minimize_rate_endpoint(p, o);
  const double rel = r.value / (d.distance * d.distance / 2.0) - 1.0;
  ok = ok && std::abs(rel) <= 0.02;
  return {ok, detail + fmt("so3 relative gap %.2e (<=2%%)", rel)};
}

// 5. geodesic distance
Outcome geodesics() {
  Mat s(2, 2);
  s << 1.0, 0.3, -0.2, 0.8;
  const VectorFieldSystem cg = catalog::constant_general(s);
  Vec x(2), y(2);
  x << 0.1, -0.2;
  y << 0.6, 0.35;
  const double closed = s.partialPivLu().solve(y - x).norm();
  const double err = std::abs(distance(cg, x, y).distance - closed);

  const VectorFieldSystem f = catalog::so3_frame();
  const WorkingBox box{Vec::Constant(3, -0.5), Vec::Constant(3, 0.5)};
  std::mt19937_64 rng(505);
  double sym = 0.0, tri = -INFINITY;
  for (int k = 0; k < 20; ++k) {
    const Vec a = box.sample(rng), b = box.sample(rng), c = box.sample(rng);
    const double ab = distance(f, a, b).distance, ba = distance(f, b, a).distance;
    const double bc = distance(f, b, c).distance, ac = distance(f, a, c).distance;
    sym = std::max(sym, std::abs(ab - ba));
    tri = std::max(tri, ac - ab - bc);
  }
  return {err <= 1e-8 && sym <= 1e-6 && tri <= 1e-6,
          fmt("constant-general |d - |s^-1(y-x)||=%.1e (<=1e-8); so3 max asymmetry %.1e, max triangle excess %.1e (<=1e-6)",
              err, sym, tri)};
}

double probe_curve(int c, double u) {
  const double two_pi_u = 2.0 * std::numbers::pi * u;
  const double shrink = 1.0 / (1.0 + c / 3);
  switch (c % 3) {
    case 0: return shrink * (std::sin(two_pi_u) + u);
    case 1: return shrink * (1.0 - std::cos(two_pi_u) + 0.5 * u * u);
    default: return shrink * (0.7 * std::sin(2.0 * two_pi_u) - u);
  }
}

// 6. Lambda identities and exp-Lie order
Outcome lambda_machinery() {
  const int d = 3;
  const TimeGrid grid(1.0, 256);
  const FbmPathSet set = sample_fbm_cholesky(grid, d, 200, Hurst(kH), 606);
  double l1 = 0.0, l2 = 0.0;
  for (std::size_t p = 0; p < set.n_paths; ++p) {
    const TensorSignature sig = path_signature(set.path(p).data(), 256, d, 2);
    for (int i = 0; i < d; ++i) {
      l1 = std::max(l1, std::abs(lambda_from_signature(sig, {i}) - set.at(p, 256, i)));
      for (int j = 0; j < d; ++j)
        l2 = std::max(l2, std::abs(lambda_from_signature(sig, {i, j}) + lambda_from_signature(sig, {j, i})));
    }
  }
  const VectorFieldSystem f = catalog::so3_frame();
  Vec x(3);
  x << 0.2, 0.1, 0.3;
  const std::size_t M = 2048;
  std::vector<double> lt, le;
  for (double t : {0.8, 0.4, 0.2, 0.1}) {
    RowMatrix k(M + 1, d);
    for (std::size_t i = 0; i <= M; ++i)
      for (int c = 0; c < d; ++c) k(static_cast<Eigen::Index>(i), c) = t * probe_curve(c, static_cast<double>(i) / M);
    const RowMatrix exact = solve_skeleton(f, k, t / M, x, 1);
    const Vec approx = exp_lie_flow(f, path_signature(k.data(), M, d, 2), x, 2);
    lt.push_back(std::log(t));
    le.push_back(std::log((approx - exact.bottomRows(1).transpose()).norm()));
  }
  const double slope = fit_line(lt, le).slope;
  return {l1 <= 1e-12 && l2 <= 1e-12 && std::abs(slope - 3.0) <= 0.3,
          fmt("max|L(i)-B^i|=%.1e, max|L(ij)+L(ji)|=%.1e, N=2 order slope %.2f (3+-0.3)", l1, l2, slope)};
}

// 7. on-diagonal density
Outcome on_diagonal() {
  const std::vector<double> ts{0.3, 0.6, 1.0};
  SamplingOptions so;
  so.n_steps = 16;
  so.seed = 707;
  KdeOptions ko;
  ko.estimator = Estimator::kde_debiased;
  ko.seed = 708;
  const EndpointSamples s = sample_endpoints(catalog::constant_orthonormal(2), Vec::Zero(2), ts, 400000, so);
  bool ok = true;
  std::string detail = "flat 2pi t^2H p:";
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const DensityEstimate e = estimate_density(s.samples[k], 400000, {Vec::Zero(2)}, ko);
    const double v = 2 * std::numbers::pi * std::pow(ts[k], 2 * kH) * e.p_hat[0];
    ok = ok && std::abs(v - 1.0) <= 0.02;
    detail += fmt(" %.4f", v);
  }
  const VectorFieldSystem f = catalog::so3_frame();
  Vec x(3);
  x << 0.2, 0.1, 0.3;
  SamplingOptions so3;
  so3.n_steps = 64;
  so3.seed = 709;
  const AsymptoticsFit fit = ondiag_fit(f, x, {0.3, 0.2, 0.15, 0.1, 0.07}, 400000, 1, so3, ko);
  const double rel = fit.coefficients[0] / a0_closed_form(f, x) - 1.0;
  ok = ok && std::abs(rel) <= 0.05 && fit.valid;
  return {ok, detail + fmt(" (1+-2%%); so3 c0/a0-1=%.3f (<=5%%)", rel)};
}

// 8. off-diagonal exponent
Outcome off_diagonal() {
  KdeOptions ko;
  ko.estimator = Estimator::kde_debiased;
  ko.seed = 801;
  SamplingOptions so;
  so.n_steps = 16;
  so.seed = 802;
  Vec y1(1);
  y1 << 0.5;
  const OffDiagonalFit a =
      offdiag_exponent(catalog::constant_orthonormal(1), Vec::Zero(1), y1, {1, 0.8, 0.6, 0.45, 0.3}, 400000, so, ko);
  const double rel1 = a.slope / 0.25 - 1.0;
  const VectorFieldSystem f = catalog::so3_frame();
  Vec y3(3);
  y3 << 0.18, -0.15, 0.18;
  const double d = distance(f, Vec::Zero(3), y3).distance;
  SamplingOptions so3;
  so3.n_steps = 64;
  so3.seed = 803;
  const OffDiagonalFit b = offdiag_exponent(f, Vec::Zero(3), y3, {0.3, 0.2, 0.15, 0.1, 0.07}, 400000, so3, ko);
  const double rel3 = b.slope / (d * d) - 1.0;
  return {a.valid && b.valid && std::abs(rel1) <= 0.10 && std::abs(rel3) <= 0.15,
          fmt("d=1 slope/|y-x|^2-1=%.3f (<=10%%); so3 slope/d^2-1=%.3f (<=15%%, |y-x|=%.3f)", rel1, rel3, y3.norm())};
}

// 9. q_H estimators
Outcome qh_consistency() {
  SamplingOptions so;
  so.n_steps = 128;
  const StructureConstants om = StructureConstants::levi_civita();
  const QhEstimate f1 = qh_estimate(om, kH, 100000, 901, QhMethod::fit, so);
  const QhEstimate q1 = qh_estimate(om, kH, 100000, 902, QhMethod::quadrature, so);
  const QhEstimate q2 = qh_estimate(om.scaled(2.0), kH, 100000, 903, QhMethod::quadrature, so);
  const QhEstimate z1 = qh_estimate(StructureConstants(3), kH, 1000, 904, QhMethod::fit, so);
  const QhEstimate z2 = qh_estimate(StructureConstants(3), kH, 1000, 905, QhMethod::quadrature, so);
  const double zc = std::abs(f1.value - q1.value) / std::hypot(f1.stderr_, q1.stderr_);
  const double zs = std::abs(q2.value - 4.0 * q1.value) / std::hypot(q2.stderr_, 4.0 * q1.stderr_);
  return {zc <= 3.0 && zs <= 3.0 && z1.value == 0.0 && z2.value == 0.0,
          fmt("fit %.5f vs quadrature %.5f (z=%.2f); q(2w)/q(w)=%.3f (z=%.2f); q(0)=%g,%g", f1.value, q1.value, zc,
              q2.value / q1.value, zs, z1.value, z2.value)};
}

// 10. tail probes of the Taylor terms
Outcome tail_probes() {
  const VectorFieldSystem f = catalog::so3_frame();
  const TimeGrid grid(1.0, 32);
  const ControlVector gamma = ControlVector::constant(grid, Eigen::Vector3d(0.3, -0.2, 0.25));
  TailProbeOptions o;
  o.n_paths = 100000;
  o.seed = 1001;
  const TailProbe tp = tail_probe(f, Vec::Zero(3), gamma, kH, 4, 1.0, o);
  return {tp.fit1.r_squared >= 0.9 && tp.fit2.r_squared >= 0.85,
          fmt("|g1| vs r^2 R^2=%.3f (>=0.9), |g2| vs r R^2=%.3f (>=0.85)", tp.fit1.r_squared, tp.fit2.r_squared)};
}

// 11. critical-point identity
Outcome critical_point() {
  const VectorFieldSystem f = catalog::so3_frame();
  Vec y(3);
  y << 0.3, -0.2, 0.25;
  const RateProblem p{f, Vec::Zero(3), TimeGrid(1.0, 16), kH, 4, {}, [y](const Vec& z) { return (z - y).squaredNorm(); }};
  MinimizerOptions o;
  o.hessian_directions = 2;
  o.starts = 2;
  const MinimizerResult r = minimize_free_energy(p, o);
  const FbmPathSet paths = sample_fbm_cholesky(TimeGrid(1.0, 64), 3, 1000, Hurst(kH), 1101);
  const ThetaIdentity th = theta_prime_identity(p, r.phi, paths);
  return {th.correlation > 0.999 && th.mean_abs_discrepancy < 1e-3,
          fmt("correlation %.6f (>0.999), mean |discrepancy| %.1e (<1e-3)", th.correlation, th.mean_abs_discrepancy)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<const char*, std::function<Outcome()>>> criteria{
      {1, {"fBm covariance fidelity", fbm_fidelity}},
      {2, {"Young solver exactness", young_exactness}},
      {3, {"Girsanov reweighting", girsanov}},
      {4, {"rate minimum vs distance", rate_distance}},
      {5, {"geodesic distance", geodesics}},
      {6, {"Lambda machinery", lambda_machinery}},
      {7, {"on-diagonal density", on_diagonal}},
      {8, {"off-diagonal exponent", off_diagonal}},
      {9, {"q_H consistency", qh_consistency}},
      {10, {"tail probes", tail_probes}},
      {11, {"critical-point identity", critical_point}}};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& [id, c] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %d: %s -- %s [%.1fs]\n", out.pass ? "PASS" : "FAIL", id, c.first, out.detail.c_str(), secs);
    std::fflush(stdout);
    failures += out.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
