#include "fbmheat/laplace.hpp"

#include "fbmheat/ode.hpp"
#include "fbmheat/parallel.hpp"
#include "fbmheat/young.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace fbmheat {

double rate_norm(const ControlVector& phi, double H) { return 0.5 * cm_norm_squared(phi, H); }

SkeletonMap::SkeletonMap(const RateProblem& prob)
    : prob_(&prob), fine_(prob.grid.horizon(), prob.grid.n_steps() * static_cast<std::size_t>(prob.substeps)) {
  if (prob.substeps < 1) throw std::invalid_argument("rate problem substeps must be positive");
  if (prob.x0.size() != prob.fields.dim()) throw std::invalid_argument("rate problem: x0 dimension mismatch");
  basis_ = cm_basis(prob.grid, prob.H, static_cast<std::size_t>(prob.substeps));
  gram_ = increment_gram(prob.grid, prob.H);
  Eigen::LLT<Eigen::MatrixXd> llt(gram_);
  if (llt.info() != Eigen::Success) throw NumericalError("increment Gram matrix is not positive definite");
  chol_l_ = llt.matrixL();
}

RowMatrix SkeletonMap::skeleton(const RowMatrix& phi) const {
  return solve_skeleton(prob_->fields, control_path(phi), fine_.dt(), prob_->x0, 1);
}

Vec SkeletonMap::endpoint(const RowMatrix& phi) const {
  const RowMatrix k = control_path(phi);
  const VectorFieldSystem& f = prob_->fields;
  const double dt = fine_.dt();
  Vec x = prob_->x0;
  for (Eigen::Index r = 0; r + 1 < k.rows(); ++r) {
    const Vec dk = (k.row(r + 1) - k.row(r)).transpose();
    auto rhs = [&](const Vec& y) -> Vec {
      Vec v = f.sigma(y) * dk;
      if (f.has_drift()) v += dt * f.drift(0.0, y);
      return v;
    };
    x = rk4_step(rhs, x, 1.0);
    if (!x.allFinite() || x.norm() > kBlowupThreshold) throw NumericalError("skeleton flow blew up");
  }
  return x;
}

RowMatrix SkeletonMap::from_white(const Eigen::VectorXd& z) const {
  const auto n = chol_l_.rows();
  const auto d = z.size() / n;
  const Eigen::MatrixXd zm = Eigen::Map<const Eigen::MatrixXd>(z.data(), n, d);
  return chol_l_.transpose().triangularView<Eigen::Upper>().solve(zm);
}

Eigen::VectorXd SkeletonMap::to_white(const RowMatrix& phi) const {
  const Eigen::MatrixXd zm = chol_l_.transpose() * phi;
  return Eigen::Map<const Eigen::VectorXd>(zm.data(), zm.size());
}

namespace {

// Objective wrapper that turns skeleton blow-ups into +inf so the line search backs off.
template <class F>
double guarded(F&& f) {
  try {
    return f();
  } catch (const NumericalError&) {
    return std::numeric_limits<double>::infinity();
  }
}

MinimizerResult finish(const RateProblem& prob, const SkeletonMap& map, const Eigen::VectorXd& z) {
  MinimizerResult res{ControlVector(prob.grid, map.from_white(z))};
  res.rate = 0.5 * z.squaredNorm();
  res.endpoint = map.endpoint(res.phi.phi);
  return res;
}

}  // namespace

MinimizerResult minimize_rate_endpoint(const RateProblem& prob, const MinimizerOptions& opts) {
  if (!prob.target) throw std::invalid_argument("minimize_rate_endpoint needs a target");
  const Vec y = *prob.target;
  const int d = prob.fields.dim();
  if (y.size() != d) throw std::invalid_argument("target dimension mismatch");
  const SkeletonMap map(prob);
  const auto n = static_cast<Eigen::Index>(prob.grid.n_steps());

  // start from the constant control that reaches y to first order
  const Mat s0 = prob.fields.sigma(prob.x0);
  const Vec u0 = s0.partialPivLu().solve(y - prob.x0) / std::pow(prob.grid.horizon(), 2.0 * prob.H);
  RowMatrix phi0(n, d);
  phi0.rowwise() = u0.transpose();
  Eigen::VectorXd z = map.to_white(phi0);

  Vec mu = Vec::Zero(d);
  double rho = opts.penalty0;
  MinimizerResult res{ControlVector(prob.grid, d)};
  double last_grad = 0.0;
  for (int stage = 0; stage < opts.stages; ++stage) {
    auto obj = [&](const Eigen::VectorXd& v) {
      return guarded([&] {
        const Vec c = map.endpoint(map.from_white(v)) - y;
        return 0.5 * v.squaredNorm() + mu.dot(c) + 0.5 * rho * c.squaredNorm();
      });
    };
    const BfgsResult br = bfgs_minimize(obj, z, opts.bfgs);
    z = br.x;
    const Vec c = map.endpoint(map.from_white(z)) - y;
    res.trace.push_back({stage, 0, rho, 0.5 * z.squaredNorm(), c.norm(), br.gradient_norm, br.iterations});
    last_grad = br.gradient_norm;
    mu += rho * c;
    rho *= opts.penalty_growth;
  }
  MinimizerResult out = finish(prob, map, z);
  out.value = out.rate;
  out.endpoint_residual = (out.endpoint - y).norm();
  out.gradient_norm = last_grad;
  out.multipliers = mu;
  out.trace = std::move(res.trace);
  out.converged = out.endpoint_residual <= 1e-7 && last_grad <= 1e-5;
  if (opts.hessian_directions > 0) {
    out.hessian_sample = hessian_directional(prob, out, opts.hessian_directions, opts.seed);
    for (double v : out.hessian_sample) out.h2_violation = out.h2_violation || !(v > 0.0);
  }
  return out;
}

MinimizerResult minimize_free_energy(const RateProblem& prob, const MinimizerOptions& opts) {
  if (!prob.functional) throw std::invalid_argument("minimize_free_energy needs an endpoint functional");
  const SkeletonMap map(prob);
  const auto dim = static_cast<Eigen::Index>(prob.grid.n_steps()) * prob.fields.dim();
  auto obj = [&](const Eigen::VectorXd& v) {
    return guarded([&] { return prob.functional(map.endpoint(map.from_white(v))) + 0.5 * v.squaredNorm(); });
  };
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal;
  BfgsResult best;
  best.value = std::numeric_limits<double>::infinity();
  std::vector<TraceRow> trace;
  for (int start = 0; start < std::max(1, opts.starts); ++start) {
    Eigen::VectorXd z0 = Eigen::VectorXd::Zero(dim);
    if (start > 0)
      for (Eigen::Index i = 0; i < dim; ++i) z0(i) = opts.start_scale * normal(rng);
    const BfgsResult br = bfgs_minimize(obj, z0, opts.bfgs);
    trace.push_back({0, start, 0.0, br.value, 0.0, br.gradient_norm, br.iterations});
    if (br.value < best.value) best = br;
  }
  MinimizerResult out = finish(prob, map, best.x);
  out.value = best.value;
  out.gradient_norm = best.gradient_norm;
  out.converged = best.gradient_norm <= 1e-5;
  out.trace = std::move(trace);
  if (opts.hessian_directions > 0) {
    out.hessian_sample = hessian_directional(prob, out, opts.hessian_directions, opts.seed);
    for (double v : out.hessian_sample) out.h2_violation = out.h2_violation || !(v > 0.0);
  }
  return out;
}

std::vector<double> hessian_directional(const RateProblem& prob, const MinimizerResult& min, int n_directions,
                                        std::uint64_t seed, double h) {
  const SkeletonMap map(prob);
  const Eigen::MatrixXd& g = map.gram();
  auto objective = [&](const RowMatrix& phi) {
    double v = 0.5 * (phi.transpose() * g * phi).trace();
    if (prob.functional) {
      v += prob.functional(map.endpoint(phi));
    } else if (prob.target && min.multipliers.size() == prob.fields.dim()) {
      v += min.multipliers.dot(map.endpoint(phi) - *prob.target);
    }
    return v;
  };
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const RowMatrix& phi = min.phi.phi;
  const double center = objective(phi);
  std::vector<double> out;
  for (int k = 0; k < n_directions; ++k) {
    RowMatrix e(phi.rows(), phi.cols());
    for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = normal(rng);
    e /= e.norm();
    out.push_back((objective(phi + h * e) - 2.0 * center + objective(phi - h * e)) / (h * h));
  }
  return out;
}

Linearization::Linearization(const VectorFieldSystem& fields, const RowMatrix& gamma, double dt, const Vec& x0,
                             bool include_eps_drift)
    : fields_(&fields), dt_(dt), eps_drift_(include_eps_drift), d_(fields.dim()) {
  if (gamma.cols() != d_ || x0.size() != d_) throw std::invalid_argument("linearization: dimension mismatch");
  const Eigen::Index m = gamma.rows() - 1;
  phi_.resize(m + 1, d_);
  Vec x = x0;
  phi_.row(0) = x.transpose();
  stages_.reserve(static_cast<std::size_t>(3 * m));
  for (Eigen::Index r = 0; r < m; ++r) {
    const Vec dg = (gamma.row(r + 1) - gamma.row(r)).transpose();
    auto rhs = [&](const Vec& y) -> Vec {
      Vec v = fields.sigma(y) * dg;
      if (fields.has_drift()) v += dt * fields.drift(0.0, y);
      return v;
    };
    const Vec xm = rk4_step(rhs, x, 0.5);
    const Vec xe = rk4_step(rhs, xm, 0.5);
    if (!xe.allFinite() || xe.norm() > kBlowupThreshold) throw NumericalError("skeleton flow blew up");
    stages_.push_back(make_stage(x, dg));
    stages_.push_back(make_stage(xm, dg));
    stages_.push_back(make_stage(xe, dg));
    x = xe;
    phi_.row(r + 1) = x.transpose();
  }
}

Linearization::Stage Linearization::make_stage(const Vec& x, const Vec& dg) const {
  const VectorFieldSystem& f = *fields_;
  Stage s;
  s.sigma = f.sigma(x);
  s.a = Mat::Zero(d_, d_);
  s.jac.resize(static_cast<std::size_t>(d_));
  for (int i = 0; i < d_; ++i) {
    s.jac[i] = f.jacobian(i, x);
    s.a += dg(i) * s.jac[i];
  }
  s.curv.assign(static_cast<std::size_t>(d_), Mat::Zero(d_, d_));
  s.eps_drift = Vec::Zero(d_);
  const double h = 1e-4 * (1.0 + x.norm());
  const bool drift = f.has_drift();
  auto drift_jac = [&](const Vec& y) {
    Mat j(d_, d_);
    const double hb = 1e-5 * (1.0 + y.norm());
    for (int c = 0; c < d_; ++c) {
      Vec yp = y, ym = y;
      yp(c) += hb;
      ym(c) -= hb;
      j.col(c) = (f.drift(0.0, yp) - f.drift(0.0, ym)) / (2.0 * hb);
    }
    return j;
  };
  if (drift) {
    s.a += dt_ * drift_jac(x);
    if (eps_drift_) s.eps_drift = dt_ * (f.drift(1e-6, x) - f.drift(-1e-6, x)) / 2e-6;
  }
  for (int c = 0; c < d_; ++c) {
    Vec xp = x, xm = x;
    xp(c) += h;
    xm(c) -= h;
    Mat dj = Mat::Zero(d_, d_);  // d_c of sum_i dg^i J_i (+ dt D b)
    for (int i = 0; i < d_; ++i)
      if (dg(i) != 0.0) dj += dg(i) * (f.jacobian(i, xp) - f.jacobian(i, xm)) / (2.0 * h);
    if (drift) dj += dt_ * (drift_jac(xp) - drift_jac(xm)) / (2.0 * h);
    for (int a = 0; a < d_; ++a) s.curv[a].col(c) = dj.row(a).transpose();
  }
  return s;
}

template <class Drive>
void Linearization::integrate(Drive&& drive_inc, RowMatrix* first, RowMatrix* second, Vec* g1_end,
                              Vec* g2_end) const {
  const auto m = static_cast<Eigen::Index>(n_intervals());
  const bool want2 = second != nullptr || g2_end != nullptr;
  if (first) first->setZero(m + 1, d_);
  if (second) second->setZero(m + 1, d_);
  Vec g1 = Vec::Zero(d_), g2 = Vec::Zero(d_);
  Vec dd(d_);
  Mat md[3];
  auto f1 = [&](const Stage& s, const Vec& u) -> Vec { return s.sigma * dd + s.a * u + s.eps_drift; };
  auto f2 = [&](const Stage& s, const Mat& mdd, const Vec& u1, const Vec& u2) -> Vec {
    Vec v = 2.0 * (mdd * u1) + s.a * u2;
    for (int a = 0; a < d_; ++a) v(a) += u1.dot(s.curv[a] * u1);
    return v;
  };
  for (Eigen::Index r = 0; r < m; ++r) {
    drive_inc(r, dd);
    const Stage* st = &stages_[static_cast<std::size_t>(3 * r)];
    if (want2)
      for (int q = 0; q < 3; ++q) {
        md[q] = Mat::Zero(d_, d_);
        for (int i = 0; i < d_; ++i)
          if (dd(i) != 0.0) md[q] += dd(i) * st[q].jac[i];
      }
    const Vec k1 = f1(st[0], g1);
    const Vec k2 = f1(st[1], g1 + 0.5 * k1);
    const Vec k3 = f1(st[1], g1 + 0.5 * k2);
    const Vec k4 = f1(st[2], g1 + k3);
    if (want2) {
      const Vec l1 = f2(st[0], md[0], g1, g2);
      const Vec l2 = f2(st[1], md[1], g1 + 0.5 * k1, g2 + 0.5 * l1);
      const Vec l3 = f2(st[1], md[1], g1 + 0.5 * k2, g2 + 0.5 * l2);
      const Vec l4 = f2(st[2], md[2], g1 + k3, g2 + l3);
      g2 += (l1 + 2.0 * l2 + 2.0 * l3 + l4) / 6.0;
    }
    g1 += (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
    if (first) first->row(r + 1) = g1.transpose();
    if (second) second->row(r + 1) = g2.transpose();
  }
  if (g1_end) *g1_end = g1;
  if (g2_end) *g2_end = g2;
}

void Linearization::solve(const RowMatrix& drive, RowMatrix* first, RowMatrix* second) const {
  if (drive.rows() != phi_.rows() || drive.cols() != d_) throw std::invalid_argument("linearization: drive shape");
  integrate([&](Eigen::Index r, Vec& dd) { dd = (drive.row(r + 1) - drive.row(r)).transpose(); }, first, second,
            nullptr, nullptr);
}

void Linearization::solve_endpoint(const double* drive, Vec* first, Vec* second) const {
  const int d = d_;
  integrate(
      [&](Eigen::Index r, Vec& dd) {
        for (int c = 0; c < d; ++c) dd(c) = drive[(r + 1) * d + c] - drive[r * d + c];
      },
      nullptr, nullptr, first, second);
}

Variations variations(const VectorFieldSystem& fields, const Vec& x0, const ControlVector& gamma,
                      const ControlVector& k, double H, int substeps) {
  if (!(gamma.grid == k.grid)) throw std::invalid_argument("variations: controls must share a grid");
  const Eigen::MatrixXd basis = cm_basis(gamma.grid, H, static_cast<std::size_t>(substeps));
  const TimeGrid fine(gamma.grid.horizon(), gamma.grid.n_steps() * static_cast<std::size_t>(substeps));
  const RowMatrix gp = basis * gamma.phi;
  const RowMatrix kp = basis * k.phi;
  const Linearization lin(fields, gp, fine.dt(), x0, false);
  Variations v{fine, lin.skeleton(), {}, {}};
  lin.solve(kp, &v.chi, &v.psi);
  return v;
}

TaylorTerms taylor_g(const VectorFieldSystem& fields, const Vec& x0, const ControlVector& gamma, double H,
                     int substeps, const FbmPathSet& paths) {
  const TimeGrid fine(gamma.grid.horizon(), gamma.grid.n_steps() * static_cast<std::size_t>(substeps));
  if (!(paths.grid == fine)) throw std::invalid_argument("taylor_g: paths must live on the skeleton grid");
  if (paths.dim != fields.dim()) throw std::invalid_argument("taylor_g: dimension mismatch");
  const RowMatrix gp = cm_basis(gamma.grid, H, static_cast<std::size_t>(substeps)) * gamma.phi;
  const Linearization lin(fields, gp, fine.dt(), x0);
  TaylorTerms out;
  out.g1.resize(paths.n_paths);
  out.g2.resize(paths.n_paths);
  for (std::size_t p = 0; p < paths.n_paths; ++p) lin.solve(RowMatrix(paths.path(p)), &out.g1[p], &out.g2[p]);
  return out;
}

namespace {

Vec functional_gradient(const EndpointFunctional& f, const Vec& x, double h = 1e-6) {
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

Mat functional_hessian(const EndpointFunctional& f, const Vec& x, double h = 1e-4) {
  const auto d = x.size();
  Mat hess(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i; j < d; ++j) {
      Vec pp = x, pm = x, mp = x, mm = x;
      pp(i) += h; pp(j) += h;
      pm(i) += h; pm(j) -= h;
      mp(i) -= h; mp(j) += h;
      mm(i) -= h; mm(j) -= h;
      hess(i, j) = hess(j, i) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h * h);
    }
  return hess;
}

}  // namespace

ThetaIdentity theta_prime_identity(const RateProblem& prob, const ControlVector& phi_star, const FbmPathSet& paths) {
  if (!prob.functional) throw std::invalid_argument("theta_prime_identity needs an endpoint functional");
  const auto s = static_cast<std::size_t>(prob.substeps);
  const TimeGrid fine(prob.grid.horizon(), prob.grid.n_steps() * s);
  if (!(paths.grid == fine) || paths.dim != prob.fields.dim())
    throw std::invalid_argument("theta_prime_identity: paths must live on the skeleton grid");
  const RowMatrix gp = cm_basis(prob.grid, prob.H, s) * phi_star.phi;
  const Linearization lin(prob.fields, gp, fine.dt(), prob.x0);
  const Vec phi_t = lin.skeleton().bottomRows(1).transpose();
  const Vec grad = functional_gradient(prob.functional, phi_t);
  ThetaIdentity out;
  const int d = paths.dim;
  for (std::size_t p = 0; p < paths.n_paths; ++p) {
    const auto b = paths.path(p);
    Vec g1;
    lin.solve_endpoint(b.data(), &g1, nullptr);
    double rhs = 0.0;
    for (std::size_t j = 0; j < prob.grid.n_steps(); ++j)
      for (int c = 0; c < d; ++c)
        rhs -= phi_star.phi(static_cast<Eigen::Index>(j), c) *
               (b(static_cast<Eigen::Index>((j + 1) * s), c) - b(static_cast<Eigen::Index>(j * s), c));
    out.lhs.push_back(grad.dot(g1));
    out.rhs.push_back(rhs);
  }
  double acc = 0.0;
  for (std::size_t p = 0; p < out.lhs.size(); ++p) acc += std::abs(out.lhs[p] - out.rhs[p]);
  out.mean_abs_discrepancy = out.lhs.empty() ? 0.0 : acc / static_cast<double>(out.lhs.size());
  if (out.lhs.size() >= 2) out.correlation = correlation(out.lhs, out.rhs);
  return out;
}

TailProbe tail_probe(const VectorFieldSystem& fields, const Vec& x0, const ControlVector& gamma, double H,
                     int substeps, double t, const TailProbeOptions& opts) {
  const TimeGrid fine(gamma.grid.horizon(), gamma.grid.n_steps() * static_cast<std::size_t>(substeps));
  const std::size_t last = fine.index_of(t);
  if (last == 0) throw std::invalid_argument("tail_probe needs t > 0");
  const double lambda = opts.lambda > 0.0 ? opts.lambda : H - 0.05;
  const RowMatrix gp = cm_basis(gamma.grid, H, static_cast<std::size_t>(substeps)) * gamma.phi;
  const Linearization lin(fields, gp, fine.dt(), x0);
  const FbmGenerator gen(fine, Hurst(H), SamplerKind::cholesky);
  const int d = fields.dim();
  std::vector<double> n1(opts.n_paths), n2(opts.n_paths);
  const std::size_t chunk = 1024, chunks = (opts.n_paths + chunk - 1) / chunk;
  parallel_for(chunks, opts.threads, [&](std::size_t c) {
    const std::size_t first = c * chunk, count = std::min(chunk, opts.n_paths - first);
    std::vector<double> buf(count * fine.n_points() * static_cast<std::size_t>(d));
    gen.sample_chunk(opts.seed, c, count, d, buf.data());
    RowMatrix g1, g2;
    for (std::size_t p = 0; p < count; ++p) {
      const Eigen::Map<const RowMatrix> b(buf.data() + p * fine.n_points() * d,
                                          static_cast<Eigen::Index>(fine.n_points()), d);
      lin.solve(RowMatrix(b), &g1, &g2);
      n1[first + p] = hoelder_norm(g1, fine, lambda, last);
      n2[first + p] = hoelder_norm(g2, fine, lambda, last);
    }
  });
  TailProbe out;
  out.t = t;
  out.lambda = lambda;
  auto levels = [&](std::vector<double> norms, std::vector<double>& r, std::vector<double>& logp, bool square) {
    std::sort(norms.begin(), norms.end());
    const auto n = norms.size();
    const double lo = norms[static_cast<std::size_t>(opts.lower_quantile * static_cast<double>(n - 1))];
    const double hi = norms[n - std::min(n, opts.min_exceedances)];
    for (int k = 0; k < opts.n_levels; ++k) {
      const double rk = lo + (hi - lo) * k / (opts.n_levels - 1);
      const auto above = static_cast<double>(norms.end() - std::lower_bound(norms.begin(), norms.end(), rk));
      r.push_back(rk);
      logp.push_back(std::log(above / static_cast<double>(n)));
    }
    std::vector<double> x(r);
    if (square)
      for (double& v : x) v *= v;
    return fit_line(x, logp);
  };
  out.fit1 = levels(n1, out.r1, out.log_p1, true);
  out.fit2 = levels(n2, out.r2, out.log_p2, false);
  return out;
}

StabilityReport stability_report(const RateProblem& prob, const ControlVector& phi_star, const FbmPathSet& paths,
                                 const std::vector<double>& eps_ladder, double beta) {
  if (!prob.functional) throw std::invalid_argument("stability_report needs an endpoint functional");
  const auto s = static_cast<std::size_t>(prob.substeps);
  const TimeGrid fine(prob.grid.horizon(), prob.grid.n_steps() * s);
  if (!(paths.grid == fine) || paths.dim != prob.fields.dim())
    throw std::invalid_argument("stability_report: paths must live on the skeleton grid");
  const RowMatrix gp = cm_basis(prob.grid, prob.H, s) * phi_star.phi;
  const Linearization lin(prob.fields, gp, fine.dt(), prob.x0);
  const Vec phi_t = lin.skeleton().bottomRows(1).transpose();
  const double theta0 = prob.functional(phi_t);
  const Vec grad = functional_gradient(prob.functional, phi_t);
  const Mat hess = functional_hessian(prob.functional, phi_t);

  StabilityReport rep;
  rep.beta = beta;
  std::vector<double> u0(paths.n_paths);
  std::vector<std::vector<double>> mom(eps_ladder.size()), uu(eps_ladder.size()), err(eps_ladder.size());
  for (std::size_t p = 0; p < paths.n_paths; ++p) {
    const RowMatrix b = paths.path(p);
    Vec g1, g2;
    lin.solve_endpoint(b.data(), &g1, &g2);
    const double dtheta = grad.dot(g1);
    u0[p] = 0.5 * (grad.dot(g2) + g1.dot(hess * g1));
    for (std::size_t e = 0; e < eps_ladder.size(); ++e) {
      const double eps = eps_ladder[e];
      const RowMatrix z = solve_skeleton(prob.fields, gp + eps * b, fine.dt(), prob.x0, 2);
      const Vec zt = z.bottomRows(1).transpose();
      const double u = (prob.functional(zt) - theta0 - eps * dtheta) / (eps * eps);
      uu[e].push_back(u);
      mom[e].push_back(std::exp(-(1.0 + beta) * u));
      err[e].push_back(((zt - phi_t) / eps - g1).norm());
    }
  }
  rep.u0 = mean_estimate(u0);
  std::vector<double> le, lerr;
  for (std::size_t e = 0; e < eps_ladder.size(); ++e) {
    StabilityRow row;
    row.eps = eps_ladder[e];
    row.exp_moment = mean_estimate(mom[e]);
    row.u = mean_estimate(uu[e]);
    row.expansion_error = mean_estimate(err[e]).mean;
    rep.rows.push_back(row);
    le.push_back(std::log(row.eps));
    lerr.push_back(std::log(row.expansion_error));
  }
  if (le.size() >= 2) rep.expansion_order = fit_line(le, lerr).slope;
  return rep;
}

}  // namespace fbmheat
