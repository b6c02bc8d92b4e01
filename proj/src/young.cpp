#include "fbmheat/young.hpp"

#include "fbmheat/ode.hpp"
#include "fbmheat/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace fbmheat {

double hoelder_norm(const RowMatrix& values, const TimeGrid& grid, double lambda, std::size_t last) {
  if (last >= static_cast<std::size_t>(values.rows())) throw std::invalid_argument("hoelder_norm: index out of range");
  const auto m = static_cast<Eigen::Index>(last);
  std::vector<double> denom(last + 1, 0.0);
  for (std::size_t k = 1; k <= last; ++k) denom[k] = std::pow(static_cast<double>(k) * grid.dt(), -lambda);
  double sup = 0.0, quot = 0.0;
  for (Eigen::Index i = 0; i <= m; ++i) {
    sup = std::max(sup, values.row(i).norm());
    for (Eigen::Index j = i + 1; j <= m; ++j)
      quot = std::max(quot, (values.row(j) - values.row(i)).norm() * denom[static_cast<std::size_t>(j - i)]);
  }
  return sup + quot;
}

double hoelder_norm(const HoelderPath& f, double lambda, double t) {
  return hoelder_norm(f.values, f.grid, lambda, f.grid.index_of(t));
}

namespace {

// Riemann-Stieltjes sums at the given stride; row r holds the integral up to
// grid index r * stride.
RowMatrix stieltjes_sums(const RowMatrix& g, const RowMatrix& f, std::size_t stride, SumRule rule) {
  const auto mg = g.cols(), mf = f.cols();
  const auto coarse = static_cast<Eigen::Index>((g.rows() - 1) / static_cast<Eigen::Index>(stride));
  const auto st = static_cast<Eigen::Index>(stride);
  RowMatrix out = RowMatrix::Zero(coarse + 1, mg * mf);
  for (Eigen::Index r = 0; r < coarse; ++r) {
    const Eigen::Index a = r * st, b = a + st;
    Eigen::RowVectorXd gv = g.row(a);
    if (rule == SumRule::trapezoid) gv = 0.5 * (g.row(a) + g.row(b));
    const Eigen::RowVectorXd df = f.row(b) - f.row(a);
    for (Eigen::Index p = 0; p < mg; ++p)
      for (Eigen::Index q = 0; q < mf; ++q) out(r + 1, p * mf + q) = out(r, p * mf + q) + gv(p) * df(q);
  }
  return out;
}

}  // namespace

YoungIntegralResult young_integral(const HoelderPath& g, const HoelderPath& f, const YoungIntegralOptions& opts) {
  if (!(g.grid == f.grid)) throw std::invalid_argument("young_integral: paths must share a grid");
  if (g.values.rows() != static_cast<Eigen::Index>(g.grid.n_points()) || f.values.rows() != g.values.rows())
    throw std::invalid_argument("young_integral: values do not match the grid");
  const double r = g.exponent + f.exponent - 1.0;
  if (!(r > 0.0))
    throw std::invalid_argument("young_integral: Hoelder exponents must sum above 1 (got " +
                                std::to_string(g.exponent + f.exponent) + ")");
  const std::size_t n = g.grid.n_steps();
  YoungIntegralResult res;
  RowMatrix fine = stieltjes_sums(g.values, f.values, 1, opts.rule);
  res.integral = HoelderPath{g.grid, fine, std::min(f.exponent, 1.0)};
  const double scale = std::max(1.0, fine.cwiseAbs().maxCoeff());

  RowMatrix prev = fine;
  std::size_t stride = 1;
  for (int level = 1; level < opts.max_levels; ++level) {
    if (n % (2 * stride) != 0 || n / (2 * stride) < 1) break;
    stride *= 2;
    RowMatrix coarse = stieltjes_sums(g.values, f.values, stride, opts.rule);
    double delta = 0.0;
    for (Eigen::Index i = 0; i < coarse.rows(); ++i)
      delta = std::max(delta, (coarse.row(i) - prev.row(2 * i)).cwiseAbs().maxCoeff());
    res.deltas.push_back(delta);
    prev = std::move(coarse);
  }
  if (res.deltas.empty()) return res;

  res.error_estimate = res.deltas[0] / (std::pow(2.0, r) - 1.0);
  res.converged = res.deltas[0] <= opts.rel_tolerance * scale;
  const double floor = 1e-14 * scale;
  std::vector<double> lv, ld;
  for (std::size_t l = 0; l < res.deltas.size(); ++l)
    if (res.deltas[l] > floor) {
      lv.push_back(static_cast<double>(l));
      ld.push_back(std::log2(res.deltas[l]));
    }
  if (lv.size() >= 2) {
    res.observed_order = fit_line(lv, ld).slope;
    if (!(res.observed_order > 0.0))
      throw NumericalError("young_integral: refinement differences do not decrease (observed order " +
                           std::to_string(res.observed_order) + ")");
  } else {
    res.converged = true;
  }
  return res;
}

void SolverConfig::validate() const {
  if (base_steps < 16) throw std::invalid_argument("solver base_steps must be >= 16");
  if (refinement_levels < 2) throw std::invalid_argument("solver refinement_levels must be >= 2");
  if (!(richardson_rate > 0.0)) throw std::invalid_argument("richardson_rate must be positive");
}

namespace {

// One step of the increment scheme; returns false on non-finite or runaway state.
inline SolveStatus scheme_step(const VectorFieldSystem& fields, Vec& x, const Vec& dd, double h, double eps) {
  const int d = fields.dim();
  Vec noise = Vec::Zero(d);
  if (eps != 0.0) {
    const Vec sd = fields.sigma(x) * dd;
    Mat comb = Mat::Zero(d, d);
    for (int j = 0; j < d; ++j)
      if (dd(j) != 0.0) comb += dd(j) * fields.jacobian(j, x);
    noise = eps * sd + 0.5 * eps * eps * (comb * sd);
  }
  if (fields.has_drift()) {
    const Vec b1 = fields.drift(eps, x);
    const Vec xp = x + h * b1 + noise;
    const Vec b2 = fields.drift(eps, xp);
    x = x + 0.5 * h * (b1 + b2) + noise;
  } else {
    x += noise;
  }
  if (!x.allFinite()) return SolveStatus::nonfinite;
  if (x.norm() > kBlowupThreshold) return SolveStatus::blowup;
  return SolveStatus::ok;
}

}  // namespace

SolveStatus young_sde_single(const VectorFieldSystem& fields, const RowMatrix& driver, double dt,
                             std::size_t stride, const Vec& x0, double eps, RowMatrix& out) {
  const int d = fields.dim();
  if (driver.cols() != d || x0.size() != d) throw std::invalid_argument("solver: dimension mismatch");
  const auto n = static_cast<std::size_t>(driver.rows() - 1);
  if (stride == 0 || n % stride != 0) throw std::invalid_argument("solver: stride must divide the step count");
  const auto steps = static_cast<Eigen::Index>(n / stride);
  const auto st = static_cast<Eigen::Index>(stride);
  out.resize(steps + 1, d);
  Vec x = x0;
  out.row(0) = x.transpose();
  for (Eigen::Index k = 0; k < steps; ++k) {
    const Vec dd = (driver.row((k + 1) * st) - driver.row(k * st)).transpose();
    const SolveStatus s = scheme_step(fields, x, dd, dt * static_cast<double>(stride), eps);
    if (s != SolveStatus::ok) {
      out.bottomRows(steps - k).setConstant(std::numeric_limits<double>::quiet_NaN());
      return s;
    }
    out.row(k + 1) = x.transpose();
  }
  return SolveStatus::ok;
}

SolveStatus young_sde_endpoint(const VectorFieldSystem& fields, const double* driver, std::size_t n_steps,
                               double dt, const Vec& x0, double eps, Vec& out) {
  const int d = fields.dim();
  Vec x = x0, dd(d);
  for (std::size_t k = 0; k < n_steps; ++k) {
    for (int c = 0; c < d; ++c) dd(c) = driver[(k + 1) * d + c] - driver[k * d + c];
    const SolveStatus s = scheme_step(fields, x, dd, dt, eps);
    if (s != SolveStatus::ok) {
      out = x;
      return s;
    }
  }
  out = x;
  return SolveStatus::ok;
}

SdeSolution solve_young_sde(const VectorFieldSystem& fields, const TimeGrid& grid, const RowMatrix& driver,
                            const Vec& x0, double eps, const SolverConfig& cfg) {
  cfg.validate();
  if (driver.rows() != static_cast<Eigen::Index>(grid.n_points()))
    throw std::invalid_argument("solver: driver does not match the grid");
  const std::size_t coarsest = std::size_t{1} << (cfg.refinement_levels - 1);
  const std::size_t n = grid.n_steps();
  if (n % coarsest != 0 || n / coarsest < cfg.base_steps)
    throw std::invalid_argument("solver: grid of " + std::to_string(n) + " steps cannot host " +
                                std::to_string(cfg.refinement_levels) + " levels above " +
                                std::to_string(cfg.base_steps) + " base steps");
  SdeSolution sol{grid, {}, SolveStatus::ok, {}, 0.0, {}};
  RowMatrix coarse;
  for (int level = cfg.refinement_levels - 1; level >= 0; --level) {
    RowMatrix cur;
    const SolveStatus s = young_sde_single(fields, driver, grid.dt(), std::size_t{1} << level, x0, eps, cur);
    if (s != SolveStatus::ok) sol.status = s;
    if (coarse.size() > 0) {
      double delta = 0.0;
      for (Eigen::Index i = 0; i < coarse.rows(); ++i)
        delta = std::max(delta, (cur.row(2 * i) - coarse.row(i)).norm());
      sol.deltas.insert(sol.deltas.begin(), delta);
    }
    if (level == 0) {
      const double factor = 1.0 / (std::pow(2.0, cfg.richardson_rate) - 1.0);
      sol.error_estimate = sol.deltas.empty() ? 0.0 : sol.deltas.front() * factor;
      sol.endpoint = cur.bottomRows(1).transpose();
      if (cfg.richardson)
        sol.endpoint += factor * (cur.bottomRows(1) - coarse.bottomRows(1)).transpose();
      sol.path = std::move(cur);
    } else {
      coarse = std::move(cur);
    }
  }
  return sol;
}

RowMatrix solve_drift_ode(const VectorFieldSystem& fields, const TimeGrid& grid, const Vec& x0, double eps) {
  RowMatrix zero = RowMatrix::Zero(static_cast<Eigen::Index>(grid.n_points()), fields.dim());
  RowMatrix out;
  if (young_sde_single(fields, zero, grid.dt(), 1, x0, eps, out) != SolveStatus::ok)
    throw NumericalError("drift ODE blew up");
  return out;
}

RowMatrix solve_skeleton(const VectorFieldSystem& fields, const RowMatrix& k, double dt, const Vec& x0,
                         int rk_steps) {
  const int d = fields.dim();
  if (k.cols() != d || x0.size() != d) throw std::invalid_argument("skeleton: dimension mismatch");
  if (rk_steps < 1) throw std::invalid_argument("skeleton: rk_steps must be positive");
  RowMatrix out(k.rows(), d);
  Vec x = x0;
  out.row(0) = x.transpose();
  const double h = 1.0 / rk_steps;
  for (Eigen::Index r = 0; r + 1 < k.rows(); ++r) {
    const Vec dk = (k.row(r + 1) - k.row(r)).transpose();
    // unit-time flow of sigma(x) dk + b(0, x) dt on one interval
    auto rhs = [&](const Vec& y) -> Vec {
      Vec v = fields.sigma(y) * dk;
      if (fields.has_drift()) v += dt * fields.drift(0.0, y);
      return v;
    };
    for (int s = 0; s < rk_steps; ++s) x = rk4_step(rhs, x, h);
    if (!x.allFinite() || x.norm() > kBlowupThreshold) throw NumericalError("skeleton flow blew up");
    out.row(r + 1) = x.transpose();
  }
  return out;
}

}  // namespace fbmheat
