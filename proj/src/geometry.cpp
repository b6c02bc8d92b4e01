#include "fbmheat/geometry.hpp"

#include "fbmheat/ode.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace fbmheat {

namespace {

std::string point_string(const Vec& x) {
  std::ostringstream os;
  os << '(';
  for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x(i);
  os << ')';
  return os.str();
}

}  // namespace

Mat sigma_matrix(const VectorFieldSystem& fields, const Vec& x) {
  Mat s = fields.sigma(x);
  const double det = s.determinant();
  if (!(std::abs(det) >= kMinAbsDet))
    throw EllipticityError("ellipticity violated at " + point_string(x) + ": |det sigma| = " +
                           std::to_string(std::abs(det)));
  return s;
}

Mat metric(const VectorFieldSystem& fields, const Vec& x) {
  const Mat s = sigma_matrix(fields, x);
  const Mat g = (s * s.transpose()).inverse();
  Eigen::LLT<Mat> llt(g);
  if (llt.info() != Eigen::Success) throw NumericalError("metric is not positive definite at " + point_string(x));
  return 0.5 * (g + g.transpose());
}

StructureReport check_structure(const VectorFieldSystem& fields, const std::vector<Vec>& points, double tol) {
  const int d = fields.dim();
  StructureReport rep;
  rep.points = points;
  for (const Vec& x : points) {
    const Mat s = fields.sigma(x);
    const auto lu = s.partialPivLu();
    StructureConstants w(d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        if (i == j) continue;
        const Vec br = lie_bracket(fields, i, j, x);
        const Vec c = lu.solve(br);
        rep.max_expansion_residual = std::max(rep.max_expansion_residual, (s * c - br).norm());
        for (int l = 0; l < d; ++l) w(l, i, j) = c(l);
      }
    for (int l = 0; l < d; ++l)
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          rep.max_antisymmetry_defect = std::max(rep.max_antisymmetry_defect, std::abs(w(l, i, j) + w(j, i, l)));
          if (fields.structure())
            rep.max_declared_deviation =
                std::max(rep.max_declared_deviation, std::abs(w(l, i, j) - (*fields.structure())(l, i, j)));
        }
    rep.omega.push_back(std::move(w));
  }
  rep.pass = rep.max_expansion_residual <= tol && rep.max_antisymmetry_defect <= tol &&
             rep.max_declared_deviation <= tol;
  return rep;
}

StructureConstants christoffel(const StructureConstants& omega) { return omega.scaled(0.5); }

Vec exp_map(const VectorFieldSystem& fields, const Vec& x, const Vec& u, int steps) {
  if (u.size() != fields.dim() || x.size() != fields.dim()) throw std::invalid_argument("exp_map: dimension mismatch");
  return rk4_flow([&](const Vec& y) -> Vec { return fields.sigma(y) * u; }, x, steps);
}

namespace {

struct ShotResult {
  Vec u;
  double residual;
  bool converged;
};

ShotResult shoot(const VectorFieldSystem& fields, const Vec& x, const Vec& y, Vec u, const DistanceOptions& opts) {
  const int d = fields.dim();
  auto resid = [&](const Vec& v) -> Vec { return exp_map(fields, x, v, opts.steps) - y; };
  Vec r;
  try {
    r = resid(u);
  } catch (const NumericalError&) {
    return {u, std::numeric_limits<double>::infinity(), false};
  }
  double rn = r.norm();
  for (int it = 0; it < opts.max_iterations && rn > opts.tolerance; ++it) {
    Mat jac(d, d);
    const double h = 1e-6 * (1.0 + u.norm());
    try {
      for (int b = 0; b < d; ++b) {
        Vec up = u, um = u;
        up(b) += h;
        um(b) -= h;
        jac.col(b) = (resid(up) - resid(um)) / (2.0 * h);
      }
    } catch (const NumericalError&) {
      break;
    }
    const Vec step = jac.partialPivLu().solve(r);
    if (!step.allFinite()) break;
    // backtracking on the residual norm
    double lambda = 1.0;
    bool improved = false;
    for (int bt = 0; bt < 20; ++bt, lambda *= 0.5) {
      const Vec cand = u - lambda * step;
      try {
        const Vec rc = resid(cand);
        if (rc.norm() < rn) {
          u = cand;
          r = rc;
          rn = rc.norm();
          improved = true;
          break;
        }
      } catch (const NumericalError&) {
      }
    }
    if (!improved) break;
  }
  return {u, rn, rn <= opts.tolerance};
}

}  // namespace

DistanceResult distance(const VectorFieldSystem& fields, const Vec& x, const Vec& y, const DistanceOptions& opts) {
  const int d = fields.dim();
  DistanceResult best;
  best.u = Vec::Zero(d);
  best.residual = std::numeric_limits<double>::infinity();
  const double gap = (y - x).norm();
  if (gap == 0.0) {
    best.residual = 0.0;
    best.converged = true;
    return best;
  }
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal;
  const Vec origin = Vec::Zero(d);
  for (int start = 0; start <= opts.perturbed_starts; ++start) {
    Vec u0 = origin;
    if (start > 0) {
      Vec dir(d);
      for (int c = 0; c < d; ++c) dir(c) = normal(rng);
      u0 = opts.start_radius * gap * dir / dir.norm();
    }
    const ShotResult s = shoot(fields, x, y, u0, opts);
    ++best.starts_used;
    if (s.residual < best.residual) {
      best.u = s.u;
      best.residual = s.residual;
      best.converged = s.converged;
    }
    if (s.converged) break;
  }
  best.distance = best.u.norm();
  return best;
}

bool WorkingBox::contains(const Vec& x) const {
  return x.size() == lower.size() && (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

std::vector<Vec> WorkingBox::lattice(int per_dim) const {
  const int d = dim();
  std::vector<Vec> pts;
  std::size_t total = 1;
  for (int c = 0; c < d; ++c) total *= static_cast<std::size_t>(per_dim);
  for (std::size_t idx = 0; idx < total; ++idx) {
    Vec x(d);
    std::size_t rem = idx;
    for (int c = 0; c < d; ++c) {
      const auto k = static_cast<double>(rem % static_cast<std::size_t>(per_dim));
      rem /= static_cast<std::size_t>(per_dim);
      x(c) = per_dim == 1 ? 0.5 * (lower(c) + upper(c)) : lower(c) + (upper(c) - lower(c)) * k / (per_dim - 1);
    }
    pts.push_back(x);
  }
  return pts;
}

Vec WorkingBox::sample(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec x(dim());
  for (int c = 0; c < dim(); ++c) x(c) = lower(c) + (upper(c) - lower(c)) * u(rng);
  return x;
}

double WorkingBox::volume() const { return (upper - lower).prod(); }

EllipticityReport certify_box(const VectorFieldSystem& fields, const WorkingBox& box, std::uint64_t seed) {
  if (box.dim() != fields.dim()) throw std::invalid_argument("working box dimension mismatch");
  std::vector<Vec> pts;
  if (box.dim() <= 3) {
    pts = box.lattice(5);
  } else {
    std::mt19937_64 rng(seed);
    for (int i = 0; i < 125; ++i) pts.push_back(box.sample(rng));
  }
  EllipticityReport rep;
  rep.min_abs_det = std::numeric_limits<double>::infinity();
  for (const Vec& x : pts) {
    const Mat s = fields.sigma(x);
    const double det = std::abs(s.determinant());
    if (!(det >= rep.min_abs_det)) {
      rep.min_abs_det = det;
      rep.worst_point = x;
    }
    rep.max_field_norm = std::max(rep.max_field_norm, s.norm());
    for (int i = 0; i < fields.dim(); ++i)
      rep.max_jacobian_norm = std::max(rep.max_jacobian_norm, fields.jacobian(i, x).norm());
  }
  rep.points_checked = pts.size();
  rep.ok = rep.min_abs_det >= kMinAbsDet && std::isfinite(rep.max_field_norm) && std::isfinite(rep.max_jacobian_norm);
  return rep;
}

}  // namespace fbmheat
