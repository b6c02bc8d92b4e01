#include "fbmheat/optimize.hpp"

#include <cmath>

namespace fbmheat {

Eigen::VectorXd fd_gradient(const Objective& f, const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd y = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    y(i) = x(i) + h;
    const double fp = f(y);
    y(i) = x(i) - h;
    const double fm = f(y);
    y(i) = x(i);
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

BfgsResult bfgs_minimize(const Objective& f, const Eigen::VectorXd& x0, const BfgsOptions& opts,
                         const Gradient& grad) {
  auto gradient = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return grad ? grad(x) : fd_gradient(f, x, opts.fd_step);
  };
  const auto n = x0.size();
  BfgsResult res;
  res.x = x0;
  res.value = f(x0);
  Eigen::VectorXd g = gradient(x0);
  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;
  int stall = 0;
  for (res.iterations = 0; res.iterations < opts.max_iterations; ++res.iterations) {
    res.gradient_norm = g.norm();
    if (res.gradient_norm <= opts.gradient_tolerance) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd p = -hinv * g;
    double slope = g.dot(p);
    if (!(slope < 0.0)) {
      hinv.setIdentity();
      p = -g;
      slope = -g.squaredNorm();
    }
    double step = 1.0, fnew = 0.0;
    Eigen::VectorXd xnew;
    bool accepted = false;
    for (int bt = 0; bt < 50; ++bt, step *= 0.5) {
      xnew = res.x + step * p;
      fnew = f(xnew);
      if (std::isfinite(fnew) && fnew <= res.value + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    const Eigen::VectorXd gnew = gradient(xnew);
    const Eigen::VectorXd s = xnew - res.x, y = gnew - g;
    const double sy = s.dot(y);
    if (sy > 1e-14 * s.norm() * y.norm()) {
      if (!scaled) {
        hinv *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = hinv * y;
      hinv += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
    }
    const double decrease = res.value - fnew;
    stall = decrease <= opts.stall_tolerance * (1.0 + std::abs(res.value)) ? stall + 1 : 0;
    res.x = xnew;
    res.value = fnew;
    g = gnew;
    if (stall >= opts.stall_iterations) {
      res.stalled = true;
      ++res.iterations;
      break;
    }
  }
  res.gradient_norm = g.norm();
  if (res.gradient_norm <= opts.gradient_tolerance) res.converged = true;
  return res;
}

}  // namespace fbmheat
