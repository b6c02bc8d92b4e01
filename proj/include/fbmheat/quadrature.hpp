#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace fbmheat {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule on [-1, 1] (Golub-Welsch).
const QuadratureRule& gauss_legendre(std::size_t order);

/// Gauss-Hermite rule for the standard normal weight: sum w_i f(x_i)
/// approximates E[f(Z)], Z ~ N(0,1). Exact for polynomials of degree < 2*order.
const QuadratureRule& gauss_hermite_normal(std::size_t order);

/// Integral of f over [a, b] with the order-point Gauss-Legendre rule.
template <class F>
double integrate_gl(F&& f, double a, double b, std::size_t order = 64) {
  const auto& rule = gauss_legendre(order);
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) acc += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return acc * half;
}

/// Tanh-sinh (double exponential) rule on (a, b); tolerates integrable
/// algebraic singularities at both endpoints. f is never called at a or b.
template <class F>
double integrate_ts(F&& f, double a, double b, double step = 1.0 / 32.0, double range = 4.0) {
  constexpr double half_pi = 1.5707963267948966;
  const double len = b - a;
  double acc = 0.0;
  const int kmax = static_cast<int>(range / step);
  for (int k = -kmax; k <= kmax; ++k) {
    const double t = k * step;
    const double u = half_pi * std::sinh(t);
    const double cu = std::cosh(u);
    const double w = half_pi * std::cosh(t) / (cu * cu);
    // distance to the nearer endpoint, in units of len, computed without cancellation
    const double near = 1.0 / (1.0 + std::exp(2.0 * std::abs(u)));
    const double x = u < 0 ? a + len * near : b - len * near;
    if (!(x > a && x < b)) continue;
    acc += w * f(x);
  }
  return acc * step * 0.5 * len;
}

}  // namespace fbmheat
