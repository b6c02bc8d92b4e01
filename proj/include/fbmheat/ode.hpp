#pragma once

#include "fbmheat/core.hpp"

namespace fbmheat {

/// One classical RK4 step of dx/dt = f(x) with step h.
template <class F>
Vec rk4_step(F&& f, const Vec& x, double h) {
  const Vec k1 = f(x);
  const Vec k2 = f(Vec(x + 0.5 * h * k1));
  const Vec k3 = f(Vec(x + 0.5 * h * k2));
  const Vec k4 = f(Vec(x + h * k3));
  return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Time-1 endpoint of dx/dt = f(x) with `steps` RK4 steps. Throws
/// NumericalError when the state leaves |x| <= 1e6 or becomes non-finite.
template <class F>
Vec rk4_flow(F&& f, Vec x, int steps) {
  const double h = 1.0 / steps;
  for (int s = 0; s < steps; ++s) {
    x = rk4_step(f, x, h);
    if (!x.allFinite() || x.norm() > 1e6) throw NumericalError("flow blew up");
  }
  return x;
}

}  // namespace fbmheat
