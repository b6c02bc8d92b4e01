#pragma once

#include "fbmheat/core.hpp"
#include "fbmheat/fields.hpp"

#include <vector>

namespace fbmheat {

/// Path sampled on a uniform grid, (n+1) x m, with a declared Hoelder exponent.
struct HoelderPath {
  TimeGrid grid;
  RowMatrix values;
  double exponent = 0.0;
};

/// sup |f| on [0,t] plus the largest Hoelder quotient |f(u)-f(s)|/(u-s)^lambda
/// over grid pairs s < u <= t (Euclidean norm over components). t must be a
/// grid point.
double hoelder_norm(const HoelderPath& f, double lambda, double t);
double hoelder_norm(const RowMatrix& values, const TimeGrid& grid, double lambda, std::size_t last_index);

enum class SumRule { left, trapezoid };

struct YoungIntegralOptions {
  SumRule rule = SumRule::left;
  int max_levels = 6;
  double rel_tolerance = 1e-8;
};

struct YoungIntegralResult {
  /// Column a * m_f + b holds int g^a df^b, (n+1) rows.
  HoelderPath integral;
  /// deltas[l]: sup distance between the sums at stride 2^l and 2^{l+1}.
  std::vector<double> deltas;
  double error_estimate = 0.0;
  double observed_order = 0.0;
  bool converged = false;
};

/// Riemann-Stieltjes sums of g against f on the common grid, compared across
/// strides 1, 2, 4, ... to estimate the discretization error. Throws
/// invalid_argument when the exponent sum is <= 1 and NumericalError when the
/// refinement differences do not shrink.
YoungIntegralResult young_integral(const HoelderPath& g, const HoelderPath& f,
                                   const YoungIntegralOptions& opts = {});

struct SolverConfig {
  std::size_t base_steps = 16;
  int refinement_levels = 3;
  bool richardson = false;
  /// Assumed convergence rate used for the error estimate and extrapolation.
  double richardson_rate = 1.0;

  void validate() const;
};

enum class SolveStatus { ok, blowup, nonfinite };

struct SdeSolution {
  TimeGrid grid;
  RowMatrix path;  // (n+1) x d on the driver grid
  SolveStatus status = SolveStatus::ok;
  std::vector<double> deltas;  // sup differences between successive levels
  double error_estimate = 0.0;
  /// Endpoint after Richardson extrapolation (equals the finest endpoint when disabled).
  Vec endpoint;
};

inline constexpr double kBlowupThreshold = 1e6;

/// Second-order increment scheme on the driver sampled every `stride` grid
/// points:
///   X <- X + eps sigma(X) dD + eps^2/2 (sum_j dD^j dV_j(X)) sigma(X) dD
/// with the drift b(eps, .) added by Heun's method. Returns the status; `out`
/// receives (n/stride + 1) x d values.
SolveStatus young_sde_single(const VectorFieldSystem& fields, const RowMatrix& driver, double dt,
                             std::size_t stride, const Vec& x0, double eps, RowMatrix& out);

/// Endpoint only; avoids storing the path.
SolveStatus young_sde_endpoint(const VectorFieldSystem& fields, const double* driver, std::size_t n_steps,
                               double dt, const Vec& x0, double eps, Vec& out);

/// Solves X = x0 + int b(eps,X)ds + eps sum_i int V_i(X) dD^i on the levels
/// stride 2^{L-1}, ..., 2, 1 and reports the refinement history.
SdeSolution solve_young_sde(const VectorFieldSystem& fields, const TimeGrid& grid, const RowMatrix& driver,
                            const Vec& x0, double eps, const SolverConfig& cfg = {});

/// Heun scheme for dx = b(eps, x) dt on the grid.
RowMatrix solve_drift_ode(const VectorFieldSystem& fields, const TimeGrid& grid, const Vec& x0, double eps);

/// Skeleton flow du = sigma(u) dk + b(0,u) dt for a driver given at uniform
/// nodes with spacing dt. k is linear between nodes; each interval takes
/// `rk_steps` RK4 steps.
RowMatrix solve_skeleton(const VectorFieldSystem& fields, const RowMatrix& k, double dt, const Vec& x0,
                         int rk_steps = 1);

}  // namespace fbmheat
