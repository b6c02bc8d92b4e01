#pragma once

#include "fbmheat/core.hpp"
#include "fbmheat/fields.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace fbmheat {

class EllipticityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

inline constexpr double kMinAbsDet = 1e-10;

/// Columns V_i(x); throws EllipticityError when |det| < 1e-10.
Mat sigma_matrix(const VectorFieldSystem& fields, const Vec& x);

/// (sigma sigma^T)^{-1}, checked positive definite.
Mat metric(const VectorFieldSystem& fields, const Vec& x);

struct StructureReport {
  std::vector<Vec> points;
  std::vector<StructureConstants> omega;  // recovered at each point
  double max_expansion_residual = 0.0;
  double max_antisymmetry_defect = 0.0;   // max |omega^l_ij + omega^j_il|
  double max_declared_deviation = 0.0;    // vs the system's declared constants, if any
  bool pass = false;
};

StructureReport check_structure(const VectorFieldSystem& fields, const std::vector<Vec>& points, double tol);

/// Gamma^l_ij = omega^l_ij / 2.
StructureConstants christoffel(const StructureConstants& omega);

/// Time-1 endpoint of dx/dt = sigma(x) u (RK4).
Vec exp_map(const VectorFieldSystem& fields, const Vec& x, const Vec& u, int steps = 256);

struct DistanceOptions {
  double tolerance = 1e-10;
  int max_iterations = 50;
  int perturbed_starts = 8;
  double start_radius = 0.5;  // relative to |y - x|
  std::uint64_t seed = 1;
  int steps = 256;
};

struct DistanceResult {
  Vec u;
  double distance = 0.0;
  double residual = 0.0;
  bool converged = false;
  int starts_used = 0;
};

/// Newton shooting for exp_map(x, u) = y with a finite-difference Jacobian.
DistanceResult distance(const VectorFieldSystem& fields, const Vec& x, const Vec& y,
                        const DistanceOptions& opts = {});

struct WorkingBox {
  Vec lower;
  Vec upper;

  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Vec& x) const;
  /// per_dim^d lattice including the faces.
  std::vector<Vec> lattice(int per_dim = 5) const;
  Vec sample(std::mt19937_64& rng) const;
  double volume() const;
};

struct EllipticityReport {
  double min_abs_det = 0.0;
  Vec worst_point;
  double max_field_norm = 0.0;
  double max_jacobian_norm = 0.0;
  std::size_t points_checked = 0;
  bool ok = false;
};

/// Lattice check (d <= 3) or 125 random points (d > 3) of det sigma and of
/// field / Jacobian magnitudes.
EllipticityReport certify_box(const VectorFieldSystem& fields, const WorkingBox& box, std::uint64_t seed = 1);

}  // namespace fbmheat
