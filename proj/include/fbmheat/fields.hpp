#pragma once

#include "fbmheat/core.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace fbmheat {

/// Structure constants: [V_i, V_j] = sum_l omega(l, i, j) V_l.
class StructureConstants {
 public:
  explicit StructureConstants(int d) : d_(d), data_(static_cast<std::size_t>(d * d * d), 0.0) {}

  int dim() const { return d_; }
  double operator()(int l, int i, int j) const { return data_[index(l, i, j)]; }
  double& operator()(int l, int i, int j) { return data_[index(l, i, j)]; }

  /// omega(l,i,j) = c * eps_{ijl}, d = 3.
  static StructureConstants levi_civita(double c = 1.0);

  StructureConstants scaled(double c) const;
  /// Relabels coordinates: new index a corresponds to old index perm[a].
  StructureConstants permuted(const std::vector<int>& perm) const;
  bool is_zero() const;

 private:
  std::size_t index(int l, int i, int j) const {
    return static_cast<std::size_t>((l * d_ + i) * d_ + j);
  }
  int d_;
  std::vector<double> data_;
};

/// d smooth vector fields V_1..V_d on R^d with Jacobians and optional drift.
class VectorFieldSystem {
 public:
  /// sigma(x): d x d matrix whose columns are V_i(x).
  using SigmaFn = std::function<Mat(const Vec&)>;
  /// Jacobian of V_i: J(a, b) = d V_i^a / d x^b.
  using JacobianFn = std::function<Mat(int, const Vec&)>;
  using DriftFn = std::function<Vec(double, const Vec&)>;

  VectorFieldSystem(std::string name, int d, SigmaFn sigma, JacobianFn jacobian = nullptr);

  const std::string& name() const { return name_; }
  int dim() const { return d_; }

  Mat sigma(const Vec& x) const { return sigma_(x); }
  Vec field(int i, const Vec& x) const { return sigma_(x).col(i); }
  /// Analytic when supplied, else central differences with h = 1e-5 (1 + |x|).
  Mat jacobian(int i, const Vec& x) const;
  bool has_analytic_jacobian() const { return static_cast<bool>(jacobian_); }

  void set_drift(DriftFn b) { drift_ = std::move(b); }
  bool has_drift() const { return static_cast<bool>(drift_); }
  /// b(eps, x); zero when no drift is set.
  Vec drift(double eps, const Vec& x) const;

  void set_structure(StructureConstants omega) { omega_ = std::move(omega); }
  const std::optional<StructureConstants>& structure() const { return omega_; }

  /// All fields multiplied by c (structure constants scale by c).
  VectorFieldSystem scaled(double c) const;

 private:
  std::string name_;
  int d_;
  SigmaFn sigma_;
  JacobianFn jacobian_;
  DriftFn drift_;
  std::optional<StructureConstants> omega_;
};

/// Lie bracket [X, Y] = DY X - DX Y evaluated at x.
Vec lie_bracket(const VectorFieldSystem& f, int i, int j, const Vec& x);

namespace catalog {

/// V_i = e_i.
VectorFieldSystem constant_orthonormal(int d);
/// V_i = column i of the given matrix.
VectorFieldSystem constant_general(const Mat& sigma);
VectorFieldSystem constant_general(const Mat& sigma, std::string name);
/// d = 1, V(x) = x.
VectorFieldSystem linear_1d();
/// V_i(x) = A_i x + c_i.
VectorFieldSystem linear_fields(const std::vector<Mat>& a, const std::vector<Vec>& c);
/// d = 3 frame on Euler angles (psi, theta, phi) with [V_i, V_j] = c eps_{ijl} V_l.
/// Elliptic for |theta| < pi/2.
VectorFieldSystem so3_frame(double c = 1.0);

std::vector<std::string> names();

}  // namespace catalog

}  // namespace fbmheat
