#include "fbmheat/fields.hpp"

#include <cmath>
#include <stdexcept>

namespace fbmheat {

StructureConstants StructureConstants::levi_civita(double c) {
  StructureConstants w(3);
  const int even[3][3] = {{0, 1, 2}, {1, 2, 0}, {2, 0, 1}};
  for (const auto& p : even) {
    w(p[2], p[0], p[1]) = c;
    w(p[2], p[1], p[0]) = -c;
  }
  return w;
}

StructureConstants StructureConstants::scaled(double c) const {
  StructureConstants w = *this;
  for (double& v : w.data_) v *= c;
  return w;
}

StructureConstants StructureConstants::permuted(const std::vector<int>& perm) const {
  if (static_cast<int>(perm.size()) != d_) throw std::invalid_argument("permutation size mismatch");
  StructureConstants w(d_);
  for (int l = 0; l < d_; ++l)
    for (int i = 0; i < d_; ++i)
      for (int j = 0; j < d_; ++j) w(l, i, j) = (*this)(perm[l], perm[i], perm[j]);
  return w;
}

bool StructureConstants::is_zero() const {
  for (double v : data_)
    if (v != 0.0) return false;
  return true;
}

VectorFieldSystem::VectorFieldSystem(std::string name, int d, SigmaFn sigma, JacobianFn jacobian)
    : name_(std::move(name)), d_(d), sigma_(std::move(sigma)), jacobian_(std::move(jacobian)) {
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("field dimension must be in [1, 6]");
  if (!sigma_) throw std::invalid_argument("field system needs a sigma function");
}

Mat VectorFieldSystem::jacobian(int i, const Vec& x) const {
  if (jacobian_) return jacobian_(i, x);
  const double h = 1e-5 * (1.0 + x.norm());
  Mat j(d_, d_);
  Vec xp = x, xm = x;
  for (int b = 0; b < d_; ++b) {
    xp(b) = x(b) + h;
    xm(b) = x(b) - h;
    j.col(b) = (sigma_(xp).col(i) - sigma_(xm).col(i)) / (2.0 * h);
    xp(b) = xm(b) = x(b);
  }
  return j;
}

Vec VectorFieldSystem::drift(double eps, const Vec& x) const {
  if (!drift_) return Vec::Zero(d_);
  return drift_(eps, x);
}

VectorFieldSystem VectorFieldSystem::scaled(double c) const {
  auto s = sigma_;
  JacobianFn j;
  if (jacobian_) {
    auto inner = jacobian_;
    j = [inner, c](int i, const Vec& x) -> Mat { return c * inner(i, x); };
  }
  VectorFieldSystem out(name_, d_, [s, c](const Vec& x) -> Mat { return c * s(x); }, j);
  out.drift_ = drift_;
  if (omega_) out.omega_ = omega_->scaled(c);
  return out;
}

Vec lie_bracket(const VectorFieldSystem& f, int i, int j, const Vec& x) {
  const Mat s = f.sigma(x);
  return f.jacobian(j, x) * s.col(i) - f.jacobian(i, x) * s.col(j);
}

namespace catalog {

VectorFieldSystem constant_general(const Mat& sigma, std::string name) {
  const int d = static_cast<int>(sigma.rows());
  if (sigma.cols() != d) throw std::invalid_argument("constant field matrix must be square");
  const Mat zero = Mat::Zero(d, d);
  VectorFieldSystem f(std::move(name), d, [sigma](const Vec&) -> Mat { return sigma; },
                      [zero](int, const Vec&) -> Mat { return zero; });
  f.set_structure(StructureConstants(d));
  return f;
}

VectorFieldSystem constant_general(const Mat& sigma) { return constant_general(sigma, "constant-general"); }

VectorFieldSystem constant_orthonormal(int d) {
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("field dimension must be in [1, 6]");
  return constant_general(Mat::Identity(d, d), "constant-orthonormal");
}

VectorFieldSystem linear_1d() {
  VectorFieldSystem f("linear-1d", 1, [](const Vec& x) -> Mat { return Mat::Constant(1, 1, x(0)); },
                      [](int, const Vec&) -> Mat { return Mat::Identity(1, 1); });
  f.set_structure(StructureConstants(1));
  return f;
}

VectorFieldSystem linear_fields(const std::vector<Mat>& a, const std::vector<Vec>& c) {
  const int d = static_cast<int>(a.size());
  if (d < 1 || d > kMaxDim || c.size() != a.size())
    throw std::invalid_argument("linear fields need d matrices and d offsets");
  for (int i = 0; i < d; ++i)
    if (a[i].rows() != d || a[i].cols() != d || c[i].size() != d)
      throw std::invalid_argument("linear field coefficient has wrong shape");
  return VectorFieldSystem(
      "linear", d,
      [a, c, d](const Vec& x) -> Mat {
        Mat s(d, d);
        for (int i = 0; i < d; ++i) s.col(i) = a[i] * x + c[i];
        return s;
      },
      [a](int i, const Vec&) -> Mat { return a[i]; });
}

namespace {

// Frame on ZYX Euler angles x = (psi, theta, phi) with [V_i, V_j] = eps_{ijl} V_l.
Mat so3_sigma(const Vec& x, double c) {
  const double th = x(1), ph = x(2);
  const double ct = std::cos(th), tt = std::tan(th), sp = std::sin(ph), cp = std::cos(ph);
  Mat s(3, 3);
  s << 0.0, sp / ct, cp / ct,
       0.0, cp, -sp,
       1.0, tt * sp, tt * cp;
  return c * s;
}

Mat so3_jacobian(int i, const Vec& x, double c) {
  const double th = x(1), ph = x(2);
  const double ct = std::cos(th), st = std::sin(th), tt = std::tan(th), sp = std::sin(ph), cp = std::cos(ph);
  const double sec2 = 1.0 / (ct * ct);
  Mat j = Mat::Zero(3, 3);
  if (i == 1) {
    j.col(1) << sp * st * sec2, 0.0, sp * sec2;
    j.col(2) << cp / ct, -sp, tt * cp;
  } else if (i == 2) {
    j.col(1) << cp * st * sec2, 0.0, cp * sec2;
    j.col(2) << -sp / ct, -cp, -tt * sp;
  }
  return c * j;
}

}  // namespace

VectorFieldSystem so3_frame(double c) {
  VectorFieldSystem f("so3-frame", 3, [c](const Vec& x) -> Mat { return so3_sigma(x, c); },
                      [c](int i, const Vec& x) -> Mat { return so3_jacobian(i, x, c); });
  f.set_structure(StructureConstants::levi_civita(c));
  return f;
}

std::vector<std::string> names() {
  return {"constant-orthonormal", "constant-general", "linear-1d", "linear", "so3-frame"};
}

}  // namespace catalog

}  // namespace fbmheat
