#pragma once

#include "fbmheat/core.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace fbmheat {

/// R(t,s) = (s^{2H} + t^{2H} - |t-s|^{2H}) / 2.
double covariance(double t, double s, double H);

/// d/dt R(t,s) for t > 0.
double covariance_dt(double t, double s, double H);

/// Normalizing constant of the Volterra kernel, calibrated so that
/// int_0^1 K(1,s)^2 ds = 1. Cached per H.
double volterra_constant(double H);

/// K_H(t,s) = c_H s^{1/2-H} int_s^t (u-s)^{H-3/2} u^{H-1/2} du, 0 < s < t.
double volterra_kernel(double t, double s, double H);

/// Uncalibrated kernel integral (c_H = 1).
double volterra_kernel_raw(double t, double s, double H);

/// Gram matrix of the increments B(t_{j+1}) - B(t_j) on a uniform grid.
Eigen::MatrixXd increment_gram(const TimeGrid& grid, double H);

/// Exact covariance matrix [R(t_i, t_j)] over all grid points.
Eigen::MatrixXd covariance_matrix(const TimeGrid& grid, double H);

enum class SamplerKind { cholesky, volterra };

std::string to_string(SamplerKind kind);
SamplerKind sampler_from_string(const std::string& name);

/// Linear map from n iid standard normals to the n+1 path values of one
/// coordinate: B = M z. Row 0 of M is zero.
class FbmGenerator {
 public:
  static constexpr std::size_t kMaxSteps = 8192;

  FbmGenerator(const TimeGrid& grid, Hurst H, SamplerKind kind);

  const TimeGrid& grid() const { return grid_; }
  double hurst() const { return H_; }
  SamplerKind kind() const { return kind_; }
  const Eigen::MatrixXd& value_map() const { return map_; }

  /// Covariance of the generated values, M M^T. Equals the exact matrix
  /// for the Cholesky sampler up to rounding.
  Eigen::MatrixXd generated_covariance() const { return map_ * map_.transpose(); }

  /// Writes `count` paths of dimension d for chunk `chunk` into out, laid
  /// out path-major: out[(p * (n+1) + i) * d + c]. The normals come from
  /// chunk_rng(seed, chunk) only.
  void sample_chunk(std::uint64_t seed, std::uint64_t chunk, std::size_t count, int d,
                    double* out) const;

 private:
  TimeGrid grid_;
  double H_;
  SamplerKind kind_;
  Eigen::MatrixXd map_;
};

/// Batch of sampled paths, path-major storage.
struct FbmPathSet {
  TimeGrid grid;
  int dim;
  Hurst hurst;
  std::uint64_t seed;
  SamplerKind sampler;
  std::size_t n_paths;
  std::size_t chunk_size;
  std::vector<double> values;

  double at(std::size_t p, std::size_t i, int c) const {
    return values[(p * grid.n_points() + i) * static_cast<std::size_t>(dim) + static_cast<std::size_t>(c)];
  }
  /// (n+1) x d view of path p.
  Eigen::Map<const RowMatrix> path(std::size_t p) const {
    return {values.data() + p * grid.n_points() * static_cast<std::size_t>(dim),
            static_cast<Eigen::Index>(grid.n_points()), dim};
  }
};

struct SampleOptions {
  std::size_t chunk_size = 1024;
  unsigned threads = 0;  // 0: default_threads()
};

FbmPathSet sample_fbm(const TimeGrid& grid, int d, std::size_t n_paths, Hurst H, std::uint64_t seed,
                      SamplerKind kind, const SampleOptions& opts = {});

inline FbmPathSet sample_fbm_cholesky(const TimeGrid& grid, int d, std::size_t n_paths, Hurst H,
                                      std::uint64_t seed, const SampleOptions& opts = {}) {
  return sample_fbm(grid, d, n_paths, H, seed, SamplerKind::cholesky, opts);
}

inline FbmPathSet sample_fbm_volterra(const TimeGrid& grid, int d, std::size_t n_paths, Hurst H,
                                      std::uint64_t seed, const SampleOptions& opts = {}) {
  return sample_fbm(grid, d, n_paths, H, seed, SamplerKind::volterra, opts);
}

/// Piecewise-constant control phi_j on [t_j, t_{j+1}), n x d.
struct ControlVector {
  TimeGrid grid;
  RowMatrix phi;

  ControlVector(const TimeGrid& g, int d) : grid(g), phi(RowMatrix::Zero(static_cast<Eigen::Index>(g.n_steps()), d)) {}
  ControlVector(const TimeGrid& g, RowMatrix values);

  int dim() const { return static_cast<int>(phi.cols()); }
  static ControlVector constant(const TimeGrid& g, const Eigen::VectorXd& value);
};

/// Rows: R(tau_r, t_{j+1}) - R(tau_r, t_j) for the refined times
/// tau_r = r * dt / substeps, r = 0..n*substeps. k(tau) = basis * phi.
Eigen::MatrixXd cm_basis(const TimeGrid& grid, double H, std::size_t substeps = 1);

/// Cameron-Martin path k on the grid, (n+1) x d.
RowMatrix cm_shift_from_control(const ControlVector& phi, double H);

/// |k|^2 in the Cameron-Martin norm: sum over coordinates of phi^T G phi.
double cm_norm_squared(const ControlVector& phi, double H);

/// log of the Radon-Nikodym weight sum_j <phi_j, dB_j> - |k|^2/2 per path.
/// Under the weighted measure, B has the law of fBm shifted by k.
std::vector<double> girsanov_log_weight(const FbmPathSet& paths, const ControlVector& phi);
std::vector<double> girsanov_weight(const FbmPathSet& paths, const ControlVector& phi);

}  // namespace fbmheat
