#include "fbmheat/fbm.hpp"

#include "fbmheat/parallel.hpp"
#include "fbmheat/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <random>

namespace fbmheat {

std::size_t TimeGrid::index_of(double t) const {
  const double r = t / dt();
  const double i = std::round(r);
  if (i < 0 || i > static_cast<double>(n_) || std::abs(r - i) > 1e-9)
    throw std::invalid_argument("time " + std::to_string(t) + " is not a grid point");
  return static_cast<std::size_t>(i);
}

TimeGrid TimeGrid::coarsen(std::size_t stride) const {
  if (stride == 0 || n_ % stride != 0) throw std::invalid_argument("grid coarsening stride must divide n");
  return TimeGrid(horizon_, n_ / stride);
}

double covariance(double t, double s, double H) {
  if (t < 0 || s < 0) throw std::invalid_argument("covariance needs nonnegative times");
  const double h2 = 2.0 * H;
  return 0.5 * (std::pow(s, h2) + std::pow(t, h2) - std::pow(std::abs(t - s), h2));
}

double covariance_dt(double t, double s, double H) {
  const double e = 2.0 * H - 1.0;
  const double d = t - s;
  const double sg = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
  return H * (std::pow(t, e) - sg * std::pow(std::abs(d), e));
}

double volterra_kernel_raw(double t, double s, double H) {
  if (!(s > 0.0) || !(s < t)) throw std::invalid_argument("volterra kernel needs 0 < s < t");
  // v = (u-s)^alpha removes the (u-s)^{H-3/2} singularity
  const double alpha = H - 0.5, inv = 1.0 / alpha;
  const double top = std::pow(t - s, alpha);
  auto f = [&](double v) { return std::pow(s + std::pow(v, inv), alpha); };
  // integrand changes regime near v = s^alpha; split geometrically there
  double lo = 0.0, acc = 0.0;
  double mark = std::pow(s, alpha);
  while (mark < top) {
    acc += integrate_gl(f, lo, mark, 32);
    lo = mark;
    mark *= 4.0;
  }
  acc += integrate_gl(f, lo, top, 32);
  return std::pow(s, -alpha) * acc * inv;
}

double volterra_constant(double H) {
  static std::mutex mutex;
  static std::map<double, double> cache;
  std::lock_guard<std::mutex> lock(mutex);
  if (auto it = cache.find(H); it != cache.end()) return it->second;
  const double norm = integrate_ts([&](double s) {
    const double k = volterra_kernel_raw(1.0, s, H);
    return k * k;
  }, 0.0, 1.0, 1.0 / 32.0, 6.0);
  const double c = 1.0 / std::sqrt(norm);
  cache.emplace(H, c);
  return c;
}

double volterra_kernel(double t, double s, double H) {
  return volterra_constant(H) * volterra_kernel_raw(t, s, H);
}

Eigen::MatrixXd increment_gram(const TimeGrid& grid, double H) {
  const auto n = static_cast<Eigen::Index>(grid.n_steps());
  const double h2 = 2.0 * H, scale = std::pow(grid.dt(), h2);
  Eigen::VectorXd lag(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double kk = static_cast<double>(k);
    lag(k) = 0.5 * (std::pow(kk + 1.0, h2) + std::pow(std::abs(kk - 1.0), h2) - 2.0 * std::pow(kk, h2)) * scale;
  }
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index l = 0; l < n; ++l) g(j, l) = lag(std::abs(j - l));
  return g;
}

Eigen::MatrixXd covariance_matrix(const TimeGrid& grid, double H) {
  const auto m = static_cast<Eigen::Index>(grid.n_points());
  Eigen::MatrixXd c(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) c(i, j) = covariance(grid.point(i), grid.point(j), H);
  return c;
}

std::string to_string(SamplerKind kind) { return kind == SamplerKind::cholesky ? "cholesky" : "volterra"; }

SamplerKind sampler_from_string(const std::string& name) {
  if (name == "cholesky") return SamplerKind::cholesky;
  if (name == "volterra") return SamplerKind::volterra;
  throw std::invalid_argument("unknown sampler '" + name + "' (expected cholesky or volterra)");
}

FbmGenerator::FbmGenerator(const TimeGrid& grid, Hurst H, SamplerKind kind)
    : grid_(grid), H_(H.value()), kind_(kind) {
  const std::size_t n = grid.n_steps();
  if (n > kMaxSteps) throw std::invalid_argument("fBm sampler supports at most 8192 steps");
  const auto ni = static_cast<Eigen::Index>(n);
  map_ = Eigen::MatrixXd::Zero(ni + 1, ni);
  if (kind == SamplerKind::cholesky) {
    Eigen::MatrixXd g = increment_gram(grid, H_);
    Eigen::LLT<Eigen::MatrixXd> llt(g);
    if (llt.info() != Eigen::Success) {
      g.diagonal().array() += 1e-12 * std::pow(grid.horizon(), 2.0 * H_);
      llt.compute(g);
      if (llt.info() != Eigen::Success)
        throw NumericalError("increment covariance is not positive definite after jitter (n=" +
                             std::to_string(n) + ", H=" + std::to_string(H_) + ")");
    }
    const Eigen::MatrixXd l = llt.matrixL();
    for (Eigen::Index i = 1; i <= ni; ++i) map_.row(i) = map_.row(i - 1) + l.row(i - 1);
  } else {
    const double dt = grid.dt(), sq = std::sqrt(dt);
    for (Eigen::Index i = 1; i <= ni; ++i) {
      const double t = grid.point(static_cast<std::size_t>(i));
      for (Eigen::Index j = 0; j < i; ++j)
        map_(i, j) = volterra_kernel(t, (static_cast<double>(j) + 0.5) * dt, H_) * sq;
    }
  }
}

void FbmGenerator::sample_chunk(std::uint64_t seed, std::uint64_t chunk, std::size_t count, int d,
                                double* out) const {
  const auto n = static_cast<Eigen::Index>(grid_.n_steps());
  const auto cols = static_cast<Eigen::Index>(count) * d;
  auto rng = chunk_rng(seed, chunk);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd z(n, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index j = 0; j < n; ++j) z(j, c) = normal(rng);
  const Eigen::MatrixXd b = map_ * z;
  const auto m = n + 1;
  for (Eigen::Index p = 0; p < static_cast<Eigen::Index>(count); ++p)
    for (Eigen::Index i = 0; i < m; ++i)
      for (int c = 0; c < d; ++c) out[(p * m + i) * d + c] = b(i, p * d + c);
}

FbmPathSet sample_fbm(const TimeGrid& grid, int d, std::size_t n_paths, Hurst H, std::uint64_t seed,
                      SamplerKind kind, const SampleOptions& opts) {
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("dimension must be in [1, 6]");
  if (opts.chunk_size == 0) throw std::invalid_argument("chunk size must be positive");
  FbmGenerator gen(grid, H, kind);
  FbmPathSet set{grid, d, H, seed, kind, n_paths, opts.chunk_size, {}};
  const std::size_t stride = grid.n_points() * static_cast<std::size_t>(d);
  set.values.assign(n_paths * stride, 0.0);
  const std::size_t chunks = (n_paths + opts.chunk_size - 1) / opts.chunk_size;
  parallel_for(chunks, opts.threads, [&](std::size_t c) {
    const std::size_t first = c * opts.chunk_size;
    const std::size_t count = std::min(opts.chunk_size, n_paths - first);
    gen.sample_chunk(seed, c, count, d, set.values.data() + first * stride);
  });
  return set;
}

ControlVector::ControlVector(const TimeGrid& g, RowMatrix values) : grid(g), phi(std::move(values)) {
  if (phi.rows() != static_cast<Eigen::Index>(g.n_steps()))
    throw std::invalid_argument("control needs one row per grid step");
  if (!phi.allFinite()) throw std::invalid_argument("control entries must be finite");
}

ControlVector ControlVector::constant(const TimeGrid& g, const Eigen::VectorXd& value) {
  RowMatrix m(static_cast<Eigen::Index>(g.n_steps()), value.size());
  m.rowwise() = value.transpose();
  return ControlVector(g, std::move(m));
}

Eigen::MatrixXd cm_basis(const TimeGrid& grid, double H, std::size_t substeps) {
  if (substeps == 0) throw std::invalid_argument("substeps must be positive");
  const std::size_t n = grid.n_steps(), rows = n * substeps + 1;
  const TimeGrid fine(grid.horizon(), n * substeps);
  Eigen::MatrixXd basis(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < rows; ++r) {
    const double tau = fine.point(r);
    double prev = covariance(tau, 0.0, H);
    for (std::size_t j = 0; j < n; ++j) {
      const double next = covariance(tau, grid.point(j + 1), H);
      basis(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = next - prev;
      prev = next;
    }
  }
  return basis;
}

RowMatrix cm_shift_from_control(const ControlVector& phi, double H) {
  return cm_basis(phi.grid, H, 1) * phi.phi;
}

double cm_norm_squared(const ControlVector& phi, double H) {
  const Eigen::MatrixXd g = increment_gram(phi.grid, H);
  return (phi.phi.transpose() * g * phi.phi).trace();
}

std::vector<double> girsanov_log_weight(const FbmPathSet& paths, const ControlVector& phi) {
  if (!(paths.grid == phi.grid)) throw std::invalid_argument("control and paths must share a grid");
  if (paths.dim != phi.dim()) throw std::invalid_argument("control and paths must share a dimension");
  const double half_norm = 0.5 * cm_norm_squared(phi, paths.hurst);
  const auto n = static_cast<Eigen::Index>(paths.grid.n_steps());
  std::vector<double> out(paths.n_paths);
  for (std::size_t p = 0; p < paths.n_paths; ++p) {
    const auto b = paths.path(p);
    double pair = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) pair += phi.phi.row(j).dot(b.row(j + 1) - b.row(j));
    out[p] = pair - half_norm;
  }
  return out;
}

std::vector<double> girsanov_weight(const FbmPathSet& paths, const ControlVector& phi) {
  auto w = girsanov_log_weight(paths, phi);
  for (double& x : w) x = std::exp(x);
  return w;
}

}  // namespace fbmheat
