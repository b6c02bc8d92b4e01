#pragma once

#include "fbmheat/fbm.hpp"
#include "fbmheat/fields.hpp"
#include "fbmheat/geometry.hpp"
#include "fbmheat/stats.hpp"

#include <span>
#include <string>
#include <vector>

namespace fbmheat {

/// kde: Gaussian kernel, normal-reference bandwidth.
/// kde_debiased: Gaussian kernel minus its leading bias h^2/2 Laplacian
/// (a fourth-order kernel), wider bandwidth sigma n^{-1/(d+8)}.
/// histogram: cell centred at the evaluation point.
enum class Estimator { kde, kde_debiased, histogram };

std::string to_string(Estimator e);
Estimator estimator_from_string(const std::string& s);

struct DensityEstimate {
  std::vector<Vec> points;
  std::vector<double> p_hat;
  std::vector<double> stderr_;     // bootstrap
  std::vector<double> bias_bound;  // leading-order smoothing bias estimate
  std::size_t n_paths = 0;
  std::size_t blowups = 0;
  bool valid = true;  // blowups <= 0.1% of n_paths
  Estimator estimator = Estimator::kde;
  Vec bandwidth;  // per coordinate (cell side for histograms)
  Eigen::MatrixXd replicates;  // points x bootstrap resamples of p_hat
};

struct KdeOptions {
  Estimator estimator = Estimator::kde;
  int bootstrap = 200;
  std::uint64_t seed = 1;
  double bandwidth_scale = 1.0;
};

/// Scales s_c = min(sd_c, IQR_c / 1.349).
/// Normal-reference bandwidth per coordinate, s_c (4 / ((d+2) n))^{1/(d+4)};
/// equals 1.06 s n^{-1/5} for d = 1.
Vec reference_bandwidth(const RowMatrix& samples);
/// s_c n^{-1/(d+8)}.
Vec debiased_bandwidth(const RowMatrix& samples);
/// 3.5 s_c n^{-1/(d+2)}.
Vec histogram_cell(const RowMatrix& samples);

/// Density of the rows of `samples` at `points`. `n_total` >= rows counts
/// excluded (blown-up) samples as mass outside every cell. `row_path[i]` is
/// the path index of row i (default: i); the bootstrap resamples path indices,
/// so estimates sharing paths, seed and n_total get jointly resampled replicates.
DensityEstimate estimate_density(const RowMatrix& samples, std::size_t n_total, const std::vector<Vec>& points,
                                 const KdeOptions& opts, std::span<const std::size_t> row_path = {});

struct Histogram {
  WorkingBox box;
  int bins_per_dim = 0;
  std::vector<double> density;  // row-major cells, first coordinate slowest
  double integral() const;
};

Histogram histogram(const RowMatrix& samples, std::size_t n_total, const WorkingBox& box, int bins_per_dim);

struct SamplingOptions {
  double H = 0.7;
  std::size_t n_steps = 128;
  SamplerKind sampler = SamplerKind::cholesky;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::size_t chunk_size = 1024;
};

/// X_t for each t in `times`, from one driver set on [0, 1] solved with
/// eps = t^H (self-similarity), so all t share random numbers.
struct EndpointSamples {
  std::vector<double> times;
  std::vector<RowMatrix> samples;   // rows of blown-up paths are dropped
  std::vector<std::vector<std::size_t>> row_path;  // path index of each row
  std::vector<std::size_t> blowups;
  std::size_t n_paths = 0;
};

EndpointSamples sample_endpoints(const VectorFieldSystem& fields, const Vec& x, const std::vector<double>& times,
                                 std::size_t n_paths, const SamplingOptions& opts);

DensityEstimate mc_density(const VectorFieldSystem& fields, const Vec& x, double t, std::size_t n_paths,
                           const std::vector<Vec>& points, const SamplingOptions& sopts, const KdeOptions& kopts);

/// (2 pi)^{-d/2} / |det sigma(x)|.
double a0_closed_form(const VectorFieldSystem& fields, const Vec& x);

struct AsymptoticsFit {
  double H = 0.0;
  int d = 0;
  int K = 0;
  std::vector<double> t_values;
  std::vector<double> y, y_stderr;  // t^{Hd} p_hat and its standard error
  std::vector<double> coefficients, ci_half_width;  // c_0..c_K, 95%
  Eigen::MatrixXd covariance;
  double residual_norm = 0.0;
  double condition = 0.0;
  bool ill_conditioned = false;  // condition > 1e8
  double c0_without_largest_t = 0.0;  // jackknife stability
  std::size_t blowups = 0;
  bool valid = true;
};

/// Weighted fit of y(t) = t^{Hd} p_hat(t; x, x) on {1, t^{2H}, ..., t^{2KH}}.
/// With `replicates` (times x resamples of y, jointly resampled) the
/// coefficient covariance is the spread of the refitted replicates, which
/// accounts for the t values sharing one path set.
AsymptoticsFit fit_asymptotics(const std::vector<double>& t_values, const std::vector<double>& y,
                               const std::vector<double>& y_stderr, double H, int d, int K,
                               const Eigen::MatrixXd* replicates = nullptr);

AsymptoticsFit ondiag_fit(const VectorFieldSystem& fields, const Vec& x, const std::vector<double>& t_values,
                          std::size_t n_paths, int K, const SamplingOptions& sopts, const KdeOptions& kopts);

/// Driver decomposition B = B_1 h + W with h(s) = R(s, 1) / R(1, 1), W
/// independent of B_1, and for each pair i < j
///   A^{ij} = int B^i dB^j - int B^j dB^i = alpha^{ij} + b_i beta^j - b_j beta^i
/// with alpha^{ij} the area of W and beta^j = int h dW^j - int W^j dh.
struct AreaSamples {
  int d = 0;
  std::size_t n = 0;
  std::vector<double> b;      // n x d
  std::vector<double> alpha;  // n x d(d-1)/2, pairs (i<j) in lexicographic order
  std::vector<double> beta;   // n x d
};

AreaSamples sample_areas(int d, std::size_t n_paths, const SamplingOptions& opts);

/// Tangent variable at time t,
///   sum_i B^i_t V_i(x) + 1/2 sum_{i<j} A^{ij}_t [V_i, V_j](x)   (N = 2),
/// density at 0 by conditioning on W: given W it is affine in B_1.
struct TangentDensity {
  double t = 0.0;
  int N = 0;
  MeanEstimate density;
  std::vector<double> per_path;
};

/// sigma = V(x); brackets[p] = [V_i, V_j](x) for pair p.
TangentDensity tangent_density(const Mat& sigma, const std::vector<Vec>& brackets, const AreaSamples& areas,
                               double t, double H, int N);
TangentDensity tangent_density(const VectorFieldSystem& fields, const Vec& x, double t, int N, std::size_t n_paths,
                               const SamplingOptions& opts);
/// sigma = I, brackets[p]^k = omega(k, i, j).
TangentDensity tangent_density(const StructureConstants& omega, double t, int N, std::size_t n_paths,
                               const SamplingOptions& opts);

enum class QhMethod { fit, quadrature };
std::string to_string(QhMethod m);
QhMethod qh_method_from_string(const std::string& s);

struct QhEstimate {
  QhMethod method = QhMethod::fit;
  double value = 0.0;
  double stderr_ = 0.0;
  std::size_t n_paths = 0;
  std::vector<double> t_ladder;       // fit method
  std::vector<double> normalized;     // (2 pi t^{2H})^{d/2} p(t), fit method
};

struct QhOptions {
  std::vector<double> t_ladder{0.02, 0.04, 0.06, 0.08, 0.1};
  int hermite_order = 20;
};

QhEstimate qh_estimate(const StructureConstants& omega, double H, std::size_t n_paths, std::uint64_t seed,
                       QhMethod method, const SamplingOptions& sopts = {}, const QhOptions& qopts = {});

struct OffDiagonalFit {
  std::vector<double> t_used, t_dropped;
  std::vector<double> x, y, y_stderr;  // x = 1/(2 t^{2H}), y = -log(t^{Hd} p_hat)
  double slope = 0.0, slope_stderr = 0.0;
  double intercept = 0.0;
  std::size_t blowups = 0;
  bool valid = true;
};

OffDiagonalFit offdiag_exponent(const VectorFieldSystem& fields, const Vec& x, const Vec& y,
                                const std::vector<double>& t_values, std::size_t n_paths,
                                const SamplingOptions& sopts, const KdeOptions& kopts);

}  // namespace fbmheat
