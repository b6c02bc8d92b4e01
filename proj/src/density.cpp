#include "fbmheat/density.hpp"

#include "fbmheat/parallel.hpp"
#include "fbmheat/quadrature.hpp"
#include "fbmheat/young.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fbmheat {

std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::kde: return "kde";
    case Estimator::kde_debiased: return "kde_debiased";
    case Estimator::histogram: return "histogram";
  }
  return "?";
}

Estimator estimator_from_string(const std::string& s) {
  if (s == "kde") return Estimator::kde;
  if (s == "kde_debiased") return Estimator::kde_debiased;
  if (s == "histogram") return Estimator::histogram;
  throw std::invalid_argument("unknown estimator: " + s);
}

std::string to_string(QhMethod m) { return m == QhMethod::fit ? "fit" : "quadrature"; }

QhMethod qh_method_from_string(const std::string& s) {
  if (s == "fit") return QhMethod::fit;
  if (s == "quadrature") return QhMethod::quadrature;
  throw std::invalid_argument("unknown q_H method: " + s);
}

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;

// Robust scale min(sd, IQR / 1.349) per coordinate.
Vec column_scale(const RowMatrix& s) {
  if (s.rows() < 2) throw std::invalid_argument("density estimate needs at least two samples");
  const Eigen::RowVectorXd mean = s.colwise().mean();
  const auto n = static_cast<std::size_t>(s.rows());
  Vec out(s.cols());
  std::vector<double> col(n);
  for (Eigen::Index c = 0; c < s.cols(); ++c) {
    const double sd =
        std::sqrt((s.col(c).array() - mean(c)).square().sum() / static_cast<double>(s.rows() - 1));
    for (std::size_t i = 0; i < n; ++i) col[i] = s(static_cast<Eigen::Index>(i), c);
    auto quantile = [&](double q) {
      const auto k = static_cast<std::ptrdiff_t>(q * static_cast<double>(n - 1));
      std::nth_element(col.begin(), col.begin() + k, col.end());
      return col[static_cast<std::size_t>(k)];
    };
    const double iqr = quantile(0.75) - quantile(0.25);
    out(c) = iqr > 0.0 ? std::min(sd, iqr / 1.349) : sd;
    if (!(out(c) > 0.0)) throw NumericalError("density estimate: degenerate sample coordinate");
  }
  return out;
}

}  // namespace

Vec reference_bandwidth(const RowMatrix& samples) {
  const auto d = static_cast<double>(samples.cols()), n = static_cast<double>(samples.rows());
  return column_scale(samples) * std::pow(4.0 / ((d + 2.0) * n), 1.0 / (d + 4.0));
}

Vec debiased_bandwidth(const RowMatrix& samples) {
  const auto d = static_cast<double>(samples.cols()), n = static_cast<double>(samples.rows());
  return column_scale(samples) * std::pow(n, -1.0 / (d + 8.0));
}

Vec histogram_cell(const RowMatrix& samples) {
  const auto d = static_cast<double>(samples.cols()), n = static_cast<double>(samples.rows());
  return column_scale(samples) * (3.5 * std::pow(n, -1.0 / (d + 2.0)));
}

DensityEstimate estimate_density(const RowMatrix& samples, std::size_t n_total, const std::vector<Vec>& points,
                                 const KdeOptions& opts, std::span<const std::size_t> row_path) {
  const auto m = static_cast<std::size_t>(samples.rows());
  const auto d = static_cast<int>(samples.cols());
  if (n_total < m) throw std::invalid_argument("estimate_density: n_total below sample count");
  if (!row_path.empty() && row_path.size() != m) throw std::invalid_argument("estimate_density: row_path size mismatch");
  DensityEstimate est;
  est.points = points;
  est.n_paths = n_total;
  est.blowups = n_total - m;
  est.valid = static_cast<double>(est.blowups) <= 1e-3 * static_cast<double>(n_total);
  est.estimator = opts.estimator;
  switch (opts.estimator) {
    case Estimator::kde: est.bandwidth = reference_bandwidth(samples); break;
    case Estimator::kde_debiased: est.bandwidth = debiased_bandwidth(samples); break;
    case Estimator::histogram: est.bandwidth = histogram_cell(samples); break;
  }
  est.bandwidth *= opts.bandwidth_scale;
  const Vec h = est.bandwidth;
  const Vec href = opts.estimator == Estimator::histogram ? reference_bandwidth(samples) : h;
  double norm = 1.0, ref_norm = 1.0;
  for (int c = 0; c < d; ++c) {
    norm *= opts.estimator == Estimator::histogram ? h(c) : kInvSqrt2Pi / h(c);
    ref_norm *= kInvSqrt2Pi / href(c);
  }
  if (opts.estimator == Estimator::histogram) norm = 1.0 / norm;

  const std::size_t np = points.size();
  Eigen::MatrixXd values(static_cast<Eigen::Index>(np), static_cast<Eigen::Index>(m));
  const auto nt = static_cast<double>(n_total);
  for (std::size_t q = 0; q < np; ++q) {
    if (points[q].size() != d) throw std::invalid_argument("estimate_density: point dimension mismatch");
    double bias = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double u2 = 0.0, s = 0.0, quartic = 0.0, ref_u2 = 0.0, ref_s = 0.0;
      bool inside = true;
      for (int c = 0; c < d; ++c) {
        const double diff = points[q](c) - samples(static_cast<Eigen::Index>(i), c);
        const double u = diff / h(c);
        u2 += u * u;
        s += u * u - 1.0;
        quartic += 2.0 - 4.0 * u * u;
        inside = inside && std::abs(diff) <= 0.5 * h(c);
        const double ur = diff / href(c);
        ref_u2 += ur * ur;
        ref_s += (ur * ur - 1.0) * h(c) * h(c) / (href(c) * href(c));
      }
      double v = 0.0;
      switch (opts.estimator) {
        case Estimator::kde: {
          const double k = norm * std::exp(-0.5 * u2);
          v = k;
          bias += 0.5 * k * s;
          break;
        }
        case Estimator::kde_debiased: {
          const double k = norm * std::exp(-0.5 * u2);
          v = k * (1.0 - 0.5 * s);
          bias += 0.125 * k * (s * s + quartic);
          break;
        }
        case Estimator::histogram:
          v = inside ? norm : 0.0;
          // cell-average bias sum_c h_c^2 d_c^2 p / 24, curvature from a reference KDE
          bias += ref_norm * std::exp(-0.5 * ref_u2) * ref_s / 24.0;
          break;
      }
      values(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(i)) = v;
    }
    est.p_hat.push_back(std::max(0.0, values.row(static_cast<Eigen::Index>(q)).sum() / nt));
    est.bias_bound.push_back(std::abs(bias / nt));
  }

  // bootstrap over all n_total paths; excluded paths contribute nothing
  est.stderr_.assign(np, 0.0);
  if (opts.bootstrap > 1) {
    constexpr std::size_t kExcluded = static_cast<std::size_t>(-1);
    std::vector<std::size_t> row_of(n_total, kExcluded);
    for (std::size_t i = 0; i < m; ++i) row_of[row_path.empty() ? i : row_path[i]] = i;
    std::mt19937_64 rng(chunk_seed(opts.seed, 0xb007));
    std::uniform_int_distribution<std::size_t> pick(0, n_total - 1);
    Eigen::MatrixXd reps(static_cast<Eigen::Index>(np), opts.bootstrap);
    Eigen::VectorXd acc(static_cast<Eigen::Index>(np));
    for (int r = 0; r < opts.bootstrap; ++r) {
      acc.setZero();
      for (std::size_t k = 0; k < n_total; ++k) {
        const std::size_t i = row_of[pick(rng)];
        if (i != kExcluded) acc += values.col(static_cast<Eigen::Index>(i));
      }
      reps.col(r) = acc / nt;
    }
    est.replicates = reps;
    for (std::size_t q = 0; q < np; ++q) {
      const auto row = reps.row(static_cast<Eigen::Index>(q));
      const double mean = row.mean();
      est.stderr_[q] = std::sqrt((row.array() - mean).square().sum() / (opts.bootstrap - 1));
    }
  }
  return est;
}

double Histogram::integral() const {
  double cell = 1.0;
  for (int c = 0; c < box.dim(); ++c) cell *= (box.upper(c) - box.lower(c)) / bins_per_dim;
  double total = 0.0;
  for (double v : density) total += v;
  return total * cell;
}

Histogram histogram(const RowMatrix& samples, std::size_t n_total, const WorkingBox& box, int bins_per_dim) {
  const int d = box.dim();
  if (samples.cols() != d) throw std::invalid_argument("histogram: dimension mismatch");
  if (bins_per_dim < 1) throw std::invalid_argument("histogram: bins_per_dim must be positive");
  Histogram hist{box, bins_per_dim, {}};
  std::size_t cells = 1;
  double cell_volume = 1.0;
  for (int c = 0; c < d; ++c) {
    cells *= static_cast<std::size_t>(bins_per_dim);
    cell_volume *= (box.upper(c) - box.lower(c)) / bins_per_dim;
  }
  hist.density.assign(cells, 0.0);
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    std::size_t idx = 0;
    bool inside = true;
    for (int c = 0; c < d && inside; ++c) {
      const double u = (samples(i, c) - box.lower(c)) / (box.upper(c) - box.lower(c));
      inside = u >= 0.0 && u <= 1.0;
      const int b = std::min(bins_per_dim - 1, static_cast<int>(u * bins_per_dim));
      idx = idx * static_cast<std::size_t>(bins_per_dim) + static_cast<std::size_t>(b);
    }
    if (inside) hist.density[idx] += 1.0;
  }
  for (double& v : hist.density) v /= static_cast<double>(n_total) * cell_volume;
  return hist;
}

EndpointSamples sample_endpoints(const VectorFieldSystem& fields, const Vec& x, const std::vector<double>& times,
                                 std::size_t n_paths, const SamplingOptions& opts) {
  if (times.empty()) throw std::invalid_argument("sample_endpoints: empty time list");
  for (double t : times)
    if (!(t > 0.0)) throw std::invalid_argument("sample_endpoints: t must be positive");
  if (n_paths < 2) throw std::invalid_argument("sample_endpoints: need at least two paths");
  const int d = fields.dim();
  if (x.size() != d) throw std::invalid_argument("sample_endpoints: start point dimension mismatch");
  const TimeGrid grid(1.0, opts.n_steps);
  const FbmGenerator gen(grid, Hurst(opts.H), opts.sampler);
  const std::size_t nt = times.size(), chunk = opts.chunk_size;
  const std::size_t chunks = (n_paths + chunk - 1) / chunk;
  std::vector<double> raw(nt * n_paths * static_cast<std::size_t>(d));
  std::vector<char> ok(nt * n_paths, 0);
  std::vector<double> eps(nt);
  for (std::size_t k = 0; k < nt; ++k) eps[k] = std::pow(times[k], opts.H);
  parallel_for(chunks, opts.threads, [&](std::size_t c) {
    const std::size_t first = c * chunk, count = std::min(chunk, n_paths - first);
    const std::size_t stride = grid.n_points() * static_cast<std::size_t>(d);
    std::vector<double> buf(count * stride);
    gen.sample_chunk(opts.seed, c, count, d, buf.data());
    Vec out(d);
    for (std::size_t p = 0; p < count; ++p)
      for (std::size_t k = 0; k < nt; ++k) {
        const SolveStatus st =
            young_sde_endpoint(fields, buf.data() + p * stride, grid.n_steps(), grid.dt(), x, eps[k], out);
        const std::size_t slot = k * n_paths + first + p;
        ok[slot] = st == SolveStatus::ok ? 1 : 0;
        for (int a = 0; a < d; ++a) raw[slot * static_cast<std::size_t>(d) + static_cast<std::size_t>(a)] = out(a);
      }
  });
  EndpointSamples res;
  res.times = times;
  res.n_paths = n_paths;
  for (std::size_t k = 0; k < nt; ++k) {
    std::size_t good = 0;
    for (std::size_t p = 0; p < n_paths; ++p) good += ok[k * n_paths + p] ? 1 : 0;
    RowMatrix s(static_cast<Eigen::Index>(good), d);
    std::vector<std::size_t> rows;
    rows.reserve(good);
    Eigen::Index r = 0;
    for (std::size_t p = 0; p < n_paths; ++p) {
      const std::size_t slot = k * n_paths + p;
      if (!ok[slot]) continue;
      for (int a = 0; a < d; ++a) s(r, a) = raw[slot * static_cast<std::size_t>(d) + static_cast<std::size_t>(a)];
      rows.push_back(p);
      ++r;
    }
    res.samples.push_back(std::move(s));
    res.row_path.push_back(std::move(rows));
    res.blowups.push_back(n_paths - good);
  }
  return res;
}

DensityEstimate mc_density(const VectorFieldSystem& fields, const Vec& x, double t, std::size_t n_paths,
                           const std::vector<Vec>& points, const SamplingOptions& sopts, const KdeOptions& kopts) {
  const EndpointSamples s = sample_endpoints(fields, x, {t}, n_paths, sopts);
  return estimate_density(s.samples[0], n_paths, points, kopts);
}

double a0_closed_form(const VectorFieldSystem& fields, const Vec& x) {
  const Mat s = sigma_matrix(fields, x);
  const double d = static_cast<double>(fields.dim());
  return std::pow(2.0 * std::numbers::pi, -0.5 * d) / std::abs(s.determinant());
}

AsymptoticsFit fit_asymptotics(const std::vector<double>& t_values, const std::vector<double>& y,
                               const std::vector<double>& y_stderr, double H, int d, int K,
                               const Eigen::MatrixXd* replicates) {
  if (K < 0 || K > 2) throw std::invalid_argument("asymptotics fit needs 0 <= K <= 2");
  const std::size_t n = t_values.size();
  if (n < static_cast<std::size_t>(K + 2)) throw std::invalid_argument("asymptotics fit needs at least K+2 times");
  if (y.size() != n || y_stderr.size() != n) throw std::invalid_argument("asymptotics fit: size mismatch");
  AsymptoticsFit fit;
  fit.H = H;
  fit.d = d;
  fit.K = K;
  fit.t_values = t_values;
  fit.y = y;
  fit.y_stderr = y_stderr;
  auto solve = [&](const std::vector<std::size_t>& rows, const double* values) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), K + 1);
    Eigen::VectorXd yy(X.rows()), w(X.rows());
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      const std::size_t i = rows[static_cast<std::size_t>(r)];
      for (int k = 0; k <= K; ++k) X(r, k) = std::pow(t_values[i], 2.0 * k * H);
      yy(r) = values[i];
      if (!(y_stderr[i] > 0.0)) throw NumericalError("asymptotics fit: zero standard error");
      w(r) = 1.0 / (y_stderr[i] * y_stderr[i]);
    }
    return weighted_least_squares(X, yy, w);
  };
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  const LinearFit lf = solve(all, y.data());
  fit.covariance = lf.covariance;
  if (replicates && replicates->cols() > 1) {
    if (replicates->rows() != static_cast<Eigen::Index>(n)) throw std::invalid_argument("asymptotics fit: replicate rows");
    const Eigen::Index B = replicates->cols();
    Eigen::MatrixXd betas(K + 1, B);
    std::vector<double> col(n);
    for (Eigen::Index b = 0; b < B; ++b) {
      for (std::size_t i = 0; i < n; ++i) col[i] = (*replicates)(static_cast<Eigen::Index>(i), b);
      betas.col(b) = solve(all, col.data()).beta;
    }
    const Eigen::MatrixXd centered = betas.colwise() - betas.rowwise().mean();
    fit.covariance = centered * centered.transpose() / static_cast<double>(B - 1);
  }
  for (int k = 0; k <= K; ++k) {
    fit.coefficients.push_back(lf.beta(k));
    fit.ci_half_width.push_back(1.96 * std::sqrt(fit.covariance(k, k)));
  }
  fit.residual_norm = lf.residual_norm;
  fit.condition = lf.condition;
  fit.ill_conditioned = lf.condition > 1e8;
  if (n >= static_cast<std::size_t>(K + 2)) {
    const auto largest = static_cast<std::size_t>(std::max_element(t_values.begin(), t_values.end()) - t_values.begin());
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < n; ++i)
      if (i != largest) rest.push_back(i);
    fit.c0_without_largest_t = solve(rest, y.data()).beta(0);
  }
  return fit;
}

AsymptoticsFit ondiag_fit(const VectorFieldSystem& fields, const Vec& x, const std::vector<double>& t_values,
                          std::size_t n_paths, int K, const SamplingOptions& sopts, const KdeOptions& kopts) {
  for (double t : t_values)
    if (!(t > 0.0 && t <= 1.0)) throw std::invalid_argument("ondiag_fit: t values must lie in (0, 1]");
  const EndpointSamples s = sample_endpoints(fields, x, t_values, n_paths, sopts);
  const int d = fields.dim();
  std::vector<double> y, se;
  std::size_t blowups = 0;
  bool valid = true;
  Eigen::MatrixXd reps;
  for (std::size_t k = 0; k < t_values.size(); ++k) {
    const DensityEstimate e = estimate_density(s.samples[k], n_paths, {x}, kopts, s.row_path[k]);
    const double scale = std::pow(t_values[k], sopts.H * d);
    y.push_back(scale * e.p_hat[0]);
    se.push_back(scale * e.stderr_[0]);
    if (e.replicates.cols() > 1) {
      if (k == 0) reps.resize(static_cast<Eigen::Index>(t_values.size()), e.replicates.cols());
      reps.row(static_cast<Eigen::Index>(k)) = scale * e.replicates.row(0);
    }
    blowups += e.blowups;
    valid = valid && e.valid;
  }
  AsymptoticsFit fit = fit_asymptotics(t_values, y, se, sopts.H, d, K, reps.size() > 0 ? &reps : nullptr);
  fit.blowups = blowups;
  fit.valid = valid;
  return fit;
}

namespace {

std::size_t pair_count(int d) { return static_cast<std::size_t>(d * (d - 1) / 2); }

}  // namespace

AreaSamples sample_areas(int d, std::size_t n_paths, const SamplingOptions& opts) {
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("sample_areas: bad dimension");
  const TimeGrid grid(1.0, opts.n_steps);
  const FbmGenerator gen(grid, Hurst(opts.H), opts.sampler);
  const std::size_t np = grid.n_points(), pairs = pair_count(d);
  std::vector<double> h(np);
  for (std::size_t k = 0; k < np; ++k) h[k] = covariance(grid.point(k), 1.0, opts.H) / covariance(1.0, 1.0, opts.H);
  AreaSamples out;
  out.d = d;
  out.n = n_paths;
  out.b.assign(n_paths * static_cast<std::size_t>(d), 0.0);
  out.alpha.assign(n_paths * pairs, 0.0);
  out.beta.assign(n_paths * static_cast<std::size_t>(d), 0.0);
  const std::size_t chunk = opts.chunk_size, chunks = (n_paths + chunk - 1) / chunk;
  const auto du = static_cast<std::size_t>(d);
  parallel_for(chunks, opts.threads, [&](std::size_t c) {
    const std::size_t first = c * chunk, count = std::min(chunk, n_paths - first);
    std::vector<double> buf(count * np * du), w(np * du);
    gen.sample_chunk(opts.seed, c, count, d, buf.data());
    for (std::size_t p = 0; p < count; ++p) {
      const double* path = buf.data() + p * np * du;
      const std::size_t id = first + p;
      for (std::size_t a = 0; a < du; ++a) out.b[id * du + a] = path[(np - 1) * du + a];
      for (std::size_t k = 0; k < np; ++k)
        for (std::size_t a = 0; a < du; ++a) w[k * du + a] = path[k * du + a] - out.b[id * du + a] * h[k];
      std::size_t q = 0;
      for (std::size_t i = 0; i < du; ++i)
        for (std::size_t j = i + 1; j < du; ++j, ++q) {
          double acc = 0.0;
          for (std::size_t k = 0; k + 1 < np; ++k)
            acc += w[k * du + i] * (w[(k + 1) * du + j] - w[k * du + j]) -
                   w[k * du + j] * (w[(k + 1) * du + i] - w[k * du + i]);
          out.alpha[id * pairs + q] = acc;
        }
      for (std::size_t j = 0; j < du; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k + 1 < np; ++k)
          acc += h[k] * (w[(k + 1) * du + j] - w[k * du + j]) - w[k * du + j] * (h[k + 1] - h[k]);
        out.beta[id * du + j] = acc;
      }
    }
  });
  return out;
}

TangentDensity tangent_density(const Mat& sigma, const std::vector<Vec>& brackets, const AreaSamples& areas,
                               double t, double H, int N) {
  if (N != 1 && N != 2) throw std::invalid_argument("tangent_density supports N in {1, 2}");
  const int d = areas.d;
  if (sigma.rows() != d || sigma.cols() != d) throw std::invalid_argument("tangent_density: sigma shape");
  if (brackets.size() != pair_count(d)) throw std::invalid_argument("tangent_density: bracket count");
  const double s = std::pow(t, H), s2 = s * s;
  const double gauss_norm = std::pow(2.0 * std::numbers::pi, -0.5 * d);
  const auto du = static_cast<std::size_t>(d);
  const std::size_t pairs = pair_count(d);
  TangentDensity res;
  res.t = t;
  res.N = N;
  res.per_path.resize(areas.n);
  for (std::size_t p = 0; p < areas.n; ++p) {
    // given W: Y = G b + a, b ~ N(0, I)
    Mat G = s * sigma;
    Vec a = Vec::Zero(d);
    if (N == 2) {
      std::size_t q = 0;
      for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j, ++q) {
          const Vec& c = brackets[q];
          G.col(i) += 0.5 * s2 * areas.beta[p * du + static_cast<std::size_t>(j)] * c;
          G.col(j) -= 0.5 * s2 * areas.beta[p * du + static_cast<std::size_t>(i)] * c;
          a += 0.5 * s2 * areas.alpha[p * pairs + q] * c;
        }
    }
    const Eigen::PartialPivLU<Mat> lu(G);
    const double det = std::abs(lu.determinant());
    if (!(det > 0.0)) throw NumericalError("tangent_density: singular conditional map");
    const Vec bstar = -lu.solve(a);
    res.per_path[p] = gauss_norm * std::exp(-0.5 * bstar.squaredNorm()) / det;
  }
  res.density = mean_estimate(res.per_path);
  return res;
}

namespace {

std::vector<Vec> field_brackets(const VectorFieldSystem& fields, const Vec& x) {
  std::vector<Vec> out;
  for (int i = 0; i < fields.dim(); ++i)
    for (int j = i + 1; j < fields.dim(); ++j) out.push_back(lie_bracket(fields, i, j, x));
  return out;
}

std::vector<Vec> omega_brackets(const StructureConstants& omega) {
  const int d = omega.dim();
  std::vector<Vec> out;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      Vec c(d);
      for (int k = 0; k < d; ++k) c(k) = omega(k, i, j);
      out.push_back(c);
    }
  return out;
}

}  // namespace

TangentDensity tangent_density(const VectorFieldSystem& fields, const Vec& x, double t, int N, std::size_t n_paths,
                               const SamplingOptions& opts) {
  const AreaSamples areas = sample_areas(fields.dim(), n_paths, opts);
  return tangent_density(sigma_matrix(fields, x), field_brackets(fields, x), areas, t, opts.H, N);
}

TangentDensity tangent_density(const StructureConstants& omega, double t, int N, std::size_t n_paths,
                               const SamplingOptions& opts) {
  const AreaSamples areas = sample_areas(omega.dim(), n_paths, opts);
  const int d = omega.dim();
  return tangent_density(Mat::Identity(d, d), omega_brackets(omega), areas, t, opts.H, N);
}

QhEstimate qh_estimate(const StructureConstants& omega, double H, std::size_t n_paths, std::uint64_t seed,
                       QhMethod method, const SamplingOptions& sopts, const QhOptions& qopts) {
  const int d = omega.dim();
  SamplingOptions so = sopts;
  so.H = H;
  so.seed = seed;
  QhEstimate est;
  est.method = method;
  est.n_paths = n_paths;
  if (method == QhMethod::fit) {
    est.t_ladder = qopts.t_ladder;
    const std::size_t L = qopts.t_ladder.size();
    if (L < 4) throw std::invalid_argument("q_H fit needs at least four t values");
    if (omega.is_zero()) {
      // the normalized tangent density is identically 1
      est.normalized.assign(L, 1.0);
      return est;
    }
    const AreaSamples areas = sample_areas(d, n_paths, so);
    const auto brackets = omega_brackets(omega);
    Eigen::MatrixXd X(static_cast<Eigen::Index>(L), 3);
    Eigen::MatrixXd r(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(n_paths));
    for (std::size_t l = 0; l < L; ++l) {
      const double t = qopts.t_ladder[l], s2 = std::pow(t, 2.0 * H);
      X.row(static_cast<Eigen::Index>(l)) << 1.0, s2, s2 * s2;
      const TangentDensity td = tangent_density(Mat::Identity(d, d), brackets, areas, t, H, 2);
      const double scale = std::pow(2.0 * std::numbers::pi * s2, 0.5 * d);
      for (std::size_t p = 0; p < n_paths; ++p)
        r(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(p)) = scale * td.per_path[p];
      est.normalized.push_back(scale * td.density.mean);
    }
    // per-path least-squares coefficients; q = -b / a
    const Eigen::MatrixXd P = (X.transpose() * X).ldlt().solve(X.transpose());
    const Eigen::MatrixXd coef = P * r;  // 3 x n
    std::vector<double> av(n_paths), bv(n_paths);
    for (std::size_t p = 0; p < n_paths; ++p) {
      av[p] = coef(0, static_cast<Eigen::Index>(p));
      bv[p] = coef(1, static_cast<Eigen::Index>(p));
    }
    const MeanEstimate A = mean_estimate(av), B = mean_estimate(bv);
    double cov = 0.0;
    for (std::size_t p = 0; p < n_paths; ++p) cov += (av[p] - A.mean) * (bv[p] - B.mean);
    cov /= static_cast<double>(n_paths - 1);
    est.value = -B.mean / A.mean;
    const double q = est.value;
    const double var = (B.variance + q * q * A.variance + 2.0 * q * cov) / (A.mean * A.mean);
    est.stderr_ = std::sqrt(std::max(0.0, var) / static_cast<double>(n_paths));
    return est;
  }

  if (d > 3) throw std::invalid_argument("q_H quadrature supports d <= 3");
  // Gaussian moments of lambda by tensor Gauss-Hermite quadrature
  const QuadratureRule& gh = gauss_hermite_normal(static_cast<std::size_t>(qopts.hermite_order));
  const auto du = static_cast<std::size_t>(d);
  Eigen::MatrixXd M2 = Eigen::MatrixXd::Zero(d, d);
  std::vector<double> M4(du * du * du * du, 0.0);
  std::vector<std::size_t> idx(du, 0);
  const std::size_t nodes = gh.nodes.size();
  for (;;) {
    double w = 1.0;
    Vec lam(d);
    for (std::size_t a = 0; a < du; ++a) {
      w *= gh.weights[idx[a]];
      lam(static_cast<Eigen::Index>(a)) = gh.nodes[idx[a]];
    }
    M2 += w * lam * lam.transpose();
    for (std::size_t a = 0; a < du; ++a)
      for (std::size_t b = 0; b < du; ++b)
        for (std::size_t c = 0; c < du; ++c)
          for (std::size_t e = 0; e < du; ++e)
            M4[((a * du + b) * du + c) * du + e] += w * lam(a) * lam(b) * lam(c) * lam(e);
    std::size_t pos = 0;
    while (pos < du && ++idx[pos] == nodes) idx[pos++] = 0;
    if (pos == du) break;
  }
  const AreaSamples areas = sample_areas(d, n_paths, so);
  const std::size_t pairs = pair_count(d);
  std::vector<double> vals(n_paths);
  for (std::size_t p = 0; p < n_paths; ++p) {
    // beta0_k = sum omega^k_ij alpha^ij, J_kl = d beta0-part / d b_l
    Vec beta0 = Vec::Zero(d);
    Mat J = Mat::Zero(d, d);
    std::size_t q = 0;
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j, ++q)
        for (int k = 0; k < d; ++k) {
          const double w = omega(k, i, j);
          beta0(k) += w * areas.alpha[p * pairs + q];
          J(k, i) += w * areas.beta[p * du + static_cast<std::size_t>(j)];
          J(k, j) -= w * areas.beta[p * du + static_cast<std::size_t>(i)];
        }
    const Eigen::MatrixXd JJt = J * J.transpose();
    double v = beta0.dot(M2 * beta0) + (M2.array() * JJt.array()).sum();
    for (std::size_t a = 0; a < du; ++a)
      for (std::size_t b = 0; b < du; ++b)
        for (std::size_t c = 0; c < du; ++c)
          for (std::size_t e = 0; e < du; ++e)
            v -= M4[((a * du + b) * du + c) * du + e] * J(a, b) * J(c, e);
    vals[p] = 0.125 * v;
  }
  const MeanEstimate m = mean_estimate(vals);
  est.value = m.mean;
  est.stderr_ = m.stderr_;
  return est;
}

OffDiagonalFit offdiag_exponent(const VectorFieldSystem& fields, const Vec& x, const Vec& y,
                                const std::vector<double>& t_values, std::size_t n_paths,
                                const SamplingOptions& sopts, const KdeOptions& kopts) {
  const EndpointSamples s = sample_endpoints(fields, x, t_values, n_paths, sopts);
  const int d = fields.dim();
  OffDiagonalFit fit;
  std::vector<Eigen::VectorXd> rep_rows;
  for (std::size_t k = 0; k < t_values.size(); ++k) {
    const DensityEstimate e = estimate_density(s.samples[k], n_paths, {y}, kopts, s.row_path[k]);
    fit.blowups += e.blowups;
    fit.valid = fit.valid && e.valid;
    const double t = t_values[k];
    if (!(e.p_hat[0] > 5.0 * e.stderr_[0])) {
      fit.t_dropped.push_back(t);
      continue;
    }
    fit.t_used.push_back(t);
    fit.x.push_back(0.5 / std::pow(t, 2.0 * sopts.H));
    fit.y.push_back(-std::log(std::pow(t, sopts.H * d) * e.p_hat[0]));
    fit.y_stderr.push_back(e.stderr_[0] / e.p_hat[0]);
    if (e.replicates.cols() > 1) rep_rows.push_back(e.replicates.row(0).transpose() * std::pow(t, sopts.H * d));
  }
  if (fit.t_used.size() < 3) {
    fit.valid = false;
    return fit;
  }
  const auto n = static_cast<Eigen::Index>(fit.t_used.size());
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd yy(n), w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X.row(i) << 1.0, fit.x[static_cast<std::size_t>(i)];
    yy(i) = fit.y[static_cast<std::size_t>(i)];
    w(i) = 1.0 / std::pow(fit.y_stderr[static_cast<std::size_t>(i)], 2);
  }
  const LinearFit lf = weighted_least_squares(X, yy, w);
  fit.intercept = lf.beta(0);
  fit.slope = lf.beta(1);
  fit.slope_stderr = std::sqrt(lf.covariance(1, 1));
  // joint bootstrap: the t values share one path set
  if (rep_rows.size() == fit.t_used.size() && rep_rows.front().size() > 1) {
    std::vector<double> slopes;
    for (Eigen::Index b = 0; b < rep_rows.front().size(); ++b) {
      Eigen::VectorXd yb(n);
      bool positive = true;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double p = rep_rows[static_cast<std::size_t>(i)](b);
        positive = positive && p > 0.0;
        yb(i) = positive ? -std::log(p) : 0.0;
      }
      if (positive) slopes.push_back(weighted_least_squares(X, yb, w).beta(1));
    }
    if (slopes.size() > 1) fit.slope_stderr = std::sqrt(mean_estimate(slopes).variance);
  }
  return fit;
}

}  // namespace fbmheat
