#include "fbmheat/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace fbmheat {

MeanEstimate mean_estimate(std::span<const double> x) {
  MeanEstimate out;
  const double n = static_cast<double>(x.size());
  if (x.empty()) return out;
  // two-pass for stability
  double s = 0.0;
  for (double v : x) s += v;
  out.mean = s / n;
  double ss = 0.0;
  for (double v : x) ss += (v - out.mean) * (v - out.mean);
  out.variance = x.size() > 1 ? ss / (n - 1.0) : 0.0;
  out.stderr_ = std::sqrt(out.variance / n);
  return out;
}

double correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("correlation: size mismatch");
  const auto mx = mean_estimate(x).mean, my = mean_estimate(y).mean;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line needs >= 2 points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    sse += r * r;
  }
  f.r_squared = syy > 0 ? 1.0 - sse / syy : 1.0;
  if (x.size() > 2) {
    const double s2 = sse / (n - 2.0);
    f.slope_stderr = std::sqrt(s2 / sxx);
    f.intercept_stderr = std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
  }
  return f;
}

LinearFit weighted_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& weights) {
  if (design.rows() != y.size() || y.size() != weights.size())
    throw std::invalid_argument("weighted_least_squares: dimension mismatch");
  const Eigen::VectorXd sw = weights.cwiseSqrt();
  const Eigen::MatrixXd a = sw.asDiagonal() * design;
  const Eigen::VectorXd b = sw.asDiagonal() * y;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  LinearFit fit;
  const auto& sv = svd.singularValues();
  fit.condition = sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1) : INFINITY;
  fit.beta = svd.solve(b);
  fit.covariance = (a.transpose() * a).inverse();
  fit.residual_norm = (a * fit.beta - b).norm();
  return fit;
}

double jarque_bera(std::span<const double> x) {
  const auto m = mean_estimate(x);
  const double n = static_cast<double>(x.size());
  double m2 = 0, m3 = 0, m4 = 0;
  for (double v : x) {
    const double d = v - m.mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  const double skew = m3 / std::pow(m2, 1.5);
  const double kurt = m4 / (m2 * m2);
  return n / 6.0 * (skew * skew + 0.25 * (kurt - 3.0) * (kurt - 3.0));
}

}  // namespace fbmheat
