#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace fbmheat {

struct MeanEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;  // standard error of the mean
  double variance = 0.0; // sample variance
};

MeanEstimate mean_estimate(std::span<const double> x);

double correlation(std::span<const double> x, std::span<const double> y);

/// Ordinary least squares y = intercept + slope*x.
struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double slope_stderr = 0.0;
  double intercept_stderr = 0.0;
  double r_squared = 0.0;
};

LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Weighted least squares y ~ X beta with weights w (typically 1/se^2).
struct LinearFit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd covariance;  // (X^T W X)^{-1}
  double residual_norm = 0.0;  // sqrt(sum w r^2)
  double condition = 0.0;      // 2-norm condition of sqrt(W) X
};

LinearFit weighted_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& weights);

/// Jarque-Bera statistic; approximately chi^2(2) under normality.
double jarque_bera(std::span<const double> x);

/// 99% quantile of chi^2 with 2 degrees of freedom.
inline constexpr double kChi2TwoDof99 = 9.2103403719761836;

}  // namespace fbmheat
