#pragma once

#include <Eigen/Dense>

#include <functional>

namespace fbmheat {

using Objective = std::function<double(const Eigen::VectorXd&)>;
using Gradient = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Central-difference gradient with absolute step h.
Eigen::VectorXd fd_gradient(const Objective& f, const Eigen::VectorXd& x, double h = 1e-6);

struct BfgsOptions {
  int max_iterations = 400;
  double gradient_tolerance = 1e-8;
  double fd_step = 1e-6;
  /// Stop after this many consecutive iterations with relative decrease below stall_tolerance.
  int stall_iterations = 5;
  double stall_tolerance = 1e-13;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  bool stalled = false;
};

/// BFGS with Armijo backtracking. Uses `grad` when given, central differences
/// otherwise.
BfgsResult bfgs_minimize(const Objective& f, const Eigen::VectorXd& x0, const BfgsOptions& opts = {},
                         const Gradient& grad = nullptr);

}  // namespace fbmheat
