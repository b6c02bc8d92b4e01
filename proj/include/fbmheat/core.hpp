#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace fbmheat {

/// Upper bound on the state dimension. Small fixed-capacity Eigen types keep
/// the per-step arithmetic of the path solvers off the heap.
inline constexpr int kMaxDim = 6;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Raised when a computation fails for numerical reasons (factorization
/// failure, blow-up, non-convergent refinement).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Hurst parameter restricted to the regular case 1/2 < H < 1.
class Hurst {
 public:
  explicit Hurst(double value) : value_(value) {
    if (!(value > 0.5 && value < 1.0))
      throw std::invalid_argument("Hurst parameter must satisfy H in (1/2,1), got " +
                                  std::to_string(value));
  }
  double value() const { return value_; }
  operator double() const { return value_; }

 private:
  double value_;
};

/// Uniform grid 0 = t_0 < ... < t_n = T.
class TimeGrid {
 public:
  TimeGrid() : TimeGrid(1.0, 1) {}
  TimeGrid(double horizon, std::size_t n_steps) : horizon_(horizon), n_(n_steps) {
    if (!(horizon > 0.0)) throw std::invalid_argument("grid horizon must be positive");
    if (n_steps == 0) throw std::invalid_argument("grid needs at least one step");
  }

  double horizon() const { return horizon_; }
  std::size_t n_steps() const { return n_; }
  std::size_t n_points() const { return n_ + 1; }
  double dt() const { return horizon_ / static_cast<double>(n_); }
  double point(std::size_t i) const {
    return i == n_ ? horizon_ : horizon_ * static_cast<double>(i) / static_cast<double>(n_);
  }

  /// Index of grid point t; throws if t is not on the grid.
  std::size_t index_of(double t) const;

  /// Grid with every `stride`-th point; n must be divisible by stride.
  TimeGrid coarsen(std::size_t stride) const;

  bool operator==(const TimeGrid& o) const { return horizon_ == o.horizon_ && n_ == o.n_; }

 private:
  double horizon_;
  std::size_t n_;
};

}  // namespace fbmheat
