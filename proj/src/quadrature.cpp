#include "fbmheat/quadrature.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace fbmheat {
namespace {

// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix of the
// orthogonal-polynomial recurrence, weights mu0 * (first eigenvector comp)^2.
QuadratureRule golub_welsch(const Eigen::VectorXd& offdiag, double mu0) {
  const auto n = offdiag.size() + 1;
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) jacobi(i, i + 1) = jacobi(i + 1, i) = offdiag(i);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    rule.nodes[i] = es.eigenvalues()(i);
    const double v = es.eigenvectors()(0, i);
    rule.weights[i] = mu0 * v * v;
  }
  return rule;
}

std::mutex cache_mutex;

}  // namespace

const QuadratureRule& gauss_legendre(std::size_t order) {
  static std::map<std::size_t, QuadratureRule> cache;
  if (order < 1) throw std::invalid_argument("quadrature order must be positive");
  std::lock_guard<std::mutex> lock(cache_mutex);
  auto it = cache.find(order);
  if (it != cache.end()) return it->second;
  Eigen::VectorXd b(order - 1);
  for (std::size_t k = 1; k < order; ++k) {
    const double kk = static_cast<double>(k);
    b(k - 1) = kk / std::sqrt(4.0 * kk * kk - 1.0);
  }
  return cache.emplace(order, golub_welsch(b, 2.0)).first->second;
}

const QuadratureRule& gauss_hermite_normal(std::size_t order) {
  static std::map<std::size_t, QuadratureRule> cache;
  if (order < 1) throw std::invalid_argument("quadrature order must be positive");
  std::lock_guard<std::mutex> lock(cache_mutex);
  auto it = cache.find(order);
  if (it != cache.end()) return it->second;
  // probabilists' Hermite: x He_k = He_{k+1} + k He_{k-1}
  Eigen::VectorXd b(order - 1);
  for (std::size_t k = 1; k < order; ++k) b(k - 1) = std::sqrt(static_cast<double>(k));
  return cache.emplace(order, golub_welsch(b, 1.0)).first->second;
}

}  // namespace fbmheat
