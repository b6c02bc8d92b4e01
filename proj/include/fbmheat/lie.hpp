#pragma once

#include "fbmheat/fbm.hpp"
#include "fbmheat/fields.hpp"
#include "fbmheat/stats.hpp"

#include <functional>
#include <vector>

namespace fbmheat {

/// Word over the letters 0..d-1, length 1..4.
using Word = std::vector<int>;

inline constexpr int kMaxWordLength = 4;

void validate_word(const Word& w, int d);

/// All words of length 1..max_length over d letters, shortest first.
std::vector<Word> words_up_to(int d, int max_length);

/// Number of j with perm[j] > perm[j+1].
int descent_count(const std::vector<int>& perm);

/// All permutations of 0..k-1 in lexicographic order.
std::vector<std::vector<int>> permutations(int k);

/// (-1)^e / (k^2 binom(k-1, e)), e = descent_count(perm).
double lambda_weight(const std::vector<int>& perm);

/// Truncated signature (iterated integrals) of a piecewise-linear path,
/// built with Chen's identity.
class TensorSignature {
 public:
  TensorSignature(int d, int depth);

  int dim() const { return d_; }
  int depth() const { return depth_; }
  /// int_{t_1 < ... < t_k} dX^{w_1} ... dX^{w_k}
  double coeff(const Word& w) const;
  /// Appends one linear segment with increment dx.
  void extend(const double* dx);
  const std::vector<double>& level(int k) const { return levels_[static_cast<std::size_t>(k)]; }

 private:
  int d_, depth_;
  std::vector<std::vector<double>> levels_;  // levels_[0] = {1}
  std::vector<std::vector<double>> exp_;     // scratch for exp(dx)
};

/// Signature of rows 0..last of a path-major (rows x d) array.
TensorSignature path_signature(const double* path, std::size_t last, int d, int depth);

/// int_{Delta^k[0,t]} dB^I per path.
std::vector<double> iterated_integral(const FbmPathSet& paths, const Word& w, double t);

/// Lambda_I from a signature: sum over sigma of lambda_weight(sigma) times
/// the iterated integral of the word (i_{sigma^{-1}(1)}, ..., i_{sigma^{-1}(k)}).
double lambda_from_signature(const TensorSignature& sig, const Word& w);

std::vector<double> lambda_coefficient(const FbmPathSet& paths, const Word& w, double t);

/// V_I = [V_{i1}, [V_{i2}, ... [V_{i(k-1)}, V_{ik}]]] at x. Inner brackets use
/// analytic or finite-difference Jacobians; deeper levels use central
/// differences with steps widened by 10 per level.
Vec lie_bracket_field(const VectorFieldSystem& fields, const Word& w, const Vec& x, double h = 1e-4);

/// Time-1 flow of the frozen field sum_{|I| <= N} Lambda_I V_I, with
/// coefficients read from `sig` (RK4, `steps` steps).
Vec exp_lie_flow(const VectorFieldSystem& fields, const TensorSignature& sig, const Vec& x, int N,
                 int steps = 256);

/// Per-path exp_lie_flow at time t (t a grid point).
std::vector<Vec> exp_lie_flow(const VectorFieldSystem& fields, const FbmPathSet& paths, const Vec& x, double t,
                              int N, int steps = 256);

using ScalarFunction = std::function<double(const Vec&)>;

/// (V_{i1} ... V_{ik} f)(x) by nested 5-point central differences along the
/// fields; steps h at the innermost level, 10h beyond.
double field_derivative(const VectorFieldSystem& fields, const ScalarFunction& f, const Word& w, const Vec& x,
                        double h = 1e-3);

struct ExpansionTerm {
  int k = 0;          // power t^{2kH}
  double value = 0.0;
  double stderr_ = 0.0;
};

/// sum_{|I| = 2k} (V_I f)(x) E[int_{Delta^{2k}[0,1]} dB^I], k = 1..N, with
/// expectations from paths on [0, 1].
std::vector<ExpansionTerm> mean_expansion(const VectorFieldSystem& fields, const ScalarFunction& f, const Vec& x,
                                          int N, const FbmPathSet& paths);

}  // namespace fbmheat
