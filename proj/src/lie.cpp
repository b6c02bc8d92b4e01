#include "fbmheat/lie.hpp"

#include "fbmheat/ode.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fbmheat {

void validate_word(const Word& w, int d) {
  if (w.empty() || static_cast<int>(w.size()) > kMaxWordLength)
    throw std::invalid_argument("word length must be in [1, 4]");
  for (int l : w)
    if (l < 0 || l >= d) throw std::invalid_argument("word letter out of range");
}

std::vector<Word> words_up_to(int d, int max_length) {
  std::vector<Word> out;
  for (int k = 1; k <= max_length; ++k) {
    Word w(static_cast<std::size_t>(k), 0);
    for (;;) {
      out.push_back(w);
      int pos = k - 1;
      while (pos >= 0 && ++w[static_cast<std::size_t>(pos)] == d) w[static_cast<std::size_t>(pos--)] = 0;
      if (pos < 0) break;
    }
  }
  return out;
}

int descent_count(const std::vector<int>& perm) {
  int e = 0;
  for (std::size_t j = 0; j + 1 < perm.size(); ++j) e += perm[j] > perm[j + 1] ? 1 : 0;
  return e;
}

std::vector<std::vector<int>> permutations(int k) {
  std::vector<int> p(static_cast<std::size_t>(k));
  std::iota(p.begin(), p.end(), 0);
  std::vector<std::vector<int>> out;
  do out.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  return out;
}

double lambda_weight(const std::vector<int>& perm) {
  const int k = static_cast<int>(perm.size());
  const int e = descent_count(perm);
  double binom = 1.0;
  for (int i = 1; i <= e; ++i) binom = binom * (k - 1 - e + i) / i;
  return (e % 2 == 0 ? 1.0 : -1.0) / (static_cast<double>(k * k) * binom);
}

TensorSignature::TensorSignature(int d, int depth) : d_(d), depth_(depth) {
  if (depth < 1 || depth > kMaxWordLength) throw std::invalid_argument("signature depth must be in [1, 4]");
  std::size_t size = 1;
  for (int k = 0; k <= depth; ++k) {
    levels_.emplace_back(size, 0.0);
    exp_.emplace_back(size, 0.0);
    size *= static_cast<std::size_t>(d);
  }
  levels_[0][0] = 1.0;
}

double TensorSignature::coeff(const Word& w) const {
  validate_word(w, d_);
  if (static_cast<int>(w.size()) > depth_) throw std::invalid_argument("word longer than signature depth");
  std::size_t idx = 0;
  for (int l : w) idx = idx * static_cast<std::size_t>(d_) + static_cast<std::size_t>(l);
  return levels_[w.size()][idx];
}

void TensorSignature::extend(const double* dx) {
  const auto d = static_cast<std::size_t>(d_);
  // exp(dx) levels: dx^{(x)m} / m!
  exp_[0][0] = 1.0;
  for (int m = 1; m <= depth_; ++m) {
    auto& cur = exp_[static_cast<std::size_t>(m)];
    const auto& prev = exp_[static_cast<std::size_t>(m - 1)];
    for (std::size_t a = 0; a < prev.size(); ++a)
      for (std::size_t b = 0; b < d; ++b) cur[a * d + b] = prev[a] * dx[b] / m;
  }
  // Chen: S <- S (x) exp(dx), highest level first so lower levels are still old
  for (int k = depth_; k >= 1; --k) {
    auto& out = levels_[static_cast<std::size_t>(k)];
    for (int a = 0; a < k; ++a) {
      const auto& s = levels_[static_cast<std::size_t>(a)];
      const auto& e = exp_[static_cast<std::size_t>(k - a)];
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == 0.0) continue;
        const std::size_t base = i * e.size();
        for (std::size_t j = 0; j < e.size(); ++j) out[base + j] += s[i] * e[j];
      }
    }
  }
}

TensorSignature path_signature(const double* path, std::size_t last, int d, int depth) {
  TensorSignature sig(d, depth);
  double dx[kMaxDim];
  for (std::size_t r = 0; r < last; ++r) {
    for (int c = 0; c < d; ++c) dx[c] = path[(r + 1) * d + c] - path[r * d + c];
    sig.extend(dx);
  }
  return sig;
}

namespace {

template <class F>
std::vector<double> per_path(const FbmPathSet& paths, const Word& w, double t, F&& fn) {
  validate_word(w, paths.dim);
  const std::size_t last = paths.grid.index_of(t);
  std::vector<double> out(paths.n_paths);
  const std::size_t stride = paths.grid.n_points() * static_cast<std::size_t>(paths.dim);
  for (std::size_t p = 0; p < paths.n_paths; ++p) {
    const TensorSignature sig =
        path_signature(paths.values.data() + p * stride, last, paths.dim, static_cast<int>(w.size()));
    out[p] = fn(sig);
  }
  return out;
}

}  // namespace

std::vector<double> iterated_integral(const FbmPathSet& paths, const Word& w, double t) {
  return per_path(paths, w, t, [&](const TensorSignature& s) { return s.coeff(w); });
}

double lambda_from_signature(const TensorSignature& sig, const Word& w) {
  const int k = static_cast<int>(w.size());
  double acc = 0.0;
  Word permuted(w.size());
  for (const auto& perm : permutations(k)) {
    // permuted word (i_{sigma^{-1}(1)}, ..., i_{sigma^{-1}(k)})
    for (int j = 0; j < k; ++j) permuted[static_cast<std::size_t>(perm[j])] = w[static_cast<std::size_t>(j)];
    acc += lambda_weight(perm) * sig.coeff(permuted);
  }
  return acc;
}

std::vector<double> lambda_coefficient(const FbmPathSet& paths, const Word& w, double t) {
  return per_path(paths, w, t, [&](const TensorSignature& s) { return lambda_from_signature(s, w); });
}

namespace {

// Field Y evaluated at any point; used for nested brackets.
using FieldFn = std::function<Vec(const Vec&)>;

Mat fd_jacobian(const FieldFn& y, const Vec& x, double h) {
  const auto d = x.size();
  Mat j(d, d);
  for (Eigen::Index b = 0; b < d; ++b) {
    Vec xp = x, xm = x;
    xp(b) += h;
    xm(b) -= h;
    j.col(b) = (y(xp) - y(xm)) / (2.0 * h);
  }
  return j;
}

FieldFn bracket_fn(const VectorFieldSystem& fields, const Word& w, std::size_t from, double h) {
  const int i = w[from];
  if (from + 1 == w.size()) return [&fields, i](const Vec& x) -> Vec { return fields.field(i, x); };
  if (from + 2 == w.size()) {
    const int j = w[from + 1];
    return [&fields, i, j](const Vec& x) -> Vec { return lie_bracket(fields, i, j, x); };
  }
  FieldFn inner = bracket_fn(fields, w, from + 1, h);
  const double step = h * std::pow(10.0, static_cast<double>(w.size() - from - 3));
  return [&fields, i, inner, step](const Vec& x) -> Vec {
    const double hs = step * (1.0 + x.norm());
    return fd_jacobian(inner, x, hs) * fields.field(i, x) - fields.jacobian(i, x) * inner(x);
  };
}

}  // namespace

Vec lie_bracket_field(const VectorFieldSystem& fields, const Word& w, const Vec& x, double h) {
  validate_word(w, fields.dim());
  return bracket_fn(fields, w, 0, h)(x);
}

Vec exp_lie_flow(const VectorFieldSystem& fields, const TensorSignature& sig, const Vec& x, int N, int steps) {
  if (N < 1 || N > 3) throw std::invalid_argument("exp_lie_flow supports 1 <= N <= 3");
  if (sig.depth() < N) throw std::invalid_argument("signature depth below N");
  const int d = fields.dim();
  Vec c1(d);
  for (int i = 0; i < d; ++i) c1(i) = sig.coeff({i});
  Mat c2 = Mat::Zero(d, d);
  std::vector<std::pair<Word, double>> higher;
  for (const Word& w : words_up_to(d, N)) {
    if (w.size() == 2) c2(w[0], w[1]) = lambda_from_signature(sig, w);
    if (w.size() >= 3) {
      const double c = lambda_from_signature(sig, w);
      if (c != 0.0) higher.emplace_back(w, c);
    }
  }
  std::vector<FieldFn> higher_fns;
  for (const auto& [w, c] : higher) higher_fns.push_back(bracket_fn(fields, w, 0, 1e-4));
  auto rhs = [&](const Vec& y) -> Vec {
    const Mat s = fields.sigma(y);
    Vec v = s * c1;
    if (N >= 2) {
      std::vector<Mat> jac(static_cast<std::size_t>(d));
      for (int i = 0; i < d; ++i) jac[i] = fields.jacobian(i, y);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          const double c = c2(i, j);
          if (c != 0.0) v += c * (jac[j] * s.col(i) - jac[i] * s.col(j));
        }
    }
    for (std::size_t q = 0; q < higher.size(); ++q) v += higher[q].second * higher_fns[q](y);
    return v;
  };
  return rk4_flow(rhs, x, steps);
}

std::vector<Vec> exp_lie_flow(const VectorFieldSystem& fields, const FbmPathSet& paths, const Vec& x, double t,
                              int N, int steps) {
  const std::size_t last = paths.grid.index_of(t);
  const std::size_t stride = paths.grid.n_points() * static_cast<std::size_t>(paths.dim);
  std::vector<Vec> out;
  out.reserve(paths.n_paths);
  for (std::size_t p = 0; p < paths.n_paths; ++p) {
    const TensorSignature sig = path_signature(paths.values.data() + p * stride, last, paths.dim, N);
    out.push_back(exp_lie_flow(fields, sig, x, N, steps));
  }
  return out;
}

double field_derivative(const VectorFieldSystem& fields, const ScalarFunction& f, const Word& w, const Vec& x,
                        double h) {
  validate_word(w, fields.dim());
  // g_0 = f; g_{m} = V_{w[k-m]} g_{m-1}; the outermost operator is w[0]
  std::function<double(const Vec&, std::size_t)> apply = [&](const Vec& y, std::size_t from) -> double {
    if (from == w.size()) return f(y);
    const Vec v = fields.field(w[from], y);
    const std::size_t depth = w.size() - from;  // 1 = innermost
    const double step = depth == 1 ? h : 10.0 * h;
    const double fp1 = apply(y + step * v, from + 1), fm1 = apply(y - step * v, from + 1);
    const double fp2 = apply(y + 2.0 * step * v, from + 1), fm2 = apply(y - 2.0 * step * v, from + 1);
    return (8.0 * (fp1 - fm1) - (fp2 - fm2)) / (12.0 * step);
  };
  return apply(x, 0);
}

std::vector<ExpansionTerm> mean_expansion(const VectorFieldSystem& fields, const ScalarFunction& f, const Vec& x,
                                          int N, const FbmPathSet& paths) {
  if (N < 1 || N > 2) throw std::invalid_argument("mean_expansion supports 1 <= N <= 2");
  if (paths.dim != fields.dim()) throw std::invalid_argument("mean_expansion: dimension mismatch");
  const int d = fields.dim();
  const int depth = 2 * N;
  const std::size_t last = paths.grid.index_of(1.0);
  const std::size_t stride = paths.grid.n_points() * static_cast<std::size_t>(d);
  std::vector<TensorSignature> sigs;
  sigs.reserve(paths.n_paths);
  for (std::size_t p = 0; p < paths.n_paths; ++p)
    sigs.push_back(path_signature(paths.values.data() + p * stride, last, d, depth));
  std::vector<ExpansionTerm> out;
  for (int k = 1; k <= N; ++k) {
    // per-path combination sum_I (V_I f)(x) J_I, so the standard error accounts for correlations
    std::vector<double> acc(paths.n_paths, 0.0);
    for (const Word& w : words_up_to(d, 2 * k)) {
      if (static_cast<int>(w.size()) != 2 * k) continue;
      const double coef = field_derivative(fields, f, w, x);
      if (coef == 0.0) continue;
      for (std::size_t p = 0; p < sigs.size(); ++p) acc[p] += coef * sigs[p].coeff(w);
    }
    const MeanEstimate m = mean_estimate(acc);
    out.push_back({k, m.mean, m.stderr_});
  }
  return out;
}

}  // namespace fbmheat
