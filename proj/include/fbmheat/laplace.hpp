#pragma once

#include "fbmheat/fbm.hpp"
#include "fbmheat/fields.hpp"
#include "fbmheat/optimize.hpp"
#include "fbmheat/stats.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace fbmheat {

/// 1/2 phi^T G phi summed over coordinates.
double rate_norm(const ControlVector& phi, double H);

using EndpointFunctional = std::function<double(const Vec&)>;

struct RateProblem {
  VectorFieldSystem fields;
  Vec x0;
  TimeGrid grid;  // control grid, n steps
  double H;
  int substeps = 4;  // skeleton nodes per control step
  std::optional<Vec> target;
  EndpointFunctional functional;
};

/// Control -> Cameron-Martin path -> skeleton, with the whitening phi = L^{-T} z
/// (G = L L^T) under which the Cameron-Martin norm becomes |z|^2.
class SkeletonMap {
 public:
  explicit SkeletonMap(const RateProblem& prob);

  const TimeGrid& fine_grid() const { return fine_; }
  const Eigen::MatrixXd& gram() const { return gram_; }

  RowMatrix control_path(const RowMatrix& phi) const { return basis_ * phi; }
  RowMatrix skeleton(const RowMatrix& phi) const;
  Vec endpoint(const RowMatrix& phi) const;

  RowMatrix from_white(const Eigen::VectorXd& z) const;
  Eigen::VectorXd to_white(const RowMatrix& phi) const;

 private:
  const RateProblem* prob_;
  TimeGrid fine_;
  Eigen::MatrixXd basis_;
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd chol_l_;
};

struct MinimizerOptions {
  int stages = 6;
  double penalty0 = 10.0;
  double penalty_growth = 10.0;
  BfgsOptions bfgs{400, 1e-8, 1e-6};
  int starts = 4;  // free-energy multi-start count
  double start_scale = 0.5;
  std::uint64_t seed = 1;
  int hessian_directions = 8;
};

struct TraceRow {
  int stage = 0;
  int start = 0;
  double penalty = 0.0;
  double value = 0.0;
  double residual = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
};

struct MinimizerResult {
  explicit MinimizerResult(ControlVector p) : phi(std::move(p)) {}

  ControlVector phi;
  double value = 0.0;  // rate (endpoint mode) or F + rate (functional mode)
  double rate = 0.0;
  Vec endpoint;
  double endpoint_residual = 0.0;
  double gradient_norm = 0.0;
  Vec multipliers;  // endpoint mode
  std::vector<double> hessian_sample;
  bool h2_violation = false;
  bool converged = false;
  std::vector<TraceRow> trace;
};

/// Minimizes 1/2 phi^T G phi subject to Phi_T(x0, k(phi)) = y by
/// augmented-Lagrangian continuation with BFGS inner solves.
MinimizerResult minimize_rate_endpoint(const RateProblem& prob, const MinimizerOptions& opts = {});

/// Minimizes F(Phi_T(x0, k(phi))) + 1/2 phi^T G phi, multi-start.
MinimizerResult minimize_free_energy(const RateProblem& prob, const MinimizerOptions& opts = {});

/// Central second differences of the objective (Lagrangian in endpoint mode)
/// along random unit directions.
std::vector<double> hessian_directional(const RateProblem& prob, const MinimizerResult& min, int n_directions,
                                        std::uint64_t seed, double h = 1e-3);

/// Linear response of the skeleton phi = Phi(gamma) to a perturbation of the
/// driver: first order solves
///   dg1 = sigma(phi) dD + d_x sigma(phi) g1 dgamma + d_x b g1 dt + d_eps b dt
/// and second order
///   dg2 = 2 d_x sigma(phi) g1 dD + d2_x sigma(phi)(g1,g1) dgamma + d_x sigma(phi) g2 dgamma + drift terms.
/// Drivers are linear between the nodes; one RK4 step per node interval.
class Linearization {
 public:
  Linearization(const VectorFieldSystem& fields, const RowMatrix& gamma, double dt, const Vec& x0,
                bool include_eps_drift = true);

  const RowMatrix& skeleton() const { return phi_; }
  std::size_t n_intervals() const { return static_cast<std::size_t>(phi_.rows() - 1); }

  /// drive: (m+1) x d node values. Either output may be null.
  void solve(const RowMatrix& drive, RowMatrix* first, RowMatrix* second) const;
  /// Same with the drive in path-major raw storage; endpoints only.
  void solve_endpoint(const double* drive, Vec* first, Vec* second) const;

 private:
  struct Stage {
    Mat sigma;
    Mat a;                  // sum_i dgamma^i J_i + dt D b
    std::vector<Mat> jac;   // J_i
    std::vector<Mat> curv;  // curv[a](b,c) = sum_i dgamma^i d_b d_c V_i^a + dt d_b d_c b^a
    Vec eps_drift;          // dt d_eps b
  };
  Stage make_stage(const Vec& x, const Vec& dgamma) const;
  template <class Drive>
  void integrate(Drive&& drive_inc, RowMatrix* first, RowMatrix* second, Vec* g1_end, Vec* g2_end) const;

  const VectorFieldSystem* fields_;
  double dt_;
  bool eps_drift_;
  int d_;
  RowMatrix phi_;
  std::vector<Stage> stages_;  // 3 per interval: start, middle, end
};

struct Variations {
  TimeGrid fine;
  RowMatrix phi, chi, psi;
};

/// Skeleton along gamma with its first and second variations in direction k.
Variations variations(const VectorFieldSystem& fields, const Vec& x0, const ControlVector& gamma,
                      const ControlVector& k, double H, int substeps = 4);

struct TaylorTerms {
  std::vector<RowMatrix> g1, g2;
};

/// g1, g2 for each path in `paths`, which must live on the skeleton grid
/// (n * substeps steps, same horizon).
TaylorTerms taylor_g(const VectorFieldSystem& fields, const Vec& x0, const ControlVector& gamma, double H,
                     int substeps, const FbmPathSet& paths);

struct ThetaIdentity {
  std::vector<double> lhs, rhs;
  double correlation = 0.0;
  double mean_abs_discrepancy = 0.0;
};

/// lhs = dF(phi_T) g1(T) with a finite-difference gradient of F,
/// rhs = -sum_j <phi_j, B(t_{j+1}) - B(t_j)> on the control grid.
ThetaIdentity theta_prime_identity(const RateProblem& prob, const ControlVector& phi_star, const FbmPathSet& paths);

struct TailProbe {
  double t = 0.0;
  double lambda = 0.0;
  std::vector<double> r1, log_p1, r2, log_p2;
  LineFit fit1;  // log P(|g1| >= r) vs r^2
  LineFit fit2;  // log P(|g2| >= r) vs r
};

struct TailProbeOptions {
  std::size_t n_paths = 100000;
  double lambda = 0.0;  // 0: H - 0.05
  int n_levels = 12;
  double lower_quantile = 0.5;
  std::size_t min_exceedances = 50;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

/// Monte Carlo exceedance probabilities of the Hoelder norms of g1, g2 on [0, t].
TailProbe tail_probe(const VectorFieldSystem& fields, const Vec& x0, const ControlVector& gamma, double H,
                     int substeps, double t, const TailProbeOptions& opts);

struct StabilityRow {
  double eps = 0.0;
  MeanEstimate exp_moment;  // E exp(-(1+beta) U(eps))
  MeanEstimate u;           // E U(eps)
  double expansion_error = 0.0;  // mean |(Z^eps_T - phi_T)/eps - g1(T)|
};

struct StabilityReport {
  double beta = 0.0;
  MeanEstimate u0;  // U(0) = (dF g2 + d2F(g1,g1)) / 2
  std::vector<StabilityRow> rows;
  double expansion_order = 0.0;  // slope of log expansion_error vs log eps
};

/// Bounded-sample report for U(eps) = (theta(eps) - theta(0) - eps theta'(0)) / eps^2,
/// theta(eps) = F(Z^eps_T), on the given eps ladder.
StabilityReport stability_report(const RateProblem& prob, const ControlVector& phi_star, const FbmPathSet& paths,
                                 const std::vector<double>& eps_ladder, double beta);

}  // namespace fbmheat
