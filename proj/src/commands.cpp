#include "fbmheat/commands.hpp"

#include "fbmheat/density.hpp"
#include "fbmheat/geometry.hpp"
#include "fbmheat/laplace.hpp"
#include "fbmheat/lie.hpp"
#include "fbmheat/parallel.hpp"
#include "fbmheat/stats.hpp"
#include "fbmheat/young.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fbmheat {

std::vector<std::string> command_names() {
  return {"sample", "distance", "rate-min", "check-structure", "expand", "density",
          "ondiag", "offdiag", "qh", "girsanov-check"};
}

RunRecorder::RunRecorder(std::filesystem::path out_dir, std::string command, const ExperimentConfig& cfg)
    : dir_(std::move(out_dir)), command_(std::move(command)), cfg_(&cfg) {
  std::filesystem::create_directories(dir_);
}

void RunRecorder::record(const std::string& name) {
  outputs_.push_back({{"file", name}, {"fnv1a64", hex64(file_hash(dir_ / name))}});
}

void RunRecorder::text(const std::string& name, const std::string& content) {
  write_text(dir_ / name, content);
  record(name);
}

void RunRecorder::json(const std::string& name, const Json& j) { text(name, j.dump(2) + "\n"); }

void RunRecorder::csv(const std::string& name, const CsvTable& t) { text(name, to_csv(t)); }

void RunRecorder::binary_paths(const std::string& name, const FbmPathSet& set) {
  write_paths_binary(dir_ / name, set);
  record(name);
}

void RunRecorder::csv_paths(const std::string& name, const FbmPathSet& set) {
  write_paths_csv(dir_ / name, set);
  record(name);
}

std::uint64_t RunRecorder::stage_seed(const std::string& stage, std::uint64_t index) {
  const std::uint64_t s = chunk_seed(cfg_->seed, index);
  lineage_[stage] = s;
  return s;
}

void RunRecorder::finish(const std::string& status, double wall_seconds) {
  const Json manifest{{"tool", "fbmheat"},
                      {"version", kToolVersion},
                      {"command", command_},
                      {"status", status},
                      {"config_fnv1a64", hex64(fnv1a64(cfg_->source))},
                      {"config", cfg_->to_json()},
                      {"seed", cfg_->seed},
                      {"seed_lineage", lineage_},
                      {"outputs", outputs_},
                      {"wall_clock_seconds", wall_seconds}};
  write_json(dir_ / "manifest.json", manifest);
}

namespace {

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

SamplingOptions sampling(const ExperimentConfig& cfg, std::size_t steps, std::uint64_t seed) {
  SamplingOptions so;
  so.H = cfg.hurst;
  so.n_steps = steps;
  so.sampler = cfg.sampler;
  so.seed = seed;
  so.threads = cfg.threads;
  return so;
}

Json cmd_sample(const ExperimentConfig& cfg, RunRecorder& rec) {
  const TimeGrid grid = cfg.grid();
  const FbmPathSet set = sample_fbm(grid, cfg.dim, cfg.paths, Hurst(cfg.hurst), rec.stage_seed("paths", 0),
                                    cfg.sampler, {1024, cfg.threads});
  if (cfg.format != "binary") rec.csv_paths("paths.csv", set);
  if (cfg.format != "csv") rec.binary_paths("paths.fbm", set);
  // second moments pooled over coordinates against R(t_i, t_j)
  const std::size_t np = grid.n_points();
  const double count = static_cast<double>(cfg.paths) * cfg.dim;
  Eigen::MatrixXd emp = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(np), static_cast<Eigen::Index>(np));
  for (std::size_t p = 0; p < set.n_paths; ++p) {
    const auto b = set.path(p);
    emp.noalias() += b * b.transpose();
  }
  emp /= count;
  CsvTable table{{"i", "j", "t_i", "t_j", "empirical", "exact", "stderr", "z"}, {}};
  double max_dev = 0.0, max_z = 0.0;
  for (std::size_t i = 1; i < np; ++i)
    for (std::size_t j = i; j < np; ++j) {
      const double ti = grid.point(i), tj = grid.point(j);
      const double rij = covariance(ti, tj, cfg.hurst);
      const double se = std::sqrt((covariance(ti, ti, cfg.hurst) * covariance(tj, tj, cfg.hurst) + rij * rij) / count);
      const double e = emp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      const double z = (e - rij) / se;
      max_dev = std::max(max_dev, std::abs(e - rij));
      max_z = std::max(max_z, std::abs(z));
      table.rows.push_back({static_cast<double>(i), static_cast<double>(j), ti, tj, e, rij, se, z});
    }
  rec.csv("covariance.csv", table);
  const Json report{{"sampler", to_string(cfg.sampler)},
                    {"paths", cfg.paths},
                    {"dim", cfg.dim},
                    {"steps", cfg.steps},
                    {"hurst", cfg.hurst},
                    {"max_abs_deviation", max_dev},
                    {"max_abs_z", max_z},
                    {"within_4_se", max_z <= 4.0}};
  rec.json("covariance.json", report);
  return report;
}

Json distance_json(const VectorFieldSystem& f, const Vec& x, const Vec& y, const DistanceResult& r) {
  Json j{{"x", to_std(x)},          {"y", to_std(y)},
         {"distance", r.distance},  {"u", to_std(r.u)},
         {"residual", r.residual},  {"converged", r.converged},
         {"starts_used", r.starts_used}};
  if (f.name().rfind("constant", 0) == 0) {
    const Mat s = f.sigma(x);
    j["closed_form"] = s.partialPivLu().solve(y - x).norm();
  }
  return j;
}

Json cmd_distance(const ExperimentConfig& cfg, RunRecorder& rec) {
  const VectorFieldSystem f = cfg.field_system();
  const Vec x = cfg.start(), y = cfg.target();
  DistanceOptions opts;
  opts.seed = rec.stage_seed("perturbed_starts", 0);
  const DistanceResult r = distance(f, x, y, opts);
  const Json j = distance_json(f, x, y, r);
  rec.json("distance.json", j);
  if (!r.converged) throw NumericalError("distance: shooting did not converge");
  return j;
}

Json cmd_rate_min(const ExperimentConfig& cfg, RunRecorder& rec) {
  const VectorFieldSystem f = cfg.field_system();
  RateProblem prob{f, cfg.start(), cfg.grid(), cfg.hurst, cfg.substeps, std::nullopt, {}};
  MinimizerOptions opts;
  opts.stages = cfg.stages;
  opts.starts = cfg.starts;
  opts.seed = rec.stage_seed("multistart", 0);
  const bool endpoint = cfg.mode == "endpoint";
  Json ref = nullptr;
  if (endpoint) {
    prob.target = cfg.target();
    if ((*prob.target - prob.x0).norm() > 0.0) {
      DistanceOptions dopts;
      dopts.seed = rec.stage_seed("distance", 1);
      const DistanceResult dr = distance(f, prob.x0, *prob.target, dopts);
      ref = dr.distance * dr.distance / (2.0 * std::pow(cfg.horizon, 2.0 * cfg.hurst));
    } else {
      ref = 0.0;
    }
  } else {
    const Vec y = cfg.y.empty() ? Vec(Vec::Zero(cfg.dim)) : cfg.target();
    prob.functional = [y](const Vec& z) { return (z - y).squaredNorm(); };
  }
  const MinimizerResult r = endpoint ? minimize_rate_endpoint(prob, opts) : minimize_free_energy(prob, opts);
  const TimeGrid& g = r.phi.grid;
  CsvTable control{{"j", "t_j"}, {}};
  for (int c = 0; c < cfg.dim; ++c) control.header.push_back("phi" + std::to_string(c));
  for (Eigen::Index j = 0; j < r.phi.phi.rows(); ++j) {
    std::vector<double> row{static_cast<double>(j), g.point(static_cast<std::size_t>(j))};
    for (int c = 0; c < cfg.dim; ++c) row.push_back(r.phi.phi(j, c));
    control.rows.push_back(row);
  }
  rec.csv("control.csv", control);
  const SkeletonMap map(prob);
  const RowMatrix skel = map.skeleton(r.phi.phi);
  CsvTable sk{{"t"}, {}};
  for (int c = 0; c < cfg.dim; ++c) sk.header.push_back("x" + std::to_string(c));
  for (Eigen::Index i = 0; i < skel.rows(); ++i) {
    std::vector<double> row{map.fine_grid().point(static_cast<std::size_t>(i))};
    for (int c = 0; c < cfg.dim; ++c) row.push_back(skel(i, c));
    sk.rows.push_back(row);
  }
  rec.csv("skeleton.csv", sk);
  CsvTable trace{{"stage", "start", "penalty", "value", "residual", "gradient_norm", "iterations"}, {}};
  for (const auto& t : r.trace)
    trace.rows.push_back({static_cast<double>(t.stage), static_cast<double>(t.start), t.penalty, t.value, t.residual,
                          t.gradient_norm, static_cast<double>(t.iterations)});
  rec.csv("trace.csv", trace);
  std::vector<ChartSeries> series;
  for (int c = 0; c < cfg.dim; ++c) {
    ChartSeries s{"phi" + std::to_string(c), {}, {}, false};
    for (const auto& row : control.rows) {
      s.x.push_back(row[1]);
      s.y.push_back(row[2 + static_cast<std::size_t>(c)]);
    }
    series.push_back(s);
  }
  rec.text("control.svg", svg_line_chart("minimizing control", "t", "phi", series));
  Json j{{"mode", cfg.mode},
         {"value", r.value},
         {"rate", r.rate},
         {"endpoint", to_std(r.endpoint)},
         {"endpoint_residual", r.endpoint_residual},
         {"gradient_norm", r.gradient_norm},
         {"multipliers", to_std(r.multipliers)},
         {"hessian_sample", r.hessian_sample},
         {"h2_violation", r.h2_violation},
         {"converged", r.converged},
         {"reference_distance_rate", ref}};
  rec.json("rate.json", j);
  if (!r.converged) throw NumericalError("rate-min: minimizer did not converge");
  return j;
}

Json cmd_check_structure(const ExperimentConfig& cfg, RunRecorder& rec) {
  const VectorFieldSystem f = cfg.field_system();
  const WorkingBox box = cfg.box();
  std::vector<Vec> points;
  if (cfg.dim <= 3) {
    points = box.lattice(5);
  } else {
    std::mt19937_64 rng(rec.stage_seed("box_points", 0));
    for (int i = 0; i < 125; ++i) points.push_back(box.sample(rng));
  }
  const StructureReport s = check_structure(f, points, 1e-6);
  const EllipticityReport e = certify_box(f, box, rec.stage_seed("ellipticity", 1));
  Json omega = Json::array();
  if (!s.omega.empty()) {
    const StructureConstants& w = s.omega.front();
    for (int l = 0; l < cfg.dim; ++l)
      for (int i = 0; i < cfg.dim; ++i)
        for (int k = 0; k < cfg.dim; ++k)
          if (std::abs(w(l, i, k)) > 1e-12) omega.push_back({{"l", l}, {"i", i}, {"j", k}, {"value", w(l, i, k)}});
  }
  const Json j{{"points", s.points.size()},
               {"max_expansion_residual", s.max_expansion_residual},
               {"max_antisymmetry_defect", s.max_antisymmetry_defect},
               {"max_declared_deviation", s.max_declared_deviation},
               {"constant_structure", s.pass},
               {"omega_at_first_point", omega},
               {"ellipticity", {{"min_abs_det", e.min_abs_det},
                                {"worst_point", to_std(e.worst_point)},
                                {"max_field_norm", e.max_field_norm},
                                {"max_jacobian_norm", e.max_jacobian_norm},
                                {"points_checked", e.points_checked},
                                {"ok", e.ok}}}};
  rec.json("structure.json", j);
  return j;
}

// Fixed smooth curve; the probe driver on [0, t] is t * h(s / t).
double probe_curve(int c, double u) {
  const double two_pi_u = 2.0 * std::numbers::pi * u;
  const double shrink = 1.0 / (1.0 + c / 3);
  switch (c % 3) {
    case 0: return shrink * (std::sin(two_pi_u) + u);
    case 1: return shrink * (1.0 - std::cos(two_pi_u) + 0.5 * u * u);
    default: return shrink * (0.7 * std::sin(2.0 * two_pi_u) - u);
  }
}

Json cmd_expand(const ExperimentConfig& cfg, RunRecorder& rec) {
  const VectorFieldSystem f = cfg.field_system();
  const Vec x = cfg.start();
  const int d = cfg.dim;
  const std::size_t M = cfg.expand_nodes;
  CsvTable table{{"N", "t", "error"}, {}};
  Json orders = Json::array();
  std::vector<ChartSeries> series;
  for (int N = 1; N <= cfg.expand_order; ++N) {
    std::vector<double> lt, le;
    ChartSeries s{"N=" + std::to_string(N), {}, {}, true};
    for (double t : cfg.expand_ladder) {
      RowMatrix k(static_cast<Eigen::Index>(M + 1), d);
      for (std::size_t i = 0; i <= M; ++i)
        for (int c = 0; c < d; ++c)
          k(static_cast<Eigen::Index>(i), c) = t * probe_curve(c, static_cast<double>(i) / static_cast<double>(M));
      const RowMatrix exact = solve_skeleton(f, k, t / static_cast<double>(M), x, 1);
      const TensorSignature sig = path_signature(k.data(), M, d, N);
      const Vec approx = exp_lie_flow(f, sig, x, N);
      const double err = (approx - exact.bottomRows(1).transpose()).norm();
      table.rows.push_back({static_cast<double>(N), t, err});
      lt.push_back(std::log(t));
      le.push_back(std::log(err));
      s.x.push_back(std::log(t));
      s.y.push_back(std::log(err));
    }
    const LineFit fit = fit_line(lt, le);
    orders.push_back({{"N", N}, {"slope", fit.slope}, {"expected", N + 1}, {"r_squared", fit.r_squared}});
    series.push_back(s);
  }
  rec.csv("expand.csv", table);
  rec.text("expand.svg", svg_line_chart("exp-Lie order probe", "log t", "log error", series));

  // Lambda checks on fBm paths
  const std::size_t n_paths = std::min<std::size_t>(cfg.paths, 1000);
  const FbmPathSet set = sample_fbm(cfg.grid(), d, n_paths, Hurst(cfg.hurst), rec.stage_seed("lambda_paths", 0),
                                    cfg.sampler, {1024, cfg.threads});
  double level1 = 0.0, antisym = 0.0;
  const std::size_t last = set.grid.n_steps();
  for (std::size_t p = 0; p < n_paths; ++p) {
    const TensorSignature sig = path_signature(set.path(p).data(), last, d, 2);
    for (int i = 0; i < d; ++i) {
      level1 = std::max(level1, std::abs(lambda_from_signature(sig, {i}) - set.at(p, last, i)));
      for (int j = 0; j < d; ++j)
        antisym = std::max(antisym, std::abs(lambda_from_signature(sig, {i, j}) + lambda_from_signature(sig, {j, i})));
    }
  }
  Json j{{"orders", orders}, {"lambda_level1_max_error", level1}, {"lambda_level2_max_antisymmetry", antisym}};
  if (cfg.expand_order >= 1 && d <= 3) {
    const FbmPathSet unit = sample_fbm(TimeGrid(1.0, cfg.steps), d, n_paths, Hurst(cfg.hurst),
                                       rec.stage_seed("expansion_paths", 1), cfg.sampler, {1024, cfg.threads});
    const auto terms = mean_expansion(f, [](const Vec& z) { return z.squaredNorm(); }, x,
                                      std::min(cfg.expand_order, 2), unit);
    Json t = Json::array();
    for (const auto& term : terms)
      t.push_back({{"power_of_t", 2.0 * term.k * cfg.hurst}, {"value", term.value}, {"stderr", term.stderr_}});
    j["mean_expansion_of_squared_norm"] = t;
  }
  rec.json("expand.json", j);
  return j;
}

std::vector<Vec> density_points(const ExperimentConfig& cfg) {
  std::vector<Vec> pts{cfg.start()};
  if (!cfg.y.empty()) pts.push_back(cfg.target());
  return pts;
}

Json estimate_json(const DensityEstimate& e) {
  Json pts = Json::array();
  for (std::size_t q = 0; q < e.points.size(); ++q)
    pts.push_back({{"point", to_std(e.points[q])},
                   {"p_hat", e.p_hat[q]},
                   {"stderr", e.stderr_[q]},
                   {"bias_bound", e.bias_bound[q]}});
  return {{"estimator", to_string(e.estimator)}, {"bandwidth", to_std(e.bandwidth)}, {"n_paths", e.n_paths},
          {"blowups", e.blowups},                {"valid", e.valid},                 {"points", pts}};
}

Json cmd_density(const ExperimentConfig& cfg, RunRecorder& rec) {
  const VectorFieldSystem f = cfg.field_system();
  const auto pts = density_points(cfg);
  const SamplingOptions so = sampling(cfg, cfg.density_steps, rec.stage_seed("paths", 0));
  const EndpointSamples s = sample_endpoints(f, cfg.start(), cfg.t_ladder, cfg.paths, so);
  KdeOptions ko;
  ko.estimator = estimator_from_string(cfg.estimator);
  ko.bootstrap = cfg.bootstrap;
  ko.seed = rec.stage_seed("bootstrap", 1);
  KdeOptions hist = ko;
  hist.estimator = Estimator::histogram;
  CsvTable table{{"t", "point", "p_hat", "stderr", "bias_bound", "hist_p_hat", "hist_stderr"}, {}};
  Json per_t = Json::array();
  bool valid = true;
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    const DensityEstimate e = estimate_density(s.samples[k], cfg.paths, pts, ko);
    const DensityEstimate h = estimate_density(s.samples[k], cfg.paths, pts, hist);
    valid = valid && e.valid;
    for (std::size_t q = 0; q < pts.size(); ++q)
      table.rows.push_back({s.times[k], static_cast<double>(q), e.p_hat[q], e.stderr_[q], e.bias_bound[q],
                            h.p_hat[q], h.stderr_[q]});
    Json entry{{"t", s.times[k]}, {"estimate", estimate_json(e)}, {"histogram", estimate_json(h)}};
    if (cfg.dim <= 3) entry["box_mass"] = histogram(s.samples[k], cfg.paths, cfg.box(), 20).integral();
    per_t.push_back(entry);
  }
  rec.csv("density.csv", table);
  const Json j{{"system", f.name()}, {"valid", valid}, {"results", per_t}};
  rec.json("density.json", j);
  if (!valid) throw NumericalError("density: more than 0.1% of paths blew up");
  return j;
}

Json cmd_ondiag(const ExperimentConfig& cfg, RunRecorder& rec) {
  const VectorFieldSystem f = cfg.field_system();
  const Vec x = cfg.start();
  KdeOptions ko;
  ko.estimator = estimator_from_string(cfg.estimator);
  ko.bootstrap = cfg.bootstrap;
  ko.seed = rec.stage_seed("bootstrap", 1);
  const SamplingOptions so = sampling(cfg, cfg.density_steps, rec.stage_seed("paths", 0));
  const AsymptoticsFit fit = ondiag_fit(f, x, cfg.t_ladder, cfg.paths, cfg.order, so, ko);
  const double a0 = a0_closed_form(f, x);
  CsvTable table{{"t", "y", "stderr", "fitted", "a0", "ratio_to_a0"}, {}};
  ChartSeries data{"t^{Hd} p_hat", {}, {}, true}, model{"fit", {}, {}, false};
  for (std::size_t i = 0; i < fit.t_values.size(); ++i) {
    const double t = fit.t_values[i];
    double fitted = 0.0;
    for (int k = 0; k <= fit.K; ++k) fitted += fit.coefficients[static_cast<std::size_t>(k)] * std::pow(t, 2.0 * k * cfg.hurst);
    table.rows.push_back({t, fit.y[i], fit.y_stderr[i], fitted, a0, fit.y[i] / a0});
    data.x.push_back(std::pow(t, 2.0 * cfg.hurst));
    data.y.push_back(fit.y[i]);
  }
  for (int i = 0; i <= 50; ++i) {
    const double s = i / 50.0;
    double v = 0.0;
    for (int k = 0; k <= fit.K; ++k) v += fit.coefficients[static_cast<std::size_t>(k)] * std::pow(s, k);
    model.x.push_back(s);
    model.y.push_back(v);
  }
  rec.csv("ondiag.csv", table);
  rec.csv("a0.csv", CsvTable{{"a0_closed_form", "c0", "c0_ci_half_width", "relative_difference"},
                             {{a0, fit.coefficients[0], fit.ci_half_width[0], fit.coefficients[0] / a0 - 1.0}}});
  rec.text("ondiag.svg", svg_line_chart("on-diagonal fit", "t^{2H}", "t^{Hd} p", {data, model}));
  const Json j{{"system", f.name()},
               {"coefficients", fit.coefficients},
               {"ci_half_width", fit.ci_half_width},
               {"residual_norm", fit.residual_norm},
               {"condition", fit.condition},
               {"ill_conditioned", fit.ill_conditioned},
               {"c0_without_largest_t", fit.c0_without_largest_t},
               {"a0_closed_form", a0},
               {"c0_relative_to_a0", fit.coefficients[0] / a0 - 1.0},
               {"blowups", fit.blowups},
               {"valid", fit.valid}};
  rec.json("ondiag.json", j);
  if (!fit.valid) throw NumericalError("ondiag: more than 0.1% of paths blew up");
  return j;
}

Json cmd_offdiag(const ExperimentConfig& cfg, RunRecorder& rec) {
  const VectorFieldSystem f = cfg.field_system();
  const Vec x = cfg.start(), y = cfg.target();
  KdeOptions ko;
  ko.estimator = estimator_from_string(cfg.estimator);
  ko.bootstrap = cfg.bootstrap;
  ko.seed = rec.stage_seed("bootstrap", 1);
  const SamplingOptions so = sampling(cfg, cfg.density_steps, rec.stage_seed("paths", 0));
  const OffDiagonalFit fit = offdiag_exponent(f, x, y, cfg.t_ladder, cfg.paths, so, ko);
  DistanceOptions dopts;
  dopts.seed = rec.stage_seed("distance", 2);
  const DistanceResult dr = distance(f, x, y, dopts);
  CsvTable table{{"t", "x", "y", "stderr"}, {}};
  for (std::size_t i = 0; i < fit.t_used.size(); ++i)
    table.rows.push_back({fit.t_used[i], fit.x[i], fit.y[i], fit.y_stderr[i]});
  rec.csv("offdiag.csv", table);
  ChartSeries pts{"-log(t^{Hd} p_hat)", fit.x, fit.y, true}, line{"fit", {}, {}, false};
  if (!fit.x.empty()) {
    const auto [lo, hi] = std::minmax_element(fit.x.begin(), fit.x.end());
    line.x = {*lo, *hi};
    line.y = {fit.intercept + fit.slope * *lo, fit.intercept + fit.slope * *hi};
  }
  rec.text("offdiag.svg", svg_line_chart("off-diagonal exponent", "1/(2 t^{2H})", "-log(t^{Hd} p)", {pts, line}));
  const double d2 = dr.distance * dr.distance;
  const Json j{{"slope", fit.slope},          {"slope_stderr", fit.slope_stderr},
               {"intercept", fit.intercept},  {"distance_squared", d2},
               {"relative_difference", fit.slope / d2 - 1.0},
               {"t_used", fit.t_used},        {"t_dropped", fit.t_dropped},
               {"blowups", fit.blowups},      {"valid", fit.valid}};
  rec.json("offdiag.json", j);
  if (!fit.valid) throw NumericalError("offdiag: too few usable t values or too many blow-ups");
  return j;
}

Json cmd_qh(const ExperimentConfig& cfg, RunRecorder& rec) {
  const StructureConstants omega = cfg.structure();
  QhOptions qo;
  qo.t_ladder = cfg.qh_ladder;
  const SamplingOptions so = sampling(cfg, cfg.qh_steps, 0);
  Json j{{"hurst", cfg.hurst}, {"paths", cfg.paths}};
  std::vector<QhEstimate> est;
  if (cfg.qh_method != "quadrature")
    est.push_back(qh_estimate(omega, cfg.hurst, cfg.paths, rec.stage_seed("fit", 0), QhMethod::fit, so, qo));
  if (cfg.qh_method != "fit")
    est.push_back(
        qh_estimate(omega, cfg.hurst, cfg.paths, rec.stage_seed("quadrature", 1), QhMethod::quadrature, so, qo));
  for (const auto& e : est) {
    j[to_string(e.method)] = {{"value", e.value}, {"stderr", e.stderr_}};
    if (e.method == QhMethod::fit) {
      CsvTable t{{"t", "normalized_density"}, {}};
      for (std::size_t i = 0; i < e.t_ladder.size(); ++i) t.rows.push_back({e.t_ladder[i], e.normalized[i]});
      rec.csv("qh_fit.csv", t);
    }
  }
  if (est.size() == 2) {
    const double se = std::hypot(est[0].stderr_, est[1].stderr_);
    j["combined_stderr"] = se;
    j["agree_within_3se"] = std::abs(est[0].value - est[1].value) <= 3.0 * se;
  }
  rec.json("qh.json", j);
  return j;
}

Json cmd_girsanov(const ExperimentConfig& cfg, RunRecorder& rec) {
  const TimeGrid grid = cfg.grid();
  const int d = cfg.dim;
  std::vector<Eigen::VectorXd> controls;
  if (cfg.controls.empty()) {
    Eigen::VectorXd a = Eigen::VectorXd::Constant(d, 0.5), b(d);
    for (int c = 0; c < d; ++c) b(c) = c % 2 == 0 ? -0.3 : 0.4;
    controls = {a, b};
  } else {
    for (std::size_t k = 0; k < cfg.controls.size() / static_cast<std::size_t>(d); ++k)
      controls.push_back(Eigen::Map<const Eigen::VectorXd>(cfg.controls.data() + k * static_cast<std::size_t>(d), d));
  }
  const FbmPathSet set = sample_fbm(grid, d, cfg.paths, Hurst(cfg.hurst), rec.stage_seed("paths", 0), cfg.sampler,
                                    {1024, cfg.threads});
  Json results = Json::array();
  bool all = true;
  for (const auto& value : controls) {
    const ControlVector phi = ControlVector::constant(grid, value);
    const auto w = girsanov_weight(set, phi);
    const MeanEstimate mw = mean_estimate(w);
    const RowMatrix k = cm_shift_from_control(phi, cfg.hurst);
    Json coords = Json::array();
    bool ok = std::abs(mw.mean - 1.0) <= 4.0 * mw.stderr_;
    for (int c = 0; c < d; ++c) {
      std::vector<double> v(set.n_paths);
      for (std::size_t p = 0; p < set.n_paths; ++p) v[p] = w[p] * set.at(p, grid.n_steps(), c);
      const MeanEstimate m = mean_estimate(v);
      const double kt = k(static_cast<Eigen::Index>(grid.n_steps()), c);
      const bool pass = std::abs(m.mean - kt) <= 4.0 * m.stderr_;
      ok = ok && pass;
      coords.push_back({{"weighted_mean_B_T", m.mean}, {"stderr", m.stderr_}, {"k_T", kt}, {"within_4_se", pass}});
    }
    all = all && ok;
    results.push_back({{"control", std::vector<double>(value.data(), value.data() + value.size())},
                       {"mean_weight", mw.mean},
                       {"weight_stderr", mw.stderr_},
                       {"cm_norm_squared", cm_norm_squared(phi, cfg.hurst)},
                       {"coordinates", coords},
                       {"pass", ok}});
  }
  const Json j{{"paths", cfg.paths}, {"controls", results}, {"pass", all}};
  rec.json("girsanov.json", j);
  return j;
}

}  // namespace

Json run_command(const std::string& name, const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  RunRecorder rec(out_dir, name, cfg);
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
  try {
    Json j;
    if (name == "sample") j = cmd_sample(cfg, rec);
    else if (name == "distance") j = cmd_distance(cfg, rec);
    else if (name == "rate-min") j = cmd_rate_min(cfg, rec);
    else if (name == "check-structure") j = cmd_check_structure(cfg, rec);
    else if (name == "expand") j = cmd_expand(cfg, rec);
    else if (name == "density") j = cmd_density(cfg, rec);
    else if (name == "ondiag") j = cmd_ondiag(cfg, rec);
    else if (name == "offdiag") j = cmd_offdiag(cfg, rec);
    else if (name == "qh") j = cmd_qh(cfg, rec);
    else if (name == "girsanov-check") j = cmd_girsanov(cfg, rec);
    else throw ConfigError("unknown command '" + name + "'");
    rec.finish("ok", elapsed());
    return j;
  } catch (const std::exception& e) {
    rec.finish(std::string("failed: ") + e.what(), elapsed());
    throw;
  }
}

VerifyReport verify_manifest(const std::filesystem::path& manifest) {
  const Json m = Json::parse(read_text(manifest));
  const auto dir = manifest.parent_path();
  VerifyReport rep;
  for (const auto& o : m.at("outputs")) {
    const std::string file = o.at("file").get<std::string>();
    const std::string want = o.at("fnv1a64").get<std::string>();
    ++rep.checked;
    try {
      const std::string got = hex64(file_hash(dir / file));
      if (got != want) rep.mismatches.push_back(file + ": expected " + want + ", got " + got);
    } catch (const std::exception& e) {
      rep.mismatches.push_back(file + ": " + e.what());
    }
  }
  return rep;
}

}  // namespace fbmheat
