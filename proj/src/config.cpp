#include "fbmheat/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace fbmheat {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"run", {"seed", "threads", "out"}},
      {"fields", {"system", "dim", "sigma", "scale", "matrices", "offsets"}},
      {"fbm", {"hurst", "horizon", "steps", "paths", "sampler", "format"}},
      {"points", {"x0", "y", "box_lower", "box_upper"}},
      {"laplace", {"mode", "substeps", "stages", "starts"}},
      {"density", {"estimator", "t", "steps", "order", "bootstrap"}},
      {"expand", {"order", "ladder", "nodes"}},
      {"qh", {"method", "steps", "ladder"}},
      {"girsanov", {"controls"}},
  };
  return s;
}

std::string where(const std::string& section, const std::string& key) { return "[" + section + "] " + key; }

double to_double(const std::string& section, const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(where(section, key) + ": not a number: '" + v + "'");
  }
  if (used != v.size() || !std::isfinite(out)) throw ConfigError(where(section, key) + ": not a number: '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& section, const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError(where(section, key) + ": expected a non-negative integer, got '" + v + "'");
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ConfigError(where(section, key) + ": integer out of range: '" + v + "'");
  }
}

std::vector<double> to_list(const std::string& section, const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::istringstream in(v);
  std::string tok;
  while (in >> tok) {
    if (!tok.empty() && tok.back() == ',') tok.pop_back();
    if (!tok.empty()) out.push_back(to_double(section, key, tok));
  }
  return out;
}

Mat square(const std::vector<double>& v, std::size_t offset, int d) {
  Mat m(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) m(r, c) = v[offset + static_cast<std::size_t>(r * d + c)];
  return m;
}

Vec to_vec(const std::vector<double>& v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

void validate(ExperimentConfig& c) {
  const auto names = catalog::names();
  require(std::find(names.begin(), names.end(), c.system) != names.end(),
          "[fields] system: unknown field system '" + c.system + "'");
  require(c.dim >= 1 && c.dim <= kMaxDim, "[fields] dim must be in [1, " + std::to_string(kMaxDim) + "]");
  const auto d = static_cast<std::size_t>(c.dim);
  if (c.system == "so3-frame") require(c.dim == 3, "[fields] so3-frame requires dim = 3");
  if (c.system == "linear-1d") require(c.dim == 1, "[fields] linear-1d requires dim = 1");
  if (c.system == "constant-general") {
    require(c.sigma.size() == d * d, "[fields] sigma needs dim*dim entries");
    require(std::abs(square(c.sigma, 0, c.dim).determinant()) >= kMinAbsDet, "[fields] sigma is singular");
  }
  if (c.system == "linear") {
    require(c.matrices.size() == d * d * d, "[fields] matrices needs dim^3 entries");
    require(c.offsets.empty() || c.offsets.size() == d * d, "[fields] offsets needs dim^2 entries");
  }
  require(c.scale > 0.0, "[fields] scale must be positive");
  require(c.hurst > 0.5 && c.hurst < 1.0, "[fbm] hurst: H must satisfy H in (1/2,1)");
  require(c.horizon > 0.0, "[fbm] horizon must be positive");
  require(c.steps >= 1 && c.steps <= FbmGenerator::kMaxSteps, "[fbm] steps must be in [1, 8192]");
  require(c.paths >= 2, "[fbm] paths must be at least 2");
  require(c.format == "csv" || c.format == "binary" || c.format == "both", "[fbm] format: csv, binary or both");
  if (c.x0.empty()) c.x0.assign(d, 0.0);
  require(c.x0.size() == d, "[points] x0 needs dim entries");
  require(c.y.empty() || c.y.size() == d, "[points] y needs dim entries");
  if (c.box_lower.empty()) c.box_lower.assign(d, -1.0);
  if (c.box_upper.empty()) c.box_upper.assign(d, 1.0);
  require(c.box_lower.size() == d && c.box_upper.size() == d, "[points] box bounds need dim entries");
  for (std::size_t i = 0; i < d; ++i) require(c.box_lower[i] < c.box_upper[i], "[points] box_lower < box_upper");
  require(c.mode == "endpoint" || c.mode == "free-energy", "[laplace] mode: endpoint or free-energy");
  require(c.substeps >= 1 && c.stages >= 1 && c.starts >= 1, "[laplace] substeps, stages, starts must be >= 1");
  try {
    (void)estimator_from_string(c.estimator);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("[density] estimator: ") + e.what());
  }
  require(!c.t_ladder.empty(), "[density] t must not be empty");
  for (double t : c.t_ladder) require(t > 0.0 && t <= 1.0, "[density] t values must lie in (0, 1]");
  require(c.order >= 0 && c.order <= 2, "[density] order must be in [0, 2]");
  require(c.t_ladder.size() >= static_cast<std::size_t>(c.order + 2), "[density] t needs at least order+2 values");
  require(c.density_steps >= 1 && c.density_steps <= FbmGenerator::kMaxSteps, "[density] steps must be in [1, 8192]");
  require(c.bootstrap >= 2, "[density] bootstrap must be >= 2");
  require(c.expand_order >= 1 && c.expand_order <= 3, "[expand] order must be in [1, 3]");
  require(c.expand_ladder.size() >= 2, "[expand] ladder needs at least two values");
  for (double t : c.expand_ladder) require(t > 0.0, "[expand] ladder values must be positive");
  require(c.expand_nodes >= 16, "[expand] nodes must be >= 16");
  require(c.qh_method == "fit" || c.qh_method == "quadrature" || c.qh_method == "both",
          "[qh] method: fit, quadrature or both");
  require(c.qh_steps >= 2 && c.qh_steps <= FbmGenerator::kMaxSteps, "[qh] steps must be in [2, 8192]");
  require(c.qh_ladder.size() >= 4, "[qh] ladder needs at least four values");
  for (double t : c.qh_ladder) require(t > 0.0, "[qh] ladder values must be positive");
  require(c.controls.size() % d == 0, "[girsanov] controls must hold a multiple of dim values");
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }
  ExperimentConfig c;
  c.source = text;
  for (const auto& [section, body] : tree) {
    const auto it = schema().find(section);
    if (it == schema().end()) {
      if (!body.data().empty()) throw ConfigError("key outside any section: '" + section + "'");
      throw ConfigError("unknown section [" + section + "]");
    }
    for (const auto& [key, node] : body) {
      if (!it->second.count(key)) throw ConfigError("unknown key " + where(section, key));
      const std::string v = node.get_value<std::string>();
      auto num = [&] { return to_double(section, key, v); };
      auto u64 = [&] { return to_u64(section, key, v); };
      auto list = [&] { return to_list(section, key, v); };
      auto integer = [&] {
        const double x = num();
        if (x != std::floor(x) || std::abs(x) > 1e9) throw ConfigError(where(section, key) + ": expected an integer");
        return static_cast<int>(x);
      };
      if (section == "run") {
        if (key == "seed") c.seed = u64();
        if (key == "threads") c.threads = static_cast<unsigned>(u64());
        if (key == "out") c.out = v;
      } else if (section == "fields") {
        if (key == "system") c.system = v;
        if (key == "dim") c.dim = integer();
        if (key == "sigma") c.sigma = list();
        if (key == "scale") c.scale = num();
        if (key == "matrices") c.matrices = list();
        if (key == "offsets") c.offsets = list();
      } else if (section == "fbm") {
        if (key == "hurst") c.hurst = num();
        if (key == "horizon") c.horizon = num();
        if (key == "steps") c.steps = u64();
        if (key == "paths") c.paths = u64();
        if (key == "sampler") {
          try {
            c.sampler = sampler_from_string(v);
          } catch (const std::exception& e) {
            throw ConfigError(where(section, key) + ": " + e.what());
          }
        }
        if (key == "format") c.format = v;
      } else if (section == "points") {
        if (key == "x0") c.x0 = list();
        if (key == "y") c.y = list();
        if (key == "box_lower") c.box_lower = list();
        if (key == "box_upper") c.box_upper = list();
      } else if (section == "laplace") {
        if (key == "mode") c.mode = v;
        if (key == "substeps") c.substeps = integer();
        if (key == "stages") c.stages = integer();
        if (key == "starts") c.starts = integer();
      } else if (section == "density") {
        if (key == "estimator") c.estimator = v;
        if (key == "t") c.t_ladder = list();
        if (key == "steps") c.density_steps = u64();
        if (key == "order") c.order = integer();
        if (key == "bootstrap") c.bootstrap = integer();
      } else if (section == "expand") {
        if (key == "order") c.expand_order = integer();
        if (key == "ladder") c.expand_ladder = list();
        if (key == "nodes") c.expand_nodes = u64();
      } else if (section == "qh") {
        if (key == "method") c.qh_method = v;
        if (key == "steps") c.qh_steps = u64();
        if (key == "ladder") c.qh_ladder = list();
      } else if (section == "girsanov") {
        if (key == "controls") c.controls = list();
      }
    }
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

VectorFieldSystem ExperimentConfig::field_system() const {
  if (system == "constant-orthonormal") return catalog::constant_orthonormal(dim).scaled(scale);
  if (system == "constant-general") return catalog::constant_general(square(sigma, 0, dim)).scaled(scale);
  if (system == "linear-1d") return catalog::linear_1d().scaled(scale);
  if (system == "so3-frame") return catalog::so3_frame(scale);
  if (system == "linear") {
    std::vector<Mat> a;
    std::vector<Vec> c;
    const auto d = static_cast<std::size_t>(dim);
    for (int i = 0; i < dim; ++i) {
      a.push_back(square(matrices, static_cast<std::size_t>(i) * d * d, dim));
      Vec ci = Vec::Zero(dim);
      if (!offsets.empty())
        for (int k = 0; k < dim; ++k) ci(k) = offsets[static_cast<std::size_t>(i) * d + static_cast<std::size_t>(k)];
      c.push_back(ci);
    }
    return catalog::linear_fields(a, c).scaled(scale);
  }
  throw ConfigError("unknown field system '" + system + "'");
}

Vec ExperimentConfig::start() const { return to_vec(x0); }

Vec ExperimentConfig::target() const {
  if (y.empty()) throw ConfigError("[points] y is required for this command");
  return to_vec(y);
}

WorkingBox ExperimentConfig::box() const { return WorkingBox{to_vec(box_lower), to_vec(box_upper)}; }

StructureConstants ExperimentConfig::structure() const {
  const VectorFieldSystem f = field_system();
  if (f.structure()) return *f.structure();
  if (system == "constant-orthonormal" || system == "constant-general") return StructureConstants(dim);
  throw ConfigError("[fields] system '" + system + "' declares no structure constants");
}

Json ExperimentConfig::to_json() const {
  return Json{{"run", {{"seed", seed}}},
              {"fields", {{"system", system}, {"dim", dim}, {"sigma", sigma}, {"scale", scale},
                          {"matrices", matrices}, {"offsets", offsets}}},
              {"fbm", {{"hurst", hurst}, {"horizon", horizon}, {"steps", steps}, {"paths", paths},
                       {"sampler", to_string(sampler)}, {"format", format}}},
              {"points", {{"x0", x0}, {"y", y}, {"box_lower", box_lower}, {"box_upper", box_upper}}},
              {"laplace", {{"mode", mode}, {"substeps", substeps}, {"stages", stages}, {"starts", starts}}},
              {"density", {{"estimator", estimator}, {"t", t_ladder}, {"steps", density_steps}, {"order", order},
                           {"bootstrap", bootstrap}}},
              {"expand", {{"order", expand_order}, {"ladder", expand_ladder}, {"nodes", expand_nodes}}},
              {"qh", {{"method", qh_method}, {"steps", qh_steps}, {"ladder", qh_ladder}}},
              {"girsanov", {{"controls", controls}}}};
}

}  // namespace fbmheat
