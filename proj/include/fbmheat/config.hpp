#pragma once

#include "fbmheat/density.hpp"
#include "fbmheat/fields.hpp"
#include "fbmheat/geometry.hpp"
#include "fbmheat/io.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fbmheat {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// INI text: [section] headers, key = value lines, ';' comments. Keys outside
/// the schema are rejected.
struct ExperimentConfig {
  // [run]
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string out = "out";

  // [fields]
  std::string system = "constant-orthonormal";
  int dim = 1;
  std::vector<double> sigma;     // constant-general, row-major d x d
  double scale = 1.0;            // so3-frame coefficient / global multiplier
  std::vector<double> matrices;  // linear: A_1..A_d, each row-major d x d
  std::vector<double> offsets;   // linear: c_1..c_d

  // [fbm]
  double hurst = 0.7;
  double horizon = 1.0;
  std::size_t steps = 64;
  std::size_t paths = 1000;
  SamplerKind sampler = SamplerKind::cholesky;
  std::string format = "both";  // csv | binary | both

  // [points]
  std::vector<double> x0;
  std::vector<double> y;
  std::vector<double> box_lower, box_upper;

  // [laplace]
  std::string mode = "endpoint";  // endpoint | free-energy
  int substeps = 4;
  int stages = 6;
  int starts = 4;

  // [density]
  std::string estimator = "kde_debiased";
  std::vector<double> t_ladder{1.0, 0.8, 0.6, 0.45, 0.3};
  std::size_t density_steps = 64;
  int order = 1;
  int bootstrap = 200;

  // [expand]
  int expand_order = 2;
  std::vector<double> expand_ladder{0.8, 0.4, 0.2, 0.1};
  std::size_t expand_nodes = 2048;

  // [qh]
  std::string qh_method = "both";
  std::size_t qh_steps = 128;
  std::vector<double> qh_ladder{0.02, 0.04, 0.06, 0.08, 0.1};

  // [girsanov]
  std::vector<double> controls;  // constant controls, dim values each

  /// Raw text used for the manifest hash.
  std::string source;

  VectorFieldSystem field_system() const;
  Vec start() const;
  Vec target() const;
  WorkingBox box() const;
  TimeGrid grid() const { return TimeGrid(horizon, steps); }
  /// Structure constants of the field system (levi_civita(scale) for so3-frame).
  StructureConstants structure() const;
  Json to_json() const;
};

/// Throws ConfigError on syntax errors, unknown keys, or violated preconditions.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

}  // namespace fbmheat
