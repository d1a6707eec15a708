#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rfp/convex_set.hpp"

namespace rfp {

// Flat key/value config: `section.key = value` lines, # comments,
// doubles, integers, quoted strings and [a, b, c] arrays.
class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text);

  bool has(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key, long fallback) const;
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  std::vector<double> get_list(const std::string& key,
                               std::vector<double> fallback) const;

 private:
  std::map<std::string, std::string> scalars_;
  std::map<std::string, std::vector<double>> lists_;
};

// Set descriptors: "unconstrained", "interval lo hi", "box lo hi lo hi",
// "ball r", "ordered R", "singleton x [y]", "slab free zero".
ConvexSet parse_set(const std::string& text, int dim);

// One experiment run: model parameters, numerics and output location.
// Every experiment has complete defaults, so a bare name runs.
struct ExperimentConfig {
  std::string experiment = "model1";

  // market / fixtures
  double a = 2.0;
  double theta_max = 0.5;
  double theta_const = 0.4;
  double delta = 0.5;
  double gamma = 1.0;
  double k_u = 0.2;        // model1 scenario interval half-width
  double model2_R = 0.4;
  double rho_bar = 0.8;
  std::string pi_set;      // optional override descriptors
  std::string u_set;

  // numerics
  int grid_n = 201;
  double grid_halfwidth = 0;  // 0: six stationary standard deviations
  std::vector<double> rho_schedule = {0.2, 0.1, 0.05, 0.02, 0.01};
  double dt = 1e-3;
  double sim_T = 1.0;
  long paths = 20000;
  std::vector<double> horizons = {2, 4, 6, 8, 10};
  double x0 = 1.0;

  uint64_t seed = 12345;
  std::string out_dir = "out";
  int jobs = 0;  // 0: library default thread count

  static ExperimentConfig from_config(const Config& cfg);
  void apply_config(const Config& cfg);
};

}  // namespace rfp
