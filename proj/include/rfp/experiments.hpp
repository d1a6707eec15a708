#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "rfp/bsde.hpp"
#include "rfp/config.hpp"
#include "rfp/verify.hpp"

namespace rfp {

// A named fixture: market + driver + solver problem, assembled from an
// ExperimentConfig.  Names: model1, model2, nonrobust, large_uncertainty,
// section7.
struct Fixture {
  std::string name;
  FactorModelSpec market;
  DriverSpec driver;
  PdeProblem problem;
  SpatialGrid grid;
  RVec v0;
};

Fixture make_fixture(const std::string& name, const ExperimentConfig& cfg);

struct CheckLine {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentResult {
  std::string experiment;
  bool all_passed = true;
  std::vector<CheckLine> verdicts;        // deterministic checks
  std::vector<MonteCarloReport> checks;   // stochastic checks
  std::vector<std::string> artifacts;     // files written under out_dir
  double lambda_vd = 0;
  double lambda_ft = 0;
};

// Runs one named experiment, writing summary.json / fields.csv /
// checks.json and SVG plots under cfg.out_dir.  all_passed reflects every
// embedded check.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// CLI building blocks: solve-only, martingale suite, risk-sensitive game
// and horizon-convergence runs on the configured fixture.
ExperimentResult run_solve(const ExperimentConfig& cfg);
ExperimentResult run_verify(const ExperimentConfig& cfg);
ExperimentResult run_game(const ExperimentConfig& cfg);
ExperimentResult run_horizon(const ExperimentConfig& cfg);

// Pointwise driver evaluation for `driver eval`.
nlohmann::json driver_eval_json(const DriverSpec& driver, const RVec& v,
                                const RVec& z, const RVec* pi, const RVec* u);

nlohmann::json report_to_json(const MonteCarloReport& rep);

const std::vector<std::string>& experiment_names();

}  // namespace rfp
