#pragma once

#include <string>

#include "rfp/bsde.hpp"
#include "rfp/driver.hpp"
#include "rfp/pde.hpp"
#include "rfp/simulate.hpp"

namespace rfp {

enum class BoundKind { Equals, AtMost, AtLeast };

// Result of a single Monte Carlo check with the three-standard-error rule.
struct MonteCarloReport {
  std::string check;
  double estimate = 0;
  double std_error = 0;
  long paths = 0;
  uint64_t seed = 0;
  BoundKind bound_kind = BoundKind::Equals;
  double bound_value = 0;
  bool passed = false;
  std::string note;

  static bool rule(BoundKind kind, double estimate, double std_error,
                   double bound);
};

std::string to_string(BoundKind kind);

// Running payoff of the risk-sensitive game,
// L(v, pi, u) = -delta(1-delta)|pi|^2/2 + delta pi^T (theta(v) + u).
double running_payoff(const FactorModelSpec& spec, double delta,
                      std::span<const double> v, std::span<const double> pi,
                      std::span<const double> u);

// Simulates (V, X) under the scenario measure of `u` and reports
// E[U(X_T, T)] / U(x0, 0).  Self-generation: = 1 at (pi*, u*), <= 1 for
// (pi, beta*(pi)), >= 1 for (alpha*(u), u).
MonteCarloReport martingale_check(const FactorModelSpec& spec,
                                  const UtilityClass& utility,
                                  const MarkovianSolutionField& field,
                                  const VecFn& pi, const VecFn& u, double x0,
                                  double T, double dt, int paths,
                                  uint64_t seed, BoundKind bound,
                                  const std::string& name,
                                  bool parallel = true);

// (1/T) log E[exp(int_0^T L dt)] under the game measure with drift
// delta*pi + u; log-sum-exp with a delta-method standard error.
MonteCarloReport risk_sensitive_rate(const FactorModelSpec& spec, double delta,
                                     const VecFn& pi, const VecFn& u, double T,
                                     double dt, int paths, uint64_t seed,
                                     BoundKind bound, double bound_value,
                                     const std::string& name,
                                     bool parallel = true);

// One simulation pass recording the rate at several horizons, so the
// flattening of (1/T) log E exp(int L) toward lambda is visible.
struct RatePoint {
  double T = 0;
  double rate = 0;
  double std_error = 0;
};

std::vector<RatePoint> risk_sensitive_trajectory(
    const FactorModelSpec& spec, double delta, const VecFn& pi, const VecFn& u,
    std::span<const double> horizons, double dt, int paths, uint64_t seed,
    bool parallel = true);

// Lemma-style comparison: verifies G1 >= G2 on grid x z-probes (refusing
// otherwise) and then checks lambda1 >= lambda2.
struct ComparisonResult {
  double lambda1 = 0;
  double lambda2 = 0;
  bool passed = false;
};

ComparisonResult comparison_check(const PdeProblem& p1, const PdeProblem& p2,
                                  std::span<const double> rho_schedule,
                                  std::span<const double> v0,
                                  double z_probe_radius = 1.0,
                                  const SolveOptions& opt = {});

// Exhaustive coarse-to-fine scan of the pointwise game; order follows the
// variant (min_u max_pi, or max_pi min_u for Section7).  Both optimizers
// never touch the closed-form strategy formulas.
double brute_force_G(const DriverSpec& spec, std::span<const double> v,
                     std::span<const double> z, double resolution);

struct SaddleReport {
  double maxmin = 0;
  double minmax = 0;
  double gap = 0;  // minmax - maxmin, >= -2*resolution by weak duality
};

SaddleReport saddle_gap(const DriverSpec& spec, std::span<const double> v,
                        std::span<const double> z, double resolution);

}  // namespace rfp
