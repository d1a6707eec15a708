#pragma once

#include <map>
#include <span>
#include <vector>

#include "rfp/pde.hpp"
#include "rfp/simulate.hpp"

namespace rfp {

// Backward parabolic solve of f_t + 1/2 Tr(D grad^2 f) + drift grad f
// + G(v, zmap^T grad f) = 0 with f(., T) = 0, marched with implicit
// linear part and explicit driver (IMEX).
struct FiniteHorizonField {
  SpatialGrid grid;
  double T = 0;
  double dt = 0;
  int zdim = 1;
  std::vector<double> f0;                     // slice at t = 0
  std::map<int, std::vector<double>> slices;  // requested step -> slice
  double terminal_max_abs = 0;                // max |f(., T)|, exactly 0

  double value0(std::span<const double> v) const {
    return grid.interpolate(f0, v);
  }
};

struct FiniteHorizonOptions {
  bool parallel = true;
  // Extra time slices to record, as step indices (0 = t=0 .. steps = T).
  std::vector<int> record_steps;
  // Optional terminal data (defaults to zero).
  const std::vector<double>* terminal = nullptr;
};

// dt <= 0 selects the default T/2000.
FiniteHorizonField solve_finite_horizon(const PdeProblem& problem, double T,
                                        double dt,
                                        const FiniteHorizonOptions& opt = {});

// Lower value of the robust utility over [0, T]:
// w_T(x, v) = (x^delta/delta) exp(f(v, 0)).
double lower_value(const UtilityClass& utility, double x,
                   std::span<const double> v, const FiniteHorizonField& field);

// L_hat(T) = f_T(v, 0) - lambda T - y(v) per horizon, tracked over all grid
// states; the spread across states and consecutive horizon differences
// quantify the convergence to the horizon-free constant.
struct ErgodicLimitReport {
  std::vector<double> horizons;
  std::vector<double> L_hat;            // state-average per horizon
  std::vector<double> state_spread;     // max-min over states per horizon
  std::vector<double> consecutive_diff; // |L(T_k) - L(T_{k-1})|
  double L_final = 0;
};

ErgodicLimitReport ergodic_limit(const PdeProblem& problem,
                                 const MarkovianSolutionField& ergodic_field,
                                 std::span<const double> horizons,
                                 double dt_override = 0,
                                 bool parallel = true);

// Convergence diagnostics of the discounted forward family along factor
// paths: per rho, the worst |U^rho e^{-y^rho(v0)} / U - 1| over sampled
// times and the Monte Carlo strategy gap E int |alpha*_rho - alpha*|^2 dt.
struct DiscountedFamilyReport {
  std::vector<double> rhos;
  std::vector<double> max_ratio_error;
  std::vector<double> strategy_gap;
};

DiscountedFamilyReport discounted_forward_diagnostics(
    const PdeProblem& problem, const DriverSpec& driver,
    std::span<const double> rho_schedule, const PathEnsemble& ensemble,
    const MarkovianSolutionField& ergodic_field,
    const SolveOptions& opt = {});

}  // namespace rfp
