#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>

#include "rfp/factor_model.hpp"

namespace rfp {

enum class ShiftMode { Base, Scenario, Game };

// Equivalent measure change realised as a Brownian drift shift: the drift
// added to W is 0 (base), u(V) (scenario) or delta*pi(V) + u(V) (game).
// Paths are never reweighted.
struct MeasureShift {
  ShiftMode mode = ShiftMode::Base;
  VecFn u;
  VecFn pi;
  double delta = 0;

  static MeasureShift base() { return {}; }
  static MeasureShift scenario(VecFn u_map) {
    MeasureShift s;
    s.mode = ShiftMode::Scenario;
    s.u = std::move(u_map);
    return s;
  }
  static MeasureShift game(VecFn pi_map, VecFn u_map, double delta) {
    MeasureShift s;
    s.mode = ShiftMode::Game;
    s.pi = std::move(pi_map);
    s.u = std::move(u_map);
    s.delta = delta;
    return s;
  }

  // Writes the W-drift at state v into `out` (dimension d).
  void drift(std::span<const double> v, std::span<double> out,
             std::span<double> scratch) const;
};

// Sampled factor (and optionally wealth) paths.  Layout is
// factor[(p * (steps+1) + k) * dim + i]; wealth[p * (steps+1) + k].
struct PathEnsemble {
  std::vector<double> times;
  int paths = 0;
  int steps = 0;
  int dim = 0;
  std::vector<double> factor;
  std::vector<double> wealth;
  uint64_t seed = 0;
  double dt = 0;
  ShiftMode shift_mode = ShiftMode::Base;
  long pi_cap_binds = 0;

  bool has_wealth() const { return !wealth.empty(); }
  std::span<const double> state(int p, int k) const {
    return {factor.data() + (static_cast<size_t>(p) * (steps + 1) + k) * dim,
            static_cast<size_t>(dim)};
  }
  double wealth_at(int p, int k) const {
    return wealth[static_cast<size_t>(p) * (steps + 1) + k];
  }
};

struct SimOptions {
  bool parallel = true;
  // Hard cap on |pi| per coordinate block; binding evaluations are counted
  // on the ensemble.
  double pi_cap = 100.0;
};

// Euler-Maruyama paths of dV = (eta(V) + kappa * drift(V)) dt + kappa dW,
// one counter-based stream per path keyed by (seed, path index).
PathEnsemble simulate_factor(const FactorModelSpec& spec,
                             const MeasureShift& shift, double T, double dt,
                             int paths, uint64_t seed,
                             const SimOptions& opt = {});

// Log-Euler wealth along an existing ensemble, reusing the ensemble's
// Brownian increments: X_{k+1} = X_k exp(pi^T (theta + drift_W) dt
// - |pi|^2 dt / 2 + pi^T dW~).  Requires the ensemble's shift.
void simulate_wealth(PathEnsemble& ens, const FactorModelSpec& spec,
                     const VecFn& pi, const MeasureShift& shift, double x0,
                     const SimOptions& opt = {});

// CSV with header path,t,v_1..v_d[,x].
void write_csv(const PathEnsemble& ens, std::ostream& os);

// Single Euler step shared by all modes; exposed so tests can replay the
// exact arithmetic of the simulator.
//   dw_j   = drift_j * dt + sqrt(dt) * xi_j
//   v_i   += eta_i(v) * dt + sum_j kappa_ij dw_j
void factor_step(const FactorModelSpec& spec, std::span<double> v,
                 std::span<const double> drift, double dt, double sqrt_dt,
                 std::span<const double> xi, std::span<double> eta_buf,
                 std::span<double> dw_buf);

}  // namespace rfp
