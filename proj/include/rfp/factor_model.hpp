#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rfp/convex_set.hpp"

namespace rfp {

// Vector field on the factor state, written into a caller buffer so the
// simulation hot loop stays allocation free.
using VecFn = std::function<void(std::span<const double> v, std::span<double> out)>;
using MatFn = std::function<Eigen::MatrixXd(std::span<const double> v)>;

// Stochastic factor market: factor drift eta, constant factor volatility
// kappa, stock coefficients (b, sigma) and the derived market price of
// risk theta.  The declared constants (K_theta, C_theta, C_eta) are what
// validate_assumptions measures against.
struct FactorModelSpec {
  int dim_factor = 1;  // d
  int dim_stocks = 1;  // n
  VecFn eta;
  Eigen::MatrixXd kappa;  // d x d
  VecFn b;                // v -> R^n
  MatFn sigma;            // v -> n x d
  // Optional closed form for theta; when absent it is computed from
  // (sigma, b) pointwise.
  VecFn theta;
  double theta_bound = 0;      // K_theta
  double theta_lipschitz = 0;  // C_theta
  double dissipativity = 0;    // C_eta

  void eval_theta(std::span<const double> v, std::span<double> out) const;
};

// theta(v) = sigma^T (sigma sigma^T)^{-1} b(v); throws on a rank-deficient
// volatility matrix, naming the probed point.
RVec market_price_of_risk(const FactorModelSpec& spec,
                          std::span<const double> v);

struct AdmissibilityReport {
  double c_eta_empirical = 0;   // min over pairs of -(d eta . d v)/|d v|^2
  double k_theta_empirical = 0;
  double c_theta_empirical = 0;
  double k_u = 0;
  double c_eta_required = 0;    // 3 d C_theta/(1-d) * max(K_theta+K_u, 1)
  double kappa_trace_norm = 0;
  double max_theta_residual = 0;  // max |sigma theta - b| over samples
  bool dissipative_on_all_pairs = false;
  bool well_posed = false;  // c_eta_empirical >= c_eta_required
  bool sigma_full_rank = true;
  bool kappa_spd = true;
  bool passed = false;
  std::vector<std::string> warnings;
};

// Samples random pairs in a cube of half-width 6*||kappa||_2/sqrt(2 C_eta)
// and estimates the model constants.  Failures are reported, never thrown.
AdmissibilityReport validate_assumptions(const FactorModelSpec& spec,
                                         double delta,
                                         const ConvexSet& scenario_set,
                                         int sample_count, uint64_t seed);

// Built-in fixtures.  The factor is an Ornstein-Uhlenbeck process with
// drift -a*v; theta(v) = theta_max * tanh(v) componentwise (bounded with
// Lipschitz constant theta_max).
FactorModelSpec make_ou_market(int d, double a, double theta_max);
// d = n = 1, kappa = 1.
FactorModelSpec make_model1_market(double a, double theta_max);
// Single stock driven by W^1 only, two-dimensional noise on the factor:
// kappa = [[rho_bar, sqrt(1-rho_bar^2)], [0, 0]], second factor frozen.
FactorModelSpec make_model2_market(double a, double theta_max, double rho_bar);
// d = n = 1 with constant market price of risk.
FactorModelSpec make_constant_theta_market(double a, double theta0);

}  // namespace rfp
