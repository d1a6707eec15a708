#pragma once

#include <Eigen/Sparse>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>

#include "rfp/driver.hpp"
#include "rfp/grid.hpp"

namespace rfp {

// Stationary semilinear problem
//   1/2 Tr(D grad^2 y) + drift(v)^T grad y + G(v, zmap^T grad y) = lambda
// on a truncated grid with linear-extrapolation (zero second derivative)
// boundary closure.  `zmap` maps the gradient (dim m) to the driver
// argument z (dim zdim); for the full factor model zmap = kappa, for the
// reduced single-active-axis form it is the active row block.
struct PdeProblem {
  SpatialGrid grid;
  std::function<void(std::span<const double> v, std::span<double> out)> drift;
  Eigen::MatrixXd diffusion;  // m x m
  Eigen::MatrixXd zmap;       // m x zdim
  std::function<double(std::span<const double> v, std::span<const double> z)>
      G;
  int zdim = 1;
};

// Full-dimensional problem (grid dim == factor dim).
PdeProblem make_pde_problem(const FactorModelSpec& market,
                            const DriverSpec& driver, const SpatialGrid& grid);
// Model2 reduction: 1-d grid over the active factor, two-component z.
PdeProblem make_model2_problem(const FactorModelSpec& market,
                               const DriverSpec& driver,
                               const SpatialGrid& grid);
// Same problem with G replaced by G + c (lambda shifts by exactly c).
PdeProblem with_constant_shift(PdeProblem problem, double c);

struct SolveOptions {
  int max_iters = 300;
  double tol = 1e-8;
  double omega = 1.0;  // initial damping of the fixed-point update
  bool parallel = true;
};

struct DiscountedSolutionField {
  SpatialGrid grid;
  double rho = 0;
  std::vector<double> y;  // nodes
  std::vector<double> z;  // nodes x zdim
  int zdim = 1;
  double residual_norm = 0;
  int iterations = 0;
};

struct MarkovianSolutionField {
  SpatialGrid grid;
  std::vector<double> y;  // nodes, y(v0) = 0
  std::vector<double> z;  // nodes x zdim
  int zdim = 1;
  double lambda = 0;
  std::vector<double> v0;
  std::string method;
  double residual_norm = 0;
  double z_sup_norm = 0;
  // (rho, rho * y^rho(v0)) along the schedule, vanishing-discount only.
  std::vector<std::pair<double, double>> rho_trace;
  std::vector<std::string> warnings;

  double y_at(std::span<const double> v, bool* outside = nullptr) const;
  RVec z_at(std::span<const double> v) const;
};

// Damped fixed-point solve of rho y = L y + G(v, z(y)); residual measured
// on interior nodes with the scheme's own stencils.
DiscountedSolutionField solve_discounted(const PdeProblem& problem, double rho,
                                         const SolveOptions& opt = {},
                                         const std::vector<double>* warm = nullptr);

// lambda = lim rho y^rho(v0) along a decreasing schedule (Richardson
// extrapolation over the last two entries), y = y^rho_last - y^rho_last(v0).
MarkovianSolutionField solve_ergodic_vanishing_discount(
    const PdeProblem& problem, std::span<const double> rho_schedule,
    std::span<const double> v0, const SolveOptions& opt = {});

// Explicit time march of f_t = L f + G until the increment is spatially
// constant; lambda = mean increment / dt.
MarkovianSolutionField solve_ergodic_false_transient(
    const PdeProblem& problem, double dt, double tol,
    std::span<const double> v0, const SolveOptions& opt = {});

// z = zmap^T grad y, central differences inside, second-order one-sided at
// the boundary.  Returns nodes x zdim values.
std::vector<double> extract_z(const SpatialGrid& grid,
                              std::span<const double> y,
                              const Eigen::MatrixXd& zmap);

// Plug-back residual max over interior nodes of
// |1/2 Tr(D grad^2 y) + drift grad y + G(v,z) - lambda|.
double stationary_residual(const PdeProblem& problem,
                           std::span<const double> y, double lambda,
                           bool parallel = true);

// U(x,t) for the three utility classes, with y(v) interpolated.
double forward_process_value(const UtilityClass& utility, double x, double t,
                             std::span<const double> v,
                             const MarkovianSolutionField& field,
                             bool* outside = nullptr);

// CSV export: v_1[,v_2],y,z_1..z_zdim
void write_field_csv(const MarkovianSolutionField& field, std::ostream& os);

// Feedback maps from a solved field (z interpolated componentwise; the
// factor state is restricted to the grid's dimensions).
VecFn make_feedback_pi_star(const DriverSpec& driver,
                            const MarkovianSolutionField& field);
VecFn make_feedback_u_star(const DriverSpec& driver,
                           const MarkovianSolutionField& field);
VecFn make_feedback_alpha_star(const DriverSpec& driver,
                               const MarkovianSolutionField& field, VecFn u);
VecFn make_feedback_beta_star(const DriverSpec& driver,
                              const MarkovianSolutionField& field, VecFn pi);
VecFn constant_feedback(RVec value);

}  // namespace rfp
