#pragma once

#include <functional>
#include <span>

#include "rfp/convex_set.hpp"
#include "rfp/factor_model.hpp"

namespace rfp {

struct UtilityClass {
  enum class Kind { Power, Log, Exponential };
  Kind kind = Kind::Power;
  double delta = 0.5;  // power exponent, in (0,1)
  double gamma = 1.0;  // exponential risk aversion, > 0

  static UtilityClass power(double delta);
  static UtilityClass log_utility();
  static UtilityClass exponential(double gamma);
};

enum class DriverVariant { Generic, Model1, Model2, Section7 };

// Pointwise Hamiltonian machinery: evaluates F, the driver G and the four
// strategy maps pi*, u*, alpha*, beta* for a utility class and a pair of
// constraint sets.  Model1/Model2/Section7 switch in the closed forms for
// their special geometries; Generic runs the projected-descent scheme.
struct DriverSpec {
  UtilityClass utility;
  ConvexSet pi_set = ConvexSet::unconstrained(1);
  ConvexSet u_set = ConvexSet::interval(-1.0, 1.0);
  VecFn theta;
  int dim = 1;  // dimension of v, z, pi, u
  DriverVariant variant = DriverVariant::Generic;
  double model2_R = 0;
  double realization_tau = 0;  // -1 in the Section7 configuration
  int outer_max_iters = 500;
  double outer_tol = 1e-9;

  RVec eval_theta(std::span<const double> v) const;
};

DriverSpec make_power_driver(double delta, ConvexSet pi_set, ConvexSet u_set,
                             VecFn theta, int dim);
DriverSpec make_log_driver(ConvexSet pi_set, ConvexSet u_set, VecFn theta,
                           int dim);
DriverSpec make_exp_driver(double gamma, ConvexSet pi_set, ConvexSet u_set,
                           VecFn theta, int dim);
// Unconstrained portfolios, scenario set U (Prop. 4.1 geometry).
DriverSpec make_model1_driver(double delta, ConvexSet u_set, VecFn theta,
                              int dim);
// Pi = R x {0}, U = {-R <= u1 <= u2 <= R} (Prop. 4.2 geometry).
DriverSpec make_model2_driver(double delta, double R, VecFn theta);
// Log utility with a negative quadratic realization term folded into the
// Hamiltonian; Pi = U = [0,1], theta maps into [-1, 0].
DriverSpec make_section7_driver(std::function<double(double)> theta);

// F(v, z, pi, u); membership in Pi and U is enforced.
double hamiltonian_F(const DriverSpec& spec, std::span<const double> v,
                     std::span<const double> z, std::span<const double> pi,
                     std::span<const double> u);

// Best portfolio response to a scenario u.
RVec alpha_star(const DriverSpec& spec, std::span<const double> v,
                std::span<const double> z, std::span<const double> u);

// Worst-case scenario at the optimal response; closed form when the
// portfolio set is unconstrained, projected descent otherwise.
RVec u_star(const DriverSpec& spec, std::span<const double> v,
            std::span<const double> z);

// Optimal portfolio pi* = alpha*(v, z, u*).  For Section7 the published
// piecewise map can leave [0,1]; the projected value is returned and
// *clipped is set.
RVec pi_star(const DriverSpec& spec, std::span<const double> v,
             std::span<const double> z, bool* clipped = nullptr);

// Scenario response to an arbitrary portfolio pi.
RVec beta_star(const DriverSpec& spec, std::span<const double> v,
               std::span<const double> z, std::span<const double> pi);

// G(v,z): inf_u sup_pi F for power/log, sup_u inf_pi for exponential,
// max_pi min_u for Section7; closed forms for the named variants.
double driver_G(const DriverSpec& spec, std::span<const double> v,
                std::span<const double> z);

// Quadratic realization process gamma_{t,s}(u) = int_t^s |u_r|^2/2 dr.
struct RealizationSpec {
  double tau = -1.0;
};

// Trapezoidal value of the realization integral between t and s along a
// sampled scenario path (times strictly increasing, u row-major
// [times x dim]).  Additive across adjacent intervals.
double realization_value(const RealizationSpec& spec,
                         std::span<const double> times,
                         std::span<const double> u, int dim, double t,
                         double s);

}  // namespace rfp
