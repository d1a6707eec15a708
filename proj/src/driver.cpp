#include "rfp/driver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace rfp {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2sq(std::span<const double> a) { return dot(a, a); }

double dist_sq(const ConvexSet& set, std::span<const double> x) {
  const double d = set.distance(x);
  return d * d;
}

void require_member(const ConvexSet& set, std::span<const double> x,
                    const char* what) {
  if (!set.contains(x, 1e-9)) {
    std::ostringstream os;
    os << "hamiltonian_F: " << what << " = (";
    for (size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << ") is outside " << set.describe();
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

UtilityClass UtilityClass::power(double delta) {
  if (!(delta > 0 && delta < 1))
    throw std::invalid_argument("UtilityClass::power: delta outside (0,1)");
  UtilityClass u;
  u.kind = Kind::Power;
  u.delta = delta;
  return u;
}

UtilityClass UtilityClass::log_utility() {
  UtilityClass u;
  u.kind = Kind::Log;
  return u;
}

UtilityClass UtilityClass::exponential(double gamma) {
  if (!(gamma > 0))
    throw std::invalid_argument("UtilityClass::exponential: gamma <= 0");
  UtilityClass u;
  u.kind = Kind::Exponential;
  u.gamma = gamma;
  return u;
}

RVec DriverSpec::eval_theta(std::span<const double> v) const {
  RVec th(dim);
  theta(v, th);
  return th;
}

DriverSpec make_power_driver(double delta, ConvexSet pi_set, ConvexSet u_set,
                             VecFn theta, int dim) {
  if (!u_set.is_compact())
    throw std::invalid_argument("driver: scenario set must be compact");
  DriverSpec s;
  s.utility = UtilityClass::power(delta);
  s.pi_set = std::move(pi_set);
  s.u_set = std::move(u_set);
  s.theta = std::move(theta);
  s.dim = dim;
  return s;
}

DriverSpec make_log_driver(ConvexSet pi_set, ConvexSet u_set, VecFn theta,
                           int dim) {
  DriverSpec s = make_power_driver(0.5, std::move(pi_set), std::move(u_set),
                                   std::move(theta), dim);
  s.utility = UtilityClass::log_utility();
  return s;
}

DriverSpec make_exp_driver(double gamma, ConvexSet pi_set, ConvexSet u_set,
                           VecFn theta, int dim) {
  DriverSpec s = make_power_driver(0.5, std::move(pi_set), std::move(u_set),
                                   std::move(theta), dim);
  s.utility = UtilityClass::exponential(gamma);
  return s;
}

DriverSpec make_model1_driver(double delta, ConvexSet u_set, VecFn theta,
                              int dim) {
  DriverSpec s = make_power_driver(delta, ConvexSet::unconstrained(dim),
                                   std::move(u_set), std::move(theta), dim);
  s.variant = DriverVariant::Model1;
  return s;
}

DriverSpec make_model2_driver(double delta, double R, VecFn theta) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  DriverSpec s = make_power_driver(
      delta, ConvexSet::axis_slab({-kInf, 0.0}, {kInf, 0.0}),
      ConvexSet::ordered_box(R), std::move(theta), 2);
  s.variant = DriverVariant::Model2;
  s.model2_R = R;
  return s;
}

DriverSpec make_section7_driver(std::function<double(double)> theta) {
  DriverSpec s;
  s.utility = UtilityClass::log_utility();
  s.pi_set = ConvexSet::interval(0.0, 1.0);
  s.u_set = ConvexSet::interval(0.0, 1.0);
  s.theta = [f = std::move(theta)](std::span<const double> v,
                                   std::span<double> out) {
    const double t = f(v[0]);
    if (t < -1.0 - 1e-12 || t > 1e-12)
      throw std::invalid_argument("section7: theta(v) must lie in [-1, 0]");
    out[0] = t;
  };
  s.dim = 1;
  s.variant = DriverVariant::Section7;
  s.realization_tau = -1.0;
  return s;
}

double hamiltonian_F(const DriverSpec& spec, std::span<const double> v,
                     std::span<const double> z, std::span<const double> pi,
                     std::span<const double> u) {
  require_member(spec.pi_set, pi, "pi");
  require_member(spec.u_set, u, "u");
  const RVec th = spec.eval_theta(v);

  if (spec.variant == DriverVariant::Section7) {
    const double p = pi[0], uu = u[0], zz = z[0];
    return -0.5 * p * p + p * th[0] + (p + zz) * uu - 0.5 * uu * uu;
  }
  switch (spec.utility.kind) {
    case UtilityClass::Kind::Power: {
      const double d = spec.utility.delta;
      double cross = 0;
      for (size_t i = 0; i < pi.size(); ++i)
        cross += pi[i] * (th[i] + z[i] + u[i]);
      return -0.5 * d * (1.0 - d) * norm2sq(pi) + d * cross + dot(z, u) +
             0.5 * norm2sq(z);
    }
    case UtilityClass::Kind::Log: {
      double s = -0.5 * norm2sq(pi) + dot(pi, th);
      for (size_t i = 0; i < pi.size(); ++i) s += (pi[i] + z[i]) * u[i];
      return s;
    }
    case UtilityClass::Kind::Exponential: {
      const double g = spec.utility.gamma;
      double q = 0, cross = 0;
      for (size_t i = 0; i < pi.size(); ++i) {
        const double t = g * pi[i] - z[i];
        q += t * t;
        cross += pi[i] * (th[i] + u[i]);
      }
      return 0.5 * q - g * cross + dot(z, u);
    }
  }
  throw std::logic_error("hamiltonian_F: unknown utility");
}

RVec alpha_star(const DriverSpec& spec, std::span<const double> v,
                std::span<const double> z, std::span<const double> u) {
  const RVec th = spec.eval_theta(v);
  RVec target(spec.dim);
  if (spec.variant == DriverVariant::Section7) {
    target[0] = th[0] + u[0];
    return spec.pi_set.project(target);
  }
  switch (spec.utility.kind) {
    case UtilityClass::Kind::Power: {
      const double s = 1.0 / (1.0 - spec.utility.delta);
      for (int i = 0; i < spec.dim; ++i)
        target[i] = s * (th[i] + z[i] + u[i]);
      break;
    }
    case UtilityClass::Kind::Log:
      for (int i = 0; i < spec.dim; ++i) target[i] = th[i] + u[i];
      break;
    case UtilityClass::Kind::Exponential: {
      const double s = 1.0 / spec.utility.gamma;
      for (int i = 0; i < spec.dim; ++i)
        target[i] = s * (th[i] + z[i] + u[i]);
      break;
    }
  }
  return spec.pi_set.project(target);
}

namespace {

// Value of u -> F(v, z, alpha*(v,z,u), u), the objective of the outer
// scenario optimisation (concave-side sign handled by the caller).
double outer_value(const DriverSpec& spec, std::span<const double> v,
                   std::span<const double> z, std::span<const double> u) {
  const RVec a = alpha_star(spec, v, z, u);
  return hamiltonian_F(spec, v, z, a, u);
}

// Gradient of the outer objective by the envelope theorem.
void outer_gradient(const DriverSpec& spec, std::span<const double> v,
                    std::span<const double> z, std::span<const double> u,
                    RVec& grad) {
  const RVec a = alpha_star(spec, v, z, u);
  grad.resize(spec.dim);
  switch (spec.utility.kind) {
    case UtilityClass::Kind::Power:
      for (int i = 0; i < spec.dim; ++i)
        grad[i] = spec.utility.delta * a[i] + z[i];
      return;
    case UtilityClass::Kind::Log:
      for (int i = 0; i < spec.dim; ++i) grad[i] = a[i] + z[i];
      return;
    case UtilityClass::Kind::Exponential:
      // d/du (inf_pi F) = z - gamma pi at the minimizing pi
      for (int i = 0; i < spec.dim; ++i)
        grad[i] = z[i] - spec.utility.gamma * a[i];
      return;
  }
}

// Projected gradient on the scenario set with backtracking; minimises the
// outer objective (the exponential case is fed the negated gradient so the
// same loop maximises).  Falls back to a coarse-to-fine grid scan on
// non-convergence for dim <= 2.
RVec outer_minimize(const DriverSpec& spec, std::span<const double> v,
                    std::span<const double> z) {
  const double sign =
      spec.utility.kind == UtilityClass::Kind::Exponential ? -1.0 : 1.0;
  const auto value = [&](std::span<const double> u) {
    return sign * outer_value(spec, v, z, u);
  };

  const RVec th = spec.eval_theta(v);
  RVec u(spec.dim);
  for (int i = 0; i < spec.dim; ++i)
    u[i] = -th[i] - z[i] / std::max(spec.utility.delta, 0.1);
  u = spec.u_set.project(u);

  double lip = 1.0;
  if (spec.utility.kind == UtilityClass::Kind::Power)
    lip = spec.utility.delta / (1.0 - spec.utility.delta) + 1e-12;
  double step = 1.0 / std::max(lip, 1e-6);

  RVec grad, trial(spec.dim), diff(spec.dim);
  double fu = value(u);
  for (int it = 0; it < spec.outer_max_iters; ++it) {
    outer_gradient(spec, v, z, u, grad);
    for (double& g : grad) g *= sign;
    double t = step;
    bool moved = false;
    for (int bt = 0; bt < 40; ++bt) {
      for (int i = 0; i < spec.dim; ++i) trial[i] = u[i] - t * grad[i];
      trial = spec.u_set.project(trial);
      double dsq = 0, gdot = 0;
      for (int i = 0; i < spec.dim; ++i) {
        diff[i] = trial[i] - u[i];
        dsq += diff[i] * diff[i];
        gdot += grad[i] * diff[i];
      }
      const double ft = value(trial);
      if (ft <= fu + gdot + dsq / (2.0 * t) + 1e-15) {
        if (std::sqrt(dsq) <= spec.outer_tol * (1.0 + std::sqrt(norm2sq(u)))) {
          return trial;
        }
        u = trial;
        fu = ft;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) return u;  // step underflow: stationary to rounding
  }

  if (spec.dim <= 2) {
    // grid fallback, refined three times
    RVec lo, hi;
    spec.u_set.bounding_box(1e3, lo, hi);
    RVec best = u;
    double bestf = value(u);
    double width = 0;
    for (int i = 0; i < spec.dim; ++i) width = std::max(width, hi[i] - lo[i]);
    int n = 65;
    RVec c = best;
    double span_w = width;
    for (int level = 0; level < 6; ++level) {
      RVec p(spec.dim);
      const int n1 = spec.dim == 1 ? 1 : n;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n1; ++j) {
          p[0] = std::clamp(c[0] - span_w / 2 + span_w * i / (n - 1.0), lo[0],
                            hi[0]);
          if (spec.dim == 2)
            p[1] = std::clamp(c[1] - span_w / 2 + span_w * j / (n - 1.0),
                              lo[1], hi[1]);
          if (!spec.u_set.contains(p, 1e-12)) continue;
          const double f = value(p);
          if (f < bestf - 1e-15) {
            bestf = f;
            best = p;
          }
        }
      }
      c = best;
      span_w *= 4.0 / (n - 1.0);
    }
    return best;
  }
  std::ostringstream os;
  os << "u_star: projected descent did not converge in "
     << spec.outer_max_iters << " iterations (last objective " << fu << ")";
  throw std::runtime_error(os.str());
}

double section7_pi_raw(double theta, double z) {
  const double split = 0.5 - z;
  if (split >= theta + 1.0) return theta + 1.0;
  if (split >= theta) return split;
  return theta;
}

}  // namespace

RVec u_star(const DriverSpec& spec, std::span<const double> v,
            std::span<const double> z) {
  const RVec th = spec.eval_theta(v);
  switch (spec.variant) {
    case DriverVariant::Section7: {
      bool clipped = false;
      const RVec p = pi_star(spec, v, z, &clipped);
      return {p[0] + z[0] <= 0.5 + 1e-12 ? 1.0 : 0.0};
    }
    case DriverVariant::Model2: {
      const double d = spec.utility.delta, R = spec.model2_R;
      const double z1 = z[0], z2 = z[1], t = th[0];
      const double proj_full = std::clamp(
          -t - z1 / d - (1.0 - d) / d * z2, -R, R);
      if (z2 >= 0.0) return {proj_full, proj_full};
      return {std::clamp(-t - z1 / d, -R, R), R};
    }
    default:
      break;
  }
  if (spec.pi_set.kind() == ConvexSet::Kind::Unconstrained) {
    RVec target(spec.dim);
    switch (spec.utility.kind) {
      case UtilityClass::Kind::Power:
        for (int i = 0; i < spec.dim; ++i)
          target[i] = -th[i] - z[i] / spec.utility.delta;
        break;
      case UtilityClass::Kind::Log:
        for (int i = 0; i < spec.dim; ++i) target[i] = -th[i] - z[i];
        break;
      case UtilityClass::Kind::Exponential:
        for (int i = 0; i < spec.dim; ++i) target[i] = -th[i];
        break;
    }
    return spec.u_set.project(target);
  }
  return outer_minimize(spec, v, z);
}

RVec pi_star(const DriverSpec& spec, std::span<const double> v,
             std::span<const double> z, bool* clipped) {
  if (clipped) *clipped = false;
  if (spec.variant == DriverVariant::Section7) {
    const RVec th = spec.eval_theta(v);
    const double raw = section7_pi_raw(th[0], z[0]);
    const double proj = std::clamp(raw, 0.0, 1.0);
    if (clipped && proj != raw) *clipped = true;
    return {proj};
  }
  const RVec u = u_star(spec, v, z);
  return alpha_star(spec, v, z, u);
}

RVec beta_star(const DriverSpec& spec, std::span<const double> v,
               std::span<const double> z, std::span<const double> pi) {
  if (spec.variant == DriverVariant::Section7)
    return {pi[0] + z[0] <= 0.5 + 1e-12 ? 1.0 : 0.0};

  const RVec ps = pi_star(spec, v, z);
  double d2 = 0;
  for (int i = 0; i < spec.dim; ++i) {
    const double t = pi[i] - ps[i];
    d2 += t * t;
  }
  if (std::sqrt(d2) <= 1e-9) return u_star(spec, v, z);

  // Off the optimal portfolio F is linear in u.
  RVec c(spec.dim);
  switch (spec.utility.kind) {
    case UtilityClass::Kind::Power:
      for (int i = 0; i < spec.dim; ++i)
        c[i] = spec.utility.delta * pi[i] + z[i];
      return spec.u_set.linear_minimizer(c);
    case UtilityClass::Kind::Log:
      for (int i = 0; i < spec.dim; ++i) c[i] = pi[i] + z[i];
      return spec.u_set.linear_minimizer(c);
    case UtilityClass::Kind::Exponential:
      for (int i = 0; i < spec.dim; ++i)
        c[i] = z[i] - spec.utility.gamma * pi[i];
      return spec.u_set.linear_maximizer(c);
  }
  throw std::logic_error("beta_star: unknown utility");
}

double driver_G(const DriverSpec& spec, std::span<const double> v,
                std::span<const double> z) {
  const RVec th = spec.eval_theta(v);
  switch (spec.variant) {
    case DriverVariant::Model1: {
      const double d = spec.utility.delta;
      RVec target(spec.dim);
      for (int i = 0; i < spec.dim; ++i) target[i] = -th[i] - z[i] / d;
      return 0.5 * d / (1.0 - d) * dist_sq(spec.u_set, target) -
             norm2sq(z) / (2.0 * d) - dot(z, th);
    }
    case DriverVariant::Model2: {
      const double d = spec.utility.delta, R = spec.model2_R;
      const double z1 = z[0], z2 = z[1], t = th[0];
      const double arg =
          -t - z1 / d - (1.0 - d) / d * z2 * (z2 >= 0.0 ? 1.0 : 0.0);
      const double dist = std::max(0.0, std::abs(arg) - R);
      double g = 0.5 * d / (1.0 - d) * dist * dist - z1 * z1 / (2.0 * d) -
                 t * z1;
      if (z2 >= 0.0)
        g += ((2.0 * d - 1.0) / (2.0 * d) * z2 - z1 / d - t) * z2;
      else
        g += (0.5 * z2 + R) * z2;
      return g;
    }
    case DriverVariant::Section7: {
      // max over [0,1] of -pi^2/2 + pi theta + min(0, pi + z - 1/2),
      // branch optima of the two concave pieces.
      const double t = th[0], zz = z[0];
      const double split = 0.5 - zz;
      double best = -std::numeric_limits<double>::infinity();
      const double a_hi = std::min(1.0, split);
      if (a_hi >= 0.0) {
        const double p = std::clamp(t + 1.0, 0.0, a_hi);
        best = std::max(best, -0.5 * p * p + p * (t + 1.0) + zz - 0.5);
      }
      const double b_lo = std::max(0.0, split);
      if (b_lo <= 1.0) {
        const double p = std::clamp(t, b_lo, 1.0);
        best = std::max(best, -0.5 * p * p + p * t);
      }
      return best;
    }
    case DriverVariant::Generic:
      break;
  }
  const RVec u = u_star(spec, v, z);
  const RVec a = alpha_star(spec, v, z, u);
  return hamiltonian_F(spec, v, z, a, u);
}

double realization_value(const RealizationSpec&,
                         std::span<const double> times,
                         std::span<const double> u, int dim, double t,
                         double s) {
  if (s < t)
    throw std::invalid_argument("realization_value: s < t");
  const size_t n = times.size();
  if (n < 2 || u.size() != n * static_cast<size_t>(dim))
    throw std::invalid_argument("realization_value: bad path shape");
  if (t < times.front() - 1e-12 || s > times.back() + 1e-12)
    throw std::invalid_argument("realization_value: [t,s] outside the path");

  const auto integrand = [&](size_t k) {
    double q = 0;
    for (int i = 0; i < dim; ++i) {
      const double x = u[k * dim + i];
      q += x * x;
    }
    return 0.5 * q;
  };
  const auto interp = [&](double tt, size_t k) {
    // linear interpolation of the integrand on [times[k], times[k+1]]
    const double w = (tt - times[k]) / (times[k + 1] - times[k]);
    return (1.0 - w) * integrand(k) + w * integrand(k + 1);
  };

  size_t k0 = 0;
  while (k0 + 2 < n && times[k0 + 1] <= t) ++k0;
  size_t k1 = k0;
  while (k1 + 2 < n && times[k1 + 1] < s) ++k1;

  if (k0 == k1)  // both endpoints in one cell
    return 0.5 * (interp(t, k0) + interp(s, k0)) * (s - t);

  double acc = 0.5 * (interp(t, k0) + integrand(k0 + 1)) * (times[k0 + 1] - t);
  for (size_t k = k0 + 1; k < k1; ++k)
    acc += 0.5 * (integrand(k) + integrand(k + 1)) * (times[k + 1] - times[k]);
  acc += 0.5 * (integrand(k1) + interp(s, k1)) * (s - times[k1]);
  return acc;
}

}  // namespace rfp
