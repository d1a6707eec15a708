#include "rfp/simulate.hpp"

#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "rfp/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rfp {

void MeasureShift::drift(std::span<const double> v, std::span<double> out,
                         std::span<double> scratch) const {
  const size_t d = out.size();
  switch (mode) {
    case ShiftMode::Base:
      std::fill(out.begin(), out.end(), 0.0);
      return;
    case ShiftMode::Scenario:
      u(v, out);
      return;
    case ShiftMode::Game:
      pi(v, scratch);
      u(v, out);
      for (size_t i = 0; i < d; ++i) out[i] += delta * scratch[i];
      return;
  }
}

void factor_step(const FactorModelSpec& spec, std::span<double> v,
                 std::span<const double> drift, double dt, double sqrt_dt,
                 std::span<const double> xi, std::span<double> eta_buf,
                 std::span<double> dw_buf) {
  const int d = spec.dim_factor;
  for (int j = 0; j < d; ++j) dw_buf[j] = drift[j] * dt + sqrt_dt * xi[j];
  spec.eta(v, eta_buf);
  for (int i = 0; i < d; ++i) {
    double inc = eta_buf[i] * dt;
    for (int j = 0; j < d; ++j) inc += spec.kappa(i, j) * dw_buf[j];
    v[i] += inc;
  }
}

namespace {

struct PathError {
  bool failed = false;
  std::string message;
};

void simulate_one_factor_path(const FactorModelSpec& spec,
                              const MeasureShift& shift, int path,
                              PathEnsemble& ens, PathError& err) {
  const int d = spec.dim_factor;
  const int steps = ens.steps;
  const double dt = ens.dt;
  const double sqrt_dt = std::sqrt(dt);
  CounterRng rng(ens.seed, static_cast<uint64_t>(path));

  RVec v(d, 0.0), drift(d), xi(d), eta_buf(d), dw_buf(d), scratch(d);
  double* out = ens.factor.data() + static_cast<size_t>(path) * (steps + 1) * d;
  for (int i = 0; i < d; ++i) out[i] = v[i];

  for (int k = 0; k < steps; ++k) {
    shift.drift(v, drift, scratch);
    for (int j = 0; j < d; ++j) xi[j] = rng.next_normal();
    factor_step(spec, v, drift, dt, sqrt_dt, xi, eta_buf, dw_buf);
    for (int i = 0; i < d; ++i) {
      if (!std::isfinite(v[i])) {
        std::ostringstream os;
        os << "simulate_factor: state diverged on path " << path
           << " at step " << (k + 1);
        err.failed = true;
        err.message = os.str();
        return;
      }
      out[(static_cast<size_t>(k) + 1) * d + i] = v[i];
    }
  }
}

}  // namespace

PathEnsemble simulate_factor(const FactorModelSpec& spec,
                             const MeasureShift& shift, double T, double dt,
                             int paths, uint64_t seed, const SimOptions& opt) {
  if (paths < 1) throw std::invalid_argument("simulate_factor: paths < 1");
  if (!(dt > 0) || dt > T / 10.0)
    throw std::invalid_argument("simulate_factor: require 0 < dt <= T/10");
  if ((shift.mode != ShiftMode::Base && !shift.u) ||
      (shift.mode == ShiftMode::Game && !shift.pi))
    throw std::invalid_argument("simulate_factor: shift maps missing");

  PathEnsemble ens;
  ens.paths = paths;
  ens.dim = spec.dim_factor;
  ens.steps = static_cast<int>(std::llround(T / dt));
  ens.dt = dt;
  ens.seed = seed;
  ens.shift_mode = shift.mode;
  ens.times.resize(ens.steps + 1);
  for (int k = 0; k <= ens.steps; ++k) ens.times[k] = k * dt;
  ens.factor.assign(static_cast<size_t>(paths) * (ens.steps + 1) * ens.dim,
                    0.0);

  std::vector<PathError> errors(paths);
  if (opt.parallel) {
#pragma omp parallel for schedule(static)
    for (int p = 0; p < paths; ++p)
      simulate_one_factor_path(spec, shift, p, ens, errors[p]);
  } else {
    for (int p = 0; p < paths; ++p)
      simulate_one_factor_path(spec, shift, p, ens, errors[p]);
  }
  for (const auto& e : errors)
    if (e.failed) throw std::runtime_error(e.message);
  return ens;
}

namespace {

void simulate_one_wealth_path(const PathEnsemble& ens,
                              const FactorModelSpec& spec, const VecFn& pi,
                              const MeasureShift& shift, double x0,
                              double pi_cap, int path, double* wealth,
                              long& cap_binds) {
  const int d = ens.dim;
  const int steps = ens.steps;
  const double dt = ens.dt;
  const double sqrt_dt = std::sqrt(dt);
  CounterRng rng(ens.seed, static_cast<uint64_t>(path));

  RVec pv(d), theta(d), drift(d), scratch(d), xi(d);
  double lx = std::log(x0);
  wealth[0] = x0;
  for (int k = 0; k < steps; ++k) {
    const auto v = ens.state(path, k);
    pi(v, pv);
    for (int i = 0; i < d; ++i) {
      if (std::abs(pv[i]) > pi_cap) {
        pv[i] = std::copysign(pi_cap, pv[i]);
        ++cap_binds;
      }
    }
    spec.eval_theta(v, theta);
    // Drift of W under the simulated measure; the wealth equation keeps
    // its P-form dX = X pi^T(theta dt + dW), so the W-drift shifts theta.
    shift.drift(v, drift, scratch);
    for (int j = 0; j < d; ++j) xi[j] = rng.next_normal();
    double a = 0, q = 0, m = 0;
    for (int i = 0; i < d; ++i) {
      a += pv[i] * (theta[i] + drift[i]);
      q += pv[i] * pv[i];
      m += pv[i] * xi[i];
    }
    lx += (a - 0.5 * q) * dt + m * sqrt_dt;
    wealth[k + 1] = std::exp(lx);
  }
}

}  // namespace

void simulate_wealth(PathEnsemble& ens, const FactorModelSpec& spec,
                     const VecFn& pi, const MeasureShift& shift, double x0,
                     const SimOptions& opt) {
  if (!(x0 > 0)) throw std::invalid_argument("simulate_wealth: x0 <= 0");
  if (shift.mode != ens.shift_mode)
    throw std::invalid_argument(
        "simulate_wealth: ensemble was produced under a different shift");
  ens.wealth.assign(static_cast<size_t>(ens.paths) * (ens.steps + 1), 0.0);
  std::vector<long> binds(ens.paths, 0);
  const int paths = ens.paths;
  if (opt.parallel) {
#pragma omp parallel for schedule(static)
    for (int p = 0; p < paths; ++p)
      simulate_one_wealth_path(
          ens, spec, pi, shift, x0, opt.pi_cap, p,
          ens.wealth.data() + static_cast<size_t>(p) * (ens.steps + 1),
          binds[p]);
  } else {
    for (int p = 0; p < paths; ++p)
      simulate_one_wealth_path(
          ens, spec, pi, shift, x0, opt.pi_cap, p,
          ens.wealth.data() + static_cast<size_t>(p) * (ens.steps + 1),
          binds[p]);
  }
  ens.pi_cap_binds = 0;
  for (long b : binds) ens.pi_cap_binds += b;
}

void write_csv(const PathEnsemble& ens, std::ostream& os) {
  os << "path,t";
  for (int i = 1; i <= ens.dim; ++i) os << ",v_" << i;
  if (ens.has_wealth()) os << ",x";
  os << "\n";
  char buf[64];
  for (int p = 0; p < ens.paths; ++p) {
    for (int k = 0; k <= ens.steps; ++k) {
      os << p;
      std::snprintf(buf, sizeof(buf), ",%.17g", ens.times[k]);
      os << buf;
      const auto v = ens.state(p, k);
      for (int i = 0; i < ens.dim; ++i) {
        std::snprintf(buf, sizeof(buf), ",%.17g", v[i]);
        os << buf;
      }
      if (ens.has_wealth()) {
        std::snprintf(buf, sizeof(buf), ",%.17g", ens.wealth_at(p, k));
        os << buf;
      }
      os << "\n";
    }
  }
}

}  // namespace rfp
