#include "rfp/bsde.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "pde_internal.hpp"

namespace rfp {

FiniteHorizonField solve_finite_horizon(const PdeProblem& problem, double T,
                                        double dt,
                                        const FiniteHorizonOptions& opt) {
  if (!(T > 0)) throw std::invalid_argument("solve_finite_horizon: T <= 0");
  if (dt <= 0) dt = T / 2000.0;
  const int steps = static_cast<int>(std::llround(T / dt));
  if (steps < 1 || std::abs(steps * dt - T) > 1e-9 * std::max(1.0, T))
    throw std::invalid_argument(
        "solve_finite_horizon: dt must divide the horizon");

  const auto asmb = detail::assemble(problem);
  const int N = problem.grid.size();
  Eigen::SparseMatrix<double> Id(N, N);
  Id.setIdentity();
  Eigen::SparseMatrix<double> M = (Id - dt * asmb.L).pruned();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(M);
  if (lu.info() != Eigen::Success)
    throw std::runtime_error(
        "solve_finite_horizon: factorization failed (check the CFL-free "
        "implicit operator and grid)");

  FiniteHorizonField out;
  out.grid = problem.grid;
  out.T = T;
  out.dt = dt;
  out.zdim = problem.zdim;

  Eigen::VectorXd f;
  if (opt.terminal) {
    if (static_cast<int>(opt.terminal->size()) != N)
      throw std::invalid_argument("solve_finite_horizon: bad terminal slice");
    f = Eigen::Map<const Eigen::VectorXd>(opt.terminal->data(), N);
  } else {
    f = Eigen::VectorXd::Zero(N);
  }
  out.terminal_max_abs = f.lpNorm<Eigen::Infinity>();

  const auto want = [&](int step) {
    return std::find(opt.record_steps.begin(), opt.record_steps.end(),
                     step) != opt.record_steps.end();
  };
  if (want(steps)) out.slices[steps] = {f.data(), f.data() + N};

  std::vector<double> gv(N);
  Eigen::VectorXd rhs(N);
  for (int m = steps; m > 0; --m) {
    const std::vector<double> fv(f.data(), f.data() + N);
    const auto z = extract_z(problem.grid, fv, problem.zmap);
    detail::g_sweep(problem, asmb.nodes, z, gv, opt.parallel);
    for (int k = 0; k < N; ++k) rhs[k] = f[k] + dt * gv[k];
    f = lu.solve(rhs);
    if (!f.allFinite()) {
      std::ostringstream os;
      os << "solve_finite_horizon: step " << m
         << " produced a non-finite slice (dt = " << dt << ")";
      throw std::runtime_error(os.str());
    }
    if (want(m - 1)) out.slices[m - 1] = {f.data(), f.data() + N};
  }
  out.f0.assign(f.data(), f.data() + N);
  return out;
}

double lower_value(const UtilityClass& utility, double x,
                   std::span<const double> v,
                   const FiniteHorizonField& field) {
  if (utility.kind != UtilityClass::Kind::Power)
    throw std::invalid_argument("lower_value: power utility expected");
  if (!(x > 0)) throw std::invalid_argument("lower_value: x <= 0");
  return std::pow(x, utility.delta) / utility.delta *
         std::exp(field.value0(v));
}

ErgodicLimitReport ergodic_limit(const PdeProblem& problem,
                                 const MarkovianSolutionField& ergodic_field,
                                 std::span<const double> horizons,
                                 double dt_override, bool parallel) {
  ErgodicLimitReport rep;
  const int N = problem.grid.size();
  double dt = dt_override;
  if (dt <= 0) {
    // One time step for all horizons so differences see the same bias.
    double tmax = 0;
    for (double T : horizons) tmax = std::max(tmax, T);
    dt = tmax / 4000.0;
  }
  for (double T : horizons) {
    FiniteHorizonOptions opt;
    opt.parallel = parallel;
    const auto f = solve_finite_horizon(problem, T, dt, opt);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0;
    for (int k = 0; k < N; ++k) {
      const double lhat =
          f.f0[k] - ergodic_field.lambda * T - ergodic_field.y[k];
      lo = std::min(lo, lhat);
      hi = std::max(hi, lhat);
      sum += lhat;
    }
    rep.horizons.push_back(T);
    rep.L_hat.push_back(sum / N);
    rep.state_spread.push_back(hi - lo);
    if (rep.L_hat.size() >= 2)
      rep.consecutive_diff.push_back(
          std::abs(rep.L_hat.back() - rep.L_hat[rep.L_hat.size() - 2]));
  }
  rep.L_final = rep.L_hat.empty() ? 0.0 : rep.L_hat.back();
  return rep;
}

DiscountedFamilyReport discounted_forward_diagnostics(
    const PdeProblem& problem, const DriverSpec& driver,
    std::span<const double> rho_schedule, const PathEnsemble& ensemble,
    const MarkovianSolutionField& ergodic_field, const SolveOptions& opt) {
  DiscountedFamilyReport rep;
  const int gd = problem.grid.dim;
  const double v0y = 0.0;  // ergodic y is already normalized at v0

  std::vector<double> warm;
  for (const double rho : rho_schedule) {
    const auto field =
        solve_discounted(problem, rho, opt, warm.empty() ? nullptr : &warm);
    warm = field.y;
    const double yrho_v0 =
        problem.grid.interpolate(field.y, ergodic_field.v0);

    double worst = 0;
    double gap_acc = 0;
    const double dt = ensemble.dt;
    const int check_every = std::max(1, ensemble.steps / 64);
    for (int p = 0; p < ensemble.paths; ++p) {
      double integral = 0;  // int_0^t rho y^rho(V_s) ds, trapezoid
      double prev = problem.grid.interpolate(field.y,
                                             ensemble.state(p, 0).first(gd));
      double gap_path = 0;
      RVec zr(problem.zdim), ze(problem.zdim);
      for (int k = 1; k <= ensemble.steps; ++k) {
        const auto v = ensemble.state(p, k).first(gd);
        const double cur = problem.grid.interpolate(field.y, v);
        integral += 0.5 * rho * (prev + cur) * dt;
        prev = cur;
        if (k % check_every == 0) {
          // log of U^rho e^{-y^rho(v0)} / U; x cancels by homotheticity.
          const double le = (cur - integral - yrho_v0) -
                            (ergodic_field.y_at(v) - v0y -
                             ergodic_field.lambda * ensemble.times[k]);
          worst = std::max(worst, std::abs(std::exp(le) - 1.0));
        }
        // strategy gap at u = 0
        for (int c = 0; c < problem.zdim; ++c) {
          zr[c] = detail::interp_strided(problem.grid, field.z, problem.zdim,
                                         c, v);
        }
        const RVec zev = ergodic_field.z_at(v);
        RVec vf(driver.dim, 0.0);
        std::copy(v.begin(), v.end(), vf.begin());
        RVec uz(driver.dim, 0.0);
        const RVec a_rho = alpha_star(driver, vf, zr, uz);
        const RVec a_erg = alpha_star(driver, vf, zev, uz);
        double d2 = 0;
        for (int c = 0; c < driver.dim; ++c) {
          const double t = a_rho[c] - a_erg[c];
          d2 += t * t;
        }
        gap_path += d2 * dt;
      }
      gap_acc += gap_path;
    }
    rep.rhos.push_back(rho);
    rep.max_ratio_error.push_back(worst);
    rep.strategy_gap.push_back(gap_acc / ensemble.paths);
  }
  return rep;
}

}  // namespace rfp
