#include "rfp/pde.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include "pde_internal.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rfp::detail {

// Interpolation of one component of an interleaved field.
double interp_strided(const SpatialGrid& g, std::span<const double> field,
                      int stride, int offset, std::span<const double> v) {
  const auto locate = [&](int axis, double x, int& i, double& w) {
    const double t =
        std::clamp((x - g.lo[axis]) / g.h(axis), 0.0,
                   static_cast<double>(g.n[axis] - 1));
    i = std::min(static_cast<int>(t), g.n[axis] - 2);
    w = t - i;
  };
  int i;
  double wi;
  locate(0, v[0], i, wi);
  const auto at = [&](int idx) {
    return field[static_cast<size_t>(idx) * stride + offset];
  };
  if (g.dim == 1) return (1 - wi) * at(i) + wi * at(i + 1);
  int j;
  double wj;
  locate(1, v[1], j, wj);
  return (1 - wi) * (1 - wj) * at(g.index(i, j)) +
         wi * (1 - wj) * at(g.index(i + 1, j)) +
         (1 - wi) * wj * at(g.index(i, j + 1)) +
         wi * wj * at(g.index(i + 1, j + 1));
}

Assembled assemble(const PdeProblem& p) {
  const auto& g = p.grid;
  const int m = g.dim, N = g.size();
  Assembled out;
  out.nodes = g.nodes();

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(N) * (m == 1 ? 4 : 10));

  std::vector<double> eta(m);
  std::map<int, double> row;

  // Folds ghost indices back with the linear-extrapolation rule
  // y(-1) = 2 y(0) - y(1) (zero second derivative across the boundary).
  std::function<void(int, int, double)> add = [&](int i, int j, double w) {
    if (i < 0) {
      add(0, j, 2 * w);
      add(1, j, -w);
      return;
    }
    if (i > g.n[0] - 1) {
      add(g.n[0] - 1, j, 2 * w);
      add(g.n[0] - 2, j, -w);
      return;
    }
    if (m == 2) {
      if (j < 0) {
        add(i, 0, 2 * w);
        add(i, 1, -w);
        return;
      }
      if (j > g.n[1] - 1) {
        add(i, g.n[1] - 1, 2 * w);
        add(i, g.n[1] - 2, -w);
        return;
      }
    }
    row[g.index(i, j)] += w;
  };

  for (int idx = 0; idx < N; ++idx) {
    const int i = idx % g.n[0], j = idx / g.n[0];
    const std::span<const double> v{out.nodes.data() +
                                        static_cast<size_t>(idx) * m,
                                    static_cast<size_t>(m)};
    p.drift(v, eta);
    row.clear();

    for (int a = 0; a < m; ++a) {
      const double h = g.h(a);
      const double daa = p.diffusion(a, a);
      if (daa != 0.0) {
        const double c = 0.5 * daa / (h * h);
        const int di = a == 0 ? 1 : 0, dj = a == 0 ? 0 : 1;
        add(i + di, j + dj, c);
        add(i - di, j - dj, c);
        add(i, j, -2 * c);
      }
      // Drift: central while the cell Peclet number allows a monotone
      // stencil, one-sided by drift sign otherwise.
      const double e = eta[a];
      if (e != 0.0) {
        const int di = a == 0 ? 1 : 0, dj = a == 0 ? 0 : 1;
        const bool central = std::abs(e) * h <= daa + 1e-300;
        if (central) {
          add(i + di, j + dj, e / (2 * h));
          add(i - di, j - dj, -e / (2 * h));
        } else if (e > 0) {
          add(i + di, j + dj, e / h);
          add(i, j, -e / h);
        } else {
          add(i, j, e / h);
          add(i - di, j - dj, -e / h);
        }
      }
    }
    if (m == 2) {
      const double d01 = 0.5 * (p.diffusion(0, 1) + p.diffusion(1, 0));
      if (d01 != 0.0) {
        const double c = d01 / (4.0 * g.h(0) * g.h(1));
        add(i + 1, j + 1, c);
        add(i - 1, j - 1, c);
        add(i + 1, j - 1, -c);
        add(i - 1, j + 1, -c);
      }
    }

    double abs_sum = 0;
    for (const auto& [col, w] : row) {
      trips.emplace_back(idx, col, w);
      abs_sum += std::abs(w);
    }
    out.max_row_abs = std::max(out.max_row_abs, abs_sum);
  }

  out.L.resize(N, N);
  out.L.setFromTriplets(trips.begin(), trips.end());
  return out;
}

// G(v_k, z_k) over all nodes; the sweep is the data-parallel kernel.
void g_sweep(const PdeProblem& p, const std::vector<double>& nodes,
             std::span<const double> z, std::span<double> out, bool parallel) {
  const int N = p.grid.size(), m = p.grid.dim, zd = p.zdim;
  bool failed = false;
  std::string err;
#pragma omp parallel for schedule(static) if (parallel)
  for (int k = 0; k < N; ++k) {
    if (failed) continue;
    try {
      out[k] = p.G({nodes.data() + static_cast<size_t>(k) * m,
                    static_cast<size_t>(m)},
                   {z.data() + static_cast<size_t>(k) * zd,
                    static_cast<size_t>(zd)});
    } catch (const std::exception& e) {
#pragma omp critical
      {
        failed = true;
        err = e.what();
      }
    }
  }
  if (failed) throw std::runtime_error("driver evaluation failed: " + err);
}

}  // namespace rfp::detail

namespace rfp {

using detail::Assembled;
using detail::assemble;
using detail::g_sweep;
using detail::interp_strided;

namespace {

std::vector<double> gradient_axis(const SpatialGrid& g,
                                  std::span<const double> y, int axis) {
  const int N = g.size();
  std::vector<double> out(N);
  const double h = g.h(axis);
  const int s = axis == 0 ? 1 : g.n[0];
  const int na = g.n[axis];
  for (int idx = 0; idx < N; ++idx) {
    const int ia = axis == 0 ? idx % g.n[0] : idx / g.n[0];
    if (ia == 0)
      out[idx] = (-3 * y[idx] + 4 * y[idx + s] - y[idx + 2 * s]) / (2 * h);
    else if (ia == na - 1)
      out[idx] = (3 * y[idx] - 4 * y[idx - s] + y[idx - 2 * s]) / (2 * h);
    else
      out[idx] = (y[idx + s] - y[idx - s]) / (2 * h);
  }
  return out;
}

}  // namespace

std::vector<double> extract_z(const SpatialGrid& grid,
                              std::span<const double> y,
                              const Eigen::MatrixXd& zmap) {
  const int N = grid.size(), m = grid.dim;
  const int zd = static_cast<int>(zmap.cols());
  std::vector<std::vector<double>> grads(m);
  for (int a = 0; a < m; ++a) grads[a] = gradient_axis(grid, y, a);
  std::vector<double> z(static_cast<size_t>(N) * zd, 0.0);
  for (int k = 0; k < N; ++k)
    for (int c = 0; c < zd; ++c) {
      double s = 0;
      for (int a = 0; a < m; ++a) s += zmap(a, c) * grads[a][k];
      z[static_cast<size_t>(k) * zd + c] = s;
    }
  return z;
}

PdeProblem make_pde_problem(const FactorModelSpec& market,
                            const DriverSpec& driver,
                            const SpatialGrid& grid) {
  if (grid.dim != market.dim_factor)
    throw std::invalid_argument(
        "make_pde_problem: grid dimension must equal the factor dimension");
  PdeProblem p;
  p.grid = grid;
  p.drift = market.eta;
  p.diffusion = market.kappa * market.kappa.transpose();
  p.zmap = market.kappa;
  p.zdim = market.dim_factor;
  p.G = [driver](std::span<const double> v, std::span<const double> z) {
    return driver_G(driver, v, z);
  };
  return p;
}

PdeProblem make_model2_problem(const FactorModelSpec& market,
                               const DriverSpec& driver,
                               const SpatialGrid& grid) {
  if (grid.dim != 1 || market.dim_factor != 2)
    throw std::invalid_argument(
        "make_model2_problem: expects a 1-d grid over a 2-d factor");
  PdeProblem p;
  p.grid = grid;
  p.drift = [eta = market.eta](std::span<const double> v,
                               std::span<double> out) {
    const double full[2] = {v[0], 0.0};
    double buf[2];
    eta(full, buf);
    out[0] = buf[0];
  };
  const Eigen::MatrixXd kk = market.kappa * market.kappa.transpose();
  p.diffusion = kk.topLeftCorner(1, 1);
  p.zmap = market.kappa.topRows(1);  // z = (k11, k12) y'
  p.zdim = 2;
  p.G = [driver](std::span<const double> v, std::span<const double> z) {
    const double full[2] = {v[0], 0.0};
    return driver_G(driver, full, z);
  };
  return p;
}

PdeProblem with_constant_shift(PdeProblem problem, double c) {
  auto base = problem.G;
  problem.G = [base, c](std::span<const double> v,
                        std::span<const double> z) { return base(v, z) + c; };
  return problem;
}

DiscountedSolutionField solve_discounted(const PdeProblem& problem, double rho,
                                         const SolveOptions& opt,
                                         const std::vector<double>* warm) {
  if (!(rho > 0)) throw std::invalid_argument("solve_discounted: rho <= 0");
  const auto asmb = assemble(problem);
  const int N = problem.grid.size();

  Eigen::SparseMatrix<double> Id(N, N);
  Id.setIdentity();
  Eigen::SparseMatrix<double> M = (Id * rho - asmb.L).pruned();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(M);
  if (lu.info() != Eigen::Success)
    throw std::runtime_error("solve_discounted: factorization failed");

  Eigen::VectorXd y =
      warm ? Eigen::Map<const Eigen::VectorXd>(warm->data(), N).eval()
           : Eigen::VectorXd::Zero(N).eval();
  Eigen::VectorXd g(N);
  std::vector<double> gv(N);
  double omega = opt.omega;
  double prev_res = std::numeric_limits<double>::infinity();
  std::vector<double> res_history;

  for (int it = 0; it < opt.max_iters; ++it) {
    const std::vector<double> yv(y.data(), y.data() + N);
    const auto z = extract_z(problem.grid, yv, problem.zmap);
    g_sweep(problem, asmb.nodes, z, gv, opt.parallel);
    g = Eigen::Map<const Eigen::VectorXd>(gv.data(), N);

    const Eigen::VectorXd resid = M * y - g;
    const double res = resid.lpNorm<Eigen::Infinity>();
    res_history.push_back(res);
    if (res <= opt.tol) {
      DiscountedSolutionField out;
      out.grid = problem.grid;
      out.rho = rho;
      out.y = yv;
      out.z = z;
      out.zdim = problem.zdim;
      out.iterations = it;
      double rin = 0;
      for (int k = 0; k < N; ++k) {
        const int i = k % problem.grid.n[0], j = k / problem.grid.n[0];
        if (problem.grid.interior(i, j)) rin = std::max(rin, std::abs(resid[k]));
      }
      out.residual_norm = rin;
      return out;
    }
    if (res > prev_res * (1.0 + 1e-12)) omega = std::max(0.2, 0.5 * omega);
    prev_res = res;

    const Eigen::VectorXd ynew = lu.solve(g);
    y = (1.0 - omega) * y + omega * ynew;
  }

  std::ostringstream os;
  os << "solve_discounted: no convergence after " << opt.max_iters
     << " iterations; residual history tail:";
  const size_t from = res_history.size() > 8 ? res_history.size() - 8 : 0;
  for (size_t i = from; i < res_history.size(); ++i)
    os << " " << res_history[i];
  throw std::runtime_error(os.str());
}

double stationary_residual(const PdeProblem& problem,
                           std::span<const double> y, double lambda,
                           bool parallel) {
  const auto& g = problem.grid;
  const int N = g.size(), m = g.dim;
  const auto nodes = g.nodes();
  const auto z = extract_z(g, y, problem.zmap);
  std::vector<double> gv(N);
  g_sweep(problem, nodes, z, gv, parallel);

  double worst = 0;
  std::vector<double> eta(m);
  for (int idx = 0; idx < N; ++idx) {
    const int i = idx % g.n[0], j = idx / g.n[0];
    if (!g.interior(i, j)) continue;
    const std::span<const double> v{nodes.data() + static_cast<size_t>(idx) * m,
                                    static_cast<size_t>(m)};
    problem.drift(v, eta);
    double val = gv[idx] - lambda;
    for (int a = 0; a < m; ++a) {
      const double h = g.h(a);
      const int s = a == 0 ? 1 : g.n[0];
      val += 0.5 * problem.diffusion(a, a) *
             (y[idx + s] - 2 * y[idx] + y[idx - s]) / (h * h);
      val += eta[a] * (y[idx + s] - y[idx - s]) / (2 * h);
    }
    if (m == 2) {
      const double d01 = 0.5 * (problem.diffusion(0, 1) + problem.diffusion(1, 0));
      if (d01 != 0.0) {
        const int s0 = 1, s1 = g.n[0];
        val += d01 *
               (y[idx + s0 + s1] - y[idx + s0 - s1] - y[idx - s0 + s1] +
                y[idx - s0 - s1]) /
               (4.0 * g.h(0) * g.h(1));
      }
    }
    worst = std::max(worst, std::abs(val));
  }
  return worst;
}

namespace {

MarkovianSolutionField finalize_field(const PdeProblem& problem,
                                      std::vector<double> y,
                                      std::span<const double> v0,
                                      double lambda, std::string method) {
  MarkovianSolutionField f;
  f.grid = problem.grid;
  const double y0 = problem.grid.interpolate(y, v0);
  for (double& v : y) v -= y0;
  f.y = std::move(y);
  f.z = extract_z(problem.grid, f.y, problem.zmap);
  f.zdim = problem.zdim;
  f.lambda = lambda;
  f.v0.assign(v0.begin(), v0.end());
  f.method = std::move(method);
  f.residual_norm = stationary_residual(problem, f.y, lambda);
  double zs = 0;
  for (int k = 0; k < problem.grid.size(); ++k) {
    double n2 = 0;
    for (int c = 0; c < f.zdim; ++c) {
      const double zc = f.z[static_cast<size_t>(k) * f.zdim + c];
      n2 += zc * zc;
    }
    zs = std::max(zs, n2);
  }
  f.z_sup_norm = std::sqrt(zs);
  return f;
}

}  // namespace

MarkovianSolutionField solve_ergodic_vanishing_discount(
    const PdeProblem& problem, std::span<const double> rho_schedule,
    std::span<const double> v0, const SolveOptions& opt) {
  if (rho_schedule.empty())
    throw std::invalid_argument("vanishing discount: empty schedule");
  for (size_t i = 0; i + 1 < rho_schedule.size(); ++i)
    if (rho_schedule[i] <= rho_schedule[i + 1])
      throw std::invalid_argument(
          "vanishing discount: schedule must be decreasing");
  if (rho_schedule.back() > 1e-2 + 1e-15)
    throw std::invalid_argument(
        "vanishing discount: last rho must be <= 1e-2");

  std::vector<std::pair<double, double>> trace;
  std::vector<double> warm;
  DiscountedSolutionField last;
  for (const double rho : rho_schedule) {
    last = solve_discounted(problem, rho, opt, warm.empty() ? nullptr : &warm);
    warm = last.y;
    trace.emplace_back(rho, rho * problem.grid.interpolate(last.y, v0));
  }

  double lambda = trace.back().second;
  if (trace.size() >= 2) {
    const auto [r1, t1] = trace[trace.size() - 2];
    const auto [r2, t2] = trace.back();
    lambda = t2 + (t2 - t1) * r2 / (r1 - r2);
  }

  auto f = finalize_field(problem, last.y, v0, lambda, "vanishing_discount");
  f.rho_trace = trace;
  for (size_t i = 0; i + 1 < trace.size(); ++i) {
    if (std::abs(trace[i + 1].second - lambda) >
        std::abs(trace[i].second - lambda) + 1e-12) {
      f.warnings.push_back(
          "rho*y^rho(v0) trajectory is not monotone toward lambda");
      break;
    }
  }
  return f;
}

MarkovianSolutionField solve_ergodic_false_transient(
    const PdeProblem& problem, double dt, double tol,
    std::span<const double> v0, const SolveOptions& opt) {
  const auto asmb = assemble(problem);
  const int N = problem.grid.size();
  if (!(dt > 0) || dt * asmb.max_row_abs > 1.0) {
    std::ostringstream os;
    os << "false transient: dt = " << dt
       << " violates the explicit stability bound dt <= "
       << 1.0 / asmb.max_row_abs;
    throw std::runtime_error(os.str());
  }

  Eigen::VectorXd y = Eigen::VectorXd::Zero(N);
  std::vector<double> gv(N);
  const long max_steps =
      std::min<long>(5'000'000, std::max<long>(500'000, 4'000'000'000 / N));
  double lambda = 0;
  bool done = false;
  for (long step = 0; step < max_steps && !done; ++step) {
    const std::vector<double> yv(y.data(), y.data() + N);
    const auto z = extract_z(problem.grid, yv, problem.zmap);
    g_sweep(problem, asmb.nodes, z, gv, opt.parallel);
    Eigen::VectorXd delta = asmb.L * y;
    for (int k = 0; k < N; ++k) delta[k] = dt * (delta[k] + gv[k]);
    y += delta;
    const double omax = delta.maxCoeff(), omin = delta.minCoeff();
    if ((omax - omin) / dt <= tol) {
      lambda = delta.mean() / dt;
      done = true;
    }
    if (step % 1000 == 999) y.array() -= y.mean();  // keep magnitudes tame
  }
  if (!done)
    throw std::runtime_error(
        "false transient: steady increment not reached; refine dt or tol");

  return finalize_field(problem, {y.data(), y.data() + N}, v0, lambda,
                        "false_transient");
}

double MarkovianSolutionField::y_at(std::span<const double> v,
                                    bool* outside) const {
  return grid.interpolate(y, std::span<const double>(v).first(grid.dim),
                          outside);
}

RVec MarkovianSolutionField::z_at(std::span<const double> v) const {
  RVec out(zdim);
  const auto va = std::span<const double>(v).first(grid.dim);
  for (int c = 0; c < zdim; ++c)
    out[c] = interp_strided(grid, z, zdim, c, va);
  return out;
}

double forward_process_value(const UtilityClass& utility, double x, double t,
                             std::span<const double> v,
                             const MarkovianSolutionField& field,
                             bool* outside) {
  const double yv = field.y_at(v, outside);
  const double e = yv - field.lambda * t;
  switch (utility.kind) {
    case UtilityClass::Kind::Power:
      if (!(x > 0))
        throw std::invalid_argument("forward_process_value: x <= 0");
      return std::pow(x, utility.delta) / utility.delta * std::exp(e);
    case UtilityClass::Kind::Log:
      if (!(x > 0))
        throw std::invalid_argument("forward_process_value: x <= 0");
      return std::log(x) + e;
    case UtilityClass::Kind::Exponential:
      return -std::exp(-utility.gamma * x + e);
  }
  throw std::logic_error("forward_process_value: unknown utility");
}

void write_field_csv(const MarkovianSolutionField& field, std::ostream& os) {
  const auto& g = field.grid;
  os << "v_1";
  if (g.dim == 2) os << ",v_2";
  os << ",y";
  for (int c = 1; c <= field.zdim; ++c) os << ",z_" << c;
  os << "\n";
  char buf[64];
  std::vector<double> v(g.dim);
  for (int k = 0; k < g.size(); ++k) {
    g.node(k, v);
    for (int a = 0; a < g.dim; ++a) {
      std::snprintf(buf, sizeof(buf), a ? ",%.17g" : "%.17g", v[a]);
      os << buf;
    }
    std::snprintf(buf, sizeof(buf), ",%.17g", field.y[k]);
    os << buf;
    for (int c = 0; c < field.zdim; ++c) {
      std::snprintf(buf, sizeof(buf), ",%.17g",
                    field.z[static_cast<size_t>(k) * field.zdim + c]);
      os << buf;
    }
    os << "\n";
  }
}

namespace {

// Strategy maps are deterministic functions of the factor state, so they
// are tabulated on the field's grid once and interpolated in the
// simulation hot loop (no per-call allocation).
VecFn tabulate_feedback(const SpatialGrid& grid, int dim_out,
                        const std::function<RVec(std::span<const double>)>& f) {
  auto table = std::make_shared<std::vector<double>>(
      static_cast<size_t>(grid.size()) * dim_out);
  std::vector<double> v(grid.dim);
  for (int k = 0; k < grid.size(); ++k) {
    grid.node(k, v);
    const RVec val = f(v);
    for (int c = 0; c < dim_out; ++c)
      (*table)[static_cast<size_t>(k) * dim_out + c] = val[c];
  }
  return [grid, dim_out, table](std::span<const double> v,
                                std::span<double> out) {
    for (int c = 0; c < dim_out; ++c)
      out[c] = interp_strided(grid, *table, dim_out, c, v.first(grid.dim));
  };
}

// Embeds a grid point into the driver's factor dimension (inactive axes
// pinned at zero, matching the reduced problems).
RVec embed_state(std::span<const double> v, int dim) {
  RVec full(dim, 0.0);
  std::copy(v.begin(), v.end(), full.begin());
  return full;
}

}  // namespace

VecFn make_feedback_pi_star(const DriverSpec& driver,
                            const MarkovianSolutionField& field) {
  return tabulate_feedback(
      field.grid, driver.dim, [&](std::span<const double> v) {
        const RVec vf = embed_state(v, driver.dim);
        return pi_star(driver, vf, field.z_at(vf));
      });
}

VecFn make_feedback_u_star(const DriverSpec& driver,
                           const MarkovianSolutionField& field) {
  return tabulate_feedback(
      field.grid, driver.dim, [&](std::span<const double> v) {
        const RVec vf = embed_state(v, driver.dim);
        return u_star(driver, vf, field.z_at(vf));
      });
}

VecFn make_feedback_alpha_star(const DriverSpec& driver,
                               const MarkovianSolutionField& field, VecFn u) {
  return tabulate_feedback(
      field.grid, driver.dim, [&](std::span<const double> v) {
        const RVec vf = embed_state(v, driver.dim);
        RVec uv(driver.dim);
        u(vf, uv);
        return alpha_star(driver, vf, field.z_at(vf), uv);
      });
}

VecFn make_feedback_beta_star(const DriverSpec& driver,
                              const MarkovianSolutionField& field, VecFn pi) {
  return tabulate_feedback(
      field.grid, driver.dim, [&](std::span<const double> v) {
        const RVec vf = embed_state(v, driver.dim);
        RVec pv(driver.dim);
        pi(vf, pv);
        return beta_star(driver, vf, field.z_at(vf), pv);
      });
}

VecFn constant_feedback(RVec value) {
  return [value = std::move(value)](std::span<const double>,
                                    std::span<double> out) {
    std::copy(value.begin(), value.end(), out.begin());
  };
}

}  // namespace rfp
