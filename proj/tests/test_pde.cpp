#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "rfp/factor_model.hpp"
#include "rfp/pde.hpp"

using namespace rfp;

namespace {

// model1 fixture: OU factor, theta = 0.5 tanh(v), U = [-k_u, k_u]
struct M1 {
  FactorModelSpec market;
  DriverSpec driver;
  PdeProblem problem;
  SpatialGrid grid;
  RVec v0{0.0};

  explicit M1(int n = 101, double a = 2.0, double theta_max = 0.5,
              double k_u = 0.2) {
    market = make_model1_market(a, theta_max);
    driver = make_model1_driver(0.5, ConvexSet::interval(-k_u, k_u),
                                market.theta, 1);
    grid = SpatialGrid::centered(1, 6.0 / std::sqrt(2.0 * a), n);
    problem = make_pde_problem(market, driver, grid);
  }
};

PdeProblem constant_driver_problem(double c, int n = 101) {
  M1 fx(n);
  PdeProblem p = fx.problem;
  p.G = [c](std::span<const double>, std::span<const double>) { return c; };
  return p;
}

const std::vector<double> kRho = {0.2, 0.1, 0.05, 0.02, 0.01};

}  // namespace

TEST_CASE("discounted solve: constant driver gives y = c/rho") {
  const auto p = constant_driver_problem(0.7);
  const auto f = solve_discounted(p, 0.05);
  for (double y : f.y) CHECK(y == doctest::Approx(0.7 / 0.05).epsilon(1e-10));
  CHECK(f.residual_norm <= 1e-8);
}

TEST_CASE("discounted solve: large-uncertainty model collapses to zero") {
  M1 fx;
  // U big enough to absorb theta and z/delta entirely
  fx.driver = make_model1_driver(0.5, ConvexSet::ball({0.0}, 5.0),
                                 fx.market.theta, 1);
  fx.problem = make_pde_problem(fx.market, fx.driver, fx.grid);
  const auto f = solve_discounted(fx.problem, 0.05);
  for (double y : f.y) CHECK(std::abs(y) <= 1e-8);
}

TEST_CASE("extract_z") {
  const auto g = SpatialGrid::make_1d(-1.0, 1.0, 101);
  Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
  std::vector<double> y(g.size());
  std::vector<double> v(1);
  for (int k = 0; k < g.size(); ++k) {
    g.node(k, v);
    y[k] = v[0] * v[0];
  }
  const auto z = extract_z(g, y, one);
  for (int k = 0; k < g.size(); ++k) {
    g.node(k, v);
    CHECK(std::abs(z[k] - 2.0 * v[0]) <= 1e-10);
  }

  std::vector<double> c(g.size(), 3.14);
  for (double zz : extract_z(g, c, one)) CHECK(std::abs(zz) <= 1e-12);

  // model2 reduction: z2/z1 = sqrt(1-rb^2)/rb everywhere
  const double rb = 0.8;
  const auto market = make_model2_market(2.0, 0.5, rb);
  const auto driver = make_model2_driver(0.5, 0.4, market.theta);
  const auto grid = SpatialGrid::centered(1, 3.0, 101);
  const auto prob = make_model2_problem(market, driver, grid);
  std::vector<double> y2(grid.size());
  for (int k = 0; k < grid.size(); ++k) {
    grid.node(k, v);
    y2[k] = std::sin(v[0]);
  }
  const auto z2 = extract_z(grid, y2, prob.zmap);
  const double want = std::sqrt(1 - rb * rb) / rb;
  for (int k = 0; k < grid.size(); ++k) {
    if (std::abs(z2[2 * k]) > 1e-9)
      CHECK(z2[2 * k + 1] / z2[2 * k] == doctest::Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("vanishing discount: analytic constant-theta rate") {
  // U = {0}, unconstrained Pi, theta = 0.4: lambda = delta theta^2/(2(1-delta))
  auto market = make_constant_theta_market(2.0, 0.4);
  auto driver = make_model1_driver(0.5, ConvexSet::singleton({0.0}),
                                   market.theta, 1);
  const auto grid = SpatialGrid::centered(1, 3.0, 101);
  const auto problem = make_pde_problem(market, driver, grid);
  const auto f = solve_ergodic_vanishing_discount(problem, kRho, RVec{0.0});
  CHECK(f.lambda == doctest::Approx(0.08).epsilon(1e-6));
  for (double y : f.y) CHECK(std::abs(y) <= 1e-6);
  for (double z : f.z) CHECK(std::abs(z) <= 1e-6);
  CHECK(f.y_at(RVec{0.0}) == 0.0);
  CHECK(f.rho_trace.size() == kRho.size());
}

TEST_CASE("vanishing discount: large-uncertainty degeneracy") {
  M1 fx;
  fx.driver = make_model1_driver(0.5, ConvexSet::ball({0.0}, 5.0),
                                 fx.market.theta, 1);
  fx.problem = make_pde_problem(fx.market, fx.driver, fx.grid);
  const auto f = solve_ergodic_vanishing_discount(fx.problem, kRho, RVec{0.0});
  CHECK(std::abs(f.lambda) <= 1e-6);
  CHECK(f.z_sup_norm <= 1e-6);
}

TEST_CASE("false transient agrees with vanishing discount on model1") {
  M1 fx;
  const auto vd = solve_ergodic_vanishing_discount(fx.problem, kRho, fx.v0);
  const double dt = 0.4 * fx.grid.h(0) * fx.grid.h(0);
  const auto ft = solve_ergodic_false_transient(fx.problem, dt, 1e-9, fx.v0);
  CHECK(std::abs(vd.lambda - ft.lambda) <= 1e-3);
  double ymax = 0;
  for (int k = 0; k < fx.grid.size(); ++k)
    ymax = std::max(ymax, std::abs(vd.y[k] - ft.y[k]));
  CHECK(ymax <= 1e-2);

  // plug-back residual on interior nodes
  const double h = fx.grid.h(0);
  CHECK(vd.residual_norm <= 10 * h * h);
  CHECK(ft.residual_norm <= 10 * h * h);
}

TEST_CASE("false transient: constant driver and CFL guard") {
  const auto p = constant_driver_problem(0.3);
  const double h = p.grid.h(0);
  const auto f = solve_ergodic_false_transient(p, 0.5 * h * h, 1e-10,
                                               RVec{0.0});
  CHECK(f.lambda == doctest::Approx(0.3).epsilon(1e-9));
  for (double y : f.y) CHECK(std::abs(y) <= 1e-7);

  CHECK_THROWS_WITH_AS(
      (void)solve_ergodic_false_transient(p, 1.0, 1e-9, RVec{0.0}),
      doctest::Contains("stability"), std::runtime_error);
}

TEST_CASE("shift equivariance: G + c moves lambda by c and keeps y") {
  M1 fx;
  const auto base = solve_ergodic_vanishing_discount(fx.problem, kRho, fx.v0);
  const auto shifted = solve_ergodic_vanishing_discount(
      with_constant_shift(fx.problem, 0.3), kRho, fx.v0);
  CHECK(shifted.lambda - base.lambda == doctest::Approx(0.3).epsilon(1e-9));
  for (int k = 0; k < fx.grid.size(); ++k)
    CHECK(std::abs(shifted.y[k] - base.y[k]) <= 1e-7);
}

TEST_CASE("grid refinement: lambda converges at second order") {
  // the false transient reaches the exact steady state of each discrete
  // operator, so the differences isolate the spatial error
  double lam[3];
  int idx = 0;
  for (int n : {101, 201, 401}) {
    M1 fx(n);
    const double dt = 0.4 * fx.grid.h(0) * fx.grid.h(0);
    lam[idx++] =
        solve_ergodic_false_transient(fx.problem, dt, 1e-10, fx.v0).lambda;
  }
  const double d1 = std::abs(lam[1] - lam[0]);
  const double d2 = std::abs(lam[2] - lam[1]);
  if (d1 > 1e-9) CHECK(d2 <= 0.5 * d1);
  CHECK(d2 <= 4.0 * d1 + 1e-12);
}

TEST_CASE("z-gradient consistency at doubled spacing") {
  M1 fx(201);
  const auto f = solve_ergodic_vanishing_discount(fx.problem, kRho, fx.v0);
  const double h = fx.grid.h(0);
  double worst = 0;
  for (int k = 2; k < fx.grid.size() - 2; ++k) {
    const double wide = (f.y[k + 2] - f.y[k - 2]) / (4.0 * h);
    worst = std::max(worst, std::abs(wide - f.z[k]));
  }
  CHECK(worst <= 10.0 * h * h);
}

TEST_CASE("forward process values") {
  M1 fx;
  auto field = solve_ergodic_vanishing_discount(fx.problem, kRho, fx.v0);

  SUBCASE("power normalization point") {
    CHECK(forward_process_value(UtilityClass::power(0.5), 1.0, 0.0, RVec{0.0},
                                field) == doctest::Approx(2.0));
    CHECK_THROWS_AS((void)forward_process_value(UtilityClass::power(0.5),
                                                -1.0, 0.0, RVec{0.0}, field),
                    std::invalid_argument);
  }
  SUBCASE("log form") {
    const double got = forward_process_value(UtilityClass::log_utility(), 1.0,
                                             0.0, RVec{0.5}, field);
    CHECK(got == doctest::Approx(field.y_at(RVec{0.5})).epsilon(1e-12));
  }
  SUBCASE("outside-grid warning flag") {
    bool outside = false;
    (void)forward_process_value(UtilityClass::power(0.5), 1.0, 0.0,
                                RVec{99.0}, field, &outside);
    CHECK(outside);
  }
  SUBCASE("large-uncertainty model: U(x,t) = x^delta/delta for all t") {
    M1 big;
    big.driver = make_model1_driver(0.5, ConvexSet::ball({0.0}, 5.0),
                                    big.market.theta, 1);
    big.problem = make_pde_problem(big.market, big.driver, big.grid);
    auto zf = solve_ergodic_vanishing_discount(big.problem, kRho, big.v0);
    for (double t : {0.0, 1.0, 7.5})
      CHECK(forward_process_value(UtilityClass::power(0.5), 2.0, t, RVec{0.3},
                                  zf) ==
            doctest::Approx(std::pow(2.0, 0.5) / 0.5).epsilon(1e-6));
  }
}

TEST_CASE("model2 reduced solve runs both methods consistently") {
  const auto market = make_model2_market(2.0, 0.5, 0.8);
  const auto driver = make_model2_driver(0.5, 0.4, market.theta);
  const auto grid = SpatialGrid::centered(1, 3.0, 101);
  const auto problem = make_model2_problem(market, driver, grid);
  const auto vd = solve_ergodic_vanishing_discount(problem, kRho, RVec{0.0});
  const double dt = 0.4 * grid.h(0) * grid.h(0);
  const auto ft = solve_ergodic_false_transient(problem, dt, 1e-9, RVec{0.0});
  CHECK(std::abs(vd.lambda - ft.lambda) <= 1e-3);
  CHECK(vd.zdim == 2);
  const double h = grid.h(0);
  CHECK(vd.residual_norm <= 10 * h * h);
}

TEST_CASE("two-dimensional solve with the full operator") {
  auto market = make_ou_market(2, 2.0, 0.4);
  auto driver = make_model1_driver(
      0.5, ConvexSet::box({-0.15, -0.15}, {0.15, 0.15}), market.theta, 2);
  const auto grid = SpatialGrid::centered(2, 1.5, 61);
  const auto problem = make_pde_problem(market, driver, grid);
  const auto vd = solve_ergodic_vanishing_discount(problem, kRho, RVec{0, 0});
  const double h = grid.h(0);
  // kappa = I/2 -> diffusion I/4; explicit bound ~ h^2 / sum(D)
  const auto ft = solve_ergodic_false_transient(problem, 0.4 * h * h, 1e-8,
                                                RVec{0, 0});
  CHECK(std::abs(vd.lambda - ft.lambda) <= 1e-3);
  CHECK(std::isfinite(vd.residual_norm));
  CHECK(vd.residual_norm <= 10 * h * h);
}
