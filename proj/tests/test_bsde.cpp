#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "rfp/bsde.hpp"
#include "rfp/factor_model.hpp"

using namespace rfp;

namespace {

struct M1 {
  FactorModelSpec market;
  DriverSpec driver;
  PdeProblem problem;
  SpatialGrid grid;
  RVec v0{0.0};

  explicit M1(int n = 101, double k_u = 0.2) {
    market = make_model1_market(2.0, 0.5);
    driver = make_model1_driver(0.5, ConvexSet::interval(-k_u, k_u),
                                market.theta, 1);
    grid = SpatialGrid::centered(1, 3.0, n);
    problem = make_pde_problem(market, driver, grid);
  }
};

PdeProblem constant_driver(const M1& fx, double c) {
  PdeProblem p = fx.problem;
  p.G = [c](std::span<const double>, std::span<const double>) { return c; };
  return p;
}

const std::vector<double> kRho = {0.2, 0.1, 0.05, 0.02, 0.01};

}  // namespace

TEST_CASE("finite horizon: zero and constant drivers") {
  M1 fx;
  const auto z = solve_finite_horizon(constant_driver(fx, 0.0), 2.0, 0.01);
  CHECK(z.terminal_max_abs == 0.0);
  for (double f : z.f0) CHECK(f == 0.0);

  const auto c = solve_finite_horizon(constant_driver(fx, 0.4), 2.0, 0.01);
  for (double f : c.f0) CHECK(f == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("finite horizon: cauchy property of f(v0,0) - lambda T") {
  M1 fx;
  const auto erg = solve_ergodic_vanishing_discount(fx.problem, kRho, fx.v0);
  const double dt = 4e-3;
  const auto f8 = solve_finite_horizon(fx.problem, 8.0, dt);
  const auto f10 = solve_finite_horizon(fx.problem, 10.0, dt);
  const double l8 = f8.value0(fx.v0) - erg.lambda * 8.0;
  const double l10 = f10.value0(fx.v0) - erg.lambda * 10.0;
  CHECK(std::abs(l10 - l8) <= 1e-2);
}

TEST_CASE("lower value function") {
  M1 fx;
  const auto utility = UtilityClass::power(0.5);

  // T -> 0+: w_T -> x^delta/delta
  const auto tiny = solve_finite_horizon(fx.problem, 0.01, 1e-4);
  CHECK(lower_value(utility, 1.0, fx.v0, tiny) ==
        doctest::Approx(2.0).epsilon(1e-3));

  // G == c: w_T = (x^delta/delta) e^{cT}
  const auto c = solve_finite_horizon(constant_driver(fx, 0.3), 2.0, 0.01);
  CHECK(lower_value(utility, 2.0, fx.v0, c) ==
        doctest::Approx(std::pow(2.0, 0.5) / 0.5 * std::exp(0.6))
            .epsilon(1e-10));

  CHECK_THROWS_AS((void)lower_value(utility, -2.0, fx.v0, c),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      (void)lower_value(UtilityClass::log_utility(), 1.0, fx.v0, c),
      std::invalid_argument);
}

TEST_CASE("monotone in the horizon when G >= 0") {
  // U = {0} makes the driver a nonnegative quadratic form
  M1 fx;
  fx.driver = make_model1_driver(0.5, ConvexSet::singleton({0.0}),
                                 fx.market.theta, 1);
  fx.problem = make_pde_problem(fx.market, fx.driver, fx.grid);
  double prev = 0.0;
  for (double T : {1.0, 2.0, 4.0}) {
    const auto f = solve_finite_horizon(fx.problem, T, 0.01);
    const double w = f.value0(fx.v0);
    CHECK(w >= prev - 1e-12);
    prev = w;
  }
}

TEST_CASE("semigroup property with an intermediate slice") {
  M1 fx;
  const double dt = 0.01;
  FiniteHorizonOptions opt;
  opt.record_steps = {100};  // slice at t = 1 of a [0,2] solve
  const auto whole = solve_finite_horizon(fx.problem, 2.0, dt, opt);
  const auto& mid = whole.slices.at(100);

  FiniteHorizonOptions opt2;
  opt2.terminal = &mid;
  const auto glued = solve_finite_horizon(fx.problem, 1.0, dt, opt2);
  const double h = fx.grid.h(0);
  double worst = 0;
  for (int k = 0; k < fx.grid.size(); ++k)
    worst = std::max(worst, std::abs(glued.f0[k] - whole.f0[k]));
  CHECK(worst <= 10 * h * h + 10 * dt);
  CHECK(worst <= 1e-12);  // identical march, step for step
}

TEST_CASE("ergodic limit: identically zero cases") {
  M1 fx;
  const auto ergc = solve_ergodic_vanishing_discount(constant_driver(fx, 0.4),
                                                     kRho, fx.v0);
  const auto repc = ergodic_limit(constant_driver(fx, 0.4), ergc,
                                  std::vector<double>{1.0, 2.0, 3.0}, 0.01);
  for (double l : repc.L_hat) CHECK(std::abs(l) <= 1e-9);
  for (double s : repc.state_spread) CHECK(s <= 1e-9);

  // constant theta, no uncertainty: f = lambda (T - t), y = 0
  auto market = make_constant_theta_market(2.0, 0.4);
  auto driver = make_model1_driver(0.5, ConvexSet::singleton({0.0}),
                                   market.theta, 1);
  auto problem = make_pde_problem(market, driver, fx.grid);
  const auto erg = solve_ergodic_vanishing_discount(problem, kRho, fx.v0);
  const auto rep = ergodic_limit(problem, erg,
                                 std::vector<double>{1.0, 2.0}, 0.01);
  for (double l : rep.L_hat) CHECK(std::abs(l) <= 1e-6);
}

TEST_CASE("ergodic limit converges on the model1 fixture") {
  M1 fx;
  const auto erg = solve_ergodic_vanishing_discount(fx.problem, kRho, fx.v0);
  const auto rep = ergodic_limit(fx.problem, erg,
                                 std::vector<double>{4.0, 6.0, 8.0}, 4e-3);
  REQUIRE(rep.consecutive_diff.size() == 2);
  CHECK(rep.consecutive_diff[1] <= rep.consecutive_diff[0] + 1e-6);
  CHECK(rep.consecutive_diff[1] <= 1e-2);
  CHECK(rep.state_spread.back() <= 1e-2);
}

TEST_CASE("discounted family diagnostics") {
  M1 fx;
  const auto erg = solve_ergodic_vanishing_discount(fx.problem, kRho, fx.v0);
  const auto ens = simulate_factor(fx.market, MeasureShift::base(), 2.0,
                                   0.01, 64, 2024);

  SUBCASE("constant driver: ratio identically one") {
    const auto ergc = solve_ergodic_vanishing_discount(
        constant_driver(fx, 0.4), kRho, fx.v0);
    const auto rep = discounted_forward_diagnostics(
        constant_driver(fx, 0.4), fx.driver, kRho, ens, ergc);
    for (double e : rep.max_ratio_error) CHECK(e <= 1e-9);
  }

  SUBCASE("large uncertainty: every field vanishes") {
    M1 big;
    big.driver = make_model1_driver(0.5, ConvexSet::ball({0.0}, 5.0),
                                    big.market.theta, 1);
    big.problem = make_pde_problem(big.market, big.driver, big.grid);
    const auto erg0 =
        solve_ergodic_vanishing_discount(big.problem, kRho, big.v0);
    const auto rep = discounted_forward_diagnostics(big.problem, big.driver,
                                                    kRho, ens, erg0);
    for (double e : rep.max_ratio_error) CHECK(e <= 1e-8);
    for (double g : rep.strategy_gap) CHECK(g <= 1e-12);
  }

  SUBCASE("model1: both diagnostics shrink along the schedule") {
    const auto rep =
        discounted_forward_diagnostics(fx.problem, fx.driver, kRho, ens, erg);
    REQUIRE(rep.rhos.size() == kRho.size());
    CHECK(rep.max_ratio_error.back() < rep.max_ratio_error.front());
    CHECK(rep.strategy_gap.back() < rep.strategy_gap.front());
  }
}

TEST_CASE("bad inputs") {
  M1 fx;
  CHECK_THROWS_AS((void)solve_finite_horizon(fx.problem, -1.0, 0.01),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)solve_finite_horizon(fx.problem, 1.0, 0.3),
                  std::invalid_argument);
}
