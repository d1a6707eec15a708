#include <doctest.h>

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "rfp/factor_model.hpp"
#include "rfp/rng.hpp"
#include "rfp/simulate.hpp"

using namespace rfp;

namespace {

VecFn const_map(RVec c) {
  return [c = std::move(c)](std::span<const double>, std::span<double> out) {
    std::copy(c.begin(), c.end(), out.begin());
  };
}

VecFn zero_map(int d) { return const_map(RVec(d, 0.0)); }

FactorModelSpec two_factor_one_stock() {
  FactorModelSpec m;
  m.dim_factor = 2;
  m.dim_stocks = 1;
  m.eta = [](std::span<const double> v, std::span<double> out) {
    out[0] = -v[0];
    out[1] = -v[1];
  };
  m.kappa = Eigen::MatrixXd::Identity(2, 2) / 2.0;
  m.sigma = [](std::span<const double>) {
    Eigen::MatrixXd s(1, 2);
    s << 0.2, 0.0;
    return s;
  };
  m.b = [](std::span<const double>, std::span<double> out) { out[0] = 0.1; };
  m.dissipativity = 1.0;
  return m;
}

struct Moments {
  double mean, mean_se, var, var_se;
};

Moments terminal_moments(const PathEnsemble& ens) {
  const int n = ens.paths;
  double s = 0;
  for (int p = 0; p < n; ++p) s += ens.state(p, ens.steps)[0];
  const double mean = s / n;
  double q = 0, q4 = 0;
  for (int p = 0; p < n; ++p) {
    const double d = ens.state(p, ens.steps)[0] - mean;
    q += d * d;
    q4 += d * d * d * d;
  }
  const double var = q / (n - 1.0);
  const double var_se = std::sqrt((q4 / n - var * var) / n);
  return {mean, std::sqrt(var / n), var, var_se};
}

}  // namespace

TEST_CASE("market price of risk") {
  const auto m = two_factor_one_stock();
  const RVec th = market_price_of_risk(m, RVec{0.3, -0.4});
  CHECK(th[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(th[1] == doctest::Approx(0.0).epsilon(1e-12));

  auto zero_drift = m;
  zero_drift.b = [](std::span<const double>, std::span<double> out) {
    out[0] = 0.0;
  };
  const RVec th0 = market_price_of_risk(zero_drift, RVec{0.0, 0.0});
  CHECK(th0[0] == 0.0);
  CHECK(th0[1] == 0.0);

  // identity volatility: theta = b
  auto idm = make_ou_market(2, 1.0, 0.3);
  idm.theta = nullptr;
  const RVec vv{0.7, -1.1};
  const RVec thb = market_price_of_risk(idm, vv);
  RVec want(2);
  idm.b(vv, want);
  CHECK(thb[0] == doctest::Approx(want[0]).epsilon(1e-12));
  CHECK(thb[1] == doctest::Approx(want[1]).epsilon(1e-12));

  // residual of the risk price equation
  const Eigen::MatrixXd sig = m.sigma(RVec{0, 0});
  Eigen::VectorXd tve(2);
  tve << th[0], th[1];
  CHECK(std::abs((sig * tve)(0) - 0.1) < 1e-12);

  auto bad = m;
  bad.sigma = [](std::span<const double>) {
    Eigen::MatrixXd s(1, 2);
    s << 0.0, 0.0;
    return s;
  };
  CHECK_THROWS_WITH_AS((void)market_price_of_risk(bad, RVec{1.5, 0.0}),
                       doctest::Contains("rank deficient"),
                       std::runtime_error);
}

TEST_CASE("assumption validation measures the model constants") {
  // linear drift: the dissipativity ratio is exactly 1.5
  auto m = make_ou_market(1, 1.5, 0.3);
  auto rep = validate_assumptions(m, 0.5, ConvexSet::interval(-0.3, 0.3),
                                  2000, 7);
  CHECK(rep.c_eta_empirical == doctest::Approx(1.5).epsilon(1e-9));
  CHECK(rep.dissipative_on_all_pairs);
  CHECK(rep.kappa_trace_norm == doctest::Approx(1.0));

  // threshold arithmetic: delta=.5, C_theta~.5, K_theta~.5, K_u=1 -> 2.25
  const auto theta_sin = [](std::span<const double> v, std::span<double> out) {
    out[0] = 0.5 * std::sin(v[0]);
  };
  FactorModelSpec spec;
  spec.dim_factor = spec.dim_stocks = 1;
  spec.kappa = Eigen::MatrixXd::Identity(1, 1);
  spec.sigma = [](std::span<const double>) {
    return Eigen::MatrixXd::Identity(1, 1);
  };
  spec.b = theta_sin;
  spec.theta = theta_sin;
  spec.theta_bound = 0.5;
  spec.theta_lipschitz = 0.5;

  spec.eta = [](std::span<const double> v, std::span<double> out) {
    out[0] = -3.0 * v[0];
  };
  spec.dissipativity = 3.0;
  auto pass = validate_assumptions(spec, 0.5, ConvexSet::interval(-1, 1),
                                   20000, 3);
  CHECK(pass.c_eta_required == doctest::Approx(2.25).epsilon(0.02));
  CHECK(pass.passed);

  spec.eta = [](std::span<const double> v, std::span<double> out) {
    out[0] = -1.0 * v[0];
  };
  spec.dissipativity = 1.0;
  auto fail = validate_assumptions(spec, 0.5, ConvexSet::interval(-1, 1),
                                   20000, 3);
  CHECK(!fail.passed);
  CHECK(!fail.warnings.empty());
}

TEST_CASE("factor simulation hits the stationary moments") {
  const auto m = make_ou_market(1, 1.0, 0.0);
  const auto ens = simulate_factor(m, MeasureShift::base(), 10.0, 0.01,
                                   20000, 99);
  const auto mo = terminal_moments(ens);
  CHECK(std::abs(mo.mean) < 3 * mo.mean_se);
  CHECK(std::abs(mo.var - 0.5) < 3 * mo.var_se + 0.003);

  // scenario drift u = 0.4 shifts the stationary mean to 0.4
  const auto shift = MeasureShift::scenario(const_map({0.4}));
  const auto ens2 = simulate_factor(m, shift, 10.0, 0.01, 20000, 99);
  const auto mo2 = terminal_moments(ens2);
  CHECK(std::abs(mo2.mean - 0.4) < 3 * mo2.mean_se + 0.003);
}

TEST_CASE("wealth simulation") {
  const auto m = make_constant_theta_market(1.0, 0.3);
  auto ens = simulate_factor(m, MeasureShift::base(), 2.0, 0.01, 5000, 5);

  SUBCASE("zero portfolio keeps wealth constant") {
    simulate_wealth(ens, m, zero_map(1), MeasureShift::base(), 1.5);
    for (int p = 0; p < ens.paths; ++p)
      for (int k = 0; k <= ens.steps; ++k)
        CHECK(ens.wealth_at(p, k) == 1.5);
  }

  SUBCASE("geometric Brownian motion drift") {
    const double pval = 0.6, theta = 0.3, T = 2.0;
    simulate_wealth(ens, m, const_map({pval}), MeasureShift::base(), 1.0);
    double s = 0, q = 0;
    for (int p = 0; p < ens.paths; ++p) {
      const double lx = std::log(ens.wealth_at(p, ens.steps));
      s += lx;
      q += lx * lx;
    }
    const double mean = s / ens.paths;
    const double se =
        std::sqrt((q / ens.paths - mean * mean) / ens.paths);
    CHECK(std::abs(mean - (pval * theta - pval * pval / 2) * T) < 3 * se);
    CHECK(ens.pi_cap_binds == 0);
  }

  SUBCASE("positivity and error paths") {
    simulate_wealth(ens, m, const_map({5.0}), MeasureShift::base(), 0.01);
    double lo = 1e300;
    for (int p = 0; p < ens.paths; ++p)
      for (int k = 0; k <= ens.steps; ++k)
        lo = std::min(lo, ens.wealth_at(p, k));
    CHECK(lo > 0.0);
    CHECK_THROWS_AS(
        simulate_wealth(ens, m, zero_map(1), MeasureShift::base(), -1.0),
        std::invalid_argument);
  }
}

TEST_CASE("measure shift is an exact drift shift (bit-for-bit)") {
  const auto m = make_ou_market(1, 2.0, 0.5);
  const double T = 1.0, dt = 0.01;
  const uint64_t seed = 31;
  const auto shift = MeasureShift::scenario(const_map({0.25}));
  const auto ens = simulate_factor(m, shift, T, dt, 64, seed);

  // replay: base dynamics with the drift added to W by hand
  const int steps = ens.steps;
  const double sqrt_dt = std::sqrt(dt);
  for (int p = 0; p < 64; ++p) {
    CounterRng rng(seed, p);
    RVec v(1, 0.0), xi(1), eta(1), dw(1);
    const RVec drift{0.25};
    for (int k = 0; k < steps; ++k) {
      xi[0] = rng.next_normal();
      factor_step(m, v, drift, dt, sqrt_dt, xi, eta, dw);
      CHECK(v[0] == ens.state(p, k + 1)[0]);  // bitwise equality
    }
  }
}

TEST_CASE("determinism and parallel-serial equivalence") {
  const auto m = make_ou_market(2, 1.0, 0.2);
  SimOptions par, ser;
  par.parallel = true;
  ser.parallel = false;
  const auto a = simulate_factor(m, MeasureShift::base(), 1.0, 0.01, 256, 17,
                                 par);
  const auto b = simulate_factor(m, MeasureShift::base(), 1.0, 0.01, 256, 17,
                                 ser);
  CHECK(a.factor == b.factor);
  const auto c = simulate_factor(m, MeasureShift::base(), 1.0, 0.01, 256, 18,
                                 par);
  CHECK(a.factor != c.factor);
}

TEST_CASE("stationarity proxy: T=20 and T=40 moments agree") {
  const auto m = make_ou_market(1, 2.0, 0.5);
  const auto e1 = simulate_factor(m, MeasureShift::base(), 20.0, 0.02, 8000,
                                  123);
  const auto e2 = simulate_factor(m, MeasureShift::base(), 40.0, 0.02, 8000,
                                  321);
  const auto m1 = terminal_moments(e1);
  const auto m2 = terminal_moments(e2);
  CHECK(std::abs(m1.mean - m2.mean) <
        3 * std::sqrt(m1.mean_se * m1.mean_se + m2.mean_se * m2.mean_se));
  CHECK(std::abs(m1.var - m2.var) <
        3 * std::sqrt(m1.var_se * m1.var_se + m2.var_se * m2.var_se));
}

TEST_CASE("csv export shape") {
  const auto m = make_ou_market(1, 1.0, 0.0);
  auto ens = simulate_factor(m, MeasureShift::base(), 0.1, 0.01, 2, 1);
  simulate_wealth(ens, m, zero_map(1), MeasureShift::base(), 1.0);
  std::ostringstream os;
  write_csv(ens, os);
  const std::string text = os.str();
  CHECK(text.substr(0, text.find('\n')) == "path,t,v_1,x");
  size_t lines = 0;
  for (char ch : text)
    if (ch == '\n') ++lines;
  CHECK(lines == 1 + 2 * (ens.steps + 1));
}
