#include <doctest.h>

#include <cmath>

#include <stdexcept>

#include "rfp/driver.hpp"
#include "rfp/rng.hpp"
#include "rfp/verify.hpp"

using namespace rfp;

namespace {

VecFn const_theta(RVec th) {
  return [th = std::move(th)](std::span<const double>,
                              std::span<double> out) {
    std::copy(th.begin(), th.end(), out.begin());
  };
}

VecFn tanh_theta(double scale) {
  return [scale](std::span<const double> v, std::span<double> out) {
    for (size_t i = 0; i < out.size(); ++i) out[i] = scale * std::tanh(v[i]);
  };
}

// Exhaustive 1-d argmax of F over pi for fixed u.
double grid_argmax_pi(const DriverSpec& spec, const RVec& v, const RVec& z,
                      const RVec& u, double lo, double hi, double res) {
  double best = lo, bestv = -1e300;
  for (double p = lo; p <= hi + res / 2; p += res) {
    const double f = hamiltonian_F(spec, v, z, RVec{p}, u);
    if (f > bestv) {
      bestv = f;
      best = p;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("hamiltonian values") {
  auto power = make_power_driver(0.5, ConvexSet::unconstrained(1),
                                 ConvexSet::interval(-1, 1),
                                 const_theta({0.2}), 1);
  CHECK(hamiltonian_F(power, RVec{0.0}, RVec{0.1}, RVec{0.0}, RVec{0.0}) ==
        doctest::Approx(0.005).epsilon(1e-12));

  auto s7 = make_section7_driver([](double) { return -0.5; });
  CHECK(hamiltonian_F(s7, RVec{0.0}, RVec{0.3}, RVec{0.2}, RVec{1.0}) ==
        doctest::Approx(-0.12).epsilon(1e-12));

  // completing the square at the unconstrained best response
  const RVec v{0.3}, z{0.15}, u{0.4};
  const RVec a = alpha_star(power, v, z, u);
  const double th = 0.2;
  const double want = 0.5 * std::pow(th + z[0] + u[0], 2) / (2 * 0.5) +
                      z[0] * u[0] + 0.5 * z[0] * z[0];
  CHECK(hamiltonian_F(power, v, z, a, u) == doctest::Approx(want));

  CHECK_THROWS_AS(
      (void)hamiltonian_F(power, v, z, RVec{0.0}, RVec{2.0}),  // u outside U
      std::invalid_argument);
}

TEST_CASE("alpha_star projections") {
  auto power = make_power_driver(0.5, ConvexSet::unconstrained(1),
                                 ConvexSet::interval(-1, 1),
                                 const_theta({0.2}), 1);
  CHECK(alpha_star(power, RVec{0.0}, RVec{0.1}, RVec{0.1})[0] == doctest::Approx(0.8));

  auto boxed = make_power_driver(0.5, ConvexSet::interval(0, 1),
                                 ConvexSet::interval(-1, 1),
                                 const_theta({0.6}), 1);
  CHECK(alpha_star(boxed, RVec{0.0}, RVec{0.3}, RVec{0.3})[0] == doctest::Approx(1.0));

  // grid oracle on the constrained response
  CounterRng rng(5, 0);
  for (int t = 0; t < 40; ++t) {
    const RVec v{2.0 * rng.next_uniform() - 1.0};
    const RVec z{0.8 * rng.next_uniform() - 0.4};
    const RVec u{2.0 * rng.next_uniform() - 1.0};
    const double got = alpha_star(boxed, v, z, u)[0];
    const double want = grid_argmax_pi(boxed, v, z, u, 0.0, 1.0, 1e-3);
    CHECK(std::abs(got - want) < 2e-3);
  }
}

TEST_CASE("u_star closed forms and descent") {
  auto m1 = make_model1_driver(0.5, ConvexSet::interval(-1, 1),
                               const_theta({0.3}), 1);
  CHECK(u_star(m1, RVec{0.0}, RVec{0.2})[0] == doctest::Approx(-0.7));

  // interior regime: large scenario ball returns exactly -theta - z/delta
  auto big = make_model1_driver(0.5, ConvexSet::ball({0.0}, 5.0),
                                const_theta({0.3}), 1);
  CHECK(u_star(big, RVec{0.0}, RVec{0.2})[0] == doctest::Approx(-0.7).epsilon(1e-14));

  // compact Pi forces the projected-descent path; adjudicate by grid
  auto boxed = make_power_driver(0.5, ConvexSet::interval(0, 1),
                                 ConvexSet::interval(-1, 1),
                                 tanh_theta(0.5), 1);
  CounterRng rng(6, 0);
  for (int t = 0; t < 25; ++t) {
    const RVec v{2.0 * rng.next_uniform() - 1.0};
    const RVec z{rng.next_uniform() - 0.5};
    const double got = u_star(boxed, v, z)[0];
    double best = 0, bestv = 1e300;
    for (double uu = -1.0; uu <= 1.0 + 5e-4; uu += 1e-3) {
      const RVec a = alpha_star(boxed, v, z, RVec{uu});
      const double f = hamiltonian_F(boxed, v, z, a, RVec{uu});
      if (f < bestv) {
        bestv = f;
        best = uu;
      }
    }
    const RVec ga = alpha_star(boxed, v, z, RVec{got});
    const double gv = hamiltonian_F(boxed, v, z, ga, RVec{got});
    CHECK(gv <= bestv + 2e-3);  // value agreement covers flat minimizers
    CHECK(std::abs(got - best) < 5e-2);
  }
}

TEST_CASE("pi_star") {
  auto s7 = make_section7_driver([](double) { return -0.5; });
  CHECK(pi_star(s7, RVec{0.0}, RVec{0.3})[0] == doctest::Approx(0.2));

  // third branch exits [0,1]: theta < 0 and 1/2 - z <= theta
  bool clipped = false;
  const RVec p = pi_star(s7, RVec{0.0}, RVec{1.2}, &clipped);
  CHECK(clipped);
  CHECK(p[0] == doctest::Approx(0.0));

  auto big = make_model1_driver(0.5, ConvexSet::ball({0.0}, 5.0),
                                tanh_theta(0.5), 1);
  CHECK(pi_star(big, RVec{0.7}, RVec{0.0})[0] == doctest::Approx(0.0).epsilon(1e-13));

  // boxed power: argmax of the max-min against the lattice oracle
  auto boxed = make_power_driver(0.5, ConvexSet::interval(0, 1),
                                 ConvexSet::interval(-1, 1),
                                 tanh_theta(0.5), 1);
  CounterRng rng(7, 0);
  for (int t = 0; t < 10; ++t) {
    const RVec v{2.0 * rng.next_uniform() - 1.0};
    const RVec z{rng.next_uniform() - 0.5};
    const RVec got = pi_star(boxed, v, z);
    double best = 0, bestv = -1e300;
    for (double pp = 0.0; pp <= 1.0 + 5e-4; pp += 2e-3) {
      double inner = 1e300;
      for (double uu = -1.0; uu <= 1.0 + 5e-4; uu += 2e-3)
        inner = std::min(inner,
                         hamiltonian_F(boxed, v, z, RVec{pp}, RVec{uu}));
      if (inner > bestv) {
        bestv = inner;
        best = pp;
      }
    }
    CHECK(std::abs(got[0] - best) < 4e-3);
  }
}

TEST_CASE("beta_star") {
  auto s7 = make_section7_driver([](double) { return -0.5; });
  CHECK(beta_star(s7, RVec{0.0}, RVec{0.3}, RVec{0.2})[0] == doctest::Approx(1.0));
  CHECK(beta_star(s7, RVec{0.0}, RVec{0.3}, RVec{0.9})[0] == doctest::Approx(0.0));

  auto m1 = make_model1_driver(0.5, ConvexSet::interval(-1, 1),
                               const_theta({0.3}), 1);
  const RVec ps = pi_star(m1, RVec{0.0}, RVec{0.2});
  CHECK(beta_star(m1, RVec{0.0}, RVec{0.2}, ps) == u_star(m1, RVec{0.0}, RVec{0.2}));

  // off the optimum the minimizer is the linear one over the box
  auto box2 = make_power_driver(
      0.5, ConvexSet::unconstrained(2),
      ConvexSet::box({-1, -1}, {1, 1}), const_theta({0.1, -0.2}), 2);
  CounterRng rng(8, 0);
  for (int t = 0; t < 20; ++t) {
    const RVec v{0.0, 0.0};
    const RVec z{rng.next_uniform() - 0.5, rng.next_uniform() - 0.5};
    const RVec pi{2 * rng.next_uniform() - 1, 2 * rng.next_uniform() - 1};
    const RVec got = beta_star(box2, v, z, pi);
    for (int i = 0; i < 2; ++i) {
      const double c = 0.5 * pi[i] + z[i];
      if (std::abs(c) > 1e-6) CHECK(got[i] == doctest::Approx(-1.0 * (c > 0 ? 1 : -1)));
    }
    // grid-check the attained value
    double bestv = 1e300;
    for (double u1 = -1; u1 <= 1 + 1e-9; u1 += 0.01)
      for (double u2 = -1; u2 <= 1 + 1e-9; u2 += 0.01)
        bestv = std::min(bestv, hamiltonian_F(box2, v, z, pi, RVec{u1, u2}));
    CHECK(hamiltonian_F(box2, v, z, pi, got) <= bestv + 1e-4);
  }
}

TEST_CASE("driver_G closed forms against the lattice oracle") {
  SUBCASE("model1 point values") {
    auto m1 = make_model1_driver(0.5, ConvexSet::interval(-1, 1),
                                 const_theta({0.3}), 1);
    // dist = 0 branch: G = -|z|^2/(2 delta) - z theta
    CHECK(driver_G(m1, RVec{0.0}, RVec{0.2}) == doctest::Approx(-0.10));
    CHECK(brute_force_G(m1, RVec{0.0}, RVec{0.2}, 1e-3) ==
          doctest::Approx(-0.10).epsilon(1e-4));

    // no-uncertainty closed form: delta|theta+z|^2/(2(1-delta)) + |z|^2/2
    auto nou = make_model1_driver(0.5, ConvexSet::singleton({0.0}),
                                  const_theta({0.4}), 1);
    CHECK(driver_G(nou, RVec{0.0}, RVec{0.2}) == doctest::Approx(0.20));
  }

  SUBCASE("model1 random points vs oracle") {
    auto m1 = make_model1_driver(0.5, ConvexSet::interval(-0.2, 0.2),
                                 tanh_theta(0.5), 1);
    CounterRng rng(9, 0);
    for (int t = 0; t < 30; ++t) {
      const RVec v{4 * rng.next_uniform() - 2};
      const RVec z{rng.next_uniform() - 0.5};
      CHECK(std::abs(driver_G(m1, v, z) - brute_force_G(m1, v, z, 1e-3)) <
            2e-3);
    }
  }

  SUBCASE("model2 closed form vs oracle and generic descent") {
    auto m2 = make_model2_driver(0.5, 0.4, tanh_theta(0.5));
    auto generic = make_power_driver(0.5, m2.pi_set, m2.u_set, m2.theta, 2);
    CounterRng rng(10, 0);
    for (int t = 0; t < 20; ++t) {
      const RVec v{4 * rng.next_uniform() - 2, 0.0};
      const RVec z{rng.next_uniform() - 0.5, rng.next_uniform() - 0.5};
      const double closed = driver_G(m2, v, z);
      CHECK(std::abs(closed - brute_force_G(m2, v, z, 1e-3)) < 2e-3);
      CHECK(std::abs(closed - driver_G(generic, v, z)) < 1e-3);
    }
  }

  SUBCASE("section7 point and oracle") {
    auto s7 = make_section7_driver([](double) { return -0.5; });
    CHECK(driver_G(s7, RVec{0.0}, RVec{0.3}) == doctest::Approx(-0.12));
    CHECK(brute_force_G(s7, RVec{0.0}, RVec{0.3}, 1e-3) ==
          doctest::Approx(-0.12).epsilon(1e-3));
    auto s7v = make_section7_driver(
        [](double v) { return -0.5 + 0.3 * std::tanh(v); });
    CounterRng rng(12, 0);
    for (int t = 0; t < 20; ++t) {
      const RVec v{4 * rng.next_uniform() - 2};
      const RVec z{rng.next_uniform() - 0.5};
      CHECK(std::abs(driver_G(s7v, v, z) - brute_force_G(s7v, v, z, 1e-3)) <
            2e-3);
    }
  }
}

TEST_CASE("log and exponential drivers") {
  // Merton log case: U = {0}, unconstrained portfolio -> theta^2/2
  auto g1 = make_log_driver(ConvexSet::unconstrained(1),
                            ConvexSet::singleton({0.0}), const_theta({0.4}),
                            1);
  CHECK(driver_G(g1, RVec{0.0}, RVec{0.3}) == doctest::Approx(0.08));

  // exponential with U = {0}: complete the square in (gamma pi - z)
  auto g2 = make_exp_driver(1.5, ConvexSet::unconstrained(1),
                            ConvexSet::singleton({0.0}), const_theta({0.4}),
                            1);
  CHECK(driver_G(g2, RVec{0.0}, RVec{0.3}) ==
        doctest::Approx(-0.5 * 0.16 - 0.3 * 0.4));
  CHECK(std::abs(driver_G(g2, RVec{0.0}, RVec{0.3}) -
                 brute_force_G(g2, RVec{0.0}, RVec{0.3}, 1e-3)) < 2e-3);

  // compact sets: numeric outer stage vs oracle, both utilities
  auto g1c = make_log_driver(ConvexSet::interval(-1, 2),
                             ConvexSet::interval(-0.5, 0.5),
                             tanh_theta(0.5), 1);
  auto g2c = make_exp_driver(2.0, ConvexSet::interval(-1, 2),
                             ConvexSet::interval(-0.5, 0.5),
                             tanh_theta(0.5), 1);
  CounterRng rng(13, 0);
  for (int t = 0; t < 15; ++t) {
    const RVec v{4 * rng.next_uniform() - 2};
    const RVec z{rng.next_uniform() - 0.5};
    CHECK(std::abs(driver_G(g1c, v, z) - brute_force_G(g1c, v, z, 1e-3)) <
          2e-3);
    CHECK(std::abs(driver_G(g2c, v, z) - brute_force_G(g2c, v, z, 1e-3)) <
          2e-3);
  }
}

TEST_CASE("saddle structure of the power hamiltonian") {
  auto boxed = make_power_driver(0.5, ConvexSet::interval(0, 1),
                                 ConvexSet::interval(-1, 1),
                                 tanh_theta(0.5), 1);
  CounterRng rng(14, 0);
  for (int t = 0; t < 60; ++t) {
    const RVec v{4 * rng.next_uniform() - 2};
    const RVec z{rng.next_uniform() - 0.5};
    const auto rep = saddle_gap(boxed, v, z, 2e-3);
    CHECK(rep.gap >= -2 * 2e-3);       // weak duality
    CHECK(std::abs(rep.gap) <= 2 * 2e-3);  // saddle exists

    // (pi*, u*) attains the value
    const RVec ps = pi_star(boxed, v, z);
    const RVec us = u_star(boxed, v, z);
    CHECK(std::abs(hamiltonian_F(boxed, v, z, ps, us) - rep.maxmin) < 5e-3);

    // key inequality: u* is worst against pi*
    for (int k = 0; k < 5; ++k) {
      const RVec u{2 * rng.next_uniform() - 1};
      CHECK(hamiltonian_F(boxed, v, z, ps, u) >=
            hamiltonian_F(boxed, v, z, ps, us) - 1e-9);
    }
  }
}

TEST_CASE("section7 hamiltonian is concave in both variables") {
  auto s7 = make_section7_driver(
      [](double v) { return -0.5 + 0.3 * std::tanh(v); });
  const double h = 0.05;
  CounterRng rng(15, 0);
  for (int t = 0; t < 200; ++t) {
    const RVec v{4 * rng.next_uniform() - 2};
    const RVec z{rng.next_uniform() - 0.5};
    const double p = h + (1 - 2 * h) * rng.next_uniform();
    const double u = h + (1 - 2 * h) * rng.next_uniform();
    const auto F = [&](double pp, double uu) {
      return hamiltonian_F(s7, v, z, RVec{pp}, RVec{uu});
    };
    CHECK(F(p + h, u) - 2 * F(p, u) + F(p - h, u) <= 1e-12);
    CHECK(F(p, u + h) - 2 * F(p, u) + F(p, u - h) <= 1e-12);
  }
}

TEST_CASE("driver regularity ratios stay bounded") {
  const double delta = 0.5, theta_max = 0.5, k_u = 0.2;
  auto m1 = make_model1_driver(delta, ConvexSet::interval(-k_u, k_u),
                               tanh_theta(theta_max), 1);
  const double c_v = 3 * delta / (1 - delta) * theta_max *
                     std::max(theta_max + k_u, 1.0);
  const double c_z =
      delta / (1 - delta) * (theta_max + k_u + 1.0) + k_u + 1.0;
  const double g0 = delta * std::pow(theta_max + k_u, 2) / (2 * (1 - delta));

  CounterRng rng(16, 0);
  for (int t = 0; t < 10000; ++t) {
    const RVec v{4 * rng.next_uniform() - 2}, vb{4 * rng.next_uniform() - 2};
    const RVec z{rng.next_uniform() - 0.5}, zb{rng.next_uniform() - 0.5};
    const double dv = std::abs(v[0] - vb[0]), dz = std::abs(z[0] - zb[0]);
    if (dv > 1e-9) {
      const double r = std::abs(driver_G(m1, v, z) - driver_G(m1, vb, z)) /
                       ((1 + std::abs(z[0])) * dv);
      CHECK(r <= c_v * 1.01);
    }
    if (dz > 1e-9) {
      const double r = std::abs(driver_G(m1, v, z) - driver_G(m1, v, zb)) /
                       ((1 + std::abs(z[0]) + std::abs(zb[0])) * dz);
      CHECK(r <= c_z);
    }
    CHECK(std::abs(driver_G(m1, v, RVec{0.0})) <= g0 + 1e-12);
  }
}

TEST_CASE("quadratic realization process") {
  RealizationSpec spec;
  const int n = 201;
  std::vector<double> times(n), u0(n, 0.0), u1(n, 1.0);
  for (int i = 0; i < n; ++i) times[i] = 2.0 * i / (n - 1);

  CHECK(realization_value(spec, times, u0, 1, 0.0, 2.0) == 0.0);
  CHECK(realization_value(spec, times, u1, 1, 0.0, 2.0) ==
        doctest::Approx(1.0).epsilon(1e-12));

  // additivity along the same path, off-grid split point included
  std::vector<double> ur(n);
  CounterRng rng(17, 0);
  for (int i = 0; i < n; ++i) ur[i] = rng.next_uniform();
  for (double mid : {1.0, 0.7137, 1.9}) {
    const double whole = realization_value(spec, times, ur, 1, 0.0, 2.0);
    const double split = realization_value(spec, times, ur, 1, 0.0, mid) +
                         realization_value(spec, times, ur, 1, mid, 2.0);
    CHECK(whole == doctest::Approx(split).epsilon(1e-12));
  }
  CHECK_THROWS_AS(
      (void)realization_value(spec, times, ur, 1, 1.0, 0.5),
      std::invalid_argument);
}
