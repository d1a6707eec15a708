#include "rfp/factor_model.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "rfp/rng.hpp"

namespace rfp {

void FactorModelSpec::eval_theta(std::span<const double> v,
                                 std::span<double> out) const {
  if (theta) {
    theta(v, out);
    return;
  }
  const RVec t = market_price_of_risk(*this, v);
  std::copy(t.begin(), t.end(), out.begin());
}

RVec market_price_of_risk(const FactorModelSpec& spec,
                          std::span<const double> v) {
  const int n = spec.dim_stocks, d = spec.dim_factor;
  const Eigen::MatrixXd sig = spec.sigma(v);
  if (sig.rows() != n || sig.cols() != d)
    throw std::invalid_argument("market_price_of_risk: sigma has wrong shape");
  Eigen::VectorXd bv(n);
  {
    RVec buf(n);
    spec.b(v, buf);
    for (int i = 0; i < n; ++i) bv(i) = buf[i];
  }
  const Eigen::MatrixXd gram = sig * sig.transpose();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  const double cond_floor = 1e-12 * std::max(1.0, gram.norm());
  if (ldlt.info() != Eigen::Success ||
      ldlt.vectorD().minCoeff() <= cond_floor) {
    std::ostringstream os;
    os << "market_price_of_risk: sigma(v) sigma(v)^T is rank deficient at v = (";
    for (size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
    os << ")";
    throw std::runtime_error(os.str());
  }
  const Eigen::VectorXd th = sig.transpose() * ldlt.solve(bv);
  return RVec(th.data(), th.data() + d);
}

namespace {

double pair_norm2(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

}  // namespace

AdmissibilityReport validate_assumptions(const FactorModelSpec& spec,
                                         double delta,
                                         const ConvexSet& scenario_set,
                                         int sample_count, uint64_t seed) {
  if (sample_count < 1000)
    throw std::invalid_argument("validate_assumptions: sample_count < 1000");
  if (!(delta > 0 && delta < 1))
    throw std::invalid_argument("validate_assumptions: delta outside (0,1)");

  AdmissibilityReport rep;
  const int d = spec.dim_factor;

  // kappa checks
  double kappa_op = 1.0;
  {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(spec.kappa);
    rep.kappa_trace_norm = svd.singularValues().sum();
    kappa_op = svd.singularValues()(0);
    Eigen::MatrixXd kk = spec.kappa * spec.kappa.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(kk);
    rep.kappa_spd = es.eigenvalues().minCoeff() > 1e-12;
    if (!rep.kappa_spd)
      rep.warnings.push_back(
          "kappa kappa^T is singular; factor noise does not span R^d");
    if (std::abs(rep.kappa_trace_norm - 1.0) > 1e-9)
      rep.warnings.push_back("trace norm of kappa is " +
                             std::to_string(rep.kappa_trace_norm) +
                             ", expected 1");
  }
  const double halfwidth =
      spec.dissipativity > 0
          ? 6.0 * kappa_op / std::sqrt(2.0 * spec.dissipativity)
          : 3.0;

  CounterRng rng(seed, 0);
  RVec v(d), vb(d), ev(d), evb(d), tv(d), tvb(d);
  double c_eta_min = std::numeric_limits<double>::infinity();
  bool dissipative = true;
  double k_theta = 0, c_theta = 0, max_resid = 0;
  bool rank_ok = true;

  for (int s = 0; s < sample_count; ++s) {
    for (int i = 0; i < d; ++i) {
      v[i] = (2.0 * rng.next_uniform() - 1.0) * halfwidth;
      vb[i] = (2.0 * rng.next_uniform() - 1.0) * halfwidth;
    }
    const double dv2 = pair_norm2(v, vb);
    if (dv2 < 1e-16) continue;
    spec.eta(v, ev);
    spec.eta(vb, evb);
    double dot = 0;
    for (int i = 0; i < d; ++i) dot += (ev[i] - evb[i]) * (v[i] - vb[i]);
    const double ratio = -dot / dv2;
    c_eta_min = std::min(c_eta_min, ratio);
    if (ratio <= 0) dissipative = false;

    spec.eval_theta(v, tv);
    spec.eval_theta(vb, tvb);
    double tn = 0;
    for (int i = 0; i < d; ++i) tn += tv[i] * tv[i];
    k_theta = std::max(k_theta, std::sqrt(tn));
    c_theta = std::max(c_theta, std::sqrt(pair_norm2(tv, tvb) / dv2));

    // Spot-check the risk price equation on a thinned subset.
    if (s % 97 == 0) {
      try {
        const RVec th = market_price_of_risk(spec, v);
        const Eigen::MatrixXd sig = spec.sigma(v);
        Eigen::VectorXd bv(spec.dim_stocks);
        RVec buf(spec.dim_stocks);
        spec.b(v, buf);
        for (int i = 0; i < spec.dim_stocks; ++i) bv(i) = buf[i];
        Eigen::VectorXd thv(d);
        for (int i = 0; i < d; ++i) thv(i) = th[i];
        max_resid = std::max(max_resid, (sig * thv - bv).lpNorm<Eigen::Infinity>());
      } catch (const std::runtime_error&) {
        rank_ok = false;
      }
    }
  }

  rep.c_eta_empirical = c_eta_min;
  rep.k_theta_empirical = k_theta;
  rep.c_theta_empirical = c_theta;
  rep.k_u = scenario_set.is_compact() ? scenario_set.max_norm() : 0.0;
  if (!scenario_set.is_compact())
    rep.warnings.push_back("scenario set is not compact; K_u treated as 0");
  rep.max_theta_residual = max_resid;
  rep.sigma_full_rank = rank_ok;
  rep.dissipative_on_all_pairs = dissipative;
  rep.c_eta_required = 3.0 * delta * c_theta / (1.0 - delta) *
                       std::max(k_theta + rep.k_u, 1.0);
  rep.well_posed = c_eta_min >= rep.c_eta_required;
  rep.passed = rep.well_posed && dissipative;
  if (!rank_ok)
    rep.warnings.push_back("sigma(v) lost full row rank at a sampled point");
  if (!dissipative)
    rep.warnings.push_back("dissipativity inequality failed on a sampled pair");
  if (!rep.well_posed)
    rep.warnings.push_back("C_eta below the well-posedness threshold");
  if (k_theta > spec.theta_bound + 1e-9 && spec.theta_bound > 0)
    rep.warnings.push_back("empirical K_theta exceeds the declared bound");
  if (c_theta > spec.theta_lipschitz + 1e-6 && spec.theta_lipschitz > 0)
    rep.warnings.push_back("empirical C_theta exceeds the declared constant");
  return rep;
}

FactorModelSpec make_ou_market(int d, double a, double theta_max) {
  FactorModelSpec m;
  m.dim_factor = d;
  m.dim_stocks = d;
  m.eta = [a, d](std::span<const double> v, std::span<double> out) {
    for (int i = 0; i < d; ++i) out[i] = -a * v[i];
  };
  // Identity scaled to unit trace norm.
  m.kappa = Eigen::MatrixXd::Identity(d, d) / static_cast<double>(d);
  m.sigma = [d](std::span<const double>) {
    return Eigen::MatrixXd::Identity(d, d);
  };
  m.b = [theta_max, d](std::span<const double> v, std::span<double> out) {
    for (int i = 0; i < d; ++i) out[i] = theta_max * std::tanh(v[i]);
  };
  m.theta = m.b;
  m.theta_bound = theta_max;
  m.theta_lipschitz = theta_max;
  m.dissipativity = a;
  return m;
}

FactorModelSpec make_model1_market(double a, double theta_max) {
  return make_ou_market(1, a, theta_max);
}

FactorModelSpec make_model2_market(double a, double theta_max,
                                   double rho_bar) {
  if (!(rho_bar > 0 && rho_bar < 1))
    throw std::invalid_argument("make_model2_market: rho_bar outside (0,1)");
  FactorModelSpec m;
  m.dim_factor = 2;
  m.dim_stocks = 1;
  m.eta = [a](std::span<const double> v, std::span<double> out) {
    out[0] = -a * v[0];
    out[1] = 0.0;  // frozen second factor
  };
  m.kappa = Eigen::MatrixXd::Zero(2, 2);
  m.kappa(0, 0) = rho_bar;
  m.kappa(0, 1) = std::sqrt(1.0 - rho_bar * rho_bar);
  m.sigma = [](std::span<const double>) {
    Eigen::MatrixXd s(1, 2);
    s << 1.0, 0.0;
    return s;
  };
  m.b = [theta_max](std::span<const double> v, std::span<double> out) {
    out[0] = theta_max * std::tanh(v[0]);
  };
  m.theta = [theta_max](std::span<const double> v, std::span<double> out) {
    out[0] = theta_max * std::tanh(v[0]);
    out[1] = 0.0;
  };
  m.theta_bound = theta_max;
  m.theta_lipschitz = theta_max;
  m.dissipativity = a;
  return m;
}

FactorModelSpec make_constant_theta_market(double a, double theta0) {
  FactorModelSpec m = make_ou_market(1, a, 0.0);
  m.b = [theta0](std::span<const double>, std::span<double> out) {
    out[0] = theta0;
  };
  m.theta = m.b;
  m.theta_bound = std::abs(theta0);
  m.theta_lipschitz = 0.0;
  return m;
}

}  // namespace rfp
