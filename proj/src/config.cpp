#include "rfp/config.hpp"

#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace rfp {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

Config Config::parse_string(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: line " + std::to_string(lineno) +
                               ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error("config: line " + std::to_string(lineno) +
                               ": empty key");
    if (!val.empty() && val.front() == '[') {
      if (val.back() != ']')
        throw std::runtime_error("config: key '" + key +
                                 "': unterminated array");
      std::vector<double> items;
      std::string body = val.substr(1, val.size() - 2);
      std::istringstream bs(body);
      std::string tok;
      while (std::getline(bs, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) continue;
        try {
          items.push_back(std::stod(tok));
        } catch (...) {
          throw std::runtime_error("config: key '" + key +
                                   "': bad array entry '" + tok + "'");
        }
      }
      cfg.lists_[key] = std::move(items);
    } else {
      if (val.size() >= 2 && val.front() == '"' && val.back() == '"')
        val = val.substr(1, val.size() - 2);
      cfg.scalars_[key] = val;
    }
  }
  return cfg;
}

bool Config::has(const std::string& key) const {
  return scalars_.count(key) > 0 || lists_.count(key) > 0;
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto it = scalars_.find(key);
  if (it == scalars_.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (...) {
    throw std::runtime_error("config: key '" + key + "': expected a number, got '" +
                             it->second + "'");
  }
}

long Config::get_int(const std::string& key, long fallback) const {
  const auto it = scalars_.find(key);
  if (it == scalars_.end()) return fallback;
  try {
    return std::stol(it->second);
  } catch (...) {
    throw std::runtime_error("config: key '" + key +
                             "': expected an integer, got '" + it->second +
                             "'");
  }
}

std::string Config::get_string(const std::string& key,
                               const std::string& fallback) const {
  const auto it = scalars_.find(key);
  return it == scalars_.end() ? fallback : it->second;
}

std::vector<double> Config::get_list(const std::string& key,
                                     std::vector<double> fallback) const {
  const auto it = lists_.find(key);
  return it == lists_.end() ? fallback : it->second;
}

ConvexSet parse_set(const std::string& text, int dim) {
  std::istringstream in(text);
  std::string kind;
  in >> kind;
  std::vector<std::string> args;
  std::string tok;
  while (in >> tok) args.push_back(tok);
  const auto num = [&](size_t i) {
    try {
      return std::stod(args.at(i));
    } catch (...) {
      throw std::runtime_error("parse_set: bad numeric argument in '" + text +
                               "'");
    }
  };

  if (kind == "unconstrained") return ConvexSet::unconstrained(dim);
  if (kind == "interval") return ConvexSet::interval(num(0), num(1));
  if (kind == "box") {
    if (args.size() != static_cast<size_t>(2 * dim))
      throw std::runtime_error("parse_set: box needs 2*dim numbers");
    RVec lo(dim), hi(dim);
    for (int i = 0; i < dim; ++i) {
      lo[i] = num(2 * i);
      hi[i] = num(2 * i + 1);
    }
    return ConvexSet::box(lo, hi);
  }
  if (kind == "ball") return ConvexSet::ball(RVec(dim, 0.0), num(0));
  if (kind == "ordered") return ConvexSet::ordered_box(num(0));
  if (kind == "singleton") {
    RVec p(dim);
    for (int i = 0; i < dim; ++i) p[i] = num(i);
    return ConvexSet::singleton(p);
  }
  if (kind == "slab") {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    if (args.size() != static_cast<size_t>(dim))
      throw std::runtime_error("parse_set: slab needs one token per axis");
    RVec lo(dim), hi(dim);
    for (int i = 0; i < dim; ++i) {
      if (args[i] == "free") {
        lo[i] = -kInf;
        hi[i] = kInf;
      } else if (args[i] == "zero") {
        lo[i] = hi[i] = 0.0;
      } else {
        throw std::runtime_error("parse_set: slab token must be free|zero");
      }
    }
    return ConvexSet::axis_slab(lo, hi);
  }
  throw std::runtime_error("parse_set: unknown set kind '" + kind + "'");
}

ExperimentConfig ExperimentConfig::from_config(const Config& cfg) {
  ExperimentConfig e;
  e.apply_config(cfg);
  return e;
}

void ExperimentConfig::apply_config(const Config& cfg) {
  experiment = cfg.get_string("experiment", experiment);
  a = cfg.get_double("factor.a", a);
  theta_max = cfg.get_double("market.theta_max", theta_max);
  theta_const = cfg.get_double("market.theta_const", theta_const);
  delta = cfg.get_double("market.delta", delta);
  gamma = cfg.get_double("market.gamma", gamma);
  k_u = cfg.get_double("sets.k_u", k_u);
  model2_R = cfg.get_double("model2.R", model2_R);
  rho_bar = cfg.get_double("model2.rho_bar", rho_bar);
  pi_set = cfg.get_string("sets.pi", pi_set);
  u_set = cfg.get_string("sets.u", u_set);
  grid_n = static_cast<int>(cfg.get_int("grid.n", grid_n));
  grid_halfwidth = cfg.get_double("grid.halfwidth", grid_halfwidth);
  rho_schedule = cfg.get_list("rho.schedule", rho_schedule);
  dt = cfg.get_double("sim.dt", dt);
  sim_T = cfg.get_double("sim.T", sim_T);
  paths = cfg.get_int("sim.paths", paths);
  horizons = cfg.get_list("horizon.T", horizons);
  x0 = cfg.get_double("sim.x0", x0);
  seed = static_cast<uint64_t>(cfg.get_int("seed", static_cast<long>(seed)));
  out_dir = cfg.get_string("out", out_dir);
  jobs = static_cast<int>(cfg.get_int("jobs", jobs));
}

}  // namespace rfp
