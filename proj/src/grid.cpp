#include "rfp/grid.hpp"

#include <algorithm>
#include <cmath>

namespace rfp {

SpatialGrid SpatialGrid::make_1d(double lo, double hi, int n) {
  if (n < 3 || !(hi > lo))
    throw std::invalid_argument("SpatialGrid: need n >= 3 and hi > lo");
  SpatialGrid g;
  g.dim = 1;
  g.lo = {lo, 0};
  g.hi = {hi, 0};
  g.n = {n, 1};
  return g;
}

SpatialGrid SpatialGrid::make_2d(double lo0, double hi0, int n0, double lo1,
                                 double hi1, int n1) {
  if (n0 < 3 || n1 < 3 || !(hi0 > lo0) || !(hi1 > lo1))
    throw std::invalid_argument("SpatialGrid: bad 2-d bounds");
  SpatialGrid g;
  g.dim = 2;
  g.lo = {lo0, lo1};
  g.hi = {hi0, hi1};
  g.n = {n0, n1};
  return g;
}

SpatialGrid SpatialGrid::centered(int dim, double halfwidth, int n) {
  if (dim == 1) return make_1d(-halfwidth, halfwidth, n);
  return make_2d(-halfwidth, halfwidth, n, -halfwidth, halfwidth, n);
}

std::vector<double> SpatialGrid::nodes() const {
  std::vector<double> out(static_cast<size_t>(size()) * dim);
  std::vector<double> v(dim);
  for (int k = 0; k < size(); ++k) {
    node(k, v);
    for (int a = 0; a < dim; ++a) out[static_cast<size_t>(k) * dim + a] = v[a];
  }
  return out;
}

double SpatialGrid::interpolate(std::span<const double> field,
                                std::span<const double> v,
                                bool* outside) const {
  if (outside) *outside = false;
  const auto locate = [&](int axis, double x, int& i, double& w) {
    const double t = (x - lo[axis]) / h(axis);
    if (t < 0 || t > n[axis] - 1) {
      if (outside) *outside = true;
    }
    const double tc = std::clamp(t, 0.0, static_cast<double>(n[axis] - 1));
    i = std::min(static_cast<int>(std::floor(tc)), n[axis] - 2);
    w = tc - i;
  };
  int i;
  double wi;
  locate(0, v[0], i, wi);
  if (dim == 1)
    return (1 - wi) * field[i] + wi * field[i + 1];
  int j;
  double wj;
  locate(1, v[1], j, wj);
  const double f00 = field[index(i, j)], f10 = field[index(i + 1, j)];
  const double f01 = field[index(i, j + 1)], f11 = field[index(i + 1, j + 1)];
  return (1 - wi) * (1 - wj) * f00 + wi * (1 - wj) * f10 +
         (1 - wi) * wj * f01 + wi * wj * f11;
}

}  // namespace rfp
