#pragma once

#include <array>
#include <span>
#include <stdexcept>
#include <vector>

namespace rfp {

// Uniform tensor grid in one or two dimensions.
struct SpatialGrid {
  int dim = 1;
  std::array<double, 2> lo{0, 0};
  std::array<double, 2> hi{0, 0};
  std::array<int, 2> n{0, 1};

  static SpatialGrid make_1d(double lo, double hi, int n);
  static SpatialGrid make_2d(double lo0, double hi0, int n0, double lo1,
                             double hi1, int n1);
  // Symmetric grid covering +-halfwidth per axis.
  static SpatialGrid centered(int dim, double halfwidth, int n);

  double h(int axis) const { return (hi[axis] - lo[axis]) / (n[axis] - 1); }
  int size() const { return n[0] * n[1]; }
  int index(int i, int j = 0) const { return i + n[0] * j; }
  bool interior(int i, int j = 0) const {
    if (i == 0 || i == n[0] - 1) return false;
    return dim == 1 || (j != 0 && j != n[1] - 1);
  }
  void node(int idx, std::span<double> v) const {
    const int i = idx % n[0], j = idx / n[0];
    v[0] = lo[0] + i * h(0);
    if (dim == 2) v[1] = lo[1] + j * h(1);
  }
  std::vector<double> nodes() const;  // size() x dim, row-major

  // Clamped multilinear interpolation; sets *outside when v had to be
  // clamped onto the grid.
  double interpolate(std::span<const double> field, std::span<const double> v,
                     bool* outside = nullptr) const;
};

}  // namespace rfp
