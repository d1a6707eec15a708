#pragma once

#include <span>
#include <string>
#include <vector>

namespace rfp {

using RVec = std::vector<double>;

// Closed convex constraint sets for portfolios (Pi) and scenarios (U).
// Every kind supports an exact Euclidean projection and a membership test.
class ConvexSet {
 public:
  enum class Kind { Unconstrained, Box, Ball, OrderedBox, Singleton, AxisSlab };

  static ConvexSet unconstrained(int dim);
  // Per-coordinate intervals; +-inf entries are allowed.
  static ConvexSet box(RVec lo, RVec hi);
  static ConvexSet interval(double lo, double hi) { return box({lo}, {hi}); }
  static ConvexSet ball(RVec center, double radius);
  // {u in R^2 : -R <= u1 <= u2 <= R}
  static ConvexSet ordered_box(double R);
  static ConvexSet singleton(RVec point);
  // Product of intervals and {0} factors, e.g. R x {0}.  An entry of
  // (-inf, inf) means a free axis, [0, 0] a pinned one.
  static ConvexSet axis_slab(RVec lo, RVec hi);

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }

  void project(std::span<const double> x, std::span<double> out) const;
  RVec project(const RVec& x) const;
  bool contains(std::span<const double> x, double tol = 1e-9) const;
  double distance(std::span<const double> x) const;

  bool is_compact() const;
  // K_u = max_{u in set} |u|; requires a compact set.
  double max_norm() const;
  // argmin / argmax of c^T u over a compact set; ties resolved to the
  // lexicographically smallest point.
  RVec linear_minimizer(std::span<const double> c) const;
  RVec linear_maximizer(std::span<const double> c) const;
  // Enclosing axis box for grid scans; unbounded axes are clipped to
  // [-cap, cap].
  void bounding_box(double cap, RVec& lo, RVec& hi) const;

  std::string describe() const;

 private:
  ConvexSet(Kind k, int dim) : kind_(k), dim_(dim) {}

  Kind kind_;
  int dim_;
  RVec lo_, hi_;      // Box / AxisSlab
  RVec center_;       // Ball
  double radius_ = 0; // Ball / OrderedBox
  RVec point_;        // Singleton
};

}  // namespace rfp
