#include "rfp/convex_set.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace rfp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_dim(int want, size_t got, const char* what) {
  if (static_cast<size_t>(want) != got) {
    throw std::invalid_argument(std::string("ConvexSet: ") + what +
                                " has dimension " + std::to_string(got) +
                                ", set has " + std::to_string(want));
  }
}

double norm2(std::span<const double> x) {
  double s = 0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

}  // namespace

ConvexSet ConvexSet::unconstrained(int dim) {
  if (dim < 1) throw std::invalid_argument("ConvexSet: dim must be >= 1");
  return ConvexSet(Kind::Unconstrained, dim);
}

ConvexSet ConvexSet::box(RVec lo, RVec hi) {
  if (lo.empty() || lo.size() != hi.size())
    throw std::invalid_argument("ConvexSet::box: bad bounds");
  for (size_t i = 0; i < lo.size(); ++i) {
    if (!(lo[i] <= hi[i]))
      throw std::invalid_argument("ConvexSet::box: lo > hi at axis " +
                                  std::to_string(i));
  }
  ConvexSet s(Kind::Box, static_cast<int>(lo.size()));
  s.lo_ = std::move(lo);
  s.hi_ = std::move(hi);
  return s;
}

ConvexSet ConvexSet::ball(RVec center, double radius) {
  if (center.empty() || radius < 0)
    throw std::invalid_argument("ConvexSet::ball: bad parameters");
  ConvexSet s(Kind::Ball, static_cast<int>(center.size()));
  s.center_ = std::move(center);
  s.radius_ = radius;
  return s;
}

ConvexSet ConvexSet::ordered_box(double R) {
  if (!(R > 0)) throw std::invalid_argument("ConvexSet::ordered_box: R <= 0");
  ConvexSet s(Kind::OrderedBox, 2);
  s.radius_ = R;
  return s;
}

ConvexSet ConvexSet::singleton(RVec point) {
  if (point.empty())
    throw std::invalid_argument("ConvexSet::singleton: empty point");
  ConvexSet s(Kind::Singleton, static_cast<int>(point.size()));
  s.point_ = std::move(point);
  return s;
}

ConvexSet ConvexSet::axis_slab(RVec lo, RVec hi) {
  ConvexSet s = box(std::move(lo), std::move(hi));
  s.kind_ = Kind::AxisSlab;
  return s;
}

void ConvexSet::project(std::span<const double> x,
                        std::span<double> out) const {
  check_dim(dim_, x.size(), "point");
  check_dim(dim_, out.size(), "output");
  switch (kind_) {
    case Kind::Unconstrained:
      std::copy(x.begin(), x.end(), out.begin());
      return;
    case Kind::Box:
    case Kind::AxisSlab:
      for (int i = 0; i < dim_; ++i)
        out[i] = std::min(std::max(x[i], lo_[i]), hi_[i]);
      return;
    case Kind::Ball: {
      double d = 0;
      for (int i = 0; i < dim_; ++i) {
        const double t = x[i] - center_[i];
        d += t * t;
      }
      d = std::sqrt(d);
      if (d <= radius_ || d == 0.0) {
        std::copy(x.begin(), x.end(), out.begin());
      } else {
        const double s = radius_ / d;
        for (int i = 0; i < dim_; ++i)
          out[i] = center_[i] + s * (x[i] - center_[i]);
      }
      return;
    }
    case Kind::OrderedBox: {
      // Pool onto the monotone cone, then clip.  For a chain with common
      // bounds the composition equals the exact projection.
      double a = x[0], b = x[1];
      if (a > b) a = b = 0.5 * (x[0] + x[1]);
      out[0] = std::min(std::max(a, -radius_), radius_);
      out[1] = std::min(std::max(b, -radius_), radius_);
      return;
    }
    case Kind::Singleton:
      std::copy(point_.begin(), point_.end(), out.begin());
      return;
  }
  throw std::logic_error("ConvexSet: unknown kind");
}

RVec ConvexSet::project(const RVec& x) const {
  RVec out(dim_);
  project(std::span<const double>(x), std::span<double>(out));
  return out;
}

bool ConvexSet::contains(std::span<const double> x, double tol) const {
  check_dim(dim_, x.size(), "point");
  switch (kind_) {
    case Kind::Unconstrained:
      return true;
    case Kind::Box:
    case Kind::AxisSlab:
      for (int i = 0; i < dim_; ++i)
        if (x[i] < lo_[i] - tol || x[i] > hi_[i] + tol) return false;
      return true;
    case Kind::Ball: {
      double d = 0;
      for (int i = 0; i < dim_; ++i) {
        const double t = x[i] - center_[i];
        d += t * t;
      }
      return std::sqrt(d) <= radius_ + tol;
    }
    case Kind::OrderedBox:
      return x[0] >= -radius_ - tol && x[1] <= radius_ + tol &&
             x[0] <= x[1] + tol;
    case Kind::Singleton:
      for (int i = 0; i < dim_; ++i)
        if (std::abs(x[i] - point_[i]) > tol) return false;
      return true;
  }
  return false;
}

double ConvexSet::distance(std::span<const double> x) const {
  RVec p(dim_);
  project(x, std::span<double>(p));
  double s = 0;
  for (int i = 0; i < dim_; ++i) {
    const double t = x[i] - p[i];
    s += t * t;
  }
  return std::sqrt(s);
}

bool ConvexSet::is_compact() const {
  switch (kind_) {
    case Kind::Unconstrained:
      return false;
    case Kind::Box:
    case Kind::AxisSlab:
      for (int i = 0; i < dim_; ++i)
        if (!std::isfinite(lo_[i]) || !std::isfinite(hi_[i])) return false;
      return true;
    default:
      return true;
  }
}

double ConvexSet::max_norm() const {
  if (!is_compact())
    throw std::domain_error("ConvexSet::max_norm: set is not compact");
  switch (kind_) {
    case Kind::Box:
    case Kind::AxisSlab: {
      double s = 0;
      for (int i = 0; i < dim_; ++i)
        s += std::max(lo_[i] * lo_[i], hi_[i] * hi_[i]);
      return std::sqrt(s);
    }
    case Kind::Ball:
      return norm2(center_) + radius_;
    case Kind::OrderedBox:
      return std::sqrt(2.0) * radius_;
    case Kind::Singleton:
      return norm2(point_);
    default:
      break;
  }
  return 0;
}

RVec ConvexSet::linear_minimizer(std::span<const double> c) const {
  check_dim(dim_, c.size(), "coefficient");
  if (!is_compact())
    throw std::domain_error(
        "ConvexSet::linear_minimizer: set is not compact");
  switch (kind_) {
    case Kind::Box:
    case Kind::AxisSlab: {
      RVec u(dim_);
      for (int i = 0; i < dim_; ++i) {
        if (c[i] > 0)
          u[i] = lo_[i];
        else if (c[i] < 0)
          u[i] = hi_[i];
        else
          u[i] = lo_[i];  // tie: smallest coordinate
      }
      return u;
    }
    case Kind::Ball: {
      const double n = norm2(c);
      RVec u(center_);
      if (n > 0) {
        for (int i = 0; i < dim_; ++i) u[i] -= radius_ * c[i] / n;
      } else {
        u[0] -= radius_;  // tie: lexicographically smallest point
      }
      return u;
    }
    case Kind::OrderedBox: {
      const double R = radius_;
      const RVec verts[3] = {{-R, -R}, {-R, R}, {R, R}};
      int best = 0;
      double bestv = kInf;
      for (int k = 0; k < 3; ++k) {
        const double val = c[0] * verts[k][0] + c[1] * verts[k][1];
        if (val < bestv - 1e-15) {
          bestv = val;
          best = k;
        }
      }
      return verts[best];
    }
    case Kind::Singleton:
      return point_;
    default:
      break;
  }
  throw std::logic_error("ConvexSet: unknown kind");
}

RVec ConvexSet::linear_maximizer(std::span<const double> c) const {
  RVec neg(c.begin(), c.end());
  for (double& v : neg) v = -v;
  return linear_minimizer(neg);
}

void ConvexSet::bounding_box(double cap, RVec& lo, RVec& hi) const {
  lo.assign(dim_, -cap);
  hi.assign(dim_, cap);
  switch (kind_) {
    case Kind::Unconstrained:
      return;
    case Kind::Box:
    case Kind::AxisSlab:
      for (int i = 0; i < dim_; ++i) {
        lo[i] = std::max(lo_[i], -cap);
        hi[i] = std::min(hi_[i], cap);
      }
      return;
    case Kind::Ball:
      for (int i = 0; i < dim_; ++i) {
        lo[i] = center_[i] - radius_;
        hi[i] = center_[i] + radius_;
      }
      return;
    case Kind::OrderedBox:
      lo.assign(2, -radius_);
      hi.assign(2, radius_);
      return;
    case Kind::Singleton:
      lo = point_;
      hi = point_;
      return;
  }
}

std::string ConvexSet::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::Unconstrained:
      os << "unconstrained(dim=" << dim_ << ")";
      break;
    case Kind::Box:
    case Kind::AxisSlab:
      os << (kind_ == Kind::Box ? "box" : "slab");
      for (int i = 0; i < dim_; ++i)
        os << (i ? " x " : " ") << "[" << lo_[i] << "," << hi_[i] << "]";
      break;
    case Kind::Ball:
      os << "ball(r=" << radius_ << ")";
      break;
    case Kind::OrderedBox:
      os << "ordered_box(R=" << radius_ << ")";
      break;
    case Kind::Singleton:
      os << "singleton";
      break;
  }
  return os.str();
}

}  // namespace rfp
