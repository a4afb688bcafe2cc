#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "sweeper/common.hpp"

namespace sweeper {

/// Piecewise-linear control on a uniform grid over [0,1].  Values are stored
/// column-wise (one column per node); derivatives are cell-wise constant.
class ControlPath {
 public:
  ControlPath(int dim, int nodes) : values_(MatrixXd::Zero(dim, nodes)) {
    require(dim >= 1 && nodes >= 2, "grid-mismatch",
            "control path needs dim >= 1 and at least two nodes");
  }

  static ControlPath constant(const VectorXd& value, int nodes) {
    ControlPath u(static_cast<int>(value.size()), nodes);
    u.values_.colwise() = value;
    return u;
  }

  /// u(t) = start + t * slope.
  static ControlPath ramp(const VectorXd& start, const VectorXd& slope,
                          int nodes) {
    ControlPath u(static_cast<int>(start.size()), nodes);
    for (int j = 0; j < nodes; ++j) {
      double t = static_cast<double>(j) / (nodes - 1);
      u.values_.col(j) = start + t * slope;
    }
    return u;
  }

  int dim() const { return static_cast<int>(values_.rows()); }
  int nodes() const { return static_cast<int>(values_.cols()); }
  int cells() const { return nodes() - 1; }
  double dt() const { return 1.0 / cells(); }
  MatrixXd& values() { return values_; }
  const MatrixXd& values() const { return values_; }

  double node_time(int j) const { return static_cast<double>(j) / cells(); }

  VectorXd value(double t) const {
    double s = std::clamp(t, 0.0, 1.0) * cells();
    int j = std::min(static_cast<int>(s), cells() - 1);
    double w = s - j;
    return (1.0 - w) * values_.col(j) + w * values_.col(j + 1);
  }

  /// Cell-wise derivative on cell j (constant over the cell).
  VectorXd cell_derivative(int j) const {
    return (values_.col(j + 1) - values_.col(j)) / dt();
  }

  VectorXd derivative(double t) const {
    double s = std::clamp(t, 0.0, 1.0) * cells();
    int j = std::min(static_cast<int>(s), cells() - 1);
    return cell_derivative(j);
  }

  /// W^{1,2} seminorm |du/dt|_{L2}; exact for the piecewise-linear path.
  double w12_seminorm() const {
    double s = 0.0;
    for (int j = 0; j < cells(); ++j) s += dt() * cell_derivative(j).squaredNorm();
    return std::sqrt(s);
  }

  /// L2 distance of derivatives against another path on the same grid.
  double w12_distance(const ControlPath& other) const {
    require(other.nodes() == nodes() && other.dim() == dim(), "grid-mismatch",
            "control paths must share the node grid");
    double s = (values_.col(0) - other.values_.col(0)).squaredNorm();
    for (int j = 0; j < cells(); ++j)
      s += dt() * (cell_derivative(j) - other.cell_derivative(j)).squaredNorm();
    return std::sqrt(s);
  }

  ControlPath resampled(int nodes) const {
    ControlPath out(dim(), nodes);
    for (int j = 0; j < nodes; ++j)
      out.values_.col(j) = value(static_cast<double>(j) / (nodes - 1));
    return out;
  }

 private:
  MatrixXd values_;
};

enum class ControlSetKind { point, box, ball };

/// Admissible control values U (constant in time): a single point, a box
/// [lo, hi], or a ball around a center.
struct ControlSet {
  ControlSetKind kind = ControlSetKind::point;
  VectorXd lo, hi;      // box
  VectorXd center;      // ball / point
  double radius = 0.0;  // ball

  static ControlSet point(VectorXd v) {
    ControlSet s;
    s.kind = ControlSetKind::point;
    s.center = std::move(v);
    return s;
  }
  static ControlSet box(VectorXd lo, VectorXd hi) {
    require(lo.size() == hi.size() && (hi - lo).minCoeff() >= 0.0,
            "unsupported-set", "box bounds must satisfy lo <= hi");
    ControlSet s;
    s.kind = ControlSetKind::box;
    s.lo = std::move(lo);
    s.hi = std::move(hi);
    return s;
  }
  static ControlSet ball(VectorXd center, double radius) {
    require(radius >= 0.0, "unsupported-set", "ball radius must be >= 0");
    ControlSet s;
    s.kind = ControlSetKind::ball;
    s.center = std::move(center);
    s.radius = radius;
    return s;
  }

  int dim() const {
    return static_cast<int>(kind == ControlSetKind::box ? lo.size()
                                                        : center.size());
  }

  ControlSet translated(const VectorXd& v) const {
    ControlSet s = *this;
    switch (kind) {
      case ControlSetKind::point: s.center += v; break;
      case ControlSetKind::box: s.lo += v; s.hi += v; break;
      case ControlSetKind::ball: s.center += v; break;
    }
    return s;
  }

  bool contains(const VectorXd& v, double tol) const {
    switch (kind) {
      case ControlSetKind::point: return (v - center).norm() <= tol;
      case ControlSetKind::box:
        return (v - lo).minCoeff() >= -tol && (hi - v).minCoeff() >= -tol;
      case ControlSetKind::ball: return (v - center).norm() <= radius + tol;
    }
    return false;
  }

  VectorXd project(const VectorXd& v) const {
    switch (kind) {
      case ControlSetKind::point: return center;
      case ControlSetKind::box: return v.cwiseMax(lo).cwiseMin(hi);
      case ControlSetKind::ball: {
        VectorXd d = v - center;
        double n = d.norm();
        if (n <= radius) return v;
        return center + (radius / n) * d;
      }
    }
    return v;
  }

  /// argmax over U of <w, v>; closed form for all three kinds.
  VectorXd support_point(const VectorXd& w) const {
    switch (kind) {
      case ControlSetKind::point: return center;
      case ControlSetKind::box: {
        VectorXd v(lo.size());
        for (int i = 0; i < lo.size(); ++i) v[i] = w[i] >= 0.0 ? hi[i] : lo[i];
        return v;
      }
      case ControlSetKind::ball: {
        double n = w.norm();
        if (n == 0.0) return center;
        return center + (radius / n) * w;
      }
    }
    return center;
  }
};

}  // namespace sweeper
