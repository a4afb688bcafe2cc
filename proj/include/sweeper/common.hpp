#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace sweeper {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Error with a machine-checkable kind tag ("schedule-domain",
/// "projection-failure", ...) in front of the human-readable message.
class error : public std::runtime_error {
 public:
  error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

[[noreturn]] inline void fail(const std::string& kind, const std::string& msg) {
  throw error(kind, msg);
}

inline void require(bool ok, const std::string& kind, const std::string& msg) {
  if (!ok) fail(kind, msg);
}

/// Numeric knobs shared across the toolkit.  Defaults are the documented
/// contract; scenario files and CLI flags may override individual entries.
struct Tolerances {
  double boundary_tol = 1e-9;    // |psi| slack treated as "on the boundary"
  double step_abstol = 1e-10;    // integrator local error target
  int output_nodes = 2001;       // uniform resampling grid
  double oracle_h = 1e-4;        // catching-up step
  double sweep_tol = 0.05;       // L2 error threshold at the largest gamma
  double sweep_floor = 1e-6;     // errors below this count as converged
  double report_tol = 1e-6;      // slack on analytic bound checks
  double quadrature_tol = 1e-6;  // slack on integral bound checks
  double adjoint_tol = 1e-6;     // slack on adjoint identities
  double kkt_tol = 1e-9;         // projected-gradient stopping norm
  double cont_tol = 1e-3;        // continuation stall threshold (W^{1,2})
  int control_nodes = 101;       // decision-grid nodes for controls
  int sim_steps = 2000;          // fixed transcription grid
  double endpoint_tol = 1e-5;    // endpoint violation above this after the
                                 // last penalty weight means the continuation
                                 // stalled (exterior penalty at weight 1e6
                                 // leaves O(|dg|/w) ~ 1e-6 residuals)
  double active_tol = 1e-4;      // active-set detection for normal cones
  double nc_residual_tol = 1e-3; // verdict threshold for stationarity residuals
  double nontriviality_tol = 1e-12;
  double udot_na_threshold = 10.0; // W^{1,2} control roughness cutoff
  int certify_samples = 4096;    // low-discrepancy budget for certification
};

inline double sqr(double v) { return v * v; }

inline std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> t(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    t[static_cast<size_t>(i)] = a + (b - a) * static_cast<double>(i) / (n - 1);
  t.back() = b;
  return t;
}

/// Composite trapezoid of samples y over a (possibly nonuniform) grid t.
inline double trapezoid(const std::vector<double>& t, const std::vector<double>& y) {
  require(t.size() == y.size() && t.size() >= 2, "grid-mismatch",
          "trapezoid needs matching grids with at least two nodes");
  double s = 0.0;
  for (size_t i = 0; i + 1 < t.size(); ++i)
    s += 0.5 * (t[i + 1] - t[i]) * (y[i] + y[i + 1]);
  return s;
}

/// L2 norm over [t0, tN] of a sampled scalar path.
inline double l2_norm(const std::vector<double>& t, const std::vector<double>& y) {
  std::vector<double> sq(y.size());
  for (size_t i = 0; i < y.size(); ++i) sq[i] = y[i] * y[i];
  return std::sqrt(trapezoid(t, sq));
}

inline double total_variation(const std::vector<double>& y) {
  double tv = 0.0;
  for (size_t i = 0; i + 1 < y.size(); ++i) tv += std::abs(y[i + 1] - y[i]);
  return tv;
}

/// Halton low-discrepancy point in [0,1)^dim (index starts at 0).
inline VectorXd halton_point(int index, int dim) {
  static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
  require(dim <= 10, "unsupported-set", "halton sampler limited to 10 dims");
  VectorXd p(dim);
  for (int d = 0; d < dim; ++d) {
    int base = primes[d];
    double f = 1.0, r = 0.0;
    for (int i = index + 1; i > 0; i /= base) {
      f /= base;
      r += f * (i % base);
    }
    p[d] = r;
  }
  return p;
}

/// Shortest-round-trip decimal rendering used by every artifact writer, so
/// repeated runs emit byte-identical files.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size(), "grid-mismatch", "sup_diff needs equal lengths");
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace sweeper
