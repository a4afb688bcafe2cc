#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sweeper/common.hpp"

namespace sweeper {

enum class ShapeTag { interval, ball, ellipse, quadform };

inline std::string to_string(ShapeTag s) {
  switch (s) {
    case ShapeTag::interval: return "interval";
    case ShapeTag::ball: return "ball";
    case ShapeTag::ellipse: return "ellipse";
    case ShapeTag::quadform: return "quadform";
  }
  return "?";
}

/// Compact constraint set C = { x : psi(x) <= 0 } together with the analytic
/// constants the dynamics and bound checks rely on:
///   eta       gradient floor; boundary points must satisfy |grad psi| > 2 eta
///   Mbar_psi  bound on |grad psi| over C
///   M_psi     half Lipschitz constant of grad psi on C + (rho/2) ball
///   rho       radius of the smooth neighborhood around C
class SublevelSet {
 public:
  SublevelSet(ShapeTag tag, int dim, MatrixXd Q, VectorXd b, double c,
              VectorXd center, VectorXd box_lo, VectorXd box_hi, double eta,
              double Mbar_psi, double M_psi, double rho)
      : tag_(tag), dim_(dim), Q_(std::move(Q)), b_(std::move(b)), c_(c),
        center_(std::move(center)), box_lo_(std::move(box_lo)),
        box_hi_(std::move(box_hi)), eta_(eta), Mbar_psi_(Mbar_psi),
        M_psi_(M_psi), rho_(rho) {
    require(dim_ >= 1, "unsupported-set", "set dimension must be positive");
    require(eta_ > 0.0, "unsupported-set", "eta must be positive");
    require(Mbar_psi_ > 0.0 && M_psi_ > 0.0 && rho_ > 0.0, "unsupported-set",
            "Mbar_psi, M_psi, rho must be positive");
    require(M_psi_ * rho_ >= 4.0 * eta_ * (1.0 - 1e-12), "unsupported-set",
            "constants must satisfy M_psi >= 4 eta / rho");
    require(psi(center_) < 0.0, "unsupported-set",
            "anchor point must lie strictly inside the set");
  }

  /// Interval [center - r, center + r] via psi = (x - c)^2 - r^2.
  static SublevelSet interval(double center, double radius, double eta,
                              double rho) {
    MatrixXd Q = MatrixXd::Identity(1, 1);
    VectorXd b = VectorXd::Constant(1, -2.0 * center);
    double c = center * center - radius * radius;
    VectorXd ctr = VectorXd::Constant(1, center);
    VectorXd lo = VectorXd::Constant(1, center - 2.0 * radius);
    VectorXd hi = VectorXd::Constant(1, center + 2.0 * radius);
    return SublevelSet(ShapeTag::interval, 1, Q, b, c, ctr, lo, hi, eta,
                       2.0 * radius, 1.0, rho);
  }

  /// Ball of radius r via psi = |x - c|^2 - r^2.
  static SublevelSet ball(VectorXd center, double radius, double eta,
                          double rho) {
    int n = static_cast<int>(center.size());
    MatrixXd Q = MatrixXd::Identity(n, n);
    VectorXd b = -2.0 * center;
    double c = center.squaredNorm() - radius * radius;
    VectorXd lo = center.array() - 2.0 * radius;
    VectorXd hi = center.array() + 2.0 * radius;
    return SublevelSet(ShapeTag::ball, n, Q, b, c, std::move(center), lo, hi,
                       eta, 2.0 * radius, 1.0, rho);
  }

  /// Axis-aligned ellipse via psi = sum_i (x_i - c_i)^2 / a_i^2 - 1.
  static SublevelSet ellipse(VectorXd center, VectorXd semiaxes, double eta,
                             double rho) {
    int n = static_cast<int>(center.size());
    require(semiaxes.size() == n && semiaxes.minCoeff() > 0.0,
            "unsupported-set", "semiaxes must be positive and match dim");
    MatrixXd Q = MatrixXd::Zero(n, n);
    VectorXd b(n);
    double c = -1.0;
    double mbar = 0.0, hess_norm = 0.0;
    for (int i = 0; i < n; ++i) {
      double a2 = semiaxes[i] * semiaxes[i];
      Q(i, i) = 1.0 / a2;
      b[i] = -2.0 * center[i] / a2;
      c += center[i] * center[i] / a2;
      mbar = std::max(mbar, 2.0 / semiaxes[i]);
      hess_norm = std::max(hess_norm, 2.0 / a2);
    }
    VectorXd lo = center - 2.0 * semiaxes;
    VectorXd hi = center + 2.0 * semiaxes;
    return SublevelSet(ShapeTag::ellipse, n, Q, b, c, std::move(center), lo,
                       hi, eta, mbar, hess_norm / 2.0, rho);
  }

  /// General quadratic sublevel set psi = x'Qx + b'x + c (Q symmetric PSD on
  /// the region of interest); caller supplies certified constants.
  static SublevelSet quadform(MatrixXd Q, VectorXd b, double c, VectorXd anchor,
                              VectorXd box_lo, VectorXd box_hi, double eta,
                              double Mbar_psi, double M_psi, double rho) {
    int n = static_cast<int>(anchor.size());
    return SublevelSet(ShapeTag::quadform, n, std::move(Q), std::move(b), c,
                       std::move(anchor), std::move(box_lo), std::move(box_hi),
                       eta, Mbar_psi, M_psi, rho);
  }

  int dim() const { return dim_; }
  ShapeTag tag() const { return tag_; }
  double eta() const { return eta_; }
  double Mbar_psi() const { return Mbar_psi_; }
  double M_psi() const { return M_psi_; }
  double rho() const { return rho_; }
  const VectorXd& anchor() const { return center_; }
  const VectorXd& box_lo() const { return box_lo_; }
  const VectorXd& box_hi() const { return box_hi_; }
  const MatrixXd& Q() const { return Q_; }
  const VectorXd& b() const { return b_; }
  double c() const { return c_; }

  double psi(const VectorXd& x) const {
    return x.dot(Q_ * x) + b_.dot(x) + c_;
  }
  VectorXd grad_psi(const VectorXd& x) const { return 2.0 * Q_ * x + b_; }
  MatrixXd hess_psi(const VectorXd&) const { return 2.0 * Q_; }

  bool in_C(const VectorXd& x, double tol) const { return psi(x) <= tol; }

  /// Membership in the exhaustion C(k) = { x in C : psi(x) <= -alpha_k }.
  bool in_Ck(const VectorXd& x, double alpha_k) const {
    return psi(x) <= -alpha_k;
  }

  double prox_radius() const { return eta_ / M_psi_; }

  /// Inward shift c - rho_k * grad psi / |grad psi| used to convert boundary
  /// starts into C(k) starts.
  VectorXd shift_inward(const VectorXd& x, double rho_k) const {
    VectorXd g = grad_psi(x);
    double gn = g.norm();
    require(gn > eta_, "degenerate-gradient",
            "gradient norm " + format_double(gn) +
                " at the shift point is not above eta");
    return x - (rho_k / gn) * g;
  }

 private:
  ShapeTag tag_;
  int dim_;
  MatrixXd Q_;
  VectorXd b_;
  double c_;
  VectorXd center_;
  VectorXd box_lo_, box_hi_;
  double eta_, Mbar_psi_, M_psi_, rho_;
};

struct CertificationReport {
  bool pass = false;
  double min_boundary_grad = 0.0;  // over sampled boundary points
  double epsilon_est = 0.0;        // depth of the small-gradient region
  double Mbar_psi_emp = 0.0;       // max |grad psi| over sampled C
  double M_psi_emp = 0.0;          // half max |hess| spectral norm near C
  int boundary_samples = 0;
  VectorXd witness;                // first failing sample, if any
  std::string message;
};

namespace detail {

/// Root of psi along the segment anchor -> outside by bisection; both ends
/// must bracket the boundary.
inline VectorXd boundary_bisect(const SublevelSet& set, const VectorXd& inside,
                                const VectorXd& outside) {
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    VectorXd z = inside + mid * (outside - inside);
    if (set.psi(z) > 0.0)
      hi = mid;
    else
      lo = mid;
  }
  return inside + (0.5 * (lo + hi)) * (outside - inside);
}

inline double spectral_norm(const MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (A + A.transpose()));
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace detail

/// Samples the bounding box with a Halton sequence, projects rays from the
/// anchor onto the boundary, and checks the declared constants empirically:
/// boundary gradient floor 2*eta, |grad psi| <= Mbar_psi on C, Lipschitz bound
/// for grad psi on C + (rho/2) ball, and a positive depth epsilon for the
/// small-gradient region.
inline CertificationReport certify_constants(const SublevelSet& set,
                                             int sample_budget) {
  CertificationReport rep;
  rep.pass = true;
  rep.min_boundary_grad = std::numeric_limits<double>::infinity();
  rep.epsilon_est = std::numeric_limits<double>::infinity();
  const int n = set.dim();
  const VectorXd anchor = set.anchor();
  const VectorXd span = set.box_hi() - set.box_lo();

  auto flag = [&](const VectorXd& w, const std::string& msg) {
    if (rep.pass) {
      rep.pass = false;
      rep.witness = w;
      rep.message = msg;
    }
  };

  for (int i = 0; i < sample_budget; ++i) {
    VectorXd u = halton_point(i, n);
    VectorXd x = set.box_lo() + span.cwiseProduct(u);
    double px = set.psi(x);
    double gn = set.grad_psi(x).norm();

    bool near_set = px <= 0.0;
    if (px <= 0.0) {
      rep.Mbar_psi_emp = std::max(rep.Mbar_psi_emp, gn);
      if (gn <= set.eta()) rep.epsilon_est = std::min(rep.epsilon_est, -px);
    } else {
      VectorXd z = detail::boundary_bisect(set, anchor, x);
      near_set = (x - z).norm() <= 0.5 * set.rho();
      double bg = set.grad_psi(z).norm();
      rep.min_boundary_grad = std::min(rep.min_boundary_grad, bg);
      ++rep.boundary_samples;
      if (bg <= 2.0 * set.eta())
        flag(z, "boundary gradient norm " + format_double(bg) +
                    " does not exceed 2*eta = " +
                    format_double(2.0 * set.eta()));
    }
    if (near_set) {
      double h = detail::spectral_norm(set.hess_psi(x)) / 2.0;
      rep.M_psi_emp = std::max(rep.M_psi_emp, h);
    }
  }

  if (rep.boundary_samples == 0)
    flag(anchor, "no boundary samples found; enlarge the bounding box");
  if (rep.Mbar_psi_emp > set.Mbar_psi() * (1.0 + 1e-9))
    flag(anchor, "sampled |grad psi| " + format_double(rep.Mbar_psi_emp) +
                     " exceeds declared Mbar_psi");
  if (rep.M_psi_emp > set.M_psi() * (1.0 + 1e-9))
    flag(anchor, "sampled gradient Lipschitz bound " +
                     format_double(rep.M_psi_emp) + " exceeds declared M_psi");
  if (!(rep.epsilon_est > 0.0))
    flag(anchor, "small-gradient region reaches the boundary");
  if (rep.pass) rep.message = "ok";
  return rep;
}

/// alpha(gamma) = ln(eta * gamma / (2 Mbar)) / gamma; the depth of the
/// exhaustion layer C(k).  Requires gamma > 2 Mbar / eta.
inline double alpha_of_gamma(double gamma, double eta, double Mbar) {
  require(eta > 0.0 && Mbar > 0.0, "schedule-domain",
          "eta and Mbar must be positive");
  require(gamma * eta > 2.0 * Mbar, "schedule-domain",
          "gamma = " + format_double(gamma) + " must exceed 2*Mbar/eta = " +
              format_double(2.0 * Mbar / eta));
  return std::log(eta * gamma / (2.0 * Mbar)) / gamma;
}

/// Ascending penalty parameters gamma_k with the induced layer depths
/// alpha_k and inward-shift radii rho_k = alpha_k / eta.  Construction
/// enforces gamma_k > 2 Mbar / eta, alpha_k > 0 nonincreasing, and the
/// identity gamma_k * exp(-alpha_k gamma_k) = 2 Mbar / eta.
struct PenaltySchedule {
  std::vector<double> gammas;
  std::vector<double> alphas;
  std::vector<double> rhos;
  double Mbar = 0.0;
  double eta = 0.0;

  PenaltySchedule(std::vector<double> gammas_in, double Mbar_in, double eta_in)
      : gammas(std::move(gammas_in)), Mbar(Mbar_in), eta(eta_in) {
    require(!gammas.empty(), "schedule-domain", "schedule must be nonempty");
    alphas.reserve(gammas.size());
    rhos.reserve(gammas.size());
    for (size_t k = 0; k < gammas.size(); ++k) {
      if (k > 0)
        require(gammas[k] > gammas[k - 1], "schedule-domain",
                "gammas must be strictly increasing");
      alphas.push_back(alpha_of_gamma(gammas[k], eta, Mbar));
      rhos.push_back(alphas.back() / eta);
      if (k > 0)
        require(alphas[k] <= alphas[k - 1] * (1.0 + 1e-12), "schedule-domain",
                "layer depths must not increase along the schedule");
    }
  }

  static PenaltySchedule geometric(double Mbar, double eta, int count,
                                   double gamma0 = 0.0, double ratio = 2.0) {
    require(count >= 1, "schedule-domain", "count must be positive");
    if (gamma0 <= 0.0) gamma0 = 4.0 * Mbar / eta;
    std::vector<double> gs(static_cast<size_t>(count));
    for (int k = 0; k < count; ++k)
      gs[static_cast<size_t>(k)] = gamma0 * std::pow(ratio, k);
    return PenaltySchedule(std::move(gs), Mbar, eta);
  }

  size_t size() const { return gammas.size(); }

  /// Relative defect of gamma_k exp(-alpha_k gamma_k) = 2 Mbar / eta.
  double identity_residual(size_t k) const {
    double lhs = gammas.at(k) * std::exp(-alphas.at(k) * gammas.at(k));
    double rhs = 2.0 * Mbar / eta;
    return std::abs(lhs - rhs) / rhs;
  }
};

}  // namespace sweeper
