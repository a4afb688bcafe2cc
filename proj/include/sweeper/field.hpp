#pragma once

#include <utility>

#include "sweeper/common.hpp"

namespace sweeper {

/// Controlled drift f(x, u) = A x + B u + c.  Constant fields set A = B = 0.
struct FieldSpec {
  MatrixXd A;  // n x n
  MatrixXd B;  // n x m
  VectorXd c;  // n

  static FieldSpec constant(VectorXd value, int control_dim) {
    int n = static_cast<int>(value.size());
    FieldSpec f;
    f.A = MatrixXd::Zero(n, n);
    f.B = MatrixXd::Zero(n, control_dim);
    f.c = std::move(value);
    return f;
  }

  static FieldSpec linear(MatrixXd A, MatrixXd B, VectorXd c) {
    FieldSpec f;
    f.A = std::move(A);
    f.B = std::move(B);
    f.c = std::move(c);
    require(f.A.rows() == f.A.cols() && f.A.rows() == f.B.rows() &&
                f.A.rows() == f.c.size(),
            "grid-mismatch", "field matrices have inconsistent shapes");
    return f;
  }

  int state_dim() const { return static_cast<int>(A.rows()); }
  int control_dim() const { return static_cast<int>(B.cols()); }

  VectorXd eval(const VectorXd& x, const VectorXd& u) const {
    return A * x + B * u + c;
  }
};

/// Convex smooth term Phi whose gradient is absorbed into the drift:
/// Phi = 0.5 x'Qx + b'x (zero when Q and b vanish).
struct PhiSpec {
  MatrixXd Q;
  VectorXd b;

  static PhiSpec zero(int n) {
    PhiSpec p;
    p.Q = MatrixXd::Zero(n, n);
    p.b = VectorXd::Zero(n);
    return p;
  }

  /// Phi = (coeff / 2) |x - center|^2.
  static PhiSpec quadratic(double coeff, const VectorXd& center) {
    int n = static_cast<int>(center.size());
    PhiSpec p;
    p.Q = coeff * MatrixXd::Identity(n, n);
    p.b = -coeff * center;
    return p;
  }

  static PhiSpec quadform(MatrixXd Q, VectorXd b) {
    PhiSpec p;
    p.Q = std::move(Q);
    p.b = std::move(b);
    return p;
  }

  bool is_zero() const { return Q.isZero(0.0) && b.isZero(0.0); }
  VectorXd grad(const VectorXd& x) const { return Q * x + b; }
  const MatrixXd& hess() const { return Q; }
};

/// Effective drift of the reformulated dynamics: f_phi = f - grad Phi.
struct Dynamics {
  FieldSpec f;
  PhiSpec phi;
  double Mbar = 0.0;  // declared bound on |f_phi| over C x U

  VectorXd f_phi(const VectorXd& x, const VectorXd& u) const {
    return f.eval(x, u) - phi.grad(x);
  }
  MatrixXd jac_x(const VectorXd&) const { return f.A - phi.Q; }
  const MatrixXd& jac_u(const VectorXd&) const { return f.B; }
};

}  // namespace sweeper
