#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "pgff/error.hpp"
#include "pgff/types.hpp"

namespace pgff::lti {

struct ContinuousStateSpace {
  Matrix A;  // n_x x n_x, 1/s
  Matrix B;  // n_x x n_u
  Matrix C;  // n_y x n_x

  void validate() const {
    require(A.rows() == A.cols(), "A_c must be square");
    require(B.rows() == A.rows() && C.cols() == A.rows(), "continuous state space: inconsistent dimensions");
    if (!A.allFinite() || !B.allFinite() || !C.allFinite())
      throw NumericalError("continuous state space: non-finite entries");
  }
};

/// x(k+1) = A x(k) + B u(k), y(k) = C x(k) + D u(k).
///
/// D defaults to zero (strictly proper plant); it is nonzero only for
/// realizations such as the feedforward controller.
struct DiscreteStateSpace {
  Matrix A;
  Matrix B;
  Matrix C;
  Matrix D;
  double Ts = 0.0;

  DiscreteStateSpace() = default;
  DiscreteStateSpace(Matrix a, Matrix b, Matrix c, double ts)
      : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(Matrix::Zero(C.rows(), B.cols())), Ts(ts) {
    validate();
  }
  DiscreteStateSpace(Matrix a, Matrix b, Matrix c, Matrix d, double ts)
      : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d)), Ts(ts) {
    validate();
  }

  [[nodiscard]] Eigen::Index states() const { return A.rows(); }
  [[nodiscard]] Eigen::Index inputs() const { return B.cols(); }
  [[nodiscard]] Eigen::Index outputs() const { return C.rows(); }
  [[nodiscard]] bool is_siso() const { return inputs() == 1 && outputs() == 1; }

  void validate() const {
    require(Ts > 0.0, "discrete state space: Ts must be positive");
    require(A.rows() == A.cols(), "A must be square");
    require(B.rows() == A.rows() && C.cols() == A.rows(), "discrete state space: inconsistent dimensions");
    require(D.rows() == C.rows() && D.cols() == B.cols(), "discrete state space: D has wrong shape");
  }
};

namespace detail {

// exp(M) by scaling and squaring with the diagonal [6/6] Pade approximant;
// the scaled 1-norm is kept at or below 0.5, which bounds the truncation
// error near 1e-17.
inline Matrix expm(const Matrix& m) {
  static constexpr double kPade[] = {1.0,
                                     1.0 / 2.0,
                                     5.0 / 44.0,
                                     1.0 / 66.0,
                                     1.0 / 792.0,
                                     1.0 / 15840.0,
                                     1.0 / 665280.0};
  const auto n = m.rows();
  const double norm = m.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Matrix a = m / std::ldexp(1.0, squarings);

  const Matrix eye = Matrix::Identity(n, n);
  Matrix power = eye;
  Matrix even = kPade[0] * eye;
  Matrix odd = Matrix::Zero(n, n);
  for (int k = 1; k <= 6; ++k) {
    power = power * a;
    if (k % 2 == 0)
      even += kPade[k] * power;
    else
      odd += kPade[k] * power;
  }
  Matrix result = (even - odd).partialPivLu().solve(even + odd);
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

}  // namespace detail

inline Matrix matrix_exponential(const Matrix& m) {
  require(m.rows() == m.cols(), "matrix exponential needs a square matrix");
  if (!m.allFinite()) throw NumericalError("matrix exponential: non-finite entries");
  return detail::expm(m);
}

/// Zero-order-hold discretization via the augmented matrix exponential
/// exp([[A_c, B_c], [0, 0]] Ts) = [[A, B], [0, I]].
inline DiscreteStateSpace zoh_discretize(const ContinuousStateSpace& css, double Ts) {
  require(Ts > 0.0, "zoh_discretize: Ts must be positive");
  css.validate();
  const auto nx = css.A.rows();
  const auto nu = css.B.cols();
  Matrix aug = Matrix::Zero(nx + nu, nx + nu);
  aug.topLeftCorner(nx, nx) = css.A * Ts;
  aug.topRightCorner(nx, nu) = css.B * Ts;
  const Matrix e = matrix_exponential(aug);
  return {e.topLeftCorner(nx, nx), e.topRightCorner(nx, nu), css.C, Ts};
}

/// SISO simulation from state x0; y(k) = C x(k) + D u(k).
inline Sequence simulate_lti(const DiscreteStateSpace& dss, const Sequence& u, const Vector& x0) {
  require(dss.is_siso(), "simulate_lti: SISO system expected");
  require(!u.empty(), "simulate_lti: empty input");
  require(x0.size() == dss.states(), "simulate_lti: x0 has wrong size");
  Sequence y(u.size());
  Vector x = x0;
  const Vector b = dss.B.col(0);
  const RowVector c = dss.C.row(0);
  const double d = dss.D(0, 0);
  for (std::size_t k = 0; k < u.size(); ++k) {
    y[k] = c.dot(x) + d * u[k];
    x = dss.A * x + b * u[k];
  }
  return y;
}

inline Sequence simulate_lti(const DiscreteStateSpace& dss, const Sequence& u) {
  return simulate_lti(dss, u, Vector::Zero(dss.states()));
}

}  // namespace pgff::lti
