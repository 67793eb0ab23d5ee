#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "pgff/error.hpp"
#include "pgff/lti/polynomial.hpp"
#include "pgff/lti/state_space.hpp"
#include "pgff/types.hpp"

namespace pgff::lti {

/// num(z)/den(z) with ascending-power coefficients. Ts == 0 tags a
/// continuous-time (Laplace variable s) transfer function.
struct RationalTransferFunction {
  Polynomial num;
  Polynomial den;
  double Ts = 0.0;

  RationalTransferFunction() : num(Polynomial::constant(1.0)), den(Polynomial::constant(1.0)) {}
  RationalTransferFunction(Polynomial n, Polynomial d, double ts) : num(std::move(n)), den(std::move(d)), Ts(ts) {
    if (den.is_zero()) throw NumericalError("transfer function: zero denominator");
    require(Ts >= 0.0, "transfer function: negative Ts");
  }

  static RationalTransferFunction gain(double k, double ts) {
    return {Polynomial::constant(k), Polynomial::constant(1.0), ts};
  }
  /// z^-n as a discrete filter.
  static RationalTransferFunction delay(int n, double ts) {
    return {Polynomial::constant(1.0), Polynomial::monomial(n), ts};
  }

  [[nodiscard]] bool is_continuous() const { return Ts == 0.0; }
  [[nodiscard]] bool is_proper() const { return num.degree() <= den.degree(); }
  [[nodiscard]] int relative_degree() const { return den.degree() - num.degree(); }

  [[nodiscard]] Complex operator()(Complex z) const { return num(z) / den(z); }

  /// Value on the unit circle at normalized angle omega (rad/sample).
  [[nodiscard]] Complex frequency_response(double omega) const {
    require(!is_continuous(), "frequency_response: discrete transfer function expected");
    return (*this)(std::polar(1.0, omega));
  }

  /// Same transfer function with monic denominator.
  [[nodiscard]] RationalTransferFunction normalized() const {
    const double l = den.leading();
    return {num.scaled(1.0 / l), den.scaled(1.0 / l), Ts};
  }

  friend RationalTransferFunction operator*(const RationalTransferFunction& a, const RationalTransferFunction& b) {
    if (a.Ts != b.Ts) throw ConfigError("transfer function product: mismatched sampling times");
    return {a.num * b.num, a.den * b.den, a.Ts};
  }
};

/// Bilinear substitution s <- (2/Ts)(z-1)/(z+1), monic result.
inline RationalTransferFunction tustin_discretize(const RationalTransferFunction& tf_s, double Ts) {
  require(tf_s.is_continuous(), "tustin_discretize: continuous-time transfer function expected");
  require(tf_s.is_proper(), "tustin_discretize: improper transfer function");
  require(Ts > 0.0, "tustin_discretize: Ts must be positive");
  const int d = tf_s.den.degree();
  const double c = 2.0 / Ts;
  const Polynomial zm1({-1.0, 1.0});
  const Polynomial zp1({1.0, 1.0});
  auto map = [&](const Polynomial& p) {
    Polynomial acc;
    for (int i = 0; i <= p.degree(); ++i) {
      Polynomial term = Polynomial::constant(p[i] * std::pow(c, i));
      for (int k = 0; k < i; ++k) term = term * zm1;
      for (int k = i; k < d; ++k) term = term * zp1;
      acc = acc + term;
    }
    return acc;
  };
  const Polynomial den = map(tf_s.den);
  if (den.is_zero() || den.leading() == 0.0 || !std::isfinite(den.leading()))
    throw NumericalError("tustin_discretize: degenerate denominator after substitution");
  return RationalTransferFunction(map(tf_s.num), den, Ts).normalized();
}

/// SISO transfer function C adj(zI-A) B / det(zI-A) + D, using the
/// Faddeev–LeVerrier byproducts for the adjugate.
inline RationalTransferFunction ss_to_tf(const DiscreteStateSpace& dss) {
  if (!dss.is_siso()) throw ConfigError("ss_to_tf: SISO system expected");
  const auto exp = faddeev_leverrier(dss.A);
  const int n = static_cast<int>(dss.states());
  std::vector<double> num(static_cast<std::size_t>(n) + 1, 0.0);
  for (int k = 1; k <= n; ++k) {
    const double v = (dss.C * exp.adjugate_terms[static_cast<std::size_t>(k - 1)] * dss.B)(0, 0);
    num[static_cast<std::size_t>(n - k)] = v;
  }
  Polynomial numerator(std::move(num));
  numerator = numerator + exp.poly.scaled(dss.D(0, 0));
  return {numerator.trimmed(1e-13), exp.poly, dss.Ts};
}

/// Direct-form difference equation with zero initial conditions.
inline Sequence apply_tf_filter(const RationalTransferFunction& tf, const Sequence& u) {
  require(!tf.is_continuous(), "apply_tf_filter: discrete transfer function expected");
  if (!tf.is_proper())
    throw ConfigError(
        "apply_tf_filter: improper transfer function; shift the input by the preview explicitly "
        "and pass the proper part");
  const int n = tf.den.degree();
  // Coefficients on delayed samples: b_lag[j] multiplies u(k-j).
  std::vector<double> b_lag(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> a_lag(static_cast<std::size_t>(n) + 1, 0.0);
  for (int j = 0; j <= n; ++j) {
    b_lag[static_cast<std::size_t>(j)] = tf.num[n - j];
    a_lag[static_cast<std::size_t>(j)] = tf.den[n - j];
  }
  const double a0 = a_lag[0];
  Sequence y(u.size(), 0.0);
  for (std::size_t k = 0; k < u.size(); ++k) {
    double acc = 0.0;
    for (int j = 0; j <= n && static_cast<std::size_t>(j) <= k; ++j) {
      acc += b_lag[static_cast<std::size_t>(j)] * u[k - static_cast<std::size_t>(j)];
      if (j > 0) acc -= a_lag[static_cast<std::size_t>(j)] * y[k - static_cast<std::size_t>(j)];
    }
    y[k] = acc / a0;
  }
  return y;
}

/// Sample-by-sample evaluation of a proper discrete transfer function; keeps
/// its own input/output history so it can sit inside a feedback loop.
class StreamingFilter {
 public:
  explicit StreamingFilter(const RationalTransferFunction& tf) {
    require(!tf.is_continuous() && tf.is_proper(), "StreamingFilter: proper discrete transfer function expected");
    n_ = tf.den.degree();
    b_.resize(static_cast<std::size_t>(n_) + 1);
    a_.resize(static_cast<std::size_t>(n_) + 1);
    for (int j = 0; j <= n_; ++j) {
      b_[static_cast<std::size_t>(j)] = tf.num[n_ - j];
      a_[static_cast<std::size_t>(j)] = tf.den[n_ - j];
    }
    u_hist_.assign(static_cast<std::size_t>(n_) + 1, 0.0);
    y_hist_.assign(static_cast<std::size_t>(n_) + 1, 0.0);
  }

  double step(double u) {
    // history[0] is the newest sample
    for (std::size_t j = u_hist_.size() - 1; j > 0; --j) {
      u_hist_[j] = u_hist_[j - 1];
      y_hist_[j] = y_hist_[j - 1];
    }
    u_hist_[0] = u;
    double acc = 0.0;
    for (std::size_t j = 0; j < b_.size(); ++j) acc += b_[j] * u_hist_[j];
    for (std::size_t j = 1; j < a_.size(); ++j) acc -= a_[j] * y_hist_[j];
    y_hist_[0] = acc / a_[0];
    return y_hist_[0];
  }

 private:
  int n_ = 0;
  std::vector<double> b_, a_, u_hist_, y_hist_;
};

}  // namespace pgff::lti
