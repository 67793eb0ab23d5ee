#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pgff/error.hpp"
#include "pgff/lti/polynomial.hpp"
#include "pgff/lti/state_space.hpp"
#include "pgff/lti/transfer_function.hpp"
#include "pgff/types.hpp"

namespace pgff::inversion {

using lti::DiscreteStateSpace;
using lti::Polynomial;
using lti::RationalTransferFunction;

inline constexpr double kMarkovRelTol = 1e-10;
/// Poles with |p| inside [1 - band, 1 + band] are rejected.
inline constexpr double kUnitCircleBand = 1e-6;

/// Model-inverse realization: x(k+1) = A_ff x + B_ff r(k+eta0),
/// u_ff(k) = C_ff x + D_ff r(k+eta0).
struct FeedforwardRealization {
  Matrix A_ff, B_ff, C_ff, D_ff;
  int eta0 = 1;
  double Ts = 0.0;

  [[nodiscard]] DiscreteStateSpace as_state_space() const { return {A_ff, B_ff, C_ff, D_ff, Ts}; }
};

enum class StableInversionMethod { zpetc, noncausal };

struct StableInverseFF {
  RationalTransferFunction kff;  // proper, all poles strictly stable
  int eta0 = 1;
  int n_ep = 0;
  StableInversionMethod method = StableInversionMethod::zpetc;
  int noncausal_order = 0;
  std::vector<Complex> unstable_poles;
  double tail_bound = 0.0;  // sum of non-causal truncation bounds, 0 for zpetc

  [[nodiscard]] int preview() const { return eta0 + n_ep; }
};

/// Smallest eta0 >= 1 with C A^(eta0-1) B clear of round-off relative to
/// |C| |A^(eta0-1)| |B|.
inline int relative_degree(const DiscreteStateSpace& dss) {
  require(dss.is_siso(), "relative_degree: SISO system expected");
  Matrix ak = Matrix::Identity(dss.states(), dss.states());
  const double cn = dss.C.norm();
  const double bn = dss.B.norm();
  for (Eigen::Index k = 0; k < dss.states(); ++k) {
    const double markov = (dss.C * ak * dss.B)(0, 0);
    if (std::abs(markov) > kMarkovRelTol * cn * ak.norm() * bn) return static_cast<int>(k) + 1;
    ak = dss.A * ak;
  }
  throw NumericalError("relative_degree: no relative degree (all Markov parameters vanish)");
}

inline FeedforwardRealization derive_feedforward(const DiscreteStateSpace& dss) {
  const int eta0 = relative_degree(dss);
  Matrix a_pow = Matrix::Identity(dss.states(), dss.states());
  for (int i = 0; i < eta0 - 1; ++i) a_pow = dss.A * a_pow;
  const Matrix ca_eta_m1 = dss.C * a_pow;  // C A^(eta0-1)
  const Matrix ca_eta = ca_eta_m1 * dss.A;  // C A^eta0
  const double markov = (ca_eta_m1 * dss.B)(0, 0);
  if (markov == 0.0 || !std::isfinite(markov))
    throw NumericalError("derive_feedforward: C A^(eta0-1) B is singular");
  const double inv = 1.0 / markov;
  FeedforwardRealization ff;
  ff.A_ff = dss.A - dss.B * inv * ca_eta;
  ff.B_ff = dss.B * inv;
  ff.C_ff = -inv * ca_eta;
  ff.D_ff = Matrix::Constant(1, 1, inv);
  ff.eta0 = eta0;
  ff.Ts = dss.Ts;
  return ff;
}

struct UnstableFactorization {
  /// exact inverse = stable_part * prod 1/(z - p_i)
  RationalTransferFunction stable_part;
  std::vector<Complex> unstable_poles;
};

inline UnstableFactorization factor_unstable(const FeedforwardRealization& ff) {
  const RationalTransferFunction exact = lti::ss_to_tf(ff.as_state_space());
  std::vector<Complex> stable, unstable;
  if (exact.den.degree() >= 1) {
    for (const Complex& p : lti::polynomial_roots(exact.den)) {
      const double mag = std::abs(p);
      if (std::abs(mag - 1.0) <= kUnitCircleBand)
        throw NumericalError("factor_unstable: pole on the unit circle (|p| = " + std::to_string(mag) + ")");
      (mag > 1.0 ? unstable : stable).push_back(p);
    }
  }
  UnstableFactorization out;
  out.stable_part = RationalTransferFunction(exact.num, Polynomial::from_roots(stable, exact.den.leading()), ff.Ts);
  out.unstable_poles = std::move(unstable);
  return out;
}

struct ApproxFactor {
  RationalTransferFunction fir;
  int extra_preview = 0;
};

/// 1/(z-p) ~ (1 - p z) / ((1-p)^2 z).
inline ApproxFactor zpetc_factor(double p, double Ts) {
  if (p == 1.0) throw NumericalError("zpetc_factor: p = 1 makes (1-p)^2 vanish");
  require(std::abs(p) > 1.0, "zpetc_factor: pole must be unstable (|p| > 1)");
  const double g = 1.0 / ((1.0 - p) * (1.0 - p));
  return {RationalTransferFunction(Polynomial({g, -p * g}), Polynomial::monomial(1), Ts), 1};
}

/// ZPETC applied to a conjugate pair p, conj(p) as one real factor:
/// (1 - 2 Re(p) z + |p|^2 z^2) / (|1-p|^4 z^2).
inline ApproxFactor zpetc_pair_factor(Complex p, double Ts) {
  require(std::abs(p) > 1.0, "zpetc_pair_factor: pole must be unstable (|p| > 1)");
  const double g = 1.0 / std::pow(std::norm(1.0 - p), 2);
  return {RationalTransferFunction(Polynomial({g, -2.0 * p.real() * g, std::norm(p) * g}), Polynomial::monomial(2),
                                   Ts),
          2};
}

struct NoncausalExpansion {
  std::vector<double> coeffs;  // coefficient of z^i, i = 0..order
  int extra_preview = 0;
  double tail_bound = 0.0;  // sup over |z| = 1 of the truncation error
};

/// Truncated series 1/(z-p) = -sum_i p^-(i+1) z^i (valid for |p| > 1 on |z| <= 1).
///
/// The truncated factor has relative degree -order where 1/(z-p) had +1, so
/// the extra preview is order + 1 samples.
inline NoncausalExpansion noncausal_expand(double p, int order) {
  require(std::abs(p) > 1.0, "noncausal_expand: pole must be unstable (|p| > 1)");
  require(order >= 1, "noncausal_expand: order must be >= 1");
  NoncausalExpansion out;
  double pw = 1.0 / p;
  for (int i = 0; i <= order; ++i) {
    out.coeffs.push_back(-pw);
    pw /= p;
  }
  const double inv = 1.0 / std::abs(p);
  out.tail_bound = std::pow(inv, order + 2) / (1.0 - inv);
  out.extra_preview = order + 1;
  return out;
}

/// K_ff with every unstable pole replaced by its stable approximation and the
/// resulting extra preview moved into z^-n_ep, so kff is proper.
inline StableInverseFF assemble_stable_ff(const FeedforwardRealization& ff, StableInversionMethod method,
                                          int noncausal_order = 0) {
  const UnstableFactorization fac = factor_unstable(ff);
  RationalTransferFunction k = fac.stable_part;
  StableInverseFF out;
  out.eta0 = ff.eta0;
  out.method = method;
  out.noncausal_order = method == StableInversionMethod::noncausal ? noncausal_order : 0;
  out.unstable_poles = fac.unstable_poles;

  for (const Complex& p : fac.unstable_poles) {
    if (p.imag() < 0.0) continue;  // handled with its conjugate
    if (method == StableInversionMethod::zpetc) {
      const ApproxFactor f = p.imag() == 0.0 ? zpetc_factor(p.real(), ff.Ts) : zpetc_pair_factor(p, ff.Ts);
      k = k * f.fir;
      out.n_ep += f.extra_preview;
    } else {
      if (p.imag() != 0.0)
        throw ConfigError("assemble_stable_ff: non-causal expansion supports real unstable poles only");
      const NoncausalExpansion e = noncausal_expand(p.real(), noncausal_order);
      k = k * RationalTransferFunction(Polynomial(e.coeffs), Polynomial::constant(1.0), ff.Ts);
      out.n_ep += e.extra_preview;
      out.tail_bound += e.tail_bound;
    }
  }
  k.den = k.den * Polynomial::monomial(out.n_ep);
  if (!k.is_proper()) throw NumericalError("assemble_stable_ff: preview accounting left an improper filter");
  if (k.den.degree() >= 1) {
    for (const Complex& p : lti::polynomial_roots(k.den))
      if (std::abs(p) >= 1.0 - kUnitCircleBand)
        throw NumericalError("assemble_stable_ff: stabilized controller still has a pole outside the unit circle");
  }
  out.kff = k.normalized();
  return out;
}

inline StableInverseFF design_stable_inverse(const DiscreteStateSpace& model, StableInversionMethod method,
                                             int noncausal_order = 0) {
  return assemble_stable_ff(derive_feedforward(model), method, noncausal_order);
}

/// u_phy(k) = K_ff(z) r(k + eta0 + n_ep), one output per reference sample.
/// The reference is held at its final value beyond its end.
inline Sequence linear_ff_input(const StableInverseFF& sff, const Sequence& r) {
  const auto preview = static_cast<std::size_t>(sff.preview());
  if (r.size() <= preview) throw ConfigError("linear_ff_input: reference shorter than the preview");
  Sequence shifted(r.size());
  for (std::size_t k = 0; k < r.size(); ++k) shifted[k] = k + preview < r.size() ? r[k + preview] : r.back();
  return lti::apply_tf_filter(sff.kff, shifted);
}

/// u_hat_phy(k) = K_ff(z) y(k + eta0 + n_ep) for k = 0 .. N - preview - 1.
inline Sequence inverse_prediction(const StableInverseFF& sff, const Sequence& y_filtered) {
  const auto preview = static_cast<std::size_t>(sff.preview());
  if (y_filtered.size() <= preview) throw ConfigError("inverse_prediction: sequence shorter than the preview");
  const Sequence shifted(y_filtered.begin() + static_cast<std::ptrdiff_t>(preview), y_filtered.end());
  return lti::apply_tf_filter(sff.kff, shifted);
}

/// eps(k) = u(k) - u_hat_phy(k) over the prediction's index range.
inline Sequence residuals(const Sequence& u, const Sequence& u_hat_phy) {
  if (u.size() < u_hat_phy.size())
    throw ConfigError("residuals: input record shorter than the inverse prediction");
  Sequence eps(u_hat_phy.size());
  for (std::size_t k = 0; k < eps.size(); ++k) eps[k] = u[k] - u_hat_phy[k];
  return eps;
}

}  // namespace pgff::inversion
