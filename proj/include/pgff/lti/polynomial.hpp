#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "pgff/error.hpp"
#include "pgff/types.hpp"

namespace pgff::lti {

/// Real polynomial with coefficients in ascending powers: c[0] + c[1] z + ...
///
/// The highest stored coefficient is kept nonzero (trimmed on construction)
/// except for the zero polynomial, which is stored as {0}.
class Polynomial {
 public:
  Polynomial() : coeffs_{0.0} {}
  explicit Polynomial(std::vector<double> ascending) : coeffs_(std::move(ascending)) { trim(); }
  Polynomial(std::initializer_list<double> ascending) : coeffs_(ascending) { trim(); }

  static Polynomial constant(double c) { return Polynomial({c}); }
  static Polynomial monomial(int power, double c = 1.0) {
    std::vector<double> v(static_cast<std::size_t>(power) + 1, 0.0);
    v.back() = c;
    return Polynomial(std::move(v));
  }

  /// Real polynomial lead * prod(z - r_i). Conjugate pairs are multiplied as
  /// real quadratics; the imaginary part of unpaired roots is discarded.
  static Polynomial from_roots(const std::vector<Complex>& roots, double lead = 1.0) {
    Polynomial p = constant(lead);
    std::vector<bool> used(roots.size(), false);
    for (std::size_t i = 0; i < roots.size(); ++i) {
      if (used[i]) continue;
      used[i] = true;
      const Complex r = roots[i];
      if (r.imag() == 0.0) {
        p = p * Polynomial({-r.real(), 1.0});
        continue;
      }
      std::size_t best = roots.size();
      double best_dist = std::numeric_limits<double>::infinity();
      for (std::size_t j = i + 1; j < roots.size(); ++j) {
        if (used[j]) continue;
        const double d = std::abs(roots[j] - std::conj(r));
        if (d < best_dist) {
          best_dist = d;
          best = j;
        }
      }
      if (best < roots.size() && best_dist <= 1e-8 * std::max(1.0, std::abs(r))) {
        used[best] = true;
        p = p * Polynomial({std::norm(r), -2.0 * r.real(), 1.0});
      } else {
        p = p * Polynomial({-r.real(), 1.0});
      }
    }
    return p;
  }

  [[nodiscard]] const std::vector<double>& coeffs() const { return coeffs_; }
  [[nodiscard]] int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
  [[nodiscard]] bool is_zero() const { return coeffs_.size() == 1 && coeffs_[0] == 0.0; }
  [[nodiscard]] double leading() const { return coeffs_.back(); }
  [[nodiscard]] double operator[](int i) const {
    return i >= 0 && i <= degree() ? coeffs_[static_cast<std::size_t>(i)] : 0.0;
  }

  template <typename T>
  [[nodiscard]] T operator()(const T& z) const {
    T acc = T(coeffs_.back());
    for (std::size_t i = coeffs_.size() - 1; i-- > 0;) acc = acc * z + T(coeffs_[i]);
    return acc;
  }

  [[nodiscard]] Polynomial derivative() const {
    if (degree() == 0) return Polynomial();
    std::vector<double> d(coeffs_.size() - 1);
    for (std::size_t i = 1; i < coeffs_.size(); ++i) d[i - 1] = static_cast<double>(i) * coeffs_[i];
    return Polynomial(std::move(d));
  }

  [[nodiscard]] Polynomial scaled(double s) const {
    std::vector<double> c = coeffs_;
    for (double& v : c) v *= s;
    return Polynomial(std::move(c));
  }

  /// Drops highest-degree coefficients whose magnitude is below rel_tol times
  /// the largest coefficient magnitude.
  [[nodiscard]] Polynomial trimmed(double rel_tol) const {
    double mx = 0.0;
    for (double v : coeffs_) mx = std::max(mx, std::abs(v));
    std::vector<double> c = coeffs_;
    while (c.size() > 1 && std::abs(c.back()) <= rel_tol * mx) c.pop_back();
    return Polynomial(std::move(c));
  }

  /// Number of exact zero coefficients at the low end (multiplicity of z = 0).
  [[nodiscard]] int low_order_zeros() const {
    if (is_zero()) return 0;
    int k = 0;
    while (coeffs_[static_cast<std::size_t>(k)] == 0.0) ++k;
    return k;
  }

  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    std::vector<double> c(a.coeffs_.size() + b.coeffs_.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.coeffs_.size(); ++i)
      for (std::size_t j = 0; j < b.coeffs_.size(); ++j) c[i + j] += a.coeffs_[i] * b.coeffs_[j];
    return Polynomial(std::move(c));
  }

  friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
    std::vector<double> c(std::max(a.coeffs_.size(), b.coeffs_.size()), 0.0);
    for (std::size_t i = 0; i < a.coeffs_.size(); ++i) c[i] += a.coeffs_[i];
    for (std::size_t i = 0; i < b.coeffs_.size(); ++i) c[i] += b.coeffs_[i];
    return Polynomial(std::move(c));
  }

  friend Polynomial operator-(const Polynomial& a, const Polynomial& b) { return a + b.scaled(-1.0); }

  friend bool operator==(const Polynomial&, const Polynomial&) = default;

 private:
  void trim() {
    if (coeffs_.empty()) coeffs_.push_back(0.0);
    while (coeffs_.size() > 1 && coeffs_.back() == 0.0) coeffs_.pop_back();
  }

  std::vector<double> coeffs_;
};

/// det(zI - M) together with the Faddeev–LeVerrier matrices M_1..M_n, which
/// satisfy adj(zI - M) = sum_k M_k z^(n-k).
struct CharacteristicExpansion {
  Polynomial poly;
  std::vector<Matrix> adjugate_terms;
};

inline CharacteristicExpansion faddeev_leverrier(const Matrix& m) {
  require(m.rows() == m.cols(), "characteristic polynomial needs a square matrix");
  if (!m.allFinite()) throw NumericalError("characteristic polynomial: non-finite matrix entries");
  const auto n = static_cast<int>(m.rows());
  std::vector<double> c(static_cast<std::size_t>(n) + 1, 0.0);
  c[static_cast<std::size_t>(n)] = 1.0;
  CharacteristicExpansion out;
  const Matrix eye = Matrix::Identity(n, n);
  Matrix mk = Matrix::Zero(n, n);
  for (int k = 1; k <= n; ++k) {
    mk = m * mk + c[static_cast<std::size_t>(n - k + 1)] * eye;
    out.adjugate_terms.push_back(mk);
    c[static_cast<std::size_t>(n - k)] = -(m * mk).trace() / k;
  }
  out.poly = Polynomial(std::move(c));
  return out;
}

inline Polynomial characteristic_polynomial(const Matrix& m) { return faddeev_leverrier(m).poly; }

/// Companion matrix whose characteristic polynomial is p (made monic).
inline Matrix companion_matrix(const Polynomial& p) {
  const int n = p.degree();
  require(n >= 1, "companion matrix needs degree >= 1");
  Matrix c = Matrix::Zero(n, n);
  for (int i = 1; i < n; ++i) c(i, i - 1) = 1.0;
  for (int i = 0; i < n; ++i) c(i, n - 1) = -p[i] / p.leading();
  return c;
}

class RootFindingError : public NumericalError {
 public:
  RootFindingError(const std::string& what, std::vector<Complex> best)
      : NumericalError(what), best_iterate(std::move(best)) {}
  std::vector<Complex> best_iterate;
};

struct RootOptions {
  int max_iterations = 200;
  double residual_tol = 1e-10;
};

namespace detail {

// Residual of the monic polynomial at z relative to the magnitude of its terms.
inline double relative_residual(const std::vector<double>& a, Complex z) {
  Complex acc = a.back();
  double mag = std::abs(a.back());
  const double r = std::abs(z);
  for (std::size_t i = a.size() - 1; i-- > 0;) {
    acc = acc * z + a[i];
    mag = mag * r + std::abs(a[i]);
  }
  return std::abs(acc) / std::max(1.0, mag);
}

}  // namespace detail

/// All complex roots via Aberth–Ehrlich simultaneous iteration.
///
/// Exact zero roots are split off first. Roots with a negligible imaginary
/// part are returned as real. Output is sorted by (real, imag).
inline std::vector<Complex> polynomial_roots(const Polynomial& p, const RootOptions& opt = {}) {
  require(p.degree() >= 1, "polynomial_roots needs degree >= 1");
  for (double c : p.coeffs())
    if (!std::isfinite(c)) throw NumericalError("polynomial_roots: non-finite coefficient");

  const int zeros = p.low_order_zeros();
  std::vector<Complex> roots(static_cast<std::size_t>(zeros), Complex(0.0, 0.0));
  std::vector<double> a(p.coeffs().begin() + zeros, p.coeffs().end());
  const double lead = a.back();
  for (double& v : a) v /= lead;
  const int n = static_cast<int>(a.size()) - 1;

  if (n == 1) {
    roots.emplace_back(-a[0], 0.0);
  } else if (n > 1) {
    // Start on a circle at the geometric-mean root radius, rotated off the
    // real axis and with slightly staggered radii.
    const double radius = std::pow(std::abs(a[0]), 1.0 / n);
    std::vector<Complex> z(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
      const double ang = 2.0 * std::numbers::pi * k / n + 0.4;
      z[static_cast<std::size_t>(k)] = std::polar(radius * (1.0 + 0.01 * k / n), ang);
    }
    bool settled = false;
    for (int it = 0; it < opt.max_iterations && !settled; ++it) {
      settled = true;
      for (int i = 0; i < n; ++i) {
        auto& zi = z[static_cast<std::size_t>(i)];
        Complex pv = a.back();
        Complex dv = 0.0;
        for (std::size_t j = a.size() - 1; j-- > 0;) {
          dv = dv * zi + pv;
          pv = pv * zi + a[j];
        }
        if (pv == Complex(0.0)) continue;
        const Complex w = pv / dv;
        Complex s = 0.0;
        for (int j = 0; j < n; ++j)
          if (j != i) s += 1.0 / (zi - z[static_cast<std::size_t>(j)]);
        const Complex step = w / (1.0 - w * s);
        if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) continue;
        zi -= step;
        if (std::abs(step) > 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(zi)))
          settled = false;
      }
    }
    for (auto& zi : z) {
      if (detail::relative_residual(a, zi) > opt.residual_tol)
        throw RootFindingError("polynomial_roots: no convergence within iteration cap", z);
    }
    for (auto& zi : z) {
      if (std::abs(zi.imag()) <= 1e-10 * std::max(1.0, std::abs(zi))) zi = Complex(zi.real(), 0.0);
      roots.push_back(zi);
    }
  }
  std::sort(roots.begin(), roots.end(), [](Complex x, Complex y) {
    return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
  });
  return roots;
}

}  // namespace pgff::lti
