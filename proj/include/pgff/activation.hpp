#pragma once

#include <Eigen/Core>

namespace pgff {

/// Elementwise logistic 1 / (1 + e^-v) on the vectorized exp path.
template <typename Derived>
auto logistic_exp(const Eigen::ArrayBase<Derived>& v) {
  return (1.0 + (-v).exp()).inverse();
}

/// Elementwise tanh written through exp, which Eigen vectorizes for double
/// while its tanh falls back to scalar calls. Saturates cleanly to +-1.
template <typename Derived>
auto tanh_exp(const Eigen::ArrayBase<Derived>& v) {
  return 1.0 - 2.0 / ((2.0 * v).exp() + 1.0);
}

}  // namespace pgff
