#pragma once

#include <algorithm>
#include <vector>

#include "pgff/error.hpp"
#include "pgff/types.hpp"

namespace pgff::sgfilter {

/// Centered Savitzky–Golay smoother F(z) = sum_i C_i z^i, i = -(m-1)/2 .. (m-1)/2.
struct SavGolFilter {
  int order = 3;
  int window = 141;
  int passes = 1;
  std::vector<double> coeffs;  // coeffs[j] is C_(j - half)

  [[nodiscard]] int half() const { return (window - 1) / 2; }
};

/// Least-squares fit of a degree-`order` polynomial over the window,
/// evaluated at the center. Abscissae are scaled to [-1, 1] for
/// conditioning; the center value does not depend on that scaling.
inline SavGolFilter design_savgol(int order, int window, int passes = 1) {
  require(window >= 1 && window % 2 == 1, "design_savgol: window must be odd and positive");
  require(order >= 0 && order < window, "design_savgol: need 0 <= order < window");
  require(passes >= 1, "design_savgol: passes must be >= 1");
  const int h = (window - 1) / 2;
  Matrix v(window, order + 1);
  for (int i = -h; i <= h; ++i) {
    const double x = h > 0 ? static_cast<double>(i) / h : 0.0;
    double p = 1.0;
    for (int j = 0; j <= order; ++j) {
      v(i + h, j) = p;
      p *= x;
    }
  }
  // Row 0 of pinv(V): C = V (V^T V)^-1 e_0.
  const Eigen::ColPivHouseholderQR<Matrix> qr(v);
  const Matrix pinv = qr.solve(Matrix::Identity(window, window));
  SavGolFilter f;
  f.order = order;
  f.window = window;
  f.passes = passes;
  f.coeffs.resize(static_cast<std::size_t>(window));
  for (int i = 0; i < window; ++i) f.coeffs[static_cast<std::size_t>(i)] = pinv(0, i);
  // exact symmetry C_i = C_-i
  for (int i = 0; i < h; ++i) {
    const double avg = 0.5 * (f.coeffs[static_cast<std::size_t>(i)] + f.coeffs[static_cast<std::size_t>(window - 1 - i)]);
    f.coeffs[static_cast<std::size_t>(i)] = avg;
    f.coeffs[static_cast<std::size_t>(window - 1 - i)] = avg;
  }
  return f;
}

/// Non-causal centered convolution applied `passes` times, replicating the
/// edge samples (m-1)/2 deep on each side per pass. Length is preserved.
inline Sequence apply_centered(const SavGolFilter& f, const Sequence& x) {
  require(static_cast<int>(x.size()) >= f.window, "apply_centered: sequence shorter than the window");
  const int h = f.half();
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  Sequence cur = x;
  Sequence padded(x.size() + 2 * static_cast<std::size_t>(h));
  for (int pass = 0; pass < f.passes; ++pass) {
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(padded.size()); ++i) {
      const std::ptrdiff_t src = std::clamp<std::ptrdiff_t>(i - h, 0, n - 1);
      padded[static_cast<std::size_t>(i)] = cur[static_cast<std::size_t>(src)];
    }
    for (std::ptrdiff_t k = 0; k < n; ++k) {
      double acc = 0.0;
      const double* p = padded.data() + k;
      for (int j = 0; j < f.window; ++j) acc += f.coeffs[static_cast<std::size_t>(j)] * p[j];
      cur[static_cast<std::size_t>(k)] = acc;
    }
  }
  return cur;
}

}  // namespace pgff::sgfilter
