#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "pgff/error.hpp"
#include "pgff/plant/closed_loop.hpp"
#include "pgff/plant/two_mass.hpp"
#include "pgff/types.hpp"

namespace pgff::plant {

struct NelderMeadOptions {
  double initial_step = 0.2;
  double f_tol = 1e-15;   // relative spread of simplex values
  double x_tol = 1e-9;    // simplex diameter
  int max_evaluations = 20000;
  int restarts = 4;
};

struct NelderMeadResult {
  Vector x;
  double f = 0.0;
  int evaluations = 0;
};

/// Downhill simplex with standard coefficients (1, 2, 0.5, 0.5). After
/// convergence the simplex is rebuilt around the best point and the search
/// repeats until a restart brings no improvement.
inline NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0,
                                    const NelderMeadOptions& opt = {}) {
  const auto n = x0.size();
  NelderMeadResult best{x0, f(x0), 1};
  if (!std::isfinite(best.f)) throw NumericalError("nelder_mead: objective is not finite at the start point");

  auto eval = [&](const Vector& x) {
    ++best.evaluations;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  for (int round = 0; round <= opt.restarts; ++round) {
    std::vector<Vector> pts{best.x};
    std::vector<double> vals{best.f};
    for (Eigen::Index i = 0; i < n; ++i) {
      Vector p = best.x;
      p(i) += opt.initial_step;
      pts.push_back(p);
      vals.push_back(eval(p));
    }
    std::vector<std::size_t> idx(pts.size());
    while (best.evaluations < opt.max_evaluations) {
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
      const std::size_t lo = idx.front(), hi = idx.back(), second = idx[idx.size() - 2];
      double diameter = 0.0;
      for (const Vector& p : pts) diameter = std::max(diameter, (p - pts[lo]).cwiseAbs().maxCoeff());
      if (vals[hi] - vals[lo] <= opt.f_tol * std::abs(vals[lo]) + 1e-300 || diameter < opt.x_tol) break;

      Vector centroid = Vector::Zero(n);
      for (std::size_t i : idx)
        if (i != hi) centroid += pts[i];
      centroid /= static_cast<double>(n);
      const Vector xr = centroid + (centroid - pts[hi]);
      const double fr = eval(xr);
      if (fr < vals[lo]) {
        const Vector xe = centroid + 2.0 * (centroid - pts[hi]);
        const double fe = eval(xe);
        if (fe < fr) {
          pts[hi] = xe;
          vals[hi] = fe;
        } else {
          pts[hi] = xr;
          vals[hi] = fr;
        }
      } else if (fr < vals[second]) {
        pts[hi] = xr;
        vals[hi] = fr;
      } else {
        const bool outside = fr < vals[hi];
        const Vector xc = outside ? Vector(centroid + 0.5 * (xr - centroid)) : Vector(centroid + 0.5 * (pts[hi] - centroid));
        const double fc = eval(xc);
        if (fc < std::min(fr, vals[hi])) {
          pts[hi] = xc;
          vals[hi] = fc;
        } else {
          for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i == lo) continue;
            pts[i] = pts[lo] + 0.5 * (pts[i] - pts[lo]);
            vals[i] = eval(pts[i]);
          }
        }
      }
    }
    const auto it = std::min_element(vals.begin(), vals.end());
    const bool improved = *it < best.f;
    if (improved) {
      best.f = *it;
      best.x = pts[static_cast<std::size_t>(it - vals.begin())];
    }
    if (!improved || best.evaluations >= opt.max_evaluations) break;
  }
  return best;
}

struct IdentificationResult {
  TwoMsdParams params;
  double initial_cost = 0.0;
  double cost = 0.0;
  int evaluations = 0;
};

/// Mean squared difference between the recorded output and the linear
/// closed-loop model driven by the recorded reference and feedforward.
inline double closed_loop_cost(const TwoMsdParams& p, const DataSet& data, const LoopConfig& loop) {
  const lti::DiscreteStateSpace model = lti::zoh_discretize(build_2msd(p), loop.Ts);
  const Sequence yhat = closed_loop_model_output(model, loop.fb, data.r, data.uff);
  double s = 0.0;
  for (std::size_t k = 0; k < yhat.size(); ++k) s += (data.y[k] - yhat[k]) * (data.y[k] - yhat[k]);
  return s / static_cast<double>(yhat.size());
}

/// Fits the six physical parameters by minimizing closed_loop_cost over
/// their logarithms, starting from theta0.
inline IdentificationResult identify_physical_params(const DataSet& data, const LoopConfig& loop,
                                                     const TwoMsdParams& theta0,
                                                     const NelderMeadOptions& opt = {}) {
  theta0.validate();
  loop.validate();
  require(data.size() > 0, "identify_physical_params: empty data set");
  auto unpack = [](const Vector& z) {
    std::array<double, TwoMsdParams::kCount> v{};
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::exp(z(static_cast<Eigen::Index>(i)));
    return TwoMsdParams::from_values(v);
  };
  Vector z0(static_cast<Eigen::Index>(TwoMsdParams::kCount));
  const auto v0 = theta0.values();
  for (std::size_t i = 0; i < v0.size(); ++i) z0(static_cast<Eigen::Index>(i)) = std::log(v0[i]);

  IdentificationResult res;
  res.initial_cost = closed_loop_cost(theta0, data, loop);
  if (!std::isfinite(res.initial_cost))
    throw NumericalError("identify_physical_params: cost is not finite at the initial parameters");
  const auto cost = [&](const Vector& z) {
    try {
      return closed_loop_cost(unpack(z), data, loop);
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  const NelderMeadResult nm = nelder_mead(cost, z0, opt);
  res.params = unpack(nm.x);
  res.cost = nm.f;
  res.evaluations = nm.evaluations;
  return res;
}

}  // namespace pgff::plant
