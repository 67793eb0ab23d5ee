#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "pgff/error.hpp"
#include "pgff/types.hpp"

namespace pgff::plant {

struct ReferenceSpec {
  double distance = 0.0;  // rad
  double vmax = 1.0;      // rad/s
  double amax = 1.0;      // rad/s^2
  double jmax = 1e5;      // rad/s^3
  int dwell = 1000;       // samples at rest between moves

  void validate() const {
    require(std::isfinite(distance) && distance >= 0.0, "ReferenceSpec: distance must be finite and >= 0");
    require(vmax > 0.0 && amax > 0.0 && jmax > 0.0, "ReferenceSpec: velocity, acceleration and jerk bounds must be positive");
    require(std::isfinite(vmax) && std::isfinite(amax) && std::isfinite(jmax), "ReferenceSpec: non-finite bound");
    require(dwell >= 0, "ReferenceSpec: dwell must be >= 0");
  }
};

/// Seven constant-jerk phases of a symmetric rest-to-rest move.
struct JerkProfile {
  std::array<double, 7> durations{};
  std::array<double, 7> jerks{};
  double peak_velocity = 0.0;
  double peak_acceleration = 0.0;

  [[nodiscard]] double total_time() const {
    double t = 0.0;
    for (double d : durations) t += d;
    return t;
  }

  /// Position at time t by exact integration of the piecewise-constant jerk.
  [[nodiscard]] double position(double t) const {
    double p = 0.0, v = 0.0, a = 0.0;
    for (std::size_t i = 0; i < 7; ++i) {
      const double h = std::min(t, durations[i]);
      const double j = jerks[i];
      p += v * h + a * h * h / 2.0 + j * h * h * h / 6.0;
      v += a * h + j * h * h / 2.0;
      a += j * h;
      t -= h;
      if (t <= 0.0) break;
    }
    return p;
  }
};

namespace detail {

struct AccelPhase {
  double jerk_time;
  double const_time;
  double peak_acc;
  [[nodiscard]] double duration() const { return 2.0 * jerk_time + const_time; }
};

// Rest to cruise velocity v with the acceleration limited by amax.
inline AccelPhase accel_phase(double v, double amax, double jmax) {
  if (v * jmax >= amax * amax) return {amax / jmax, v / amax - amax / jmax, amax};
  const double tj = std::sqrt(v / jmax);
  return {tj, 0.0, jmax * tj};
}

inline double accel_distance(double v, double amax, double jmax) { return v * accel_phase(v, amax, jmax).duration() / 2.0; }

}  // namespace detail

/// Jerk-limited move of length spec.distance. When the cruise velocity
/// cannot be reached within half the distance, the peak velocity is lowered
/// by bisection until acceleration and deceleration meet.
inline JerkProfile plan_move(const ReferenceSpec& spec) {
  spec.validate();
  JerkProfile prof;
  if (spec.distance == 0.0) return prof;
  double v = spec.vmax;
  if (2.0 * detail::accel_distance(v, spec.amax, spec.jmax) > spec.distance) {
    double lo = 0.0, hi = spec.vmax;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * spec.vmax; ++it) {
      const double mid = 0.5 * (lo + hi);
      (2.0 * detail::accel_distance(mid, spec.amax, spec.jmax) > spec.distance ? hi : lo) = mid;
    }
    v = lo;
  }
  const detail::AccelPhase ph = detail::accel_phase(v, spec.amax, spec.jmax);
  const double cruise = std::max(0.0, (spec.distance - 2.0 * detail::accel_distance(v, spec.amax, spec.jmax)) / v);
  const double j = spec.jmax;
  prof.durations = {ph.jerk_time, ph.const_time, ph.jerk_time, cruise, ph.jerk_time, ph.const_time, ph.jerk_time};
  prof.jerks = {j, 0.0, -j, 0.0, -j, 0.0, j};
  prof.peak_velocity = v;
  prof.peak_acceleration = ph.peak_acc;
  return prof;
}

/// Sampled rest-to-rest move from 0 to spec.distance. The first sample is 0
/// and the last is exactly spec.distance; a zero distance gives one sample.
inline Sequence third_order_trajectory(const ReferenceSpec& spec, double Ts) {
  require(Ts > 0.0, "third_order_trajectory: Ts must be positive");
  const JerkProfile prof = plan_move(spec);
  const double T = prof.total_time();
  const auto n = static_cast<std::size_t>(std::ceil(T / Ts - 1e-9));
  Sequence r(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) * Ts;
    r[k] = t >= T ? spec.distance : prof.position(t);
  }
  r.back() = spec.distance;
  return r;
}

/// Forward move, dwell at the far end, mirrored return to 0.
inline Sequence back_and_forth(const ReferenceSpec& spec, double Ts) {
  const Sequence fwd = third_order_trajectory(spec, Ts);
  Sequence r = fwd;
  r.insert(r.end(), static_cast<std::size_t>(spec.dwell), spec.distance);
  for (double p : fwd) r.push_back(spec.distance - p);
  r.back() = 0.0;
  return r;
}

inline void append_dwell(Sequence& r, int samples) {
  const double hold = r.empty() ? 0.0 : r.back();
  r.insert(r.end(), static_cast<std::size_t>(samples), hold);
}

}  // namespace pgff::plant
