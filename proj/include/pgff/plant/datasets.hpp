#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "pgff/plant/closed_loop.hpp"
#include "pgff/plant/trajectory.hpp"
#include "pgff/sgfilter.hpp"

namespace pgff::plant {

/// Shape of the generated motion programs.
struct ReferenceOptions {
  double jmax = 1e5;         // rad/s^3
  double dwell_s = 0.5;      // rest between moves
  double train_amax = 1000;  // rad/s^2
  std::vector<double> train_distances{6 * std::numbers::pi, 8 * std::numbers::pi, 10 * std::numbers::pi,
                                      12 * std::numbers::pi};
  std::vector<double> train_velocities{30, 55, 120};

  [[nodiscard]] int dwell_samples(double Ts) const { return static_cast<int>(std::lround(dwell_s / Ts)); }

  void validate() const {
    require(jmax > 0.0 && train_amax > 0.0 && dwell_s >= 0.0, "ReferenceOptions: invalid bounds");
    require(!train_distances.empty() && !train_velocities.empty(), "ReferenceOptions: empty training grid");
  }
};

/// Back-and-forth moves for every velocity (outer) and distance (inner),
/// each followed by a dwell; starts with a dwell at 0.
inline Sequence training_reference(const ReferenceOptions& opt, double Ts) {
  opt.validate();
  const int dwell = opt.dwell_samples(Ts);
  Sequence r;
  append_dwell(r, dwell);
  for (double v : opt.train_velocities) {
    for (double d : opt.train_distances) {
      const Sequence move = back_and_forth({d, v, opt.train_amax, opt.jmax, dwell}, Ts);
      r.insert(r.end(), move.begin(), move.end());
      append_dwell(r, dwell);
    }
  }
  return r;
}

struct ReferenceSegment {
  std::string name;
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
};

/// Three validation moves run one after the other; each segment is
/// dwell, move out, dwell, move back, dwell and starts and ends at rest.
struct ValidationReferences {
  Sequence r;
  std::vector<ReferenceSegment> segments;

  [[nodiscard]] Sequence segment(std::size_t i) const {
    const ReferenceSegment& s = segments.at(i);
    return {r.begin() + static_cast<std::ptrdiff_t>(s.begin), r.begin() + static_cast<std::ptrdiff_t>(s.end)};
  }
};

inline std::vector<ReferenceSpec> validation_specs(const ReferenceOptions& opt, double Ts) {
  using std::numbers::pi;
  const int dwell = opt.dwell_samples(Ts);
  return {{6 * pi, 40, 700, opt.jmax, dwell}, {7 * pi, 60, 800, opt.jmax, dwell}, {10 * pi, 100, 900, opt.jmax, dwell}};
}

inline ValidationReferences generate_validation_refs(const LoopConfig& loop, const ReferenceOptions& opt = {}) {
  loop.validate();
  opt.validate();
  static const char* kNames[] = {"R1", "R2", "R3"};
  ValidationReferences out;
  const int dwell = opt.dwell_samples(loop.Ts);
  const auto specs = validation_specs(opt, loop.Ts);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const std::size_t begin = out.r.size();
    append_dwell(out.r, dwell);
    const Sequence move = back_and_forth(specs[i], loop.Ts);
    out.r.insert(out.r.end(), move.begin(), move.end());
    append_dwell(out.r, dwell);
    out.segments.push_back({kNames[i], begin, out.r.size()});
  }
  return out;
}

/// Centered smoothing of the measured output into the yf column.
inline void filter_output(DataSet& ds, const sgfilter::SavGolFilter& f) { ds.yf = sgfilter::apply_centered(f, ds.y); }

struct FilterConfig {
  int order = 3;
  int window = 141;
  int passes = 2;

  [[nodiscard]] sgfilter::SavGolFilter design() const { return sgfilter::design_savgol(order, window, passes); }
};

inline nlohmann::json to_json(const TwoMsdParams& p) {
  nlohmann::json j;
  const auto v = p.values();
  for (std::size_t i = 0; i < TwoMsdParams::kCount; ++i) j[TwoMsdParams::kNames[i]] = v[i];
  return j;
}

inline nlohmann::json to_json(const ParasiticConfig& nl) {
  return {{"coulomb1", nl.coulomb1}, {"coulomb2", nl.coulomb2}, {"smooth_vel", nl.smooth_vel},
          {"quad_drag", nl.quad_drag}, {"enabled", nl.enabled}};
}

inline nlohmann::json to_json(const LoopConfig& loop) {
  return {{"Ts", loop.Ts},
          {"encoder_step", loop.encoder_step},
          {"ff_noise_var", loop.ff_noise_var},
          {"enable_quantization", loop.enable_quantization},
          {"fb_num", loop.fb.num.coeffs()},
          {"fb_den", loop.fb.den.coeffs()}};
}

inline nlohmann::json to_json(const FilterConfig& f) {
  return {{"order", f.order}, {"window", f.window}, {"passes", f.passes}};
}

/// The training program is run twice back to back in one experiment: first
/// without feedforward, then with seeded zero-mean white-noise feedforward
/// of variance loop.ff_noise_var.
inline DataSet generate_training_data(const TwoMsdParams& p, const ParasiticConfig& nl, const LoopConfig& loop,
                                      std::uint64_t seed, const FilterConfig& filter = {},
                                      const ReferenceOptions& opt = {}) {
  const Sequence once = training_reference(opt, loop.Ts);
  Sequence r = once;
  r.insert(r.end(), once.begin(), once.end());
  Sequence uff(r.size(), 0.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, std::sqrt(loop.ff_noise_var));
  for (std::size_t k = once.size(); k < r.size(); ++k) uff[k] = noise(rng);
  DataSet ds = simulate_closed_loop(p, nl, loop, r, uff);
  filter_output(ds, filter.design());
  ds.metadata = {{"kind", "training"},
                 {"seed", seed},
                 {"pass_length", once.size()},
                 {"plant", to_json(p)},
                 {"parasitics", to_json(nl)},
                 {"loop", to_json(loop)},
                 {"filter", to_json(filter)}};
  return ds;
}

/// Validation experiment: the three references in sequence, no feedforward.
inline DataSet generate_validation_data(const TwoMsdParams& p, const ParasiticConfig& nl, const LoopConfig& loop,
                                        const FilterConfig& filter = {}, const ReferenceOptions& opt = {}) {
  const ValidationReferences refs = generate_validation_refs(loop, opt);
  DataSet ds = simulate_closed_loop(p, nl, loop, refs.r, Sequence(refs.r.size(), 0.0));
  filter_output(ds, filter.design());
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : refs.segments) segs.push_back({{"name", s.name}, {"begin", s.begin}, {"end", s.end}});
  ds.metadata = {{"kind", "validation"},
                 {"segments", segs},
                 {"plant", to_json(p)},
                 {"parasitics", to_json(nl)},
                 {"loop", to_json(loop)},
                 {"filter", to_json(filter)}};
  return ds;
}

}  // namespace pgff::plant
