#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "json.hpp"

#include "pgff/error.hpp"
#include "pgff/lti/transfer_function.hpp"
#include "pgff/plant/two_mass.hpp"
#include "pgff/types.hpp"

namespace pgff::plant {

using lti::Polynomial;
using lti::RationalTransferFunction;

/// Lead-lag times notch around the flexible mode, in s. DC gain 0.007,
/// lead corner 4*pi rad/s, lag corner 60*pi rad/s, notch at 90*pi rad/s with
/// numerator damping 0.001 against denominator damping 0.5.
inline RationalTransferFunction feedback_continuous() {
  using std::numbers::pi;
  const double wn = 90.0 * pi;
  const Polynomial lead_num({1.0, 1.0 / (4.0 * pi)});
  const Polynomial lead_den({1.0, 1.0 / (60.0 * pi)});
  const Polynomial notch_num({1.0, 0.002 / wn, 1.0 / (wn * wn)});
  const Polynomial notch_den({1.0, 1.0 / wn, 1.0 / (wn * wn)});
  return {(lead_num * notch_num).scaled(0.007), lead_den * notch_den, 0.0};
}

inline RationalTransferFunction make_feedback(double Ts) {
  return lti::tustin_discretize(feedback_continuous(), Ts);
}

struct LoopConfig {
  double Ts = 5e-4;
  double encoder_step = 1e-3 * std::numbers::pi;
  double ff_noise_var = 5e-7;  // N^2 m^2, second pass of the training run
  bool enable_quantization = true;
  RationalTransferFunction fb = make_feedback(5e-4);

  static LoopConfig with_sampling(double Ts) {
    LoopConfig c;
    c.Ts = Ts;
    c.fb = make_feedback(Ts);
    return c;
  }

  void validate() const {
    require(Ts > 0.0, "LoopConfig: Ts must be positive");
    require(encoder_step >= 0.0, "LoopConfig: encoder_step must be >= 0");
    require(ff_noise_var >= 0.0, "LoopConfig: ff_noise_var must be >= 0");
    require(fb.Ts == Ts, "LoopConfig: feedback controller sampled at a different Ts");
    require(fb.is_proper(), "LoopConfig: feedback controller must be proper");
  }
};

/// Round-to-nearest encoder reading.
inline double quantize(double theta, double step) {
  if (step <= 0.0) return theta;
  return step * std::nearbyint(theta / step);
}

/// One closed-loop record. Column names follow the CSV header
/// k,t,r,uff,ufb,u,y,yf.
struct DataSet {
  std::vector<std::int64_t> k;
  Sequence t, r, uff, ufb, u, y, yf;
  nlohmann::json metadata = nlohmann::json::object();

  [[nodiscard]] std::size_t size() const { return k.size(); }

  void resize(std::size_t n) {
    k.resize(n);
    for (Sequence* c : columns()) c->resize(n);
  }

  std::array<Sequence*, 7> columns() { return {&t, &r, &uff, &ufb, &u, &y, &yf}; }
  [[nodiscard]] std::array<const Sequence*, 7> columns() const { return {&t, &r, &uff, &ufb, &u, &y, &yf}; }

  void validate() const {
    for (const Sequence* c : columns())
      if (c->size() != k.size()) throw ConfigError("DataSet: columns differ in length");
    for (std::size_t i = 0; i < k.size(); ++i)
      if (u[i] != ufb[i] + uff[i]) throw ConfigError("DataSet: u != ufb + uff at sample " + std::to_string(i));
  }

  /// Samples [begin, end) as a new record with k and t restarted at 0.
  [[nodiscard]] DataSet slice(std::size_t begin, std::size_t end) const {
    require(begin <= end && end <= size(), "DataSet::slice: range out of bounds");
    DataSet out;
    out.metadata = metadata;
    out.resize(end - begin);
    const double Ts = size() > 1 ? t[1] - t[0] : 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t j = i - begin;
      out.k[j] = static_cast<std::int64_t>(j);
      out.t[j] = static_cast<double>(j) * Ts;
      out.r[j] = r[i];
      out.uff[j] = uff[i];
      out.ufb[j] = ufb[i];
      out.u[j] = u[i];
      out.y[j] = y[i];
      out.yf[j] = yf[i];
    }
    return out;
  }
};

/// Runs the loop sample by sample: read the encoder, feed r - y through the
/// feedback filter, add the feedforward and advance the plant. The
/// yf column is a copy of y; filtering is applied by the caller.
inline DataSet simulate_closed_loop(const TwoMassPlant& plant, const LoopConfig& loop, const Sequence& r,
                                    const Sequence& uff, const Vector& x0) {
  loop.validate();
  require(r.size() == uff.size(), "simulate_closed_loop: reference and feedforward lengths differ");
  require(x0.size() == 4, "simulate_closed_loop: initial state must have 4 entries");
  lti::StreamingFilter fb(loop.fb);
  DataSet ds;
  ds.resize(r.size());
  Vector x = x0;
  const double step = loop.enable_quantization ? loop.encoder_step : 0.0;
  for (std::size_t k = 0; k < r.size(); ++k) {
    const double y = quantize(TwoMassPlant::output(x), step);
    const double ufb = fb.step(r[k] - y);
    ds.k[k] = static_cast<std::int64_t>(k);
    ds.t[k] = static_cast<double>(k) * loop.Ts;
    ds.r[k] = r[k];
    ds.uff[k] = uff[k];
    ds.ufb[k] = ufb;
    ds.u[k] = ufb + uff[k];
    ds.y[k] = y;
    ds.yf[k] = y;
    x = plant.step(x, ds.u[k]);
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > 1e12)
      throw NumericalError("simulate_closed_loop: state diverged at sample " + std::to_string(k));
  }
  return ds;
}

inline DataSet simulate_closed_loop(const TwoMassPlant& plant, const LoopConfig& loop, const Sequence& r,
                                    const Sequence& uff) {
  return simulate_closed_loop(plant, loop, r, uff, Vector::Zero(4));
}

inline DataSet simulate_closed_loop(const TwoMsdParams& p, const ParasiticConfig& nl, const LoopConfig& loop,
                                    const Sequence& r, const Sequence& uff) {
  return simulate_closed_loop(TwoMassPlant(p, nl, loop.Ts), loop, r, uff);
}

/// Feedforward law computed from the whole reference in advance (preview is
/// available because the reference is known beforehand).
using FeedforwardLaw = std::function<Sequence(const Sequence& r)>;

inline DataSet simulate_closed_loop(const TwoMassPlant& plant, const LoopConfig& loop, const Sequence& r,
                                    const FeedforwardLaw& law) {
  const Sequence uff = law ? law(r) : Sequence(r.size(), 0.0);
  if (uff.size() != r.size()) throw ConfigError("simulate_closed_loop: feedforward law returned a wrong length");
  return simulate_closed_loop(plant, loop, r, uff);
}

/// Output of the linear closed-loop model (no encoder, no parasitics) under
/// reference r and feedforward uff; used as the predictor in identification.
inline Sequence closed_loop_model_output(const lti::DiscreteStateSpace& model, const RationalTransferFunction& fb,
                                         const Sequence& r, const Sequence& uff) {
  require(r.size() == uff.size(), "closed_loop_model_output: reference and feedforward lengths differ");
  lti::StreamingFilter filter(fb);
  const Eigen::Index n = model.states();
  Sequence y(r.size());
  Vector x = Vector::Zero(n);
  const Vector b = model.B.col(0);
  const RowVector c = model.C.row(0);
  for (std::size_t k = 0; k < r.size(); ++k) {
    y[k] = c.dot(x);
    const double u = filter.step(r[k] - y[k]) + uff[k];
    x = model.A * x + b * u;
  }
  return y;
}

/// Ts times the sum of |e|.
inline double iae(const Sequence& e, double Ts) {
  double s = 0.0;
  for (double v : e) s += std::abs(v);
  return Ts * s;
}

inline Sequence tracking_error(const DataSet& ds) {
  Sequence e(ds.size());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = ds.r[i] - ds.y[i];
  return e;
}

}  // namespace pgff::plant
