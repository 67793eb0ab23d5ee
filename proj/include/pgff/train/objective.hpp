#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pgff/error.hpp"
#include "pgff/gru/model.hpp"
#include "pgff/train/tape.hpp"
#include "pgff/types.hpp"

namespace pgff::train {

using gru::GruModel;

/// Column-batched TBPTT window in normalized space. Column t*batch + b holds
/// time step t of stream b.
struct WindowBatch {
  Eigen::Index steps = 0;
  Eigen::Index batch = 1;
  RowVector inputs;   // steps*batch
  RowVector targets;  // (steps-eta)*batch, output k of stream b at k*batch + b
  RowVector mask;     // 1 where the output enters the loss
  std::vector<Matrix> init_states;  // per layer, n_gru x batch
};

struct WindowOutcome {
  double data_loss = 0.0;  // masked mean squared error
  double included = 0.0;   // number of masked-in outputs
  std::vector<Matrix> carry_states;
};

/// Builds the GRU recursion for one window on a fresh tape. Returns the
/// masked mean squared error; when `grads` is non-null its blocks receive
/// the gradient of that error (no L2 term). States at column `carry_index`
/// of every layer are returned for the next window.
inline WindowOutcome run_window(const GruModel& m, const WindowBatch& w, Eigen::Index carry_index,
                                std::vector<Matrix>* grads) {
  const Eigen::Index B = w.batch;
  const Eigen::Index T = w.steps;
  const Eigen::Index n_out = T - m.eta;
  require(n_out >= 1, "run_window: window shorter than eta + 1");
  require(carry_index >= 0 && carry_index <= T, "run_window: carry index out of range");

  const auto blocks = m.blocks();
  Tape tape(static_cast<std::size_t>(T) * m.layers.size() * 17 + blocks.size() + 16);
  std::vector<Tape::Var> p;
  p.reserve(blocks.size());
  for (std::size_t i = 0; i < blocks.size(); ++i)
    p.push_back(grads ? tape.parameter(static_cast<int>(i), *blocks[i]) : tape.constant(*blocks[i]));

  WindowOutcome outcome;
  const Tape::Var y = tape.constant(w.inputs);
  Tape::Var layer_in = y;
  std::vector<Tape::Var> xs;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const std::size_t o = 9 * l;
    const auto pz = tape.add(tape.matmul(p[o + 0], layer_in), p[o + 2]);
    const auto ps = tape.add(tape.matmul(p[o + 3], layer_in), p[o + 5]);
    const auto px = tape.add(tape.matmul(p[o + 6], layer_in), p[o + 8]);
    xs.clear();
    xs.push_back(tape.constant(w.init_states[l]));
    for (Eigen::Index t = 0; t < T; ++t) {
      const Tape::Var x = xs.back();
      const auto z = tape.sigmoid(tape.add(tape.slice_cols(pz, t * B, B), tape.matmul(p[o + 1], x)));
      const auto s = tape.sigmoid(tape.add(tape.slice_cols(ps, t * B, B), tape.matmul(p[o + 4], x)));
      const auto c =
          tape.tanh(tape.add(tape.slice_cols(px, t * B, B), tape.matmul(p[o + 7], tape.hadamard(s, x))));
      xs.push_back(tape.add(c, tape.hadamard(z, tape.sub(x, c))));
    }
    outcome.carry_states.push_back(tape.value(xs[static_cast<std::size_t>(carry_index)]));
    if (l + 1 < m.layers.size())
      layer_in = tape.concat_cols(std::span<const Tape::Var>(xs.data() + 1, static_cast<std::size_t>(T)));
  }
  const std::size_t ob = 9 * m.layers.size();
  const auto x_top = tape.concat_cols(std::span<const Tape::Var>(xs.data(), static_cast<std::size_t>(T)));
  const auto out =
      tape.add(tape.add(tape.matmul(p[ob + 0], y), tape.matmul(p[ob + 1], x_top)), p[ob + 2]);

  const RowVector o = tape.value(out).row(0);
  const Eigen::Index shift = static_cast<Eigen::Index>(m.eta) * B;
  double sum = 0.0;
  const double count = w.mask.sum();
  outcome.included = count;
  Matrix seed = Matrix::Zero(1, T * B);
  for (Eigen::Index i = 0; i < n_out * B; ++i) {
    if (w.mask(i) == 0.0) continue;
    const double d = o(i + shift) - w.targets(i);
    sum += d * d;
    seed(0, i + shift) = 2.0 * d / count;
  }
  outcome.data_loss = count > 0.0 ? sum / count : 0.0;
  if (grads && count > 0.0) {
    tape.seed(out, seed);
    tape.backward(*grads);
  }
  return outcome;
}

inline std::vector<Matrix> zero_like(const GruModel& m) {
  std::vector<Matrix> g;
  for (const Matrix* b : m.blocks()) g.push_back(Matrix::Zero(b->rows(), b->cols()));
  return g;
}

struct LossRange {
  std::size_t first = 0;
  std::size_t end = 0;  // exclusive
};

/// Output indices entering the loss: k = beta .. min(N - eta, |target|) - 1.
inline LossRange loss_range(const GruModel& m, std::size_t input_len, std::size_t target_len, int beta) {
  require(input_len > static_cast<std::size_t>(m.eta), "loss: input shorter than eta + 1");
  LossRange r{static_cast<std::size_t>(beta), std::min(input_len - static_cast<std::size_t>(m.eta), target_len)};
  if (r.end <= r.first) throw ConfigError("loss: empty summation range (need N > beta + eta)");
  return r;
}

/// Masked mean squared error in normalized target space plus lambda |theta|^2,
/// evaluated with the plain forward recursion from zero state.
inline double loss_preview(const GruModel& m, const Sequence& u_target, const Sequence& y_input, int beta,
                           double lambda) {
  const LossRange r = loss_range(m, y_input.size(), u_target.size(), beta);
  const Sequence u_hat = gru::gru_forward(m, y_input, false).u_hat;
  double sum = 0.0;
  for (std::size_t k = r.first; k < r.end; ++k) {
    const double d = (u_hat[k] - u_target[k]) / m.norm.target_scale;
    sum += d * d;
  }
  return sum / static_cast<double>(r.end - r.first) + lambda * m.squared_norm();
}

/// Full-sequence window (batch 1, zero initial state) in normalized space.
inline WindowBatch full_sequence_window(const GruModel& m, const Sequence& u_target, const Sequence& y_input,
                                        int beta) {
  const LossRange r = loss_range(m, y_input.size(), u_target.size(), beta);
  WindowBatch w;
  w.steps = static_cast<Eigen::Index>(y_input.size());
  w.batch = 1;
  w.inputs.resize(w.steps);
  for (Eigen::Index k = 0; k < w.steps; ++k) w.inputs(k) = m.norm.normalize_input(y_input[static_cast<std::size_t>(k)]);
  const Eigen::Index n_out = w.steps - m.eta;
  w.targets = RowVector::Zero(n_out);
  w.mask = RowVector::Zero(n_out);
  for (std::size_t k = r.first; k < r.end; ++k) {
    w.targets(static_cast<Eigen::Index>(k)) = m.norm.normalize_target(u_target[k]);
    w.mask(static_cast<Eigen::Index>(k)) = 1.0;
  }
  for (int l = 0; l < static_cast<int>(m.layers.size()); ++l) w.init_states.push_back(Matrix::Zero(m.n_gru, 1));
  return w;
}

struct GradientResult {
  double loss = 0.0;
  std::vector<Matrix> grads;  // in GruModel::blocks() order
};

/// Throws NumericalError naming the first block holding a non-finite entry.
inline void check_finite(const std::vector<Matrix>& grads, std::size_t n_layers) {
  const auto names = GruModel::block_names(n_layers);
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (!grads[i].allFinite()) throw NumericalError("non-finite gradient in parameter block " + names[i]);
}

/// Exact reverse-mode gradient of loss_preview over the full sequence.
inline GradientResult gradients(const GruModel& m, const Sequence& u_target, const Sequence& y_input, int beta,
                                double lambda) {
  m.validate();
  for (double v : y_input)
    if (!std::isfinite(v)) throw NumericalError("gradients: non-finite input");
  const WindowBatch w = full_sequence_window(m, u_target, y_input, beta);
  GradientResult res;
  res.grads = zero_like(m);
  const WindowOutcome o = run_window(m, w, w.steps, &res.grads);
  const auto blocks = m.blocks();
  for (std::size_t i = 0; i < blocks.size(); ++i) res.grads[i] += 2.0 * lambda * *blocks[i];
  res.loss = o.data_loss + lambda * m.squared_norm();
  check_finite(res.grads, m.layers.size());
  return res;
}

}  // namespace pgff::train
