#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pgff/error.hpp"
#include "pgff/gru/model.hpp"
#include "pgff/train/objective.hpp"
#include "pgff/train/optim.hpp"

namespace pgff::train {

/// Hyperparameters of one training run; the grid-searchable axes plus the
/// epoch budget and seed.
struct TrainConfig {
  int layers = 1;
  int n_gru = 8;
  int eta = 0;
  int beta = 0;
  double lambda = 0.0;
  double learning_rate = 1e-3;
  int tbptt_length = 299;
  int batch_size = 2;
  double clip_norm = 0.8;
  int epochs = 300;
  gru::InitScheme init_scheme = gru::InitScheme::xavier;
  std::uint64_t seed = 0;

  [[nodiscard]] gru::ArchitectureConfig architecture() const { return {layers, n_gru, eta}; }

  void validate() const {
    require(layers >= 1 && n_gru >= 1, "TrainConfig: layers and n_gru must be >= 1");
    require(beta >= 0 && eta >= 0, "TrainConfig: beta and eta must be >= 0");
    require(tbptt_length > beta + eta, "TrainConfig: tbptt_length must exceed beta + eta");
    require(lambda >= 0.0, "TrainConfig: lambda must be >= 0");
    require(learning_rate > 0.0 && clip_norm > 0.0, "TrainConfig: learning rate and clip norm must be positive");
    require(batch_size >= 1 && epochs >= 0, "TrainConfig: batch_size >= 1 and epochs >= 0 required");
  }
};

enum class TrainMode { inverse, residual };

inline std::string to_string(TrainMode m) { return m == TrainMode::inverse ? "inverse" : "residual"; }

/// Network input (filtered output) and target (input u, or residual eps).
/// The target may be shorter than the input; outputs beyond it are unused.
struct TrainingData {
  Sequence input;
  Sequence target;
};

struct TrainResult {
  GruModel model;
  double initial_loss = 0.0;
  std::vector<double> loss_history;  // mean step loss per epoch (data + L2)
};

namespace detail {

// B contiguous streams of equal length; windows advance by tbptt_length - eta
// so every output index is covered once and the state at the stride point
// is carried (detached) into the next window.
struct StreamLayout {
  std::size_t stream_len = 0;
  std::size_t stride = 0;
  std::size_t windows = 0;
};

inline StreamLayout layout(std::size_t n, const TrainConfig& cfg) {
  StreamLayout s;
  s.stream_len = n / static_cast<std::size_t>(cfg.batch_size);
  s.stride = static_cast<std::size_t>(cfg.tbptt_length - cfg.eta);
  const auto T = static_cast<std::size_t>(cfg.tbptt_length);
  if (s.stream_len < T) throw ConfigError("tbptt_train: data too short for one window per batch stream");
  s.windows = (s.stream_len - T) / s.stride + 1;
  return s;
}

inline WindowBatch make_window(const std::vector<double>& ytil, const std::vector<double>& ttil,
                               std::size_t target_len, const TrainConfig& cfg, const StreamLayout& lay,
                               std::size_t j, const std::vector<Matrix>& states) {
  const auto B = static_cast<Eigen::Index>(cfg.batch_size);
  const auto T = static_cast<Eigen::Index>(cfg.tbptt_length);
  const Eigen::Index n_out = T - cfg.eta;
  WindowBatch w;
  w.steps = T;
  w.batch = B;
  w.inputs.resize(T * B);
  w.targets = RowVector::Zero(n_out * B);
  w.mask = RowVector::Zero(n_out * B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const std::size_t start = static_cast<std::size_t>(b) * lay.stream_len + j * lay.stride;
    for (Eigen::Index t = 0; t < T; ++t) w.inputs(t * B + b) = ytil[start + static_cast<std::size_t>(t)];
    for (Eigen::Index k = 0; k < n_out; ++k) {
      const std::size_t g = start + static_cast<std::size_t>(k);
      if (g >= target_len) break;
      if (j == 0 && k < cfg.beta) continue;  // cold start of the stream
      w.targets(k * B + b) = ttil[g];
      w.mask(k * B + b) = 1.0;
    }
  }
  w.init_states = states;
  return w;
}

}  // namespace detail

using EpochCallback = std::function<void(int epoch, double loss)>;

/// Truncated BPTT with ADAM. Normalization statistics are fitted on `data`
/// and stored in the returned model. Batches are formed from `batch_size`
/// parallel streams; within an epoch the hidden state flows from one window
/// to the next without gradient, and the first beta outputs are excluded
/// only where a stream starts from the zero state.
inline TrainResult tbptt_train(GruModel model, const TrainingData& data, const TrainConfig& cfg, TrainMode mode,
                               const EpochCallback& on_epoch = {}) {
  (void)mode;
  cfg.validate();
  require(model.eta == cfg.eta, "tbptt_train: model eta differs from config eta");
  require(!data.input.empty() && !data.target.empty(), "tbptt_train: empty data");
  model.norm = gru::fit_normalization(data.input, data.target);
  model.validate();

  std::vector<double> ytil(data.input.size()), ttil(data.target.size());
  for (std::size_t i = 0; i < ytil.size(); ++i) ytil[i] = model.norm.normalize_input(data.input[i]);
  for (std::size_t i = 0; i < ttil.size(); ++i) ttil[i] = model.norm.normalize_target(data.target[i]);

  const detail::StreamLayout lay = detail::layout(data.input.size(), cfg);
  const auto carry = static_cast<Eigen::Index>(lay.stride);
  auto zero_states = [&] {
    return std::vector<Matrix>(model.layers.size(), Matrix::Zero(model.n_gru, cfg.batch_size));
  };

  TrainResult res;
  {
    std::vector<Matrix> states = zero_states();
    double sum = 0.0;
    for (std::size_t j = 0; j < lay.windows; ++j) {
      const WindowBatch w = detail::make_window(ytil, ttil, ttil.size(), cfg, lay, j, states);
      const WindowOutcome o = run_window(model, w, carry, nullptr);
      sum += o.data_loss;
      states = o.carry_states;
    }
    res.initial_loss = sum / static_cast<double>(lay.windows) + cfg.lambda * model.squared_norm();
  }

  AdamState adam = AdamState::for_model(model);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<Matrix> states = zero_states();
    double sum = 0.0;
    for (std::size_t j = 0; j < lay.windows; ++j) {
      const WindowBatch w = detail::make_window(ytil, ttil, ttil.size(), cfg, lay, j, states);
      std::vector<Matrix> grads = zero_like(model);
      const WindowOutcome o = run_window(model, w, carry, &grads);
      const auto blocks = model.blocks();
      for (std::size_t i = 0; i < blocks.size(); ++i) grads[i] += 2.0 * cfg.lambda * *blocks[i];
      check_finite(grads, model.layers.size());
      sum += o.data_loss + cfg.lambda * model.squared_norm();
      clip_gradient_norm(grads, cfg.clip_norm);
      adam_step(model, grads, adam, cfg.learning_rate);
      states = o.carry_states;
    }
    const double epoch_loss = sum / static_cast<double>(lay.windows);
    if (!std::isfinite(epoch_loss)) throw NumericalError("tbptt_train: loss diverged");
    res.loss_history.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
  res.model = std::move(model);
  return res;
}

/// 100 * |predicted - actual|_2 / |actual - mean(actual)|_2.
inline double nrms(const Sequence& predicted, const Sequence& actual) {
  require(predicted.size() == actual.size() && !actual.empty(), "nrms: sequences must have equal nonzero length");
  double mean = 0.0;
  for (double v : actual) mean += v;
  mean /= static_cast<double>(actual.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    num += (predicted[i] - actual[i]) * (predicted[i] - actual[i]);
    den += (actual[i] - mean) * (actual[i] - mean);
  }
  if (den == 0.0) throw NumericalError("nrms: actual sequence has zero variance");
  return 100.0 * std::sqrt(num / den);
}

}  // namespace pgff::train
