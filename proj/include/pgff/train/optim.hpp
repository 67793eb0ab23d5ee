#pragma once

#include <cmath>
#include <vector>

#include "pgff/error.hpp"
#include "pgff/gru/model.hpp"
#include "pgff/types.hpp"

namespace pgff::train {

struct AdamState {
  std::vector<Matrix> first;
  std::vector<Matrix> second;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_model(const gru::GruModel& m) {
    AdamState s;
    for (const Matrix* b : m.blocks()) {
      s.first.push_back(Matrix::Zero(b->rows(), b->cols()));
      s.second.push_back(Matrix::Zero(b->rows(), b->cols()));
    }
    return s;
  }
};

inline double global_norm(const std::vector<Matrix>& grads) {
  double s = 0.0;
  for (const Matrix& g : grads) s += g.squaredNorm();
  return std::sqrt(s);
}

/// Rescales all blocks by max_norm / g when the global 2-norm g exceeds max_norm.
inline void clip_gradient_norm(std::vector<Matrix>& grads, double max_norm) {
  require(max_norm > 0.0, "clip_gradient_norm: max_norm must be positive");
  const double g = global_norm(grads);
  if (g <= max_norm) return;
  const double scale = max_norm / g;
  for (Matrix& m : grads) m *= scale;
}

/// Bias-corrected ADAM update applied in place.
inline void adam_step(gru::GruModel& m, const std::vector<Matrix>& grads, AdamState& st, double lr) {
  auto blocks = m.blocks();
  require(blocks.size() == grads.size() && st.first.size() == grads.size(), "adam_step: shape mismatch");
  ++st.step;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    require(grads[i].rows() == blocks[i]->rows() && grads[i].cols() == blocks[i]->cols(),
            "adam_step: gradient block shape mismatch");
    st.first[i] = st.beta1 * st.first[i] + (1.0 - st.beta1) * grads[i];
    st.second[i] = st.beta2 * st.second[i] + (1.0 - st.beta2) * grads[i].cwiseProduct(grads[i]);
    blocks[i]->array() -=
        lr * (st.first[i].array() / c1) / ((st.second[i].array() / c2).sqrt() + st.epsilon);
  }
}

}  // namespace pgff::train
