#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pgff/activation.hpp"
#include "pgff/error.hpp"
#include "pgff/types.hpp"

namespace pgff::gru {

/// Gate and candidate blocks of one recurrent layer. Biases are n x 1.
struct GruLayerParameters {
  Matrix W_z, U_z, b_z;  // update gate
  Matrix W_s, U_s, b_s;  // reset gate
  Matrix W_x, U_x, b_x;  // candidate state

  [[nodiscard]] Eigen::Index neurons() const { return U_z.rows(); }
  [[nodiscard]] Eigen::Index input_dim() const { return W_z.cols(); }
};

/// Preview readout u_hat(k) = W_u y(k+eta) + U_u x_top(k+eta) + b_u, owned by the top layer.
struct OutputParameters {
  Matrix W_u, U_u, b_u;
};

/// Affine maps between raw signals and the normalized space the network runs in.
struct NormalizationStats {
  double input_mean = 0.0;
  double input_scale = 1.0;
  double target_mean = 0.0;
  double target_scale = 1.0;

  [[nodiscard]] double normalize_input(double y) const { return (y - input_mean) / input_scale; }
  [[nodiscard]] double normalize_target(double u) const { return (u - target_mean) / target_scale; }
  [[nodiscard]] double denormalize_target(double v) const { return v * target_scale + target_mean; }
};

struct GruModel {
  std::vector<GruLayerParameters> layers;
  OutputParameters out;
  int n_gru = 0;
  int eta = 0;
  NormalizationStats norm;
  std::string activation = "tanh";

  /// Parameter blocks in artifact order: per layer W_z,U_z,b_z,W_s,U_s,b_s,W_x,U_x,b_x; then W_u,U_u,b_u.
  [[nodiscard]] std::vector<Matrix*> blocks() {
    std::vector<Matrix*> v;
    for (auto& l : layers)
      for (Matrix* m : {&l.W_z, &l.U_z, &l.b_z, &l.W_s, &l.U_s, &l.b_s, &l.W_x, &l.U_x, &l.b_x}) v.push_back(m);
    for (Matrix* m : {&out.W_u, &out.U_u, &out.b_u}) v.push_back(m);
    return v;
  }
  [[nodiscard]] std::vector<const Matrix*> blocks() const {
    std::vector<const Matrix*> v;
    for (const auto& l : layers)
      for (const Matrix* m : {&l.W_z, &l.U_z, &l.b_z, &l.W_s, &l.U_s, &l.b_s, &l.W_x, &l.U_x, &l.b_x})
        v.push_back(m);
    for (const Matrix* m : {&out.W_u, &out.U_u, &out.b_u}) v.push_back(m);
    return v;
  }

  [[nodiscard]] static std::vector<std::string> block_names(std::size_t n_layers) {
    std::vector<std::string> names;
    for (std::size_t l = 0; l < n_layers; ++l)
      for (const char* s : {"W_z", "U_z", "b_z", "W_s", "U_s", "b_s", "W_x", "U_x", "b_x"})
        names.push_back("layer" + std::to_string(l) + "." + s);
    for (const char* s : {"W_u", "U_u", "b_u"}) names.emplace_back(s);
    return names;
  }

  [[nodiscard]] std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Matrix* m : blocks()) n += static_cast<std::size_t>(m->size());
    return n;
  }

  [[nodiscard]] double squared_norm() const {
    double s = 0.0;
    for (const Matrix* m : blocks()) s += m->squaredNorm();
    return s;
  }

  void validate() const {
    require(!layers.empty(), "GruModel: at least one layer required");
    require(eta >= 0, "GruModel: eta must be >= 0");
    require(n_gru >= 1, "GruModel: n_gru must be >= 1");
    require(norm.input_scale > 0.0 && norm.target_scale > 0.0, "GruModel: normalization scales must be positive");
    const auto n = static_cast<Eigen::Index>(n_gru);
    Eigen::Index in = 1;
    for (const auto& l : layers) {
      for (const Matrix* w : {&l.W_z, &l.W_s, &l.W_x})
        require(w->rows() == n && w->cols() == in, "GruModel: input weight shape mismatch");
      for (const Matrix* u : {&l.U_z, &l.U_s, &l.U_x})
        require(u->rows() == n && u->cols() == n, "GruModel: recurrent weight shape mismatch");
      for (const Matrix* b : {&l.b_z, &l.b_s, &l.b_x})
        require(b->rows() == n && b->cols() == 1, "GruModel: bias shape mismatch");
      in = n;
    }
    require(out.W_u.rows() == 1 && out.W_u.cols() == 1, "GruModel: W_u must be 1 x 1");
    require(out.U_u.rows() == 1 && out.U_u.cols() == n, "GruModel: U_u must be 1 x n_gru");
    require(out.b_u.rows() == 1 && out.b_u.cols() == 1, "GruModel: b_u must be 1 x 1");
    for (const Matrix* m : blocks())
      if (!m->allFinite()) throw NumericalError("GruModel: non-finite parameters");
  }
};

enum class InitScheme { kaiming, xavier };

inline std::string to_string(InitScheme s) { return s == InitScheme::kaiming ? "kaiming" : "xavier"; }
inline InitScheme init_scheme_from_string(const std::string& s) {
  if (s == "kaiming" || s == "Kaiming") return InitScheme::kaiming;
  if (s == "xavier" || s == "Xavier") return InitScheme::xavier;
  throw ConfigError("unknown init scheme: " + s);
}

struct ArchitectureConfig {
  int layers = 1;
  int n_gru = 8;
  int eta = 0;
};

/// Zero-parameter model of the given shape (identity normalization).
inline GruModel zero_model(const ArchitectureConfig& arch) {
  require(arch.layers >= 1 && arch.n_gru >= 1 && arch.eta >= 0, "zero_model: invalid architecture");
  GruModel m;
  m.n_gru = arch.n_gru;
  m.eta = arch.eta;
  const Eigen::Index n = arch.n_gru;
  Eigen::Index in = 1;
  for (int l = 0; l < arch.layers; ++l) {
    GruLayerParameters p;
    for (Matrix* w : {&p.W_z, &p.W_s, &p.W_x}) *w = Matrix::Zero(n, in);
    for (Matrix* u : {&p.U_z, &p.U_s, &p.U_x}) *u = Matrix::Zero(n, n);
    for (Matrix* b : {&p.b_z, &p.b_s, &p.b_x}) *b = Matrix::Zero(n, 1);
    m.layers.push_back(std::move(p));
    in = n;
  }
  m.out.W_u = Matrix::Zero(1, 1);
  m.out.U_u = Matrix::Zero(1, n);
  m.out.b_u = Matrix::Zero(1, 1);
  return m;
}

/// Weights ~ N(0, var) with var = 2/fan_in (kaiming) or 2/(fan_in+fan_out)
/// (xavier), drawn block by block in artifact order; biases zero.
inline GruModel init_params(const ArchitectureConfig& arch, InitScheme scheme, std::uint64_t seed) {
  GruModel m = zero_model(arch);
  std::mt19937_64 rng(seed);
  const std::vector<Matrix*> blocks = m.blocks();
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i % 3 == 2) continue;  // every third block is a bias
    Matrix* blk = blocks[i];
    const double fan_in = static_cast<double>(blk->cols());
    const double fan_out = static_cast<double>(blk->rows());
    const double var = scheme == InitScheme::kaiming ? 2.0 / fan_in : 2.0 / (fan_in + fan_out);
    std::normal_distribution<double> dist(0.0, std::sqrt(var));
    for (Eigen::Index j = 0; j < blk->cols(); ++j)
      for (Eigen::Index i = 0; i < blk->rows(); ++i) (*blk)(i, j) = dist(rng);
  }
  return m;
}

inline constexpr double kScaleFloor = 1e-12;

/// Population mean and standard deviation over all given sequences.
inline void fit_channel(const std::vector<const Sequence*>& data, double& mean, double& scale) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const Sequence* s : data) {
    for (double v : *s) sum += v;
    count += s->size();
  }
  require(count > 0, "fit_normalization: empty data");
  mean = sum / static_cast<double>(count);
  double ss = 0.0;
  for (const Sequence* s : data)
    for (double v : *s) ss += (v - mean) * (v - mean);
  scale = std::max(std::sqrt(ss / static_cast<double>(count)), kScaleFloor);
}

inline NormalizationStats fit_normalization(const std::vector<const Sequence*>& inputs,
                                            const std::vector<const Sequence*>& targets) {
  NormalizationStats s;
  fit_channel(inputs, s.input_mean, s.input_scale);
  fit_channel(targets, s.target_mean, s.target_scale);
  return s;
}

inline NormalizationStats fit_normalization(const Sequence& input, const Sequence& target) {
  return fit_normalization(std::vector<const Sequence*>{&input}, std::vector<const Sequence*>{&target});
}

struct GruForwardResult {
  /// states[l] is n_gru x (N+1); column k is the state before consuming input k.
  std::vector<Matrix> states;
  /// De-normalized outputs for k = 0 .. N-1-eta.
  Sequence u_hat;
};

/// Runs one layer over a d x N input block from x(0) = 0.
inline Matrix run_layer(const GruLayerParameters& p, const Matrix& input) {
  const Eigen::Index n = p.neurons();
  const Eigen::Index steps = input.cols();
  const Matrix pre_z = (p.W_z * input).colwise() + p.b_z.col(0);
  const Matrix pre_s = (p.W_s * input).colwise() + p.b_s.col(0);
  const Matrix pre_x = (p.W_x * input).colwise() + p.b_x.col(0);
  Matrix states(n, steps + 1);
  states.col(0).setZero();
  Vector x = Vector::Zero(n);
  for (Eigen::Index k = 0; k < steps; ++k) {
    const Vector z = logistic_exp((pre_z.col(k) + p.U_z * x).array()).matrix();
    const Vector s = logistic_exp((pre_s.col(k) + p.U_s * x).array()).matrix();
    const Vector c = tanh_exp((pre_x.col(k) + p.U_x * s.cwiseProduct(x)).array()).matrix();
    x = z.cwiseProduct(x) + (Vector::Ones(n) - z).cwiseProduct(c);
    states.col(k + 1) = x;
  }
  return states;
}

/// Preview GRU evaluation from zero initial state in every layer. Layer l+1
/// consumes layer l's post-update states x_l(k+1) as its input at step k.
inline GruForwardResult gru_forward(const GruModel& m, const Sequence& y, bool keep_states = true) {
  m.validate();
  const auto n_in = static_cast<Eigen::Index>(y.size());
  if (n_in < m.eta + 1) throw ConfigError("gru_forward: sequence shorter than eta + 1");
  RowVector ytil(n_in);
  for (Eigen::Index k = 0; k < n_in; ++k) ytil(k) = m.norm.normalize_input(y[static_cast<std::size_t>(k)]);

  GruForwardResult res;
  Matrix input = ytil;
  Matrix states;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    states = run_layer(m.layers[l], input);
    if (l + 1 < m.layers.size()) input = states.rightCols(n_in);
    if (keep_states) res.states.push_back(states);
  }
  const std::size_t n_out = y.size() - static_cast<std::size_t>(m.eta);
  res.u_hat.resize(n_out);
  for (std::size_t k = 0; k < n_out; ++k) {
    const auto j = static_cast<Eigen::Index>(k) + m.eta;
    const double v = m.out.W_u(0, 0) * ytil(j) + m.out.U_u.row(0).dot(states.col(j)) + m.out.b_u(0, 0);
    res.u_hat[k] = m.norm.denormalize_target(v);
  }
  return res;
}

/// Feedforward deployment: the same recursion driven by the (filtered)
/// reference. The reference is held at its last value for the final eta
/// samples so one input is produced per reference sample.
inline Sequence gru_feedforward(const GruModel& m, const Sequence& r_filtered) {
  Sequence padded = r_filtered;
  if (!padded.empty()) padded.insert(padded.end(), static_cast<std::size_t>(m.eta), padded.back());
  return gru_forward(m, padded, false).u_hat;
}

}  // namespace pgff::gru
