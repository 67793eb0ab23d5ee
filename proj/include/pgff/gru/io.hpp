#pragma once

#include <fstream>
#include <string>

#include "json.hpp"

#include "pgff/error.hpp"
#include "pgff/gru/model.hpp"

namespace pgff::gru {

inline constexpr int kModelSchemaVersion = 1;

/// Model artifact: config, normalization and the flat parameter array in
/// block order. Doubles are written in shortest round-trip form.
inline nlohmann::json model_to_json(const GruModel& m, const nlohmann::json& metadata = nlohmann::json::object()) {
  m.validate();
  nlohmann::json j;
  j["schema_version"] = kModelSchemaVersion;
  j["kind"] = "pgff.gru_model";
  j["config"] = {{"layers", m.layers.size()},
                 {"n_gru", m.n_gru},
                 {"eta", m.eta},
                 {"activation", m.activation},
                 {"gate", "logistic"}};
  j["normalization"] = {{"input_mean", m.norm.input_mean},
                        {"input_scale", m.norm.input_scale},
                        {"target_mean", m.norm.target_mean},
                        {"target_scale", m.norm.target_scale}};
  std::vector<double> flat;
  flat.reserve(m.parameter_count());
  for (const Matrix* blk : m.blocks())
    for (Eigen::Index c = 0; c < blk->cols(); ++c)
      for (Eigen::Index r = 0; r < blk->rows(); ++r) flat.push_back((*blk)(r, c));
  j["parameter_order"] = "per layer: W_z,U_z,b_z,W_s,U_s,b_s,W_x,U_x,b_x; then W_u,U_u,b_u; column-major";
  j["parameters"] = flat;
  j["metadata"] = metadata;
  return j;
}

inline GruModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema_version").get<int>() != kModelSchemaVersion)
      throw ConfigError("model artifact: unsupported schema version");
    const auto& cfg = j.at("config");
    if (cfg.at("activation").get<std::string>() != "tanh")
      throw ConfigError("model artifact: only tanh activation is supported");
    ArchitectureConfig arch{cfg.at("layers").get<int>(), cfg.at("n_gru").get<int>(), cfg.at("eta").get<int>()};
    GruModel m = zero_model(arch);
    const auto& n = j.at("normalization");
    m.norm.input_mean = n.at("input_mean").get<double>();
    m.norm.input_scale = n.at("input_scale").get<double>();
    m.norm.target_mean = n.at("target_mean").get<double>();
    m.norm.target_scale = n.at("target_scale").get<double>();
    const auto flat = j.at("parameters").get<std::vector<double>>();
    if (flat.size() != m.parameter_count()) throw ConfigError("model artifact: parameter count mismatch");
    std::size_t i = 0;
    for (Matrix* blk : m.blocks())
      for (Eigen::Index c = 0; c < blk->cols(); ++c)
        for (Eigen::Index r = 0; r < blk->rows(); ++r) (*blk)(r, c) = flat[i++];
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model artifact: ") + e.what());
  }
}

inline void save_model(const GruModel& m, const std::string& path,
                       const nlohmann::json& metadata = nlohmann::json::object()) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path);
  os << model_to_json(m, metadata).dump(1) << '\n';
}

inline GruModel load_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("model artifact " + path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace pgff::gru
