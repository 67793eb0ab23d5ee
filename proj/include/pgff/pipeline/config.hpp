#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

#include "pgff/error.hpp"
#include "pgff/inversion.hpp"
#include "pgff/io/csv.hpp"
#include "pgff/plant/datasets.hpp"
#include "pgff/plant/identification.hpp"
#include "pgff/seed.hpp"
#include "pgff/train/tbptt.hpp"

namespace pgff::pipeline {

using nlohmann::json;

inline constexpr std::uint64_t kDefaultSeed = 20240517;

enum class ModelKind { gru, preview_gru, pg_gru };

inline std::string to_string(ModelKind m) {
  switch (m) {
    case ModelKind::gru: return "gru";
    case ModelKind::preview_gru: return "preview-gru";
    case ModelKind::pg_gru: return "pg-gru";
  }
  return "?";
}

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "gru") return ModelKind::gru;
  if (s == "preview-gru") return ModelKind::preview_gru;
  if (s == "pg-gru") return ModelKind::pg_gru;
  throw ConfigError("unknown model mode '" + s + "' (expected gru, preview-gru or pg-gru)");
}

inline constexpr ModelKind kAllModels[] = {ModelKind::gru, ModelKind::preview_gru, ModelKind::pg_gru};

struct LinearDesignConfig {
  inversion::StableInversionMethod method = inversion::StableInversionMethod::zpetc;
  int noncausal_order = 10;
  // Fit the plant parameters to the training record first. Off by default:
  // with parasitics active the best linear fit loses the resonance.
  bool identify = false;
  double initial_scale = 1.5;   // identification starts from the configured parameters times this
  int max_evaluations = 6000;
};

struct SearchConfig {
  int budget = 4;
  int epochs = 2;
  ModelKind mode = ModelKind::pg_gru;
};

/// Everything one experiment needs. Defaults reproduce the desk preset.
struct ExperimentConfig {
  std::uint64_t seed = kDefaultSeed;
  std::string preset = "desk";
  std::filesystem::path out_dir = "out";
  plant::TwoMsdParams plant;
  plant::ParasiticConfig parasitics;
  plant::LoopConfig loop;
  plant::FilterConfig filter;
  plant::ReferenceOptions references;
  LinearDesignConfig linear;
  train::TrainConfig gru, preview_gru, pg_gru;
  SearchConfig search;
  int threads = 0;  // evaluation and search workers; 0 = hardware concurrency

  [[nodiscard]] train::TrainConfig& train_config(ModelKind m) {
    return m == ModelKind::gru ? gru : m == ModelKind::preview_gru ? preview_gru : pg_gru;
  }
  [[nodiscard]] const train::TrainConfig& train_config(ModelKind m) const {
    return m == ModelKind::gru ? gru : m == ModelKind::preview_gru ? preview_gru : pg_gru;
  }

  /// Training seed: the configured one when nonzero, otherwise derived.
  [[nodiscard]] std::uint64_t train_seed(ModelKind m) const {
    const std::uint64_t s = train_config(m).seed;
    return s != 0 ? s : derive_seed(seed, "train/" + to_string(m));
  }
  [[nodiscard]] std::uint64_t data_seed() const { return derive_seed(seed, "generate/excitation"); }
  [[nodiscard]] std::uint64_t search_seed() const { return derive_seed(seed, "search"); }

  void validate() const {
    plant.validate();
    parasitics.validate();
    loop.validate();
    references.validate();
    require(filter.window % 2 == 1 && filter.order < filter.window && filter.passes >= 1,
            "filter: odd window larger than the order and at least one pass required");
    for (ModelKind m : kAllModels) {
      const train::TrainConfig& c = train_config(m);
      try {
        c.validate();
      } catch (const ConfigError& e) {
        throw ConfigError("train." + to_string(m) + ": " + e.what());
      }
    }
    require(gru.eta == 0, "train.gru: the no-preview baseline must have eta = 0");
    require(linear.noncausal_order >= 1, "linear.noncausal_order must be >= 1");
    require(linear.initial_scale > 0.0 && linear.max_evaluations > 0, "linear: invalid identification settings");
    require(search.budget >= 1 && search.epochs >= 1, "search: budget and epochs must be >= 1");
    require(threads >= 0, "threads must be >= 0");
  }
};

/// Hyperparameters of the three models: 5 layers x 128 neurons with
/// beta = eta = 92 for the preview GRU, 7 x 32 with beta = eta = 48 for the
/// physics-guided residual model, and the preview GRU architecture with
/// eta = 0 for the plain GRU. Epoch counts depend on the preset.
inline ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;
  c.preset = name;
  auto model = [](int layers, int n, int beta, int eta, double lr) {
    train::TrainConfig t;
    t.layers = layers;
    t.n_gru = n;
    t.beta = beta;
    t.eta = eta;
    t.lambda = 1e-5;
    t.learning_rate = lr;
    t.tbptt_length = 899;
    t.batch_size = 6;
    t.clip_norm = 0.8;
    t.init_scheme = gru::InitScheme::xavier;
    return t;
  };
  c.gru = model(5, 128, 92, 0, 8e-4);
  c.preview_gru = model(5, 128, 92, 92, 8e-4);
  c.pg_gru = model(7, 32, 48, 48, 8e-4);
  if (name == "desk") {
    c.gru.epochs = 6;
    c.preview_gru.epochs = 6;
    c.pg_gru.epochs = 40;
    c.search = {4, 2, ModelKind::pg_gru};
  } else if (name == "full") {
    c.gru.epochs = 300;
    c.preview_gru.epochs = 300;
    c.pg_gru.epochs = 300;
    c.search = {60, 50, ModelKind::pg_gru};
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected desk or full)");
  }
  return c;
}

// ---- JSON mapping ---------------------------------------------------------

namespace detail {

template <typename T>
void read(const json& j, const char* key, T& v) {
  if (!j.contains(key)) return;
  try {
    v = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

inline void check_keys(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

inline std::string method_name(inversion::StableInversionMethod m) {
  return m == inversion::StableInversionMethod::zpetc ? "zpetc" : "noncausal";
}

inline inversion::StableInversionMethod method_from_string(const std::string& s) {
  if (s == "zpetc") return inversion::StableInversionMethod::zpetc;
  if (s == "noncausal") return inversion::StableInversionMethod::noncausal;
  throw ConfigError("linear.method: expected zpetc or noncausal, got '" + s + "'");
}

}  // namespace detail

inline json to_json(const train::TrainConfig& t) {
  return {{"layers", t.layers},         {"n_gru", t.n_gru},
          {"beta", t.beta},             {"eta", t.eta},
          {"lambda", t.lambda},         {"learning_rate", t.learning_rate},
          {"tbptt_length", t.tbptt_length}, {"batch_size", t.batch_size},
          {"clip_norm", t.clip_norm},   {"epochs", t.epochs},
          {"init", gru::to_string(t.init_scheme)}, {"seed", t.seed}};
}

inline void from_json(const json& j, train::TrainConfig& t, const std::string& where) {
  detail::check_keys(j,
                     {"layers", "n_gru", "beta", "eta", "lambda", "learning_rate", "tbptt_length", "batch_size",
                      "clip_norm", "epochs", "init", "seed"},
                     where);
  detail::read(j, "layers", t.layers);
  detail::read(j, "n_gru", t.n_gru);
  detail::read(j, "beta", t.beta);
  detail::read(j, "eta", t.eta);
  detail::read(j, "lambda", t.lambda);
  detail::read(j, "learning_rate", t.learning_rate);
  detail::read(j, "tbptt_length", t.tbptt_length);
  detail::read(j, "batch_size", t.batch_size);
  detail::read(j, "clip_norm", t.clip_norm);
  detail::read(j, "epochs", t.epochs);
  detail::read(j, "seed", t.seed);
  if (j.contains("init")) t.init_scheme = gru::init_scheme_from_string(j.at("init").get<std::string>());
}

inline json to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["preset"] = c.preset;
  j["out_dir"] = c.out_dir.generic_string();
  j["plant"] = plant::to_json(c.plant);
  j["parasitics"] = plant::to_json(c.parasitics);
  j["loop"] = {{"Ts", c.loop.Ts},
               {"encoder_step", c.loop.encoder_step},
               {"ff_noise_var", c.loop.ff_noise_var},
               {"enable_quantization", c.loop.enable_quantization}};
  j["filter"] = plant::to_json(c.filter);
  j["references"] = {{"jmax", c.references.jmax},
                     {"dwell_s", c.references.dwell_s},
                     {"train_amax", c.references.train_amax},
                     {"train_distances", c.references.train_distances},
                     {"train_velocities", c.references.train_velocities}};
  j["linear"] = {{"method", detail::method_name(c.linear.method)},
                 {"noncausal_order", c.linear.noncausal_order},
                 {"identify", c.linear.identify},
                 {"initial_scale", c.linear.initial_scale},
                 {"max_evaluations", c.linear.max_evaluations}};
  j["train"] = {{"gru", to_json(c.gru)}, {"preview-gru", to_json(c.preview_gru)}, {"pg-gru", to_json(c.pg_gru)}};
  j["search"] = {{"budget", c.search.budget}, {"epochs", c.search.epochs}, {"mode", to_string(c.search.mode)}};
  j["threads"] = c.threads;
  return j;
}

/// Applies the keys present in `j` on top of `c`; unknown keys are errors.
inline void apply_json(ExperimentConfig& c, const json& j) {
  detail::check_keys(j,
                     {"seed", "preset", "out_dir", "plant", "parasitics", "loop", "filter", "references", "linear",
                      "train", "search", "threads"},
                     "config");
  detail::read(j, "seed", c.seed);
  if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
  detail::read(j, "threads", c.threads);
  if (j.contains("plant")) {
    const json& p = j.at("plant");
    auto v = c.plant.values();
    for (std::size_t i = 0; i < plant::TwoMsdParams::kCount; ++i) detail::read(p, plant::TwoMsdParams::kNames[i], v[i]);
    for (const auto& item : p.items()) {
      bool ok = false;
      for (const char* k : plant::TwoMsdParams::kNames) ok = ok || item.key() == k;
      if (!ok) throw ConfigError("plant: unknown key '" + item.key() + "'");
    }
    c.plant = plant::TwoMsdParams::from_values(v);
  }
  if (j.contains("parasitics")) {
    const json& p = j.at("parasitics");
    detail::check_keys(p, {"coulomb1", "coulomb2", "smooth_vel", "quad_drag", "enabled"}, "parasitics");
    detail::read(p, "coulomb1", c.parasitics.coulomb1);
    detail::read(p, "coulomb2", c.parasitics.coulomb2);
    detail::read(p, "smooth_vel", c.parasitics.smooth_vel);
    detail::read(p, "quad_drag", c.parasitics.quad_drag);
    detail::read(p, "enabled", c.parasitics.enabled);
  }
  if (j.contains("loop")) {
    const json& l = j.at("loop");
    detail::check_keys(l, {"Ts", "encoder_step", "ff_noise_var", "enable_quantization"}, "loop");
    double Ts = c.loop.Ts;
    detail::read(l, "Ts", Ts);
    if (!(Ts > 0.0)) throw ConfigError("loop.Ts must be positive");
    plant::LoopConfig loop = plant::LoopConfig::with_sampling(Ts);
    loop.encoder_step = c.loop.encoder_step;
    loop.ff_noise_var = c.loop.ff_noise_var;
    loop.enable_quantization = c.loop.enable_quantization;
    detail::read(l, "encoder_step", loop.encoder_step);
    detail::read(l, "ff_noise_var", loop.ff_noise_var);
    detail::read(l, "enable_quantization", loop.enable_quantization);
    c.loop = loop;
  }
  if (j.contains("filter")) {
    const json& f = j.at("filter");
    detail::check_keys(f, {"order", "window", "passes"}, "filter");
    detail::read(f, "order", c.filter.order);
    detail::read(f, "window", c.filter.window);
    detail::read(f, "passes", c.filter.passes);
  }
  if (j.contains("references")) {
    const json& r = j.at("references");
    detail::check_keys(r, {"jmax", "dwell_s", "train_amax", "train_distances", "train_velocities"}, "references");
    detail::read(r, "jmax", c.references.jmax);
    detail::read(r, "dwell_s", c.references.dwell_s);
    detail::read(r, "train_amax", c.references.train_amax);
    detail::read(r, "train_distances", c.references.train_distances);
    detail::read(r, "train_velocities", c.references.train_velocities);
  }
  if (j.contains("linear")) {
    const json& l = j.at("linear");
    detail::check_keys(l, {"method", "noncausal_order", "identify", "initial_scale", "max_evaluations"}, "linear");
    if (l.contains("method")) c.linear.method = detail::method_from_string(l.at("method").get<std::string>());
    detail::read(l, "noncausal_order", c.linear.noncausal_order);
    detail::read(l, "identify", c.linear.identify);
    detail::read(l, "initial_scale", c.linear.initial_scale);
    detail::read(l, "max_evaluations", c.linear.max_evaluations);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    detail::check_keys(t, {"gru", "preview-gru", "pg-gru"}, "train");
    for (ModelKind m : kAllModels)
      if (t.contains(to_string(m))) from_json(t.at(to_string(m)), c.train_config(m), "train." + to_string(m));
  }
  if (j.contains("search")) {
    const json& s = j.at("search");
    detail::check_keys(s, {"budget", "epochs", "mode"}, "search");
    detail::read(s, "budget", c.search.budget);
    detail::read(s, "epochs", c.search.epochs);
    if (s.contains("mode")) c.search.mode = model_kind_from_string(s.at("mode").get<std::string>());
  }
}

/// Preset defaults, then the config file (its own "preset" key selects the
/// base unless `preset_override` is given).
inline ExperimentConfig load_config(const std::filesystem::path& path, const std::string& preset_override = "") {
  json j = json::object();
  if (!path.empty()) j = io::read_json(path);
  std::string preset = preset_override;
  if (preset.empty()) preset = j.value("preset", std::string("desk"));
  ExperimentConfig c = preset_config(preset);
  j.erase("preset");
  apply_json(c, j);
  c.preset = preset;
  c.validate();
  return c;
}

}  // namespace pgff::pipeline
