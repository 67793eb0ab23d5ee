#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "pgff/gru/io.hpp"
#include "pgff/inversion.hpp"
#include "pgff/io/csv.hpp"
#include "pgff/pipeline/artifacts.hpp"
#include "pgff/pipeline/config.hpp"
#include "pgff/plant/datasets.hpp"
#include "pgff/plant/identification.hpp"
#include "pgff/train/search.hpp"
#include "pgff/train/tbptt.hpp"

namespace pgff::pipeline {

namespace fs = std::filesystem;

using Log = std::function<void(const std::string&)>;

/// File layout below the output directory.
struct Paths {
  fs::path root;

  [[nodiscard]] fs::path training() const { return root / "data" / "training.csv"; }
  [[nodiscard]] fs::path validation() const { return root / "data" / "validation.csv"; }
  [[nodiscard]] fs::path linear_controller() const { return root / "linear" / "controller.json"; }
  [[nodiscard]] fs::path linear_report() const { return root / "linear" / "report.json"; }
  [[nodiscard]] fs::path model(ModelKind m) const { return root / "models" / (to_string(m) + ".json"); }
  [[nodiscard]] fs::path loss_history(ModelKind m) const { return root / "models" / (to_string(m) + "_loss.csv"); }
  [[nodiscard]] fs::path iae_table() const { return root / "eval" / "iae.csv"; }
  [[nodiscard]] fs::path nrms_table() const { return root / "eval" / "nrms.csv"; }
  [[nodiscard]] fs::path summary() const { return root / "eval" / "summary.json"; }
  [[nodiscard]] fs::path trace(const std::string& controller, const std::string& ref) const {
    return root / "eval" / "traces" / (controller + "_" + ref + ".csv");
  }
  [[nodiscard]] fs::path search_ledger() const { return root / "search" / "ledger.csv"; }
  [[nodiscard]] fs::path search_best() const { return root / "search" / "best_config.json"; }
};

inline Paths paths(const ExperimentConfig& cfg) { return {cfg.out_dir}; }

/// Provenance attached to every output file.
inline json provenance(const ExperimentConfig& cfg, const std::string& stage) {
  return {{"stage", stage}, {"master_seed", cfg.seed}, {"preset", cfg.preset}, {"schema_version", io::kSchemaVersion}};
}

inline void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

/// CSV table with a metadata sidecar carrying the provenance and header.
inline void write_table(const io::CsvTable& t, const fs::path& path, json meta) {
  ensure_parent(path);
  t.write(path);
  io::write_json(io::metadata_path(path), meta);
}

inline std::string fmt(double v) { return io::format_double(v); }

// ---- generate -------------------------------------------------------------

struct GenerateResult {
  std::size_t training_rows = 0;
  std::size_t validation_rows = 0;
};

inline GenerateResult run_generate(const ExperimentConfig& cfg, const Log& log = {}) {
  const Paths p = paths(cfg);
  plant::DataSet tr =
      plant::generate_training_data(cfg.plant, cfg.parasitics, cfg.loop, cfg.data_seed(), cfg.filter, cfg.references);
  tr.metadata["provenance"] = provenance(cfg, "generate");
  ensure_parent(p.training());
  io::write_dataset(tr, p.training());
  if (log) log("wrote " + p.training().string() + " (" + std::to_string(tr.size()) + " samples)");

  plant::DataSet va = plant::generate_validation_data(cfg.plant, cfg.parasitics, cfg.loop, cfg.filter, cfg.references);
  va.metadata["provenance"] = provenance(cfg, "generate");
  io::write_dataset(va, p.validation());
  if (log) log("wrote " + p.validation().string() + " (" + std::to_string(va.size()) + " samples)");
  return {tr.size(), va.size()};
}

inline plant::DataSet load_dataset(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("missing data set " + path.string() + " (run generate first)");
  return io::read_dataset(path);
}

// ---- design-linear --------------------------------------------------------

struct LinearDesignResult {
  LinearArtifact artifact;
  json report;
};

inline LinearDesignResult run_design_linear(const ExperimentConfig& cfg, const Log& log = {}) {
  const Paths p = paths(cfg);
  json report = provenance(cfg, "design-linear");
  plant::TwoMsdParams model = cfg.plant;
  if (cfg.linear.identify) {
    const plant::DataSet tr = load_dataset(p.training());
    const plant::TwoMsdParams theta0 = cfg.plant.scaled(cfg.linear.initial_scale);
    plant::NelderMeadOptions opt;
    opt.max_evaluations = cfg.linear.max_evaluations;
    if (log) log("identifying plant parameters from " + p.training().string());
    const plant::IdentificationResult id = plant::identify_physical_params(tr, cfg.loop, theta0, opt);
    model = id.params;
    json rel;
    const auto fitted = model.values();
    const auto configured = cfg.plant.values();
    for (std::size_t i = 0; i < fitted.size(); ++i)
      rel[plant::TwoMsdParams::kNames[i]] = (fitted[i] - configured[i]) / configured[i];
    report["identification"] = {{"initial_parameters", plant::to_json(theta0)},
                                {"fitted_parameters", plant::to_json(model)},
                                {"relative_to_configured", rel},
                                {"initial_cost", id.initial_cost},
                                {"cost", id.cost},
                                {"evaluations", id.evaluations}};
  }
  const lti::DiscreteStateSpace dss = lti::zoh_discretize(plant::build_2msd(model), cfg.loop.Ts);
  const lti::RationalTransferFunction g = lti::ss_to_tf(dss);
  LinearArtifact art;
  art.ff = inversion::design_stable_inverse(dss, cfg.linear.method, cfg.linear.noncausal_order);
  art.model = model;
  art.Ts = cfg.loop.Ts;

  report["model_parameters"] = plant::to_json(model);
  report["plant_poles"] = complex_list(sorted_roots(g.den));
  report["plant_zeros"] = complex_list(sorted_roots(g.num));
  report["relative_degree"] = inversion::relative_degree(dss);
  report["eta0"] = art.ff.eta0;
  report["n_ep"] = art.ff.n_ep;
  report["preview"] = art.ff.preview();
  report["unstable_inverse_poles"] = complex_list(art.ff.unstable_poles);
  report["method"] = cfg.linear.method == inversion::StableInversionMethod::zpetc ? "zpetc" : "noncausal";
  if (cfg.linear.method == inversion::StableInversionMethod::noncausal) {
    report["noncausal_order"] = art.ff.noncausal_order;
    report["truncation_tail_bound"] = art.ff.tail_bound;
  }

  ensure_parent(p.linear_controller());
  save_linear_artifact(art, p.linear_controller(), provenance(cfg, "design-linear"));
  io::write_json(p.linear_report(), report);
  if (log)
    log("eta0 = " + std::to_string(art.ff.eta0) + ", n_ep = " + std::to_string(art.ff.n_ep) + ", wrote " +
        p.linear_controller().string());
  return {art, report};
}

// ---- train ----------------------------------------------------------------

/// Input/target pair of a model kind: the filtered output as input and the
/// applied input (gru, preview-gru) or the residual of the linear inverse
/// (pg-gru) as target.
inline train::TrainingData training_pair(ModelKind m, const plant::DataSet& ds, const LinearArtifact* linear) {
  if (m != ModelKind::pg_gru) return {ds.yf, ds.u};
  if (!linear) throw ConfigError("pg-gru training needs the linear controller artifact (run design-linear first)");
  const Sequence u_phy = inversion::inverse_prediction(linear->ff, ds.yf);
  return {ds.yf, inversion::residuals(ds.u, u_phy)};
}

struct TrainStageResult {
  train::TrainResult result;
  train::TrainConfig config;
};

inline TrainStageResult run_train(const ExperimentConfig& cfg, ModelKind m, const Log& log = {}) {
  const Paths p = paths(cfg);
  std::optional<LinearArtifact> linear;
  if (m == ModelKind::pg_gru) linear = load_linear_artifact(p.linear_controller());
  const plant::DataSet tr = load_dataset(p.training());
  const train::TrainingData data = training_pair(m, tr, linear ? &*linear : nullptr);

  train::TrainConfig tc = cfg.train_config(m);
  tc.seed = cfg.train_seed(m);
  const gru::GruModel init = gru::init_params(tc.architecture(), tc.init_scheme, tc.seed);
  if (log) log("training " + to_string(m) + " for " + std::to_string(tc.epochs) + " epochs");
  const train::TrainMode mode = m == ModelKind::pg_gru ? train::TrainMode::residual : train::TrainMode::inverse;
  train::TrainResult res = train::tbptt_train(init, data, tc, mode, [&](int epoch, double loss) {
    if (log) log(to_string(m) + " epoch " + std::to_string(epoch + 1) + "/" + std::to_string(tc.epochs) + " loss " + fmt(loss));
  });

  json meta = provenance(cfg, "train");
  meta["mode"] = to_string(m);
  meta["objective"] = train::to_string(mode);
  meta["train_config"] = to_json(tc);
  meta["initial_loss"] = res.initial_loss;
  meta["final_loss"] = res.loss_history.empty() ? res.initial_loss : res.loss_history.back();
  if (linear) meta["linear_preview"] = linear->ff.preview();
  ensure_parent(p.model(m));
  gru::save_model(res.model, p.model(m).string(), meta);

  io::CsvTable loss({"epoch", "loss"});
  for (std::size_t e = 0; e < res.loss_history.size(); ++e) loss.add_row({std::to_string(e + 1), fmt(res.loss_history[e])});
  json loss_meta = provenance(cfg, "train");
  loss_meta["mode"] = to_string(m);
  loss_meta["initial_loss"] = res.initial_loss;
  write_table(loss, p.loss_history(m), loss_meta);
  if (log) log("wrote " + p.model(m).string());
  return {std::move(res), tc};
}

// ---- evaluate -------------------------------------------------------------

inline const std::vector<std::string>& controller_names() {
  static const std::vector<std::string> names{"none", "zpetc", "gru", "preview-gru", "pg-gru"};
  return names;
}

/// Everything needed to compute feedforward signals.
struct Controllers {
  LinearArtifact linear;
  std::map<ModelKind, gru::GruModel> models;

  static Controllers load(const Paths& p) {
    Controllers c;
    c.linear = load_linear_artifact(p.linear_controller());
    for (ModelKind m : kAllModels) {
      if (!fs::exists(p.model(m)))
        throw ConfigError("missing model artifact " + p.model(m).string() + " (run train --mode " + to_string(m) + ")");
      c.models.emplace(m, gru::load_model(p.model(m).string()));
    }
    return c;
  }
};

struct FeedforwardSignals {
  Sequence u_ff;
  Sequence u_phy;  // pg-gru only
  Sequence u_gru;  // pg-gru only
};

/// Feedforward of a named controller on a reference; learned and linear
/// laws act on the smoothed reference.
inline FeedforwardSignals feedforward(const std::string& name, const Controllers& c, const Sequence& r,
                                      const sgfilter::SavGolFilter& filter) {
  FeedforwardSignals s;
  if (name == "none") {
    s.u_ff.assign(r.size(), 0.0);
    return s;
  }
  const Sequence rf = sgfilter::apply_centered(filter, r);
  if (name == "zpetc") {
    s.u_ff = inversion::linear_ff_input(c.linear.ff, rf);
  } else if (name == "gru") {
    s.u_ff = gru::gru_feedforward(c.models.at(ModelKind::gru), rf);
  } else if (name == "preview-gru") {
    s.u_ff = gru::gru_feedforward(c.models.at(ModelKind::preview_gru), rf);
  } else if (name == "pg-gru") {
    s.u_phy = inversion::linear_ff_input(c.linear.ff, rf);
    s.u_gru = gru::gru_feedforward(c.models.at(ModelKind::pg_gru), rf);
    s.u_ff.resize(r.size());
    for (std::size_t k = 0; k < r.size(); ++k) s.u_ff[k] = s.u_phy[k] + s.u_gru[k];
  } else {
    throw ConfigError("unknown controller " + name);
  }
  return s;
}

/// Validation-data predictions of the applied input by each inverse model,
/// truncated to the common length.
inline std::map<std::string, Sequence> inverse_predictions(const Controllers& c, const plant::DataSet& va) {
  std::map<std::string, Sequence> out;
  out["linear"] = inversion::inverse_prediction(c.linear.ff, va.yf);
  out["gru"] = gru::gru_forward(c.models.at(ModelKind::gru), va.yf, false).u_hat;
  out["preview-gru"] = gru::gru_forward(c.models.at(ModelKind::preview_gru), va.yf, false).u_hat;
  const Sequence res = gru::gru_forward(c.models.at(ModelKind::pg_gru), va.yf, false).u_hat;
  Sequence pg(std::min(res.size(), out["linear"].size()));
  for (std::size_t k = 0; k < pg.size(); ++k) pg[k] = out["linear"][k] + res[k];
  out["pg-gru"] = std::move(pg);
  std::size_t n = va.size();
  for (const auto& [name, seq] : out) n = std::min(n, seq.size());
  for (auto& [name, seq] : out) seq.resize(n);
  return out;
}

struct EvaluateResult {
  std::map<std::string, std::vector<double>> iae;   // controller -> per reference
  std::map<std::string, std::vector<double>> nrms;  // inverse model -> per reference
  std::vector<std::string> references;
};

template <typename F>
void parallel_for(std::size_t n, int threads, F&& body) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(n, threads > 0 ? static_cast<std::size_t>(threads) : hw);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (std::thread& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline EvaluateResult run_evaluate(const ExperimentConfig& cfg, const Log& log = {}) {
  const Paths p = paths(cfg);
  const Controllers ctl = Controllers::load(p);
  const plant::DataSet va = load_dataset(p.validation());
  const plant::ValidationReferences refs = plant::generate_validation_refs(cfg.loop, cfg.references);
  const plant::TwoMassPlant rig(cfg.plant, cfg.parasitics, cfg.loop.Ts);
  const sgfilter::SavGolFilter filter = cfg.filter.design();
  const auto& names = controller_names();
  const std::size_t n_ref = refs.segments.size();

  EvaluateResult out;
  for (const auto& s : refs.segments) out.references.push_back(s.name);
  for (const auto& n : names) out.iae[n].assign(n_ref, 0.0);

  struct Run {
    plant::DataSet ds;
    FeedforwardSignals ff;
  };
  std::vector<Run> runs(names.size() * n_ref);
  parallel_for(runs.size(), cfg.threads, [&](std::size_t i) {
    const std::string& name = names[i / n_ref];
    const Sequence r = refs.segment(i % n_ref);
    Run& run = runs[i];
    run.ff = feedforward(name, ctl, r, filter);
    run.ds = plant::simulate_closed_loop(rig, cfg.loop, r, run.ff.u_ff);
  });

  json trace_meta = provenance(cfg, "evaluate");
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const std::string& name = names[i / n_ref];
    const std::string& ref = out.references[i % n_ref];
    const Run& run = runs[i];
    const Sequence e = plant::tracking_error(run.ds);
    out.iae[name][i % n_ref] = plant::iae(e, cfg.loop.Ts);

    const bool split = name == "pg-gru";
    std::vector<std::string> header{"k", "t", "r", "uff", "ufb", "u", "y", "e"};
    if (split) header.insert(header.end(), {"u_phy", "u_gru"});
    io::CsvTable t(header);
    for (std::size_t k = 0; k < run.ds.size(); ++k) {
      std::vector<std::string> row{std::to_string(k),      fmt(run.ds.t[k]),   fmt(run.ds.r[k]), fmt(run.ds.uff[k]),
                                   fmt(run.ds.ufb[k]),     fmt(run.ds.u[k]),   fmt(run.ds.y[k]), fmt(e[k])};
      if (split) row.insert(row.end(), {fmt(run.ff.u_phy[k]), fmt(run.ff.u_gru[k])});
      t.add_row(std::move(row));
    }
    json meta = trace_meta;
    meta["controller"] = name;
    meta["reference"] = ref;
    write_table(t, p.trace(name, ref), meta);
  }

  const std::map<std::string, Sequence> pred = inverse_predictions(ctl, va);
  const std::size_t n_pred = pred.begin()->second.size();
  for (const char* model : {"linear", "gru", "preview-gru", "pg-gru"}) {
    std::vector<double>& row = out.nrms[model];
    for (const auto& seg : refs.segments) {
      const std::size_t b = seg.begin, e = std::min(seg.end, n_pred);
      require(b < e, "evaluate: validation segment shorter than the preview");
      const Sequence actual(va.u.begin() + static_cast<std::ptrdiff_t>(b), va.u.begin() + static_cast<std::ptrdiff_t>(e));
      const Sequence& full = pred.at(model);
      const Sequence predicted(full.begin() + static_cast<std::ptrdiff_t>(b), full.begin() + static_cast<std::ptrdiff_t>(e));
      row.push_back(train::nrms(predicted, actual));
    }
  }

  std::vector<std::string> header{"controller"};
  header.insert(header.end(), out.references.begin(), out.references.end());
  io::CsvTable iae_table(header);
  for (const auto& n : names) {
    std::vector<std::string> row{n};
    for (double v : out.iae.at(n)) row.push_back(fmt(v));
    iae_table.add_row(std::move(row));
  }
  json iae_meta = provenance(cfg, "evaluate");
  iae_meta["quantity"] = "IAE = Ts * sum |r - y| over each reference run, rad*s";
  write_table(iae_table, p.iae_table(), iae_meta);

  header[0] = "model";
  io::CsvTable nrms_table(header);
  for (const char* model : {"linear", "gru", "preview-gru", "pg-gru"}) {
    std::vector<std::string> row{model};
    for (double v : out.nrms.at(model)) row.push_back(fmt(v));
    nrms_table.add_row(std::move(row));
  }
  json nrms_meta = provenance(cfg, "evaluate");
  nrms_meta["quantity"] = "100 * |u_pred - u|_2 / |u - mean(u)|_2 on the validation record, percent";
  nrms_meta["samples_per_prediction"] = n_pred;
  write_table(nrms_table, p.nrms_table(), nrms_meta);

  json summary = provenance(cfg, "evaluate");
  summary["references"] = out.references;
  summary["iae"] = out.iae;
  summary["nrms"] = out.nrms;
  io::write_json(p.summary(), summary);
  if (log) log("wrote " + p.iae_table().string() + " and " + p.nrms_table().string());
  return out;
}

// ---- search ---------------------------------------------------------------

inline std::vector<train::TrialResult> run_search(const ExperimentConfig& cfg, const Log& log = {}) {
  const Paths p = paths(cfg);
  const ModelKind m = cfg.search.mode;
  std::optional<LinearArtifact> linear;
  if (m == ModelKind::pg_gru) linear = load_linear_artifact(p.linear_controller());
  const plant::DataSet tr = load_dataset(p.training());
  const plant::DataSet va = load_dataset(p.validation());
  const train::TrainingData data = training_pair(m, tr, linear ? &*linear : nullptr);
  const train::TrainingData val = training_pair(m, va, linear ? &*linear : nullptr);
  const train::HyperGrid grid;
  // Score every trial on the same samples whatever its preview.
  const std::size_t longest = static_cast<std::size_t>(*std::max_element(grid.beta_eta.begin(), grid.beta_eta.end()));
  require(va.size() > longest + 1, "search: validation record shorter than the longest preview");
  const std::size_t n_score = std::min(val.target.size(), va.size() - longest);
  const Sequence actual(va.u.begin(), va.u.begin() + static_cast<std::ptrdiff_t>(n_score));
  const Sequence u_phy = linear ? inversion::inverse_prediction(linear->ff, va.yf) : Sequence();

  train::TrainConfig base = cfg.train_config(m);
  base.epochs = cfg.search.epochs;
  const train::TrainMode mode = m == ModelKind::pg_gru ? train::TrainMode::residual : train::TrainMode::inverse;
  std::atomic<int> done{0};
  auto trial = [&](const train::TrainConfig& tc) {
    const gru::GruModel init = gru::init_params(tc.architecture(), tc.init_scheme, tc.seed);
    const train::TrainResult res = train::tbptt_train(init, data, tc, mode);
    const Sequence out = gru::gru_forward(res.model, val.input, false).u_hat;
    Sequence predicted(n_score);
    for (std::size_t k = 0; k < n_score; ++k) predicted[k] = out[k] + (linear ? u_phy[k] : 0.0);
    if (log) log("search trial " + std::to_string(++done) + "/" + std::to_string(cfg.search.budget) + " finished");
    return train::TrialOutcome{res.loss_history.empty() ? res.initial_loss : res.loss_history.back(),
                               train::nrms(predicted, actual)};
  };
  const std::vector<train::TrialResult> results =
      train::random_search(grid, cfg.search.budget, cfg.search_seed(), base, trial,
                           cfg.threads > 0 ? cfg.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));

  io::CsvTable ledger({"rank", "trial", "layers", "n_gru", "beta_eta", "lambda", "tbptt_length", "learning_rate",
                       "clip_norm", "batch_size", "init", "epochs", "seed", "final_loss", "validation_nrms",
                       "wall_time_s", "status"});
  for (std::size_t i = 0; i < results.size(); ++i) {
    const train::TrialResult& r = results[i];
    const train::TrainConfig& c = r.config;
    ledger.add_row({std::to_string(i + 1), std::to_string(r.trial), std::to_string(c.layers), std::to_string(c.n_gru),
                    std::to_string(c.eta), fmt(c.lambda), std::to_string(c.tbptt_length), fmt(c.learning_rate),
                    fmt(c.clip_norm), std::to_string(c.batch_size), gru::to_string(c.init_scheme),
                    std::to_string(c.epochs), std::to_string(r.seed), fmt(r.final_loss), fmt(r.validation_nrms),
                    fmt(r.wall_time), r.ok() ? "ok" : "failed: " + r.error});
  }
  json meta = provenance(cfg, "search");
  meta["mode"] = to_string(m);
  meta["scored_samples"] = n_score;
  meta["nondeterministic_columns"] = {"wall_time_s"};
  write_table(ledger, p.search_ledger(), meta);

  if (!results.empty() && results.front().ok()) {
    train::TrainConfig best = results.front().config;
    best.epochs = cfg.train_config(m).epochs;
    json j = {{"train", {{to_string(m), to_json(best)}}}};
    io::write_json(p.search_best(), j);
    io::write_json(io::metadata_path(p.search_best()), provenance(cfg, "search"));
  }
  if (log) log("wrote " + p.search_ledger().string());
  return results;
}

}  // namespace pgff::pipeline
