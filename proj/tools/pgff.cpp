// Command-line driver for the feedforward experiment pipeline:
//   generate -> design-linear -> train -> evaluate, plus hyperparameter search.

#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "pgff/error.hpp"
#include "pgff/pipeline/config.hpp"
#include "pgff/pipeline/stages.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;

struct Options {
  std::string config;
  std::string out;
  std::string mode;
  std::string preset;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int budget = 0;
  int threads = -1;
  bool quiet = false;
};

pgff::pipeline::ExperimentConfig resolve(const Options& o) {
  pgff::pipeline::ExperimentConfig cfg = pgff::pipeline::load_config(o.config, o.preset);
  if (o.seed_given) cfg.seed = o.seed;
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (o.budget > 0) cfg.search.budget = o.budget;
  if (o.threads >= 0) cfg.threads = o.threads;
  cfg.validate();
  return cfg;
}

std::vector<pgff::pipeline::ModelKind> train_targets(const std::string& mode) {
  using pgff::pipeline::ModelKind;
  if (mode.empty() || mode == "all") return {ModelKind::gru, ModelKind::preview_gru, ModelKind::pg_gru};
  return {pgff::pipeline::model_kind_from_string(mode)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physics-guided preview-GRU feedforward: data generation, linear inverse design, training, evaluation"};
  app.require_subcommand(1, 1);
  Options o;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config, "Experiment configuration (JSON)");
    cmd->add_option("--seed", o.seed, "Master seed (overrides the config)")->each([&](const std::string&) {
      o.seed_given = true;
    });
    cmd->add_option("--out", o.out, "Output directory (overrides the config)");
    cmd->add_option("--preset", o.preset, "Base defaults")->check(CLI::IsMember({"desk", "full"}));
    cmd->add_option("--threads", o.threads, "Worker threads for evaluation and search (0 = all cores)")
        ->check(CLI::NonNegativeNumber);
    cmd->add_flag("--quiet,-q", o.quiet, "Suppress progress messages");
  };

  CLI::App* gen = app.add_subcommand("generate", "Simulate the training and validation experiments");
  CLI::App* lin = app.add_subcommand("design-linear", "Design the stable linear inverse (optionally identifying the plant first)");
  CLI::App* trn = app.add_subcommand("train", "Train GRU feedforward models");
  CLI::App* evl = app.add_subcommand("evaluate", "Closed-loop IAE and inverse-model NRMS of every controller");
  CLI::App* srh = app.add_subcommand("search", "Random hyperparameter search over the grid");
  for (CLI::App* c : {gen, lin, trn, evl, srh}) add_common(c);
  trn->add_option("--mode", o.mode, "Model to train")->check(CLI::IsMember({"gru", "preview-gru", "pg-gru", "all"}));
  srh->add_option("--mode", o.mode, "Model family to search")->check(CLI::IsMember({"gru", "preview-gru", "pg-gru"}));
  srh->add_option("--budget", o.budget, "Number of trials")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  const pgff::pipeline::Log log = [&](const std::string& msg) {
    if (!o.quiet) std::cerr << "[pgff] " << msg << '\n';
  };

  try {
    pgff::pipeline::ExperimentConfig cfg = resolve(o);
    if (gen->parsed()) {
      pgff::pipeline::run_generate(cfg, log);
    } else if (lin->parsed()) {
      pgff::pipeline::run_design_linear(cfg, log);
    } else if (trn->parsed()) {
      for (auto m : train_targets(o.mode)) pgff::pipeline::run_train(cfg, m, log);
    } else if (evl->parsed()) {
      const auto res = pgff::pipeline::run_evaluate(cfg, log);
      std::cout << "IAE [rad s]";
      for (const auto& r : res.references) std::cout << ',' << r;
      std::cout << '\n';
      for (const auto& name : pgff::pipeline::controller_names()) {
        std::cout << name;
        for (double v : res.iae.at(name)) std::cout << ',' << v;
        std::cout << '\n';
      }
      std::cout << "NRMS [%]";
      for (const auto& r : res.references) std::cout << ',' << r;
      std::cout << '\n';
      for (const char* name : {"linear", "gru", "preview-gru", "pg-gru"}) {
        std::cout << name;
        for (double v : res.nrms.at(name)) std::cout << ',' << v;
        std::cout << '\n';
      }
    } else if (srh->parsed()) {
      if (!o.mode.empty()) cfg.search.mode = pgff::pipeline::model_kind_from_string(o.mode);
      const auto results = pgff::pipeline::run_search(cfg, log);
      if (!results.empty() && results.front().ok())
        std::cout << "best trial " << results.front().trial << ": validation NRMS " << results.front().validation_nrms
                  << " %\n";
    }
  } catch (const pgff::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const pgff::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "file error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}
