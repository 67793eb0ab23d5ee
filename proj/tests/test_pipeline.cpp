#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "pgff/pipeline/artifacts.hpp"
#include "pgff/pipeline/config.hpp"
#include "pgff/pipeline/stages.hpp"
#include "pgff/seed.hpp"
#include "pgff/train/search.hpp"

using namespace pgff;
using namespace pgff::pipeline;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST(Seeds, DerivedSeedsAreStableAndDistinct) {
  EXPECT_EQ(derive_seed(1, "a"), derive_seed(1, "a"));
  EXPECT_NE(derive_seed(1, "a"), derive_seed(1, "b"));
  EXPECT_NE(derive_seed(1, "a"), derive_seed(2, "a"));
  EXPECT_NE(splitmix64(0), 0u);
}

TEST(Presets, TableHyperparameters) {
  const ExperimentConfig c = preset_config("desk");
  EXPECT_EQ(c.preview_gru.layers, 5);
  EXPECT_EQ(c.preview_gru.n_gru, 128);
  EXPECT_EQ(c.preview_gru.eta, 92);
  EXPECT_EQ(c.preview_gru.beta, 92);
  EXPECT_EQ(c.pg_gru.layers, 7);
  EXPECT_EQ(c.pg_gru.n_gru, 32);
  EXPECT_EQ(c.pg_gru.eta, 48);
  EXPECT_EQ(c.pg_gru.beta, 48);
  EXPECT_EQ(c.gru.eta, 0);
  EXPECT_EQ(c.filter.order, 3);
  EXPECT_EQ(c.filter.window, 141);
  EXPECT_EQ(c.filter.passes, 2);
  EXPECT_NO_THROW(c.validate());
  const ExperimentConfig f = preset_config("full");
  EXPECT_GT(f.pg_gru.epochs, c.pg_gru.epochs);
  EXPECT_GT(f.search.budget, c.search.budget);
  EXPECT_THROW(preset_config("huge"), ConfigError);
}

TEST(Presets, HyperparametersLieOnSearchGrid) {
  const train::HyperGrid grid;
  const ExperimentConfig c = preset_config("desk");
  EXPECT_TRUE(grid.contains(c.preview_gru));
  EXPECT_TRUE(grid.contains(c.pg_gru));
}

TEST(Presets, DistinctDerivedTrainingSeeds) {
  const ExperimentConfig c = preset_config("desk");
  EXPECT_NE(c.train_seed(ModelKind::gru), c.train_seed(ModelKind::preview_gru));
  EXPECT_NE(c.train_seed(ModelKind::pg_gru), c.data_seed());
}

TEST(ConfigFile, OverridesApply) {
  const fs::path p = write_temp("pgff_cfg_ok.json", R"({"seed": 9, "out_dir": "elsewhere",
    "train": {"pg-gru": {"epochs": 3, "learning_rate": 4e-4}}, "loop": {"enable_quantization": false}})");
  const ExperimentConfig c = load_config(p);
  fs::remove(p);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.out_dir, fs::path("elsewhere"));
  EXPECT_EQ(c.pg_gru.epochs, 3);
  EXPECT_EQ(c.pg_gru.learning_rate, 4e-4);
  EXPECT_EQ(c.pg_gru.layers, 7);
  EXPECT_FALSE(c.loop.enable_quantization);
}

TEST(ConfigFile, JsonRoundTrip) {
  ExperimentConfig c = preset_config("full");
  c.seed = 5;
  c.pg_gru.learning_rate = 2e-4;
  const fs::path p = write_temp("pgff_cfg_rt.json", to_json(c).dump());
  const ExperimentConfig back = load_config(p);
  fs::remove(p);
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(ConfigFile, UnknownKeysRejected) {
  for (const char* text : {R"({"sed": 1})", R"({"train": {"pg-gru": {"epoch": 3}}})", R"({"plant": {"J3": 1}})",
                           R"({"loop": {"Ts": 0}})", R"({"train": {"lstm": {}}})"}) {
    const fs::path p = write_temp("pgff_cfg_bad.json", text);
    EXPECT_THROW(load_config(p), ConfigError) << text;
    fs::remove(p);
  }
}

TEST(ConfigFile, InvalidValuesRejected) {
  for (const char* text : {R"({"train": {"gru": {"eta": 4, "beta": 4}}})", R"({"seed": "x"})",
                           R"({"train": {"preview-gru": {"tbptt_length": 100}}})", R"({"preset": "nope"})"}) {
    const fs::path p = write_temp("pgff_cfg_bad2.json", text);
    EXPECT_THROW(load_config(p), ConfigError) << text;
    fs::remove(p);
  }
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
  const fs::path p = write_temp("pgff_cfg_bad3.json", "{ not json");
  EXPECT_THROW(load_config(p), ConfigError);
  fs::remove(p);
}

TEST(LinearArtifact, RoundTripAndMissingFile) {
  const lti::DiscreteStateSpace model = lti::zoh_discretize(plant::build_2msd({}), 5e-4);
  LinearArtifact a{inversion::design_stable_inverse(model, inversion::StableInversionMethod::zpetc), {}, 5e-4};
  const fs::path p = fs::temp_directory_path() / "pgff_linear.json";
  save_linear_artifact(a, p, {{"stage", "test"}});
  const LinearArtifact b = load_linear_artifact(p);
  fs::remove(p);
  EXPECT_EQ(b.ff.kff.num, a.ff.kff.num);
  EXPECT_EQ(b.ff.kff.den, a.ff.kff.den);
  EXPECT_EQ(b.ff.preview(), 2);
  EXPECT_THROW(load_linear_artifact("/nonexistent/controller.json"), ConfigError);
}

TEST(Stages, DefaultLinearDesignReport) {
  ExperimentConfig c = preset_config("desk");
  c.out_dir = fs::temp_directory_path() / "pgff_design_linear";
  fs::remove_all(c.out_dir);
  const LinearDesignResult res = run_design_linear(c);
  EXPECT_EQ(res.report.at("eta0"), 1);
  EXPECT_EQ(res.report.at("n_ep"), 1);
  EXPECT_EQ(res.report.at("unstable_inverse_poles").size(), 1u);
  EXPECT_FALSE(res.report.contains("identification"));
  EXPECT_TRUE(fs::exists(paths(c).root / "linear" / "controller.json"));
  fs::remove_all(c.out_dir);
}

TEST(ConfigFile, ShippedConfigsMatchPresets) {
  for (const char* name : {"desk", "full"}) {
    const fs::path file = fs::path(PGFF_SOURCE_DIR) / "configs" / (std::string(name) + ".json");
    ExperimentConfig expected = preset_config(name);
    expected.out_dir = fs::path("runs") / name;
    EXPECT_EQ(to_json(load_config(file, name)), to_json(expected)) << file;
  }
}
