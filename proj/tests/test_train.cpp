#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pgff/gru/io.hpp"
#include "pgff/train/optim.hpp"
#include "pgff/train/search.hpp"

using namespace pgff;
using namespace pgff::train;

TEST(Gradients, MatchCentralDifferencesForEveryBlock) {
  for (const auto& b : oracle::standard_gradient_check()) {
    EXPECT_LT(b.rel_error, 1e-5) << b.name;
    EXPECT_GT(b.fd_norm, 0.0) << b.name;
  }
}

TEST(Gradients, StackedModelWithoutPreview) {
  const gru::GruModel m = oracle::dense_random_model({2, 3, 0}, 41);
  const Sequence y = oracle::gaussian_sequence(15, 42);
  const Sequence u = oracle::gaussian_sequence(15, 43);
  for (const auto& b : oracle::gradient_check(m, u, y, 0, 1e-3)) EXPECT_LT(b.rel_error, 1e-5) << b.name;
}

TEST(Gradients, L2TermIsTwiceLambdaTheta) {
  const gru::GruModel m = oracle::dense_random_model({1, 4, 2}, 3);
  const Sequence y = oracle::gaussian_sequence(20, 4);
  const Sequence u = oracle::gaussian_sequence(20, 5);
  const GradientResult a = gradients(m, u, y, 3, 0.0);
  const GradientResult b = gradients(m, u, y, 3, 0.5);
  const auto blocks = m.blocks();
  for (std::size_t i = 0; i < blocks.size(); ++i)
    EXPECT_LT((b.grads[i] - a.grads[i] - 1.0 * *blocks[i]).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(b.loss - a.loss, 0.5 * m.squared_norm(), 1e-12);
}

TEST(Loss, ExcludedSamplesDoNotMatter) {
  const gru::GruModel m = oracle::dense_random_model({1, 4, 2}, 8);
  const Sequence y = oracle::gaussian_sequence(30, 9);
  Sequence u = oracle::gaussian_sequence(30, 10);
  const int beta = 6;
  const double l0 = loss_preview(m, u, y, beta, 1e-3);
  const GradientResult g0 = gradients(m, u, y, beta, 1e-3);
  for (int k = 0; k < beta; ++k) u[static_cast<std::size_t>(k)] += 100.0 * (k + 1);
  EXPECT_EQ(loss_preview(m, u, y, beta, 1e-3), l0);
  const GradientResult g1 = gradients(m, u, y, beta, 1e-3);
  for (std::size_t i = 0; i < g0.grads.size(); ++i) EXPECT_TRUE(g0.grads[i] == g1.grads[i]);
  u[beta] += 1.0;
  EXPECT_NE(loss_preview(m, u, y, beta, 1e-3), l0);
}

TEST(Loss, EmptyRangeRejected) {
  const gru::GruModel m = oracle::dense_random_model({1, 2, 4}, 1);
  EXPECT_THROW(loss_preview(m, Sequence(10, 0.0), Sequence(10, 0.0), 6, 0.0), ConfigError);
}

TEST(Loss, TapeLossMatchesForwardLoss) {
  const gru::GruModel m = oracle::dense_random_model({2, 5, 3}, 12);
  const Sequence y = oracle::gaussian_sequence(40, 13);
  const Sequence u = oracle::gaussian_sequence(40, 14);
  EXPECT_NEAR(gradients(m, u, y, 4, 1e-4).loss, loss_preview(m, u, y, 4, 1e-4), 1e-12);
}

TEST(Clipping, RescalesWithoutChangingDirection) {
  std::vector<Matrix> g{Matrix::Constant(2, 2, 3.0), Matrix::Constant(1, 3, -4.0)};
  const std::vector<Matrix> before = g;
  clip_gradient_norm(g, 1.0);
  EXPECT_NEAR(global_norm(g), 1.0, 1e-14);
  const double s = g[0](0, 0) / before[0](0, 0);
  EXPECT_GT(s, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_LT((g[i] - s * before[i]).cwiseAbs().maxCoeff(), 1e-15);
  std::vector<Matrix> small{Matrix::Constant(1, 1, 0.1)};
  clip_gradient_norm(small, 1.0);
  EXPECT_EQ(small[0](0, 0), 0.1);
  EXPECT_THROW(clip_gradient_norm(small, 0.0), ConfigError);
}

TEST(Adam, FirstStepMovesByLearningRateAgainstGradientSign) {
  gru::GruModel m = gru::zero_model({1, 2, 0});
  AdamState st = AdamState::for_model(m);
  std::vector<Matrix> g;
  for (const Matrix* b : m.blocks()) g.push_back(Matrix::Constant(b->rows(), b->cols(), -0.3));
  adam_step(m, g, st, 0.01);
  EXPECT_EQ(st.step, 1);
  for (const Matrix* b : m.blocks()) EXPECT_NEAR(b->minCoeff(), 0.01, 1e-9);
}

TEST(Adam, LossDecreasesOnTeacherStudentTask) {
  const gru::GruModel teacher = oracle::teacher_model();
  const Sequence y = oracle::smooth_excitation(400, 3);
  const Sequence u = gru::gru_forward(teacher, y, false).u_hat;
  gru::GruModel m = gru::init_params({1, 8, 3}, gru::InitScheme::xavier, 7);
  m.norm = gru::fit_normalization(y, u);
  AdamState st = AdamState::for_model(m);
  const double l0 = loss_preview(m, u, y, 3, 0.0);
  for (int i = 0; i < 10; ++i) {
    GradientResult g = gradients(m, u, y, 3, 0.0);
    adam_step(m, g.grads, st, 1e-4);
  }
  EXPECT_LT(loss_preview(m, u, y, 3, 0.0), l0);
}

TEST(Tbptt, TeacherStudentRecovery) {
  const oracle::TeacherStudent r = oracle::teacher_student();
  EXPECT_LT(r.validation_nrms, 2.0);
  EXPECT_LT(r.final_loss, 0.01 * r.initial_loss);
  EXPECT_EQ(r.loss_history.size(), 300u);
}

TEST(Tbptt, DeterministicUnderFixedSeed) {
  TrainConfig c = oracle::student_config();
  c.epochs = 3;
  c.n_gru = 6;
  const Sequence y = oracle::smooth_excitation(1500, 4);
  const Sequence u = gru::gru_forward(oracle::teacher_model(), y, false).u_hat;
  auto run = [&] {
    return tbptt_train(gru::init_params(c.architecture(), c.init_scheme, c.seed), {y, u}, c, TrainMode::inverse);
  };
  const TrainResult a = run(), b = run();
  EXPECT_EQ(a.loss_history, b.loss_history);
  EXPECT_EQ(gru::model_to_json(a.model), gru::model_to_json(b.model));
}

TEST(Tbptt, ConfigValidation) {
  TrainConfig c = oracle::student_config();
  c.tbptt_length = c.beta + c.eta;
  EXPECT_THROW(c.validate(), ConfigError);
  c = oracle::student_config();
  const Sequence y = oracle::smooth_excitation(500, 4);
  EXPECT_THROW(tbptt_train(gru::init_params({1, 4, 0}, c.init_scheme, 1), {y, y}, c, TrainMode::inverse), ConfigError);
}

TEST(Nrms, Definition) {
  const Sequence a{1.0, 2.0, 3.0, 4.0};
  EXPECT_EQ(nrms(a, a), 0.0);
  EXPECT_NEAR(nrms(Sequence(4, 2.5), a), 100.0, 1e-12);
  EXPECT_THROW(nrms(a, Sequence(4, 1.0)), NumericalError);
  EXPECT_THROW(nrms(a, Sequence(3, 1.0)), ConfigError);
}

TEST(Nrms, KnownNoiseLevel) {
  const Sequence s = oracle::gaussian_sequence(200000, 1);
  const Sequence n = oracle::gaussian_sequence(200000, 2, 0.05);
  Sequence p(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) p[i] = s[i] + n[i];
  EXPECT_NEAR(nrms(p, s), 5.0, 0.05);
}

TEST(Search, SamplesLieOnGridWithBetaEqualEta) {
  const HyperGrid grid;
  TrainConfig base;
  base.epochs = 7;
  for (int i = 0; i < 200; ++i) {
    const TrainConfig c = sample_config(grid, base, trial_seed(11, i));
    EXPECT_TRUE(grid.contains(c));
    EXPECT_EQ(c.beta, c.eta);
    EXPECT_EQ(c.epochs, 7);
  }
}

TEST(Search, SameSeedSameSamples) {
  const HyperGrid grid;
  for (int i = 0; i < 20; ++i) {
    const TrainConfig a = sample_config(grid, {}, trial_seed(5, i));
    const TrainConfig b = sample_config(grid, {}, trial_seed(5, i));
    EXPECT_EQ(a.layers, b.layers);
    EXPECT_EQ(a.learning_rate, b.learning_rate);
    EXPECT_EQ(a.tbptt_length, b.tbptt_length);
    EXPECT_EQ(a.seed, b.seed);
  }
  std::set<std::uint64_t> seeds;
  for (int i = 0; i < 50; ++i) seeds.insert(trial_seed(5, i));
  EXPECT_EQ(seeds.size(), 50u);
}

TEST(Search, SinglePointGrid) {
  HyperGrid g;
  g.layers = {3};
  g.neurons = {16};
  g.beta_eta = {8};
  g.lambda = {2e-5};
  g.tbptt_length = {299};
  g.learning_rate = {4e-4};
  g.clip_norm = {0.2};
  g.batch_size = {4};
  g.init = {gru::InitScheme::kaiming};
  for (std::uint64_t s : {1u, 2u, 99u}) {
    const TrainConfig c = sample_config(g, {}, s);
    EXPECT_EQ(c.layers, 3);
    EXPECT_EQ(c.n_gru, 16);
    EXPECT_EQ(c.eta, 8);
    EXPECT_EQ(c.lambda, 2e-5);
    EXPECT_EQ(c.init_scheme, gru::InitScheme::kaiming);
  }
}

TEST(Search, RanksByNrmsAndRecordsFailures) {
  const TrialFunction run = [](const TrainConfig& c) -> TrialOutcome {
    if (c.layers == 7) throw NumericalError("diverged");
    return {1.0, static_cast<double>(c.n_gru) + 0.01 * c.layers};
  };
  const auto results = random_search(HyperGrid{}, 30, 77, {}, run, 3);
  ASSERT_EQ(results.size(), 30u);
  bool seen_failure = false;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i].ok()) {
      seen_failure = true;
      EXPECT_EQ(results[i].error, "diverged");
      continue;
    }
    EXPECT_FALSE(seen_failure) << "completed trial ranked after a failure";
    if (i > 0 && results[i - 1].ok()) {
      EXPECT_LE(results[i - 1].validation_nrms, results[i].validation_nrms);
    }
  }
  EXPECT_TRUE(seen_failure);
  const auto serial = random_search(HyperGrid{}, 30, 77, {}, run, 1);
  for (std::size_t i = 0; i < results.size(); ++i) EXPECT_EQ(results[i].trial, serial[i].trial);
  EXPECT_THROW(random_search(HyperGrid{}, 0, 1, {}, run), ConfigError);
}

TEST(Search, BudgetOneGivesOneConfig) {
  const auto r = random_search(HyperGrid{}, 1, 3, {}, [](const TrainConfig&) { return TrialOutcome{0.5, 10.0}; });
  ASSERT_EQ(r.size(), 1u);
  EXPECT_TRUE(HyperGrid{}.contains(r[0].config));
}
