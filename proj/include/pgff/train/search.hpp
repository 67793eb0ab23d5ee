#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "pgff/error.hpp"
#include "pgff/seed.hpp"
#include "pgff/train/tbptt.hpp"

namespace pgff::train {

/// Candidate values per hyperparameter; beta and eta share one axis.
struct HyperGrid {
  std::vector<int> layers{1, 2, 3, 4, 5, 6, 7};
  std::vector<int> neurons{8, 16, 32, 64, 128};
  std::vector<int> beta_eta{2, 8, 32, 48, 64, 92, 128};
  std::vector<double> lambda{1e-5, 2e-5, 4e-5, 8e-5};
  std::vector<int> tbptt_length{299, 899, 1399, 2099};
  std::vector<double> learning_rate{1e-4, 2e-4, 4e-4, 8e-4, 16e-4};
  std::vector<double> clip_norm{0.1, 0.2, 0.4, 0.8};
  std::vector<int> batch_size{2, 4, 6};
  std::vector<gru::InitScheme> init{gru::InitScheme::kaiming, gru::InitScheme::xavier};

  void validate() const {
    require(!layers.empty() && !neurons.empty() && !beta_eta.empty() && !lambda.empty() && !tbptt_length.empty() &&
                !learning_rate.empty() && !clip_norm.empty() && !batch_size.empty() && !init.empty(),
            "HyperGrid: every axis needs at least one point");
  }

  [[nodiscard]] bool contains(const TrainConfig& c) const {
    auto in = [](const auto& axis, const auto& v) { return std::find(axis.begin(), axis.end(), v) != axis.end(); };
    return in(layers, c.layers) && in(neurons, c.n_gru) && in(beta_eta, c.beta) && c.beta == c.eta &&
           in(lambda, c.lambda) && in(tbptt_length, c.tbptt_length) && in(learning_rate, c.learning_rate) &&
           in(clip_norm, c.clip_norm) && in(batch_size, c.batch_size) && in(init, c.init_scheme);
  }
};

struct TrialResult {
  int trial = 0;
  TrainConfig config;
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  double validation_nrms = std::numeric_limits<double>::quiet_NaN();
  double wall_time = 0.0;  // s
  std::uint64_t seed = 0;
  std::string error;  // empty when the trial completed

  [[nodiscard]] bool ok() const { return error.empty() && std::isfinite(validation_nrms); }
};

/// Outcome reported by the caller-supplied train-and-validate closure.
struct TrialOutcome {
  double final_loss = 0.0;
  double validation_nrms = 0.0;
};

using TrialFunction = std::function<TrialOutcome(const TrainConfig&)>;

/// One uniformly drawn point of every axis; everything the grid does not
/// cover (epochs) is taken from `base`. The trial seed becomes the
/// training seed.
inline TrainConfig sample_config(const HyperGrid& grid, const TrainConfig& base, std::uint64_t trial_seed) {
  grid.validate();
  std::mt19937_64 rng(trial_seed);
  auto pick = [&](const auto& axis) {
    std::uniform_int_distribution<std::size_t> d(0, axis.size() - 1);
    return axis[d(rng)];
  };
  TrainConfig c = base;
  c.layers = pick(grid.layers);
  c.n_gru = pick(grid.neurons);
  c.beta = c.eta = pick(grid.beta_eta);
  c.lambda = pick(grid.lambda);
  c.tbptt_length = pick(grid.tbptt_length);
  c.learning_rate = pick(grid.learning_rate);
  c.clip_norm = pick(grid.clip_norm);
  c.batch_size = pick(grid.batch_size);
  c.init_scheme = pick(grid.init);
  c.seed = trial_seed;
  return c;
}

inline std::uint64_t trial_seed(std::uint64_t base_seed, int trial) {
  return derive_seed(base_seed, "trial/" + std::to_string(trial));
}

/// Samples `budget` configurations, runs each through `run` (in parallel
/// when threads > 1) and ranks completed trials by validation NRMS; failed
/// trials keep their error message and go last. Ties keep trial order.
inline std::vector<TrialResult> random_search(const HyperGrid& grid, int budget, std::uint64_t base_seed,
                                              const TrainConfig& base, const TrialFunction& run, int threads = 1) {
  require(budget >= 1, "random_search: budget must be >= 1");
  require(static_cast<bool>(run), "random_search: no trial function");
  std::vector<TrialResult> results(static_cast<std::size_t>(budget));
  for (int i = 0; i < budget; ++i) {
    TrialResult& r = results[static_cast<std::size_t>(i)];
    r.trial = i;
    r.seed = trial_seed(base_seed, i);
    r.config = sample_config(grid, base, r.seed);
  }

  auto execute = [&](TrialResult& r) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const TrialOutcome o = run(r.config);
      r.final_loss = o.final_loss;
      r.validation_nrms = o.validation_nrms;
      if (!std::isfinite(o.validation_nrms)) r.error = "validation NRMS is not finite";
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  const int workers = std::max(1, std::min(threads, budget));
  if (workers == 1) {
    for (TrialResult& r : results) execute(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < results.size(); i = next++) execute(results[i]);
      });
    for (std::thread& t : pool) t.join();
  }

  std::stable_sort(results.begin(), results.end(), [](const TrialResult& a, const TrialResult& b) {
    if (a.ok() != b.ok()) return a.ok();
    return a.ok() && a.validation_nrms < b.validation_nrms;
  });
  return results;
}

}  // namespace pgff::train
