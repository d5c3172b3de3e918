// Microbenchmarks for the hot paths: network passes, TD updates, physics
// steps, and one fuzzy control decision.

#include <benchmark/benchmark.h>

#include <random>

#include "gvfacc/controllers.hpp"
#include "gvfacc/learner.hpp"
#include "gvfacc/net.hpp"
#include "gvfacc/scenario.hpp"
#include "gvfacc/sim.hpp"

namespace {

using namespace gvfacc;

Eigen::MatrixXd random_batch(int rows, int cols, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::MatrixXd X(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) X(r, c) = dist(rng);
  }
  return X;
}

void BM_NetForwardBatch(benchmark::State& state) {
  const DenseNet net({6, 64, 64, 1}, OutputActivation::Sigmoid, 7);
  const Eigen::MatrixXd X = random_batch(6, static_cast<int>(state.range(0)), 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(net.forward_batch(X));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_NetForwardBatch)->Arg(1)->Arg(64);

void BM_NetBackwardWeighted(benchmark::State& state) {
  const DenseNet net({6, 64, 64, 1}, OutputActivation::Sigmoid, 7);
  const int n = static_cast<int>(state.range(0));
  const Eigen::MatrixXd X = random_batch(6, n, 3);
  const Eigen::VectorXd coeff = Eigen::VectorXd::Constant(n, 1.0 / n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(net.backward_weighted(X, coeff));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_NetBackwardWeighted)->Arg(64);

ReplayBuffer filled_buffer(std::size_t n, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  ReplayBuffer buffer(n);
  for (std::size_t i = 0; i < n; ++i) {
    Transition t;
    t.s = FeatureVector{dist(rng), dist(rng), dist(rng), dist(rng), dist(rng)};
    t.a = Action{dist(rng)};
    t.c = dist(rng) > 0.5 ? 0.05 : 0.0;
    t.gamma = 0.95;
    t.s_next =
        FeatureVector{dist(rng), dist(rng), dist(rng), dist(rng), dist(rng)};
    t.a_next = Action{dist(rng)};
    buffer.push(t);
  }
  return buffer;
}

void BM_TrainStep(benchmark::State& state) {
  DenseNet net({6, 64, 64, 1}, OutputActivation::Sigmoid, 7);
  OptimizerState opt = OptimizerState::adam(1e-3);
  const ReplayBuffer buffer = filled_buffer(4096, 21);
  std::mt19937 rng(9);
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_step(net, opt, buffer, 64, rng));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_TrainStep);

void BM_SimStep(benchmark::State& state) {
  const SimConfig sim{};
  WorldState world = reset_scenario(scenario_preset("follow_and_stop"), sim);
  for (auto _ : state) {
    const StepOutcome out = step(world, Action{0.1}, -1.0, 0.0, sim);
    benchmark::DoNotOptimize(out.features);
    world = out.next_state;
    if (world.lead && front_gap(world) < 1.0) {
      world = reset_scenario(scenario_preset("follow_and_stop"), sim);
    }
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_SimStep);

void BM_ScenarioEngineStep(benchmark::State& state) {
  const SimConfig sim{};
  ScenarioEngine engine(scenario_preset("front_training"), sim, 5);
  for (auto _ : state) {
    if (engine.episode_over()) engine.reset();
    const StepOutcome out = engine.step(Action{0.0});
    benchmark::DoNotOptimize(out.features);
    if (out.front_collision || out.rear_collision) engine.reset();
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ScenarioEngineStep);

void BM_FuzzyDecision(benchmark::State& state) {
  GvfModel front;
  front.net = DenseNet({6, 64, 64, 1}, OutputActivation::Sigmoid, 7);
  front.question = Question{CumulantKind::FrontSafety, 0.95, 0.05};
  GvfModel speed;
  speed.net = DenseNet({6, 64, 64, 1}, OutputActivation::Identity, 8);
  speed.question = Question{CumulantKind::Speed, 0.95, 0.05};
  speed.value_scale = 40.0;

  FuzzyControllerConfig cfg;
  cfg.speed_set = default_speed_set(100.0 / 3.6);
  const Predictor safety = make_predictor(front);
  const Predictor speed_pred = make_predictor(speed);
  const FeatureVector features{0.2, 0.1, 0.0, 0.4, 0.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(fuzzy_act(cfg, safety, speed_pred, features));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_FuzzyDecision);

}  // namespace

BENCHMARK_MAIN();
