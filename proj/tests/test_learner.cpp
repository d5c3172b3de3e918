#include "gvfacc/learner.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <random>
#include <stdexcept>
#include <string>

#include "gvfacc/util.hpp"

namespace gvfacc {
namespace {

std::string temp_path(const std::string& name) {
  return testing::TempDir() + name;
}

TEST(Policies, TargetHoldIsAGaussianWalkAroundTheLastAction) {
  std::mt19937 rng(1);
  const TargetPolicy pol{0.05};
  EXPECT_DOUBLE_EQ(
      sample_target_action(TargetPolicy{0.0}, Action{0.3}, rng, -1, 1).command,
      0.3);

  double sum = 0.0, sum_sq = 0.0;
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    const double a = sample_target_action(pol, Action{0.0}, rng, -1, 1).command;
    EXPECT_GE(a, -1.0);
    EXPECT_LE(a, 1.0);
    sum += a;
    sum_sq += a * a;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sum_sq / n - mean * mean);
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(sd, 0.05, 0.01);
}

TEST(Policies, TargetDrawsClampToActionBounds) {
  std::mt19937 rng(2);
  const TargetPolicy wide{5.0};
  for (int i = 0; i < 200; ++i) {
    const double a = sample_target_action(wide, Action{0.9}, rng, -1, 1).command;
    EXPECT_GE(a, -1.0);
    EXPECT_LE(a, 1.0);
  }
}

TEST(Policies, BehaviorResetDrawsUniformlyOverTheBounds) {
  std::mt19937 rng(3);
  const BehaviorPolicy always_reset{0.05, 1.0};
  const int n = 2000;
  const int bins = 10;
  int count[10] = {};
  for (int i = 0; i < n; ++i) {
    // `last` far outside every bin's reach under the walk alone.
    const double a =
        sample_behavior_action(always_reset, Action{-1.0}, rng, -1, 1).command;
    const int b = std::min(bins - 1, static_cast<int>((a + 1.0) / 2.0 * bins));
    ++count[b];
  }
  double chi_sq = 0.0;
  const double expected = static_cast<double>(n) / bins;
  for (int b = 0; b < bins; ++b) {
    chi_sq += (count[b] - expected) * (count[b] - expected) / expected;
  }
  // 9 degrees of freedom; 35 is far beyond any plausible uniform sample.
  EXPECT_LT(chi_sq, 35.0);
}

TEST(Policies, BehaviorWithoutResetMatchesTheTargetPolicy) {
  std::mt19937 rng_a(7), rng_b(7);
  const BehaviorPolicy no_reset{0.05, 0.0};
  const TargetPolicy target{0.05};
  for (int i = 0; i < 100; ++i) {
    EXPECT_DOUBLE_EQ(
        sample_behavior_action(no_reset, Action{0.1}, rng_a, -1, 1).command,
        sample_target_action(target, Action{0.1}, rng_b, -1, 1).command);
  }
}

Transition marked_transition(double mark) {
  Transition t;
  t.c = mark;
  return t;
}

TEST(ReplayBuffer, EvictsOldestOnceFull) {
  ReplayBuffer buf(3);
  EXPECT_EQ(buf.capacity(), 3u);
  for (int i = 0; i < 5; ++i) buf.push(marked_transition(i));
  ASSERT_EQ(buf.size(), 3u);
  EXPECT_DOUBLE_EQ(buf.at(0).c, 2.0);
  EXPECT_DOUBLE_EQ(buf.at(1).c, 3.0);
  EXPECT_DOUBLE_EQ(buf.at(2).c, 4.0);
  EXPECT_THROW(buf.at(3), std::out_of_range);
}

TEST(ReplayBuffer, SamplingReachesEveryStoredTransition) {
  ReplayBuffer buf(5);
  for (int i = 0; i < 5; ++i) buf.push(marked_transition(i));
  std::mt19937 rng(11);
  bool seen[5] = {};
  for (int i = 0; i < 300; ++i) {
    seen[static_cast<int>(buf.sample(rng).c)] = true;
  }
  for (bool s : seen) EXPECT_TRUE(s);
}

TEST(ReplayBuffer, RejectsEmptyUse) {
  EXPECT_THROW(ReplayBuffer(0), std::invalid_argument);
  ReplayBuffer buf(4);
  std::mt19937 rng(0);
  EXPECT_THROW(buf.sample(rng), std::invalid_argument);
}

// Linear scalar net over the 6 network inputs (5 features + action).
DenseNet linear_net(const std::array<double, 6>& w, double b) {
  DenseNet net({6, 1}, OutputActivation::Identity, 0);
  for (int i = 0; i < 6; ++i) net.weights[0](0, i) = w[i];
  net.biases[0](0) = b;
  return net;
}

double dot6(const std::array<double, 6>& w, const FeatureVector& f, double a,
            double b) {
  return w[0] * f.gap + w[1] * f.d_gap + w[2] * f.d_gap_prev + w[3] * f.speed +
         w[4] * f.last_command + w[5] * a + b;
}

TEST(TdTarget, BootstrapsFromTheNextStateActionPair) {
  const std::array<double, 6> w{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  const DenseNet net = linear_net(w, 0.5);
  Transition t;
  t.c = 0.05;
  t.gamma = 0.95;
  t.s_next = FeatureVector{1.0, 0.0, 0.0, -1.0, 0.0};
  t.a_next = Action{0.25};
  // q(s', a') = 0.1 - 0.4 + 0.6 * 0.25 + 0.5 = 0.35
  EXPECT_NEAR(td_target(t, net), 0.05 + 0.95 * 0.35, 1e-15);
}

TEST(TrainStep, UpdatesOnlyThroughTheCurrentStateGradient) {
  // One repeated transition; every minibatch entry is identical, so the
  // parameter change is exactly lr * delta * d q(s,a)/d theta. A gradient
  // leaking through the bootstrap target would pull in the next state's
  // features and land somewhere else.
  const std::array<double, 6> w{0.05, -0.1, 0.2, 0.3, -0.25, 0.15};
  const double b = 0.1;
  Transition t;
  t.s = FeatureVector{0.2, -0.1, 0.3, 0.5, -0.4};
  t.a = Action{0.6};
  t.c = 0.04;
  t.gamma = 0.9;
  t.s_next = FeatureVector{-0.3, 0.2, 0.1, -0.5, 0.7};
  t.a_next = Action{-0.2};

  DenseNet net = linear_net(w, b);
  ReplayBuffer buf(8);
  buf.push(t);
  OptimizerState opt = OptimizerState::sgd(0.1);
  std::mt19937 rng(5);
  const double loss = train_step(net, opt, buf, 4, rng);

  const double q = dot6(w, t.s, t.a.command, b);
  const double q_next = dot6(w, t.s_next, t.a_next.command, b);
  const double delta = t.c + t.gamma * q_next - q;
  EXPECT_NEAR(loss, delta * delta, 1e-12);

  const std::array<double, 6> x1{t.s.gap,   t.s.d_gap,        t.s.d_gap_prev,
                                 t.s.speed, t.s.last_command, t.a.command};
  for (int i = 0; i < 6; ++i) {
    EXPECT_NEAR(net.weights[0](0, i), w[i] + 0.1 * delta * x1[i], 1e-12);
  }
  EXPECT_NEAR(net.biases[0](0), b + 0.1 * delta, 1e-12);
}

TEST(TrainStep, FitsAConstantTerminalTarget) {
  // gamma = 0 makes the target the plain scaled cumulant; the net should
  // regress onto it.
  Transition t;
  t.s = FeatureVector{0.5, 0.0, 0.0, -0.2, 0.1};
  t.a = Action{0.3};
  t.c = 0.7;
  t.gamma = 0.0;
  t.s_next = t.s;
  t.a_next = t.a;

  DenseNet net({6, 8, 1}, OutputActivation::Sigmoid, 21);
  ReplayBuffer buf(4);
  buf.push(t);
  OptimizerState opt = OptimizerState::adam(1e-2);
  std::mt19937 rng(6);
  double loss = 1.0;
  for (int i = 0; i < 600; ++i) loss = train_step(net, opt, buf, 4, rng);
  EXPECT_LT(loss, 1e-4);

  Eigen::VectorXd x(6);
  x << 0.5, 0.0, 0.0, -0.2, 0.1, 0.3;
  EXPECT_NEAR(net.forward(x), 0.7, 0.02);
}

TEST(TrainStep, RejectsEmptyBufferAndZeroBatch) {
  DenseNet net({6, 4, 1}, OutputActivation::Sigmoid, 0);
  OptimizerState opt = OptimizerState::sgd(0.01);
  std::mt19937 rng(0);
  ReplayBuffer empty(4);
  EXPECT_THROW(train_step(net, opt, empty, 4, rng), std::invalid_argument);
  empty.push(Transition{});
  EXPECT_THROW(train_step(net, opt, empty, 0, rng), std::invalid_argument);
}

TrainConfig small_train_config() {
  TrainConfig cfg;
  cfg.steps = 1200;
  cfg.replay_capacity = 4000;
  cfg.minibatch = 16;
  cfg.hidden_layers = {8};
  cfg.learning_rate = 1e-3;
  return cfg;
}

TEST(Train, ProducesAWiredUpModelAndFullLog) {
  const Question q{CumulantKind::Speed, 0.9, 0.05};
  const SimConfig sim;
  std::mt19937 rng(31);
  const auto result = train(q, {scenario_preset("free_drive")},
                            small_train_config(), sim, rng);

  EXPECT_EQ(result.model.question.kind, CumulantKind::Speed);
  EXPECT_DOUBLE_EQ(result.model.question.gamma, 0.9);
  EXPECT_EQ(result.model.net.output_activation, OutputActivation::Identity);
  EXPECT_DOUBLE_EQ(result.model.value_scale, sim.v_max);
  EXPECT_EQ(result.model.scaling, FeatureScaling::from(sim));
  EXPECT_EQ(result.model.net.layer_sizes, (std::vector<int>{6, 8, 1}));
  EXPECT_EQ(result.log.size(), 1200u);
  EXPECT_EQ(result.log.back().step, 1200u);
  EXPECT_GE(result.episodes, 1);
  EXPECT_TRUE(std::isfinite(result.final_loss));
}

TEST(Train, SafetyQuestionsUseBoundedSigmoidOutputs) {
  const Question q{CumulantKind::FrontSafety, 0.95, 0.05};
  const SimConfig sim;
  std::mt19937 rng(32);
  TrainConfig cfg = small_train_config();
  cfg.steps = 400;
  const auto result =
      train(q, {scenario_preset("front_training")}, cfg, sim, rng);
  EXPECT_EQ(result.model.net.output_activation, OutputActivation::Sigmoid);
  EXPECT_DOUBLE_EQ(result.model.value_scale, 1.0);
  const double p = predict(result.model, FeatureVector{}, Action{0.0});
  EXPECT_GT(p, 0.0);
  EXPECT_LT(p, 1.0);
}

TEST(Train, ValidatesQuestionScenarioPairing) {
  const SimConfig sim;
  std::mt19937 rng(0);
  const TrainConfig cfg = small_train_config();
  EXPECT_THROW(train({CumulantKind::FrontSafety, 0.95, 0.05},
                     {scenario_preset("free_drive")}, cfg, sim, rng),
               ConfigError);
  EXPECT_THROW(train({CumulantKind::RearSafety, 0.95, 0.05},
                     {scenario_preset("front_training")}, cfg, sim, rng),
               ConfigError);
  EXPECT_THROW(train({CumulantKind::Speed, 0.95, 0.05},
                     {scenario_preset("front_training")}, cfg, sim, rng),
               ConfigError);
  EXPECT_THROW(train({CumulantKind::Speed, 1.0, 0.05},
                     {scenario_preset("free_drive")}, cfg, sim, rng),
               ConfigError);
  EXPECT_THROW(
      train({CumulantKind::Speed, 0.95, 0.05}, {}, cfg, sim, rng),
      ConfigError);
}

TEST(Train, DeterministicForAFixedSeed) {
  const Question q{CumulantKind::FrontSafety, 0.95, 0.05};
  const SimConfig sim;
  TrainConfig cfg = small_train_config();
  cfg.steps = 600;
  std::mt19937 rng_a(99), rng_b(99);
  const auto a = train(q, {scenario_preset("front_training")}, cfg, sim, rng_a);
  const auto b = train(q, {scenario_preset("front_training")}, cfg, sim, rng_b);
  for (int l = 0; l < a.model.net.layer_count(); ++l) {
    ASSERT_EQ(a.model.net.weights[l], b.model.net.weights[l]);
    ASSERT_EQ(a.model.net.biases[l], b.model.net.biases[l]);
  }
  EXPECT_EQ(a.final_loss, b.final_loss);
  EXPECT_EQ(a.episodes, b.episodes);
}

TEST(Predict, SpeedModelsIgnoreTrafficFeatures) {
  GvfModel model;
  model.net = DenseNet({6, 4, 1}, OutputActivation::Identity, 77);
  model.question.kind = CumulantKind::Speed;
  model.value_scale = 40.0;

  const FeatureVector with_traffic{-0.5, 0.7, -0.3, 0.2, 0.1};
  const FeatureVector empty_road{1.0, 0.0, 0.0, 0.2, 0.1};
  EXPECT_DOUBLE_EQ(predict(model, with_traffic, Action{0.4}),
                   predict(model, empty_road, Action{0.4}));

  // The prediction is value_scale times the raw network output.
  Eigen::VectorXd x(6);
  x << 1.0, 0.0, 0.0, 0.2, 0.1, 0.4;
  EXPECT_DOUBLE_EQ(predict(model, with_traffic, Action{0.4}),
                   40.0 * model.net.forward(x));

  // A safety model with the same weights does react to the gap slots.
  GvfModel safety = model;
  safety.question.kind = CumulantKind::FrontSafety;
  safety.value_scale = 1.0;
  EXPECT_NE(predict(safety, with_traffic, Action{0.4}),
            predict(safety, empty_road, Action{0.4}));
}

TEST(Predict, CountsQueries) {
  GvfModel model;
  model.net = DenseNet({6, 4, 1}, OutputActivation::Sigmoid, 1);
  EXPECT_EQ(model.queries(), 0u);
  for (int i = 0; i < 3; ++i) predict(model, FeatureVector{}, Action{0.0});
  EXPECT_EQ(model.queries(), 3u);
}

TEST(ModelFile, RoundTripsExactly) {
  GvfModel model;
  model.net = DenseNet({6, 5, 3, 1}, OutputActivation::Sigmoid, 1234);
  model.question = {CumulantKind::RearSafety, 0.975, 0.02};
  model.scaling = {150.0, 1.5, 35.0};
  model.value_scale = 1.0;

  const std::string path = temp_path("model_roundtrip.json");
  save_model(model, path);
  const GvfModel loaded = load_model(path);

  EXPECT_EQ(loaded.question.kind, CumulantKind::RearSafety);
  EXPECT_DOUBLE_EQ(loaded.question.gamma, 0.975);
  EXPECT_DOUBLE_EQ(loaded.question.sigma, 0.02);
  EXPECT_EQ(loaded.scaling, model.scaling);
  EXPECT_EQ(loaded.net.layer_sizes, model.net.layer_sizes);
  EXPECT_EQ(loaded.net.output_activation, model.net.output_activation);
  for (int l = 0; l < model.net.layer_count(); ++l) {
    ASSERT_EQ(loaded.net.weights[l], model.net.weights[l]);
    ASSERT_EQ(loaded.net.biases[l], model.net.biases[l]);
  }

  std::mt19937 rng(4);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    const FeatureVector f{dist(rng), dist(rng), dist(rng), dist(rng),
                          dist(rng)};
    const Action a{dist(rng)};
    EXPECT_EQ(predict(loaded, f, a), predict(model, f, a));
  }
  std::remove(path.c_str());
}

TEST(ModelFile, RejectsForeignAndBrokenFiles) {
  EXPECT_THROW(load_model(temp_path("does_not_exist.json")), ModelError);

  const std::string not_json = temp_path("not_json.json");
  {
    std::ofstream out(not_json);
    out << "definitely { not json";
  }
  EXPECT_THROW(load_model(not_json), ModelError);

  const std::string wrong_magic = temp_path("wrong_magic.json");
  {
    std::ofstream out(wrong_magic);
    out << R"({"format": "something-else", "version": 1})";
  }
  EXPECT_THROW(load_model(wrong_magic), ModelError);

  GvfModel model;
  model.net = DenseNet({6, 4, 1}, OutputActivation::Sigmoid, 9);
  const std::string bad_version = temp_path("bad_version.json");
  save_model(model, bad_version);
  {
    std::ifstream in(bad_version);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    const auto pos = text.find("\"version\": 1");
    ASSERT_NE(pos, std::string::npos);
    text.replace(pos, 12, "\"version\": 9");
    std::ofstream out(bad_version);
    out << text;
  }
  EXPECT_THROW(load_model(bad_version), ModelError);

  std::remove(not_json.c_str());
  std::remove(wrong_magic.c_str());
  std::remove(bad_version.c_str());
}

TEST(TrainingLog, RoundTripsAndValidatesHeader) {
  std::vector<TrainLogRow> rows{
      {1, 0.25, 0.05, 0.95, 0},
      {2, 0.125, 0.0, 0.0, 0},
      {3, 1.5e-7, 0.0123456789012345, 0.975, 4},
  };
  const std::string path = temp_path("train_log.csv");
  write_training_log(rows, path);
  const auto loaded = read_training_log(path);
  ASSERT_EQ(loaded.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(loaded[i].step, rows[i].step);
    EXPECT_EQ(loaded[i].td_loss, rows[i].td_loss);
    EXPECT_EQ(loaded[i].cumulant, rows[i].cumulant);
    EXPECT_EQ(loaded[i].gamma, rows[i].gamma);
    EXPECT_EQ(loaded[i].episode_id, rows[i].episode_id);
  }

  {
    std::ofstream out(path);
    out << "step,loss\n1,2\n";
  }
  EXPECT_THROW(read_training_log(path), ConfigError);
  std::remove(path.c_str());
}

TEST(ViewFor, MatchesQuestionDirection) {
  EXPECT_EQ(view_for(CumulantKind::FrontSafety), FeatureView::Front);
  EXPECT_EQ(view_for(CumulantKind::RearSafety), FeatureView::Rear);
  EXPECT_EQ(view_for(CumulantKind::Speed), FeatureView::SpeedOnly);
}

}  // namespace
}  // namespace gvfacc
