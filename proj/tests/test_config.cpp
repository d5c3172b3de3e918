#include "gvfacc/config.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "gvfacc/util.hpp"

namespace gvfacc {
namespace {

std::string temp_path(const std::string& name) {
  return testing::TempDir() + name;
}

TEST(ParseRunConfig, EmptyDocumentYieldsAllDefaults) {
  const RunConfig c = parse_run_config("{}");
  EXPECT_EQ(c.seed, 1u);
  EXPECT_EQ(c.output_dir, "runs");
  EXPECT_DOUBLE_EQ(c.sim.dt, 0.05);
  EXPECT_DOUBLE_EQ(c.sim.v_max, 40.0);
  EXPECT_EQ(c.sim.action_mode, ActionMode::ThrottleBrake);
  EXPECT_DOUBLE_EQ(c.zone.tau, 3.0);
  EXPECT_DOUBLE_EQ(c.zone.d_min, 4.0);
  EXPECT_EQ(c.question.kind, CumulantKind::FrontSafety);
  EXPECT_DOUBLE_EQ(c.question.gamma, 0.95);
  EXPECT_EQ(c.train.steps, 500000u);
  EXPECT_EQ(c.train.optimizer, OptimizerMode::Adam);
  EXPECT_DOUBLE_EQ(c.eval.warning_threshold, 0.5);
  EXPECT_FALSE(c.eval.duration_override.has_value());
}

TEST(ParseRunConfig, ReadsEverySection) {
  const std::string text = R"({
    "seed": 42,
    "output_dir": "out",
    "sim": {
      "dt": 0.1,
      "v_max": 5.0,
      "sensor_range": 20.0,
      "d_gap_range": 0.2,
      "action_mode": "target_speed",
      "target_speed_ceiling": 2.0,
      "engine_curve": [[0.0, 1.0], [5.0, 0.5]]
    },
    "zone": {"tau": 1.5, "d_min": 0.4, "intrusion_budget": 1},
    "question": {"cumulant": "rear", "gamma": 0.975, "sigma": 0.02},
    "learner": {
      "steps": 1000,
      "replay_capacity": 500,
      "minibatch": 8,
      "learning_rate": 0.01,
      "optimizer": "sgd",
      "hidden_layers": [16, 16],
      "reset_probability": 0.05,
      "on_policy": true,
      "log_every": 10
    },
    "controllers": {
      "fuzzy": {
        "action_sweep_count": 11,
        "greediness": 3.0,
        "safety_set": [[0.5, 0.0], [0.8, 1.0]]
      },
      "rule_with_speed": {"beta": 0.9, "alpha_decel": 0.3},
      "rule_without_speed": {"beta1": 0.7, "beta2": 0.95, "v_target": 2.0},
      "baseline": {"k_gap": 0.2}
    },
    "eval": {"warning_threshold": 0.4, "duration": 10.0, "v_target": 15.0}
  })";
  const RunConfig c = parse_run_config(text);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.output_dir, "out");
  EXPECT_DOUBLE_EQ(c.sim.dt, 0.1);
  EXPECT_EQ(c.sim.action_mode, ActionMode::TargetSpeed);
  EXPECT_DOUBLE_EQ(c.sim.target_speed_ceiling, 2.0);
  ASSERT_EQ(c.sim.engine_curve_knots.size(), 2u);
  EXPECT_DOUBLE_EQ(c.sim.engine_curve_knots[1][1], 0.5);
  EXPECT_EQ(c.zone.intrusion_budget, 1);
  EXPECT_EQ(c.question.kind, CumulantKind::RearSafety);
  EXPECT_DOUBLE_EQ(c.question.gamma, 0.975);
  EXPECT_EQ(c.train.steps, 1000u);
  EXPECT_EQ(c.train.optimizer, OptimizerMode::Sgd);
  EXPECT_EQ(c.train.hidden_layers, (std::vector<int>{16, 16}));
  EXPECT_TRUE(c.train.on_policy);
  EXPECT_EQ(c.controllers.fuzzy.action_sweep.size(), 11u);
  EXPECT_DOUBLE_EQ(c.controllers.fuzzy.greediness, 3.0);
  EXPECT_DOUBLE_EQ(c.controllers.fuzzy.safety_set(0.65), 0.5);
  EXPECT_DOUBLE_EQ(c.controllers.rule_with_speed.beta, 0.9);
  EXPECT_DOUBLE_EQ(c.controllers.rule_without_speed.beta1, 0.7);
  EXPECT_DOUBLE_EQ(c.controllers.baseline.k_gap, 0.2);
  EXPECT_DOUBLE_EQ(c.eval.warning_threshold, 0.4);
  ASSERT_TRUE(c.eval.duration_override.has_value());
  EXPECT_DOUBLE_EQ(*c.eval.duration_override, 10.0);
  ASSERT_TRUE(c.eval.v_target_override.has_value());
  EXPECT_DOUBLE_EQ(*c.eval.v_target_override, 15.0);
}

TEST(ParseRunConfig, RejectsUnknownKeysWithTheirPath) {
  try {
    parse_run_config(R"({"controllers": {"fuzzy": {"greedines": 2.0}}})");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("controllers.fuzzy"),
              std::string::npos);
    EXPECT_NE(std::string(e.what()).find("greedines"), std::string::npos);
  }
  EXPECT_THROW(parse_run_config(R"({"simulation": {}})"), ConfigError);
}

TEST(ParseRunConfig, RejectsWrongTypesAndEnums) {
  EXPECT_THROW(parse_run_config(R"({"sim": {"dt": "fast"}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"seed": -3})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"sim": {"action_mode": "teleport"}})"),
               ConfigError);
  EXPECT_THROW(parse_run_config(R"({"learner": {"optimizer": "newton"}})"),
               ConfigError);
  EXPECT_THROW(parse_run_config(R"({"question": {"cumulant": "lateral"}})"),
               ConfigError);
  EXPECT_THROW(parse_run_config("not json at all"), ConfigError);
  EXPECT_THROW(
      parse_run_config(R"({"controllers": {"fuzzy": {"action_sweep_count": 1}}})"),
      ConfigError);
  // Fuzzy membership knots must stay inside [0, 1].
  EXPECT_THROW(
      parse_run_config(
          R"({"controllers": {"fuzzy": {"safety_set": [[0.0, 2.0]]}}})"),
      ConfigError);
}

TEST(RunConfigText, RoundTripsAndStaysByteStable) {
  RunConfig c = parse_run_config("{}");
  c.seed = 7;
  c.sim.v_max = 25.0;
  c.question.gamma = 0.983;
  c.train.hidden_layers = {32};
  c.controllers.rule_without_speed.v_target = 1.5;
  c.eval.duration_override = 12.0;

  const std::string text = run_config_to_text(c);
  const RunConfig back = parse_run_config(text);
  EXPECT_EQ(back.seed, 7u);
  EXPECT_DOUBLE_EQ(back.sim.v_max, 25.0);
  EXPECT_DOUBLE_EQ(back.question.gamma, 0.983);
  EXPECT_EQ(back.train.hidden_layers, (std::vector<int>{32}));
  EXPECT_DOUBLE_EQ(back.controllers.rule_without_speed.v_target, 1.5);
  ASSERT_TRUE(back.eval.duration_override.has_value());
  EXPECT_DOUBLE_EQ(*back.eval.duration_override, 12.0);

  // Serializing the reparsed config reproduces the bytes.
  EXPECT_EQ(run_config_to_text(back), text);
}

TEST(RunConfigFile, SaveAndLoad) {
  RunConfig c = parse_run_config("{}");
  c.seed = 99;
  const std::string path = temp_path("run_config.json");
  save_run_config(c, path);
  const RunConfig loaded = load_run_config(path);
  EXPECT_EQ(loaded.seed, 99u);
  std::remove(path.c_str());
  EXPECT_THROW(load_run_config(path), ConfigError);
}

TEST(ResolveScenario, AppliesZoneAndEvalOverrides) {
  RunConfig c = parse_run_config("{}");
  c.zone = SafetyZoneParams{1.5, 0.4, 0};
  c.eval.duration_override = 5.0;
  c.eval.v_target_override = 9.0;

  const ScenarioSpec spec = resolve_scenario("emergency_stop", c);
  EXPECT_EQ(spec.name, "emergency_stop");
  EXPECT_DOUBLE_EQ(spec.zone.tau, 1.5);
  EXPECT_DOUBLE_EQ(spec.zone.d_min, 0.4);
  EXPECT_DOUBLE_EQ(spec.duration, 5.0);
  EXPECT_DOUBLE_EQ(spec.v_target, 9.0);

  EXPECT_THROW(resolve_scenario("warp_drive", c), ConfigError);
}

TEST(ResolveScenario, WithoutOverridesKeepsPresetTiming) {
  const RunConfig c = parse_run_config("{}");
  const ScenarioSpec spec = resolve_scenario("follow_and_stop", c);
  EXPECT_DOUBLE_EQ(spec.duration, 60.0);
  EXPECT_DOUBLE_EQ(spec.v_target, 100.0 / 3.6);
  // The run's zone still replaces the preset's.
  EXPECT_DOUBLE_EQ(spec.zone.tau, 3.0);
}

TEST(BindControllers, SpeedTargetsFollowTheScenario) {
  const RunConfig c = parse_run_config("{}");
  ScenarioSpec spec = resolve_scenario("rear_approach", c);  // v_target = 20
  spec.zone = SafetyZoneParams{2.0, 1.0, 0};

  const ControllerBundle bound = bind_controllers(c.controllers, spec);
  EXPECT_DOUBLE_EQ(bound.rule_with_speed.v_target, 20.0);
  EXPECT_DOUBLE_EQ(bound.baseline.v_target, 20.0);
  EXPECT_DOUBLE_EQ(bound.baseline.zone.tau, 2.0);
  EXPECT_DOUBLE_EQ(bound.baseline.zone.d_min, 1.0);

  // An unset fuzzy speed goal becomes the default membership around the
  // scenario's target speed.
  ASSERT_FALSE(bound.fuzzy.speed_set.knots().empty());
  EXPECT_DOUBLE_EQ(bound.fuzzy.speed_set(20.0), 1.0);

  // The platform ceiling of the speed-command rule is not scenario-bound.
  EXPECT_DOUBLE_EQ(bound.rule_without_speed.v_target,
                   c.controllers.rule_without_speed.v_target);
}

TEST(BindControllers, ExplicitFuzzySpeedSetIsKept) {
  RunConfig c = parse_run_config(
      R"({"controllers": {"fuzzy": {"speed_set": [[0.0, 0.0], [10.0, 1.0]]}}})");
  const ScenarioSpec spec = resolve_scenario("free_drive", c);
  const ControllerBundle bound = bind_controllers(c.controllers, spec);
  EXPECT_DOUBLE_EQ(bound.fuzzy.speed_set(5.0), 0.5);
}

}  // namespace
}  // namespace gvfacc
