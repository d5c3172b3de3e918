#include "gvfacc/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gvfacc {

FuzzySet::FuzzySet(std::vector<std::array<double, 2>> knots)
    : curve_(std::move(knots)) {
  for (const auto& k : curve_.knots()) {
    if (k[1] < 0.0 || k[1] > 1.0) {
      throw ConfigError("fuzzy membership values must lie in [0, 1]");
    }
  }
}

FuzzySet FuzzySet::ramp(double x0, double x1) {
  return FuzzySet({{x0, 0.0}, {x1, 1.0}});
}

FuzzySet FuzzySet::triangle(double center, double halfwidth, double floor) {
  return FuzzySet({{center - halfwidth, floor},
                   {center, 1.0},
                   {center + halfwidth, floor}});
}

Predictor make_predictor(const GvfModel& model) {
  return [&model](const FeatureVector& f, Action a) {
    return predict(model, f, a);
  };
}

std::vector<double> uniform_action_sweep(int count, double a_min,
                                         double a_max) {
  if (count < 2) throw ConfigError("action sweep needs at least two candidates");
  std::vector<double> sweep(count);
  for (int i = 0; i < count; ++i) {
    sweep[i] = a_min + (a_max - a_min) * i / (count - 1);
  }
  return sweep;
}

FuzzySet default_speed_set(double v_target, double halfwidth) {
  // Graded preference for moving: a small floor at standstill keeps slow
  // states comparable instead of vetoing every candidate while following
  // slower traffic.
  return FuzzySet({{0.0, 0.02},
                   {std::max(0.1, v_target - halfwidth), 0.5},
                   {std::max(0.2, v_target), 1.0},
                   {std::max(0.3, v_target + halfwidth), 0.0}});
}

Action fuzzy_act(const FuzzyControllerConfig& cfg, const Predictor& safety,
                 const Predictor& speed, const FeatureVector& features) {
  if (cfg.action_sweep.empty()) throw ConfigError("empty action sweep");
  if (cfg.greediness < 1.0) throw ConfigError("greediness must be >= 1");

  double weight_sum = 0.0;
  double weighted_actions = 0.0;
  for (const double candidate : cfg.action_sweep) {
    const Action a{candidate};
    const double goal = cfg.safety_set(safety(features, a)) *
                        cfg.speed_set(speed(features, a)) *
                        cfg.comfort_set(candidate);
    const double w = std::pow(goal, cfg.greediness);
    weight_sum += w;
    weighted_actions += w * candidate;
  }
  if (weight_sum <= 0.0) {
    // No candidate satisfies the goals at all: brake as hard as possible.
    return Action{*std::min_element(cfg.action_sweep.begin(),
                                    cfg.action_sweep.end())};
  }
  return Action{weighted_actions / weight_sum};
}

Action rule_act_with_speed(const RuleWithSpeedConfig& cfg,
                           const Predictor& safety, const Predictor& speed,
                           const FeatureVector& features, Action last) {
  const double p_safe = safety(features, last);
  double command = last.command;
  if (p_safe < cfg.beta) {
    command -= cfg.alpha_decel * (1.0 - p_safe);
  } else {
    const double v_hat = speed(features, last);
    const double err = std::clamp(cfg.v_target - v_hat, cfg.e_min, cfg.e_max);
    command += cfg.alpha_speed * err;
  }
  return Action{std::clamp(command, cfg.a_min, cfg.a_max)};
}

double rule_act_without_speed(const RuleWithoutSpeedConfig& cfg,
                              const Predictor& safety,
                              const FeatureVector& features,
                              double last_command_mps) {
  if (cfg.beta1 > cfg.beta2) {
    throw ConfigError("hysteresis thresholds must satisfy beta1 <= beta2");
  }
  if (cfg.v_target <= 0.0) throw ConfigError("v_target must be positive");
  // The model's action axis is [-1, 1]; map the speed command onto it.
  const Action model_action{
      std::clamp(2.0 * last_command_mps / cfg.v_target - 1.0, -1.0, 1.0)};
  const double p_safe = safety(features, model_action);
  double command = last_command_mps;
  if (p_safe < cfg.beta1) {
    command -= cfg.alpha_decel * (1.0 - p_safe);
  } else if (p_safe > cfg.beta2) {
    command += cfg.alpha_accel * p_safe;
  }
  return std::clamp(command, 0.0, cfg.v_target);
}

Action baseline_act(const BaselineGapConfig& cfg, const WorldState& state) {
  const double cruise = cfg.k_speed * (cfg.v_target - state.ego.speed);
  double command = cruise;
  if (state.lead) {
    const double spacing =
        front_gap(state) - headway(state.ego.speed, cfg.zone);
    const double follow =
        cfg.k_gap * spacing + cfg.k_rel * (state.lead->speed - state.ego.speed);
    command = std::min(command, follow);
  }
  return Action{std::clamp(command, cfg.a_min, cfg.a_max)};
}

}  // namespace gvfacc
