#pragma once

#include <functional>
#include <vector>

#include "gvfacc/cumulants.hpp"
#include "gvfacc/learner.hpp"
#include "gvfacc/sim.hpp"
#include "gvfacc/util.hpp"

namespace gvfacc {

// Membership function: piecewise-linear with values in [0, 1].
class FuzzySet {
 public:
  FuzzySet() = default;
  explicit FuzzySet(std::vector<std::array<double, 2>> knots);

  double operator()(double x) const { return curve_(x); }
  const std::vector<std::array<double, 2>>& knots() const {
    return curve_.knots();
  }

  // 0 below x0 rising linearly to 1 at x1.
  static FuzzySet ramp(double x0, double x1);
  // Peak 1 at center, falling linearly to `floor` at center +- halfwidth.
  static FuzzySet triangle(double center, double halfwidth,
                           double floor = 0.0);

 private:
  PiecewiseLinear curve_;
};

// Prediction source used by the controllers; adapters wrap GvfModel so the
// control laws can be unit-tested against stub predictions.
using Predictor = std::function<double(const FeatureVector&, Action)>;

Predictor make_predictor(const GvfModel& model);

std::vector<double> uniform_action_sweep(int count, double a_min,
                                         double a_max);

struct FuzzyControllerConfig {
  std::vector<double> action_sweep{uniform_action_sweep(21, -1.0, 1.0)};
  double greediness{2.0};  // exponent m >= 1 on goal memberships
  FuzzySet safety_set{FuzzySet::ramp(0.6, 0.9)};
  FuzzySet speed_set;    // over predicted speed in m/s
  FuzzySet comfort_set{FuzzySet::triangle(0.0, 1.0, 0.1)};
};

// Builds the default speed membership for a target speed: near-zero at
// standstill, 1 at the target, 0 again halfwidth above it.
FuzzySet default_speed_set(double v_target, double halfwidth = 3.0);

// Evaluates every candidate action's predicted safety and speed, grades the
// predictions through the membership sets (product t-norm with the comfort
// grade), and returns the greediness-weighted centroid. If every candidate
// grades to zero the maximum-brake candidate is returned.
Action fuzzy_act(const FuzzyControllerConfig& cfg, const Predictor& safety,
                 const Predictor& speed, const FeatureVector& features);

struct RuleWithSpeedConfig {
  // beta and alpha_decel set the braking onset and ramp rate. With a
  // well-trained discounted safety predictor the prediction stays near 1
  // until a few seconds before zone entry, so the defaults are tuned for a
  // full stop from highway speed that still leaves the minimum standoff gap.
  double beta{0.9};         // safety threshold on predicted front safety
  double alpha_decel{0.6};  // command decrement gain per unit of unsafety
  double alpha_speed{0.01}; // command increment gain per m/s of speed error
  double e_min{-5.0};       // m/s, speed-error clamp
  double e_max{5.0};
  double v_target{100.0 / 3.6};
  double a_min{-1.0};
  double a_max{1.0};
};

// Threshold rule on predicted front safety; above the threshold the command
// trails the predicted-speed error. Operates in actuator command units.
Action rule_act_with_speed(const RuleWithSpeedConfig& cfg,
                           const Predictor& safety, const Predictor& speed,
                           const FeatureVector& features, Action last);

struct RuleWithoutSpeedConfig {
  double beta1{0.8};         // brake below this predicted safety
  double beta2{0.9};         // accelerate above this; hold in between
  double alpha_decel{0.5};   // m/s decrement per unit of unsafety
  double alpha_accel{0.1};   // m/s increment per unit of predicted safety
  double v_target{2.0};      // m/s command ceiling
};

// Safety-only rule for platforms commanded by target speed. Commands live in
// [0, v_target] m/s; the predictor is queried with the last command mapped
// onto the [-1, 1] action scale. The hysteresis band [beta1, beta2] holds
// the previous command.
double rule_act_without_speed(const RuleWithoutSpeedConfig& cfg,
                              const Predictor& safety,
                              const FeatureVector& features,
                              double last_command_mps);

struct BaselineGapConfig {
  double k_gap{0.1};    // command per meter of spacing error
  double k_rel{0.02};   // command per m/s of closing speed
  double k_speed{0.08}; // command per m/s of cruise-speed error
  SafetyZoneParams zone{};
  double v_target{100.0 / 3.6};
  double a_min{-1.0};
  double a_max{1.0};
};

// Ground-truth-state gap controller: tracks the headway distance behind a
// lead and the target speed otherwise, taking the more cautious of the two.
Action baseline_act(const BaselineGapConfig& cfg, const WorldState& state);

}  // namespace gvfacc
