#pragma once

#include <Eigen/Core>

#include <array>
#include <optional>
#include <vector>

#include "gvfacc/util.hpp"

namespace gvfacc {

// Positions are front-bumper positions along a single lane, in meters.
struct VehicleState {
  double position{0.0};
  double speed{0.0};
  double length{4.0};
};

// How the ego command in [-1, 1] is actuated.
//  ThrottleBrake: command >= 0 is throttle fraction, < 0 is brake fraction.
//  TargetSpeed:   command maps affinely onto [0, target_speed_ceiling] m/s and
//                 a proportional low-level layer tracks that speed.
enum class ActionMode { ThrottleBrake, TargetSpeed };

struct SimConfig {
  double dt{0.05};                // s
  double a_max_throttle{3.0};     // m/s^2 at the engine curve's unit point
  double a_max_brake{6.0};        // m/s^2, magnitude
  double v_max{40.0};             // m/s, hard speed ceiling for every vehicle
  double action_min{-1.0};
  double action_max{1.0};
  // Engine strength multiplier vs speed; piecewise-linear between knots.
  std::vector<std::array<double, 2>> engine_curve_knots{
      {0.0, 1.0}, {15.0, 0.7}, {30.0, 0.4}};
  double ego_length{4.0};
  double lead_length{4.0};
  double rear_length{4.0};
  double sensor_range{200.0};     // m, gap measurements saturate here
  double d_gap_range{2.0};        // m per step, scale for gap-delta features
  ActionMode action_mode{ActionMode::ThrottleBrake};
  double target_speed_ceiling{30.0};  // m/s, TargetSpeed mode only
  double speed_layer_gain{1.5};       // 1/s, TargetSpeed tracking gain
};

struct WorldState {
  VehicleState ego;
  std::optional<VehicleState> lead;
  std::optional<VehicleState> rear;
  double last_action{0.0};
  // Saturated gap measurements from the two previous steps, kept so gap
  // deltas are part of the observation.
  double prev_front_gap{0.0};
  double prev_prev_front_gap{0.0};
  double prev_rear_gap{0.0};
  double prev_prev_rear_gap{0.0};
  int time_step_index{0};
};

struct Action {
  double command{0.0};
};

// Observation handed to predictors: gap and its two most recent deltas,
// ego speed, and the previous command, each affinely scaled to roughly
// [-1, 1]. The same layout serves the front and rear gap sensors; speed
// predictors mask the gap slots (see FeatureView).
struct FeatureVector {
  static constexpr int kDim = 5;
  double gap{1.0};
  double d_gap{0.0};
  double d_gap_prev{0.0};
  double speed{-1.0};
  double last_command{0.0};

  Eigen::Matrix<double, kDim, 1> as_vector() const {
    Eigen::Matrix<double, kDim, 1> v;
    v << gap, d_gap, d_gap_prev, speed, last_command;
    return v;
  }
};

// Which sensor fills the gap slots of a FeatureVector.
//  Front:     gap to the vehicle ahead.
//  Rear:      gap to the vehicle behind.
//  SpeedOnly: gap slots pinned to the "no vehicle" reading; used by speed
//             predictors, which are trained without traffic.
enum class FeatureView { Front, Rear, SpeedOnly };

struct StepOutcome {
  WorldState next_state;
  bool front_collision{false};
  bool rear_collision{false};
  FeatureVector features;  // front view of next_state
};

// Fixed affine feature scaling; recorded in model files so a model can be
// checked against the world it is asked to predict in.
struct FeatureScaling {
  double sensor_range{200.0};
  double d_gap_range{2.0};
  double speed_range{40.0};

  static FeatureScaling from(const SimConfig& cfg) {
    return {cfg.sensor_range, cfg.d_gap_range, cfg.v_max};
  }
  bool operator==(const FeatureScaling&) const = default;
};

// Raw bumper-to-bumper gaps; +infinity when the neighbor is absent.
double front_gap(const WorldState& state);
double rear_gap(const WorldState& state);

// Gaps as the sensor reports them: saturated at sensor_range, and reading
// sensor_range when no vehicle is present.
double measured_front_gap(const WorldState& state, const SimConfig& cfg);
double measured_rear_gap(const WorldState& state, const SimConfig& cfg);

// Engine strength multiplier at a given speed.
double engine_scale(const SimConfig& cfg, double speed);

// Longitudinal acceleration produced by a command at a given ego speed.
double ego_acceleration(const SimConfig& cfg, double command, double speed);

// Advances the world by one step of semi-implicit Euler: speeds update
// first (clamped to [0, v_max]), then positions move by v' * dt. The lead
// and rear vehicles follow externally supplied accelerations.
StepOutcome step(const WorldState& state, Action ego_action,
                 double lead_accel, double rear_accel, const SimConfig& cfg);

// Scaled observation of a state. Pure; does not mutate the state.
FeatureVector extract_features(const WorldState& state, const SimConfig& cfg,
                               FeatureView view = FeatureView::Front);

}  // namespace gvfacc
