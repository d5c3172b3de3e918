#include "gvfacc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gvfacc {

namespace {

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw std::invalid_argument(std::string("non-finite ") + what);
  }
}

// Speed first, then position from the new speed; keeps x' - x == v' * dt
// exact in floating point.
VehicleState integrate(const VehicleState& vs, double accel,
                       const SimConfig& cfg) {
  VehicleState out = vs;
  out.speed = std::clamp(vs.speed + accel * cfg.dt, 0.0, cfg.v_max);
  out.position = vs.position + out.speed * cfg.dt;
  return out;
}

double scale_gap(double measured_gap, const SimConfig& cfg) {
  return measured_gap / cfg.sensor_range * 2.0 - 1.0;
}

}  // namespace

double front_gap(const WorldState& state) {
  if (!state.lead) return std::numeric_limits<double>::infinity();
  return state.lead->position - state.ego.position - state.lead->length;
}

double rear_gap(const WorldState& state) {
  if (!state.rear) return std::numeric_limits<double>::infinity();
  return state.ego.position - state.ego.length - state.rear->position;
}

double measured_front_gap(const WorldState& state, const SimConfig& cfg) {
  return std::min(front_gap(state), cfg.sensor_range);
}

double measured_rear_gap(const WorldState& state, const SimConfig& cfg) {
  return std::min(rear_gap(state), cfg.sensor_range);
}

double engine_scale(const SimConfig& cfg, double speed) {
  const PiecewiseLinear curve{
      std::vector<std::array<double, 2>>(cfg.engine_curve_knots)};
  return curve(speed);
}

double ego_acceleration(const SimConfig& cfg, double command, double speed) {
  check_finite(command, "command");
  const double cmd = std::clamp(command, cfg.action_min, cfg.action_max);
  switch (cfg.action_mode) {
    case ActionMode::ThrottleBrake:
      if (cmd >= 0.0) {
        return cmd * cfg.a_max_throttle * engine_scale(cfg, speed);
      }
      return cmd * cfg.a_max_brake;
    case ActionMode::TargetSpeed: {
      const double span = cfg.action_max - cfg.action_min;
      const double desired =
          (cmd - cfg.action_min) / span * cfg.target_speed_ceiling;
      const double accel = cfg.speed_layer_gain * (desired - speed);
      return std::clamp(accel, -cfg.a_max_brake,
                        cfg.a_max_throttle * engine_scale(cfg, speed));
    }
  }
  throw std::logic_error("unhandled action mode");
}

StepOutcome step(const WorldState& state, Action ego_action,
                 double lead_accel, double rear_accel, const SimConfig& cfg) {
  check_finite(ego_action.command, "ego command");
  check_finite(lead_accel, "lead acceleration");
  check_finite(rear_accel, "rear acceleration");
  if (cfg.dt <= 0.0) throw std::invalid_argument("dt must be positive");

  const double cmd =
      std::clamp(ego_action.command, cfg.action_min, cfg.action_max);
  const double old_front = measured_front_gap(state, cfg);
  const double old_rear = measured_rear_gap(state, cfg);

  StepOutcome out;
  out.next_state = state;
  WorldState& next = out.next_state;

  next.ego = integrate(state.ego, ego_acceleration(cfg, cmd, state.ego.speed),
                       cfg);
  if (state.lead) next.lead = integrate(*state.lead, lead_accel, cfg);
  if (state.rear) next.rear = integrate(*state.rear, rear_accel, cfg);

  next.last_action = cmd;
  next.prev_prev_front_gap = state.prev_front_gap;
  next.prev_front_gap = old_front;
  next.prev_prev_rear_gap = state.prev_rear_gap;
  next.prev_rear_gap = old_rear;
  next.time_step_index = state.time_step_index + 1;

  out.front_collision = next.lead && front_gap(next) <= 0.0;
  out.rear_collision = next.rear && rear_gap(next) <= 0.0;
  out.features = extract_features(next, cfg, FeatureView::Front);
  return out;
}

FeatureVector extract_features(const WorldState& state, const SimConfig& cfg,
                               FeatureView view) {
  FeatureVector f;
  f.speed = state.ego.speed / cfg.v_max * 2.0 - 1.0;
  f.last_command = state.last_action;
  switch (view) {
    case FeatureView::Front: {
      const double g = measured_front_gap(state, cfg);
      f.gap = scale_gap(g, cfg);
      f.d_gap = (g - state.prev_front_gap) / cfg.d_gap_range;
      f.d_gap_prev =
          (state.prev_front_gap - state.prev_prev_front_gap) / cfg.d_gap_range;
      break;
    }
    case FeatureView::Rear: {
      const double g = measured_rear_gap(state, cfg);
      f.gap = scale_gap(g, cfg);
      f.d_gap = (g - state.prev_rear_gap) / cfg.d_gap_range;
      f.d_gap_prev =
          (state.prev_rear_gap - state.prev_prev_rear_gap) / cfg.d_gap_range;
      break;
    }
    case FeatureView::SpeedOnly:
      f.gap = 1.0;  // the "nothing in range" reading
      f.d_gap = 0.0;
      f.d_gap_prev = 0.0;
      break;
  }
  return f;
}

}  // namespace gvfacc
