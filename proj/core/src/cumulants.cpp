#include "gvfacc/cumulants.hpp"

#include <cmath>
#include <stdexcept>

#include "gvfacc/util.hpp"

namespace gvfacc {

const char* to_string(CumulantKind kind) {
  switch (kind) {
    case CumulantKind::FrontSafety: return "front_safety";
    case CumulantKind::RearSafety: return "rear_safety";
    case CumulantKind::Speed: return "speed";
  }
  return "unknown";
}

CumulantKind cumulant_kind_from_string(const std::string& name) {
  if (name == "front_safety" || name == "front") return CumulantKind::FrontSafety;
  if (name == "rear_safety" || name == "rear") return CumulantKind::RearSafety;
  if (name == "speed") return CumulantKind::Speed;
  throw ConfigError("unknown cumulant kind '" + name +
                    "' (expected front, rear, or speed)");
}

double headway(double speed, const SafetyZoneParams& params) {
  if (speed < 0.0 || !std::isfinite(speed)) {
    throw std::invalid_argument("headway requires a finite non-negative speed");
  }
  return params.d_min + speed * params.tau;
}

namespace {

double zone_safety(double gap, double zone_speed,
                   const SafetyZoneParams& params) {
  const int intrusions = gap < headway(zone_speed, params) ? 1 : 0;
  return intrusions > params.intrusion_budget ? 0.0 : 1.0;
}

}  // namespace

double front_safety_cumulant(double front_gap_m, double ego_speed,
                             const SafetyZoneParams& params) {
  return zone_safety(front_gap_m, ego_speed, params);
}

double rear_safety_cumulant(double rear_gap_m, double rear_speed,
                            const SafetyZoneParams& params) {
  return zone_safety(rear_gap_m, rear_speed, params);
}

double speed_cumulant(double ego_speed) { return ego_speed; }

double continuation(const StepOutcome& outcome, CumulantKind kind,
                    const ContinuationParams& params) {
  switch (kind) {
    case CumulantKind::FrontSafety:
      return outcome.front_collision ? 0.0 : params.gamma_const;
    case CumulantKind::RearSafety:
      return outcome.rear_collision ? 0.0 : params.gamma_const;
    case CumulantKind::Speed:
      return params.gamma_const;
  }
  throw std::logic_error("unhandled cumulant kind");
}

double scale_cumulant(double raw, double gamma_next) {
  return (1.0 - gamma_next) * raw;
}

double raw_cumulant(const StepOutcome& outcome, CumulantKind kind,
                    const SafetyZoneParams& params) {
  const WorldState& s = outcome.next_state;
  switch (kind) {
    case CumulantKind::FrontSafety:
      return front_safety_cumulant(front_gap(s), s.ego.speed, params);
    case CumulantKind::RearSafety:
      return rear_safety_cumulant(rear_gap(s), s.rear ? s.rear->speed : 0.0,
                                  params);
    case CumulantKind::Speed:
      return speed_cumulant(s.ego.speed);
  }
  throw std::logic_error("unhandled cumulant kind");
}

}  // namespace gvfacc
