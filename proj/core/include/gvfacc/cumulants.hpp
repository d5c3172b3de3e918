#pragma once

#include <string>

#include "gvfacc/sim.hpp"

namespace gvfacc {

// Longitudinal safety zone: a vehicle inside gap < d_min + speed * tau
// counts as an intrusion. intrusion_budget is the number of intrusions
// tolerated before the state is labeled unsafe (0 on the road).
struct SafetyZoneParams {
  double tau{3.0};               // s
  double d_min{4.0};             // m
  int intrusion_budget{0};
};

struct ContinuationParams {
  double gamma_const{0.95};
};

enum class CumulantKind { FrontSafety, RearSafety, Speed };

const char* to_string(CumulantKind kind);
CumulantKind cumulant_kind_from_string(const std::string& name);

// Zone depth ahead of the moving observer. The front zone grows with ego
// speed; the rear zone grows with the rear vehicle's speed.
double headway(double speed, const SafetyZoneParams& params);

// 1 while the zone is clear (gap == headway counts as clear), 0 once the
// intrusion budget is exceeded.
double front_safety_cumulant(double front_gap_m, double ego_speed,
                             const SafetyZoneParams& params);
double rear_safety_cumulant(double rear_gap_m, double rear_speed,
                            const SafetyZoneParams& params);

// Ego speed itself; never terminates.
double speed_cumulant(double ego_speed);

// Per-step continuation: the constant gamma, except 0 when the collision
// matching the question's direction happened on this step. Speed questions
// never terminate.
double continuation(const StepOutcome& outcome, CumulantKind kind,
                    const ContinuationParams& params);

// Cumulants are scaled by (1 - gamma_next) so that returns of an all-ones
// signal normalize to 1; a terminating step (gamma_next == 0) passes its
// cumulant through at full weight.
double scale_cumulant(double raw, double gamma_next);

// Convenience: the question's cumulant evaluated on the state produced by a
// step (raw, unscaled).
double raw_cumulant(const StepOutcome& outcome, CumulantKind kind,
                    const SafetyZoneParams& params);

}  // namespace gvfacc
