#pragma once

#include <deque>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "gvfacc/cumulants.hpp"
#include "gvfacc/sim.hpp"

namespace gvfacc {

// Piecewise-constant acceleration schedule; the segment active at time t is
// the last one with t_start <= t, 0 before the first segment.
struct TimeScriptSegment {
  double t_start{0.0};
  double accel{0.0};
};

struct TimeScriptDriver {
  std::vector<TimeScriptSegment> segments;
  double accel_at(double t) const;
};

// Proportional gap tracker acting on observations that are reaction_delay
// seconds old. Used for the vehicle behind the ego: it tries to hold
// d_min_follow + tau_follow * own_speed of spacing, so late reactions to ego
// braking squeeze the gap before it recovers.
struct GapTrackerDriver {
  double k_gap{0.05};          // 1/s^2
  double k_rel{0.3};           // 1/s
  double tau_follow_min{3.5};  // s, sampled per episode
  double tau_follow_max{3.5};
  double d_min_follow{5.0};    // m
  double reaction_delay{0.6};  // s
  double accel_min{-6.0};
  double accel_max{2.5};
};

// Uncorrelated exploration traffic: holds a uniformly drawn acceleration for
// a uniformly drawn duration, occasionally committing to a hard brake.
struct RandomDriver {
  double accel_min{-4.0};
  double accel_max{2.5};
  double hold_min{0.5};   // s
  double hold_max{3.0};
  double hard_brake_prob{0.15};
  double hard_brake_accel{-6.0};
};

using DriverSpec =
    std::variant<std::monostate, TimeScriptDriver, GapTrackerDriver,
                 RandomDriver>;

// Uniform initial-condition ranges; a degenerate range pins the value.
struct RangeSpec {
  double lo{0.0};
  double hi{0.0};
  double nominal() const { return 0.5 * (lo + hi); }
};

struct VehicleInit {
  RangeSpec gap;    // m, bumper-to-bumper gap to the ego at t = 0
  RangeSpec speed;  // m/s
};

struct ScenarioSpec {
  std::string name{"free_drive"};
  double duration{30.0};   // s; training treats this as the episode cap
  double v_target{100.0 / 3.6};
  RangeSpec ego_speed{0.0, 0.0};
  std::optional<VehicleInit> lead;
  DriverSpec lead_driver{};
  std::optional<VehicleInit> rear;
  DriverSpec rear_driver{};
  SafetyZoneParams zone{};
};

// Built-in scenarios. "emergency_stop", "follow_and_stop", "rear_approach",
// "free_drive" and "small_robot" are evaluation settings; "front_training"
// and "rear_training" are wide-randomized worlds for learning.
ScenarioSpec scenario_preset(const std::string& name);
std::vector<std::string> scenario_preset_names();

// Initial world for a scenario; the rng overload draws initial conditions
// from the spec's ranges, the other uses nominal midpoints. Gap history is
// seeded with the initial measurements so gap-delta features start at zero,
// and last_action starts at 0.
WorldState reset_scenario(const ScenarioSpec& spec, const SimConfig& cfg);
WorldState reset_scenario(const ScenarioSpec& spec, const SimConfig& cfg,
                          std::mt19937& rng);

// Owns the world plus the scripted drivers' internal state (delay buffers,
// random holds). Deterministic for a given seed.
class ScenarioEngine {
 public:
  ScenarioEngine(ScenarioSpec spec, SimConfig cfg, std::uint32_t seed);

  const ScenarioSpec& spec() const { return spec_; }
  const WorldState& world() const { return world_; }
  double time() const { return world_.time_step_index * cfg_.dt; }
  bool episode_over() const { return time() >= spec_.duration; }

  void reset();
  // Re-randomizes future driver draws without touching the current world;
  // lets copies of a snapshot roll out independent futures.
  void reseed(std::uint32_t seed) { rng_.seed(seed); }
  StepOutcome step(Action ego_action);

 private:
  struct TrackerState {
    double tau_follow{3.5};
    std::deque<std::pair<double, double>> delayed;  // (gap error, rel speed)
  };
  struct RandomState {
    double accel{0.0};
    double remaining{0.0};
  };

  double lead_accel();
  double rear_accel();
  double tracker_accel(const GapTrackerDriver& d, TrackerState& st,
                       double gap, double own_speed, double other_speed);
  double random_accel(const RandomDriver& d, RandomState& st);

  ScenarioSpec spec_;
  SimConfig cfg_;
  std::mt19937 rng_;
  WorldState world_;
  TrackerState rear_tracker_;
  RandomState lead_random_;
  RandomState rear_random_;
};

}  // namespace gvfacc
