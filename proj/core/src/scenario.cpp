#include "gvfacc/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gvfacc/util.hpp"

namespace gvfacc {

namespace {

constexpr double kHighwaySpeed = 100.0 / 3.6;  // m/s
constexpr double kLeadCruise = 80.0 / 3.6;

double sample_range(const RangeSpec& r, std::mt19937& rng) {
  if (r.hi < r.lo) throw ConfigError("range with hi < lo");
  if (r.hi == r.lo) return r.lo;
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

WorldState build_world(const ScenarioSpec& spec, const SimConfig& cfg,
                       double ego_speed, double lead_gap, double lead_speed,
                       double rear_gap_m, double rear_speed) {
  WorldState w;
  w.ego = {0.0, ego_speed, cfg.ego_length};
  if (spec.lead) {
    w.lead = VehicleState{lead_gap + cfg.lead_length, lead_speed,
                          cfg.lead_length};
  }
  if (spec.rear) {
    w.rear = VehicleState{-cfg.ego_length - rear_gap_m, rear_speed,
                          cfg.rear_length};
  }
  w.last_action = 0.0;
  w.prev_front_gap = measured_front_gap(w, cfg);
  w.prev_prev_front_gap = w.prev_front_gap;
  w.prev_rear_gap = measured_rear_gap(w, cfg);
  w.prev_prev_rear_gap = w.prev_rear_gap;
  w.time_step_index = 0;
  return w;
}

}  // namespace

double TimeScriptDriver::accel_at(double t) const {
  double a = 0.0;
  for (const auto& seg : segments) {
    if (t >= seg.t_start) a = seg.accel;
  }
  return a;
}

ScenarioSpec scenario_preset(const std::string& name) {
  ScenarioSpec s;
  s.name = name;
  if (name == "emergency_stop") {
    // Full-speed ego, stationary obstruction far ahead.
    s.duration = 60.0;
    s.v_target = kHighwaySpeed;
    s.ego_speed = {kHighwaySpeed - 0.5, kHighwaySpeed + 0.5};
    s.lead = VehicleInit{{240.0, 260.0}, {0.0, 0.0}};
    s.lead_driver = TimeScriptDriver{};
  } else if (name == "follow_and_stop") {
    // Slower lead cruises, then brakes hard to rest.
    s.duration = 60.0;
    s.v_target = kHighwaySpeed;
    s.ego_speed = {kHighwaySpeed - 0.5, kHighwaySpeed + 0.5};
    s.lead = VehicleInit{{140.0, 160.0}, {kLeadCruise, kLeadCruise}};
    s.lead_driver = TimeScriptDriver{{{0.0, 0.0}, {10.0, -6.0}}};
  } else if (name == "rear_approach") {
    // Tailgater closes at +5 m/s relative and settles well inside the
    // ego's rear safety zone.
    s.duration = 40.0;
    s.v_target = 20.0;
    s.ego_speed = {19.5, 20.5};
    s.rear = VehicleInit{{110.0, 130.0}, {24.5, 25.5}};
    GapTrackerDriver tracker;
    tracker.tau_follow_min = 2.0;
    tracker.tau_follow_max = 2.0;
    tracker.d_min_follow = 4.0;
    s.rear_driver = tracker;
  } else if (name == "free_drive") {
    s.duration = 30.0;
    s.v_target = kHighwaySpeed;
    s.ego_speed = {0.0, 0.0};
  } else if (name == "small_robot") {
    // Indoor-platform scale: short headway zone, slow speeds.
    s.duration = 30.0;
    s.v_target = 2.0;
    s.ego_speed = {0.8, 1.2};
    s.lead = VehicleInit{{3.0, 15.0}, {0.0, 1.5}};
    RandomDriver d;
    d.accel_min = -1.0;
    d.accel_max = 0.8;
    d.hard_brake_prob = 0.2;
    d.hard_brake_accel = -1.5;
    s.lead_driver = d;
    s.zone = SafetyZoneParams{1.5, 0.4, 0};
  } else if (name == "front_training") {
    // Wide-randomized approaches and follows for front-safety learning.
    s.duration = 40.0;
    s.v_target = kHighwaySpeed;
    s.ego_speed = {0.0, 30.0};
    s.lead = VehicleInit{{5.0, 180.0}, {0.0, 30.0}};
    s.lead_driver = RandomDriver{};
  } else if (name == "rear_training") {
    s.duration = 40.0;
    s.v_target = kHighwaySpeed;
    s.ego_speed = {5.0, 30.0};
    s.rear = VehicleInit{{5.0, 150.0}, {0.0, 30.0}};
    GapTrackerDriver tracker;
    tracker.tau_follow_min = 1.5;
    tracker.tau_follow_max = 4.0;
    s.rear_driver = tracker;
  } else {
    std::ostringstream msg;
    msg << "unknown scenario '" << name << "'; valid names:";
    for (const auto& n : scenario_preset_names()) msg << ' ' << n;
    throw ConfigError(msg.str());
  }
  return s;
}

std::vector<std::string> scenario_preset_names() {
  return {"emergency_stop", "follow_and_stop", "rear_approach", "free_drive",
          "small_robot",    "front_training",  "rear_training"};
}

WorldState reset_scenario(const ScenarioSpec& spec, const SimConfig& cfg) {
  return build_world(spec, cfg, spec.ego_speed.nominal(),
                     spec.lead ? spec.lead->gap.nominal() : 0.0,
                     spec.lead ? spec.lead->speed.nominal() : 0.0,
                     spec.rear ? spec.rear->gap.nominal() : 0.0,
                     spec.rear ? spec.rear->speed.nominal() : 0.0);
}

WorldState reset_scenario(const ScenarioSpec& spec, const SimConfig& cfg,
                          std::mt19937& rng) {
  const double ego_speed = sample_range(spec.ego_speed, rng);
  double lead_gap = 0.0, lead_speed = 0.0, rear_gap_m = 0.0, rear_speed = 0.0;
  if (spec.lead) {
    lead_gap = sample_range(spec.lead->gap, rng);
    lead_speed = sample_range(spec.lead->speed, rng);
  }
  if (spec.rear) {
    rear_gap_m = sample_range(spec.rear->gap, rng);
    rear_speed = sample_range(spec.rear->speed, rng);
  }
  return build_world(spec, cfg, ego_speed, lead_gap, lead_speed, rear_gap_m,
                     rear_speed);
}

ScenarioEngine::ScenarioEngine(ScenarioSpec spec, SimConfig cfg,
                               std::uint32_t seed)
    : spec_(std::move(spec)), cfg_(cfg), rng_(seed) {
  reset();
}

void ScenarioEngine::reset() {
  world_ = reset_scenario(spec_, cfg_, rng_);
  rear_tracker_ = TrackerState{};
  if (const auto* d = std::get_if<GapTrackerDriver>(&spec_.rear_driver)) {
    rear_tracker_.tau_follow =
        d->tau_follow_min == d->tau_follow_max
            ? d->tau_follow_min
            : std::uniform_real_distribution<double>(d->tau_follow_min,
                                                     d->tau_follow_max)(rng_);
  }
  lead_random_ = RandomState{};
  rear_random_ = RandomState{};
}

double ScenarioEngine::tracker_accel(const GapTrackerDriver& d,
                                     TrackerState& st, double gap,
                                     double own_speed, double other_speed) {
  const double desired = d.d_min_follow + st.tau_follow * own_speed;
  st.delayed.emplace_back(gap - desired, other_speed - own_speed);
  const std::size_t delay_steps =
      static_cast<std::size_t>(std::lround(d.reaction_delay / cfg_.dt));
  while (st.delayed.size() > delay_steps + 1) st.delayed.pop_front();
  const auto [err, rel] = st.delayed.front();
  return std::clamp(d.k_gap * err + d.k_rel * rel, d.accel_min, d.accel_max);
}

double ScenarioEngine::random_accel(const RandomDriver& d, RandomState& st) {
  if (st.remaining <= 0.0) {
    if (std::uniform_real_distribution<double>(0.0, 1.0)(rng_) <
        d.hard_brake_prob) {
      st.accel = d.hard_brake_accel;
    } else {
      st.accel =
          std::uniform_real_distribution<double>(d.accel_min, d.accel_max)(rng_);
    }
    st.remaining =
        std::uniform_real_distribution<double>(d.hold_min, d.hold_max)(rng_);
  }
  st.remaining -= cfg_.dt;
  return st.accel;
}

double ScenarioEngine::lead_accel() {
  if (!world_.lead) return 0.0;
  if (const auto* script = std::get_if<TimeScriptDriver>(&spec_.lead_driver)) {
    return script->accel_at(time());
  }
  if (const auto* rnd = std::get_if<RandomDriver>(&spec_.lead_driver)) {
    return random_accel(*rnd, lead_random_);
  }
  if (const auto* tracker = std::get_if<GapTrackerDriver>(&spec_.lead_driver)) {
    // A lead tracking the ego backwards makes no sense; treat as scripted 0.
    (void)tracker;
    return 0.0;
  }
  return 0.0;
}

double ScenarioEngine::rear_accel() {
  if (!world_.rear) return 0.0;
  if (const auto* script = std::get_if<TimeScriptDriver>(&spec_.rear_driver)) {
    return script->accel_at(time());
  }
  if (const auto* rnd = std::get_if<RandomDriver>(&spec_.rear_driver)) {
    return random_accel(*rnd, rear_random_);
  }
  if (const auto* tracker = std::get_if<GapTrackerDriver>(&spec_.rear_driver)) {
    return tracker_accel(*tracker, rear_tracker_, rear_gap(world_),
                         world_.rear->speed, world_.ego.speed);
  }
  return 0.0;
}

StepOutcome ScenarioEngine::step(Action ego_action) {
  StepOutcome out =
      gvfacc::step(world_, ego_action, lead_accel(), rear_accel(), cfg_);
  world_ = out.next_state;
  return out;
}

}  // namespace gvfacc
