#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "gvfacc/controllers.hpp"
#include "gvfacc/cumulants.hpp"
#include "gvfacc/evaluation.hpp"
#include "gvfacc/learner.hpp"
#include "gvfacc/sim.hpp"

namespace gvfacc {

// Evaluation knobs that sit outside any one scenario preset. The optional
// overrides replace the preset's duration / target speed when present.
struct EvalConfig {
  double warning_threshold{0.5};  // rear predictions below this raise a warning
  std::optional<double> duration_override;  // s
  std::optional<double> v_target_override;  // m/s
};

// The complete tree of run settings. Every field has a default, so an empty
// document is a valid config; unknown keys anywhere in the tree are errors.
//
// Speed targets for the scenario-following controllers (fuzzy speed goal,
// rule_with_speed, baseline) are not config keys: they always track the
// resolved scenario's target speed so config and scenario cannot disagree.
// rule_without_speed.v_target is a config key because it is an actuation
// ceiling of the platform, not a scenario preference.
struct RunConfig {
  std::uint32_t seed{1};
  std::string output_dir{"runs"};
  SimConfig sim;
  SafetyZoneParams zone;
  Question question;
  TrainConfig train;
  ControllerBundle controllers;
  EvalConfig eval;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

// Effective-config snapshot; parse(run_config_to_text(c)) reproduces c's
// file-backed fields exactly, and the text is byte-stable per config.
std::string run_config_to_text(const RunConfig& config);
void save_run_config(const RunConfig& config, const std::string& path);

// Preset lookup plus the eval overrides and the run's zone parameters.
ScenarioSpec resolve_scenario(const std::string& name, const RunConfig& config);

// Copies the bundle with the scenario-dependent fields bound: speed targets
// take the spec's v_target, the baseline adopts the spec's zone, and an
// empty fuzzy speed set is replaced by default_speed_set(spec.v_target).
ControllerBundle bind_controllers(const ControllerBundle& base,
                                  const ScenarioSpec& spec);

}  // namespace gvfacc
