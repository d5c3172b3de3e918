#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gvfacc/controllers.hpp"
#include "gvfacc/learner.hpp"
#include "gvfacc/scenario.hpp"

namespace gvfacc {

// Final ego speed at or below this counts as "at rest" in the metrics.
inline constexpr double kRestSpeedEpsilon = 0.3;  // m/s

// Discounted accumulation of a recorded rollout of (scaled cumulant,
// continuation) pairs: sum_k (prod_{j<k} gamma_j) * c_k. The rollout must
// either terminate (gamma == 0) or be long enough that the remaining
// discount product is below residual_bound; otherwise this throws.
double mc_return(std::span<const std::pair<double, double>> rollout,
                 double residual_bound = 1e-6);

// Empirical return from a live world: copies the engine snapshot, reseeds
// it, executes first_action, then follows the question's hold policy until
// termination or until the discount product drops below residual_bound.
// Uses only forward simulation and mc_return; no learner internals.
double mc_rollout_return(const ScenarioEngine& snapshot, Action first_action,
                         const Question& question, const SimConfig& sim,
                         const SafetyZoneParams& zone, double value_scale,
                         std::mt19937& rng, double residual_bound = 1e-6);

// Exact values of a deterministic left-to-right chain: v[i] = c[i] +
// gamma[i] * v[i+1], where c[i] / gamma[i] are the scaled cumulant and
// continuation observed on the transition out of state i. The last state
// loops onto itself, so v[last] = c[last] / (1 - gamma[last]); gamma[last]=0
// makes it terminal. This is (I - gamma P)^-1 c solved by back-substitution.
std::vector<double> build_tabular_oracle(std::span<const double> scaled_cumulants,
                                         std::span<const double> gammas);

enum class ControllerKind { Fuzzy, RuleWithSpeed, RuleWithoutSpeed, Baseline };

const char* to_string(ControllerKind kind);
ControllerKind controller_kind_from_string(const std::string& name);

struct ControllerBundle {
  FuzzyControllerConfig fuzzy;
  RuleWithSpeedConfig rule_with_speed;
  RuleWithoutSpeedConfig rule_without_speed;
  BaselineGapConfig baseline;
};

// Models available during a run; any may be null. Controllers use the front
// (and possibly speed) models; the rear model is only read for logging.
struct ModelSet {
  const GvfModel* front{nullptr};
  const GvfModel* speed{nullptr};
  const GvfModel* rear{nullptr};
};

struct StepRecord {
  double t{0.0};
  double x_ego{0.0}, v_ego{0.0};
  double x_lead{0.0}, v_lead{0.0};
  double x_rear{0.0}, v_rear{0.0};
  double action{0.0};
  double c_front{1.0}, c_rear{1.0};
  double pred_front{0.0}, pred_rear{0.0}, pred_speed{0.0};
  double gap_front{0.0}, gap_rear{0.0};
  double h_front{0.0}, h_rear{0.0};
};

struct Metrics {
  bool collided{false};
  bool ego_at_rest{false};
  double min_front_gap{0.0};
  double final_gap{0.0};
  double final_speed{0.0};
  double max_decel{0.0};               // m/s^2, magnitude
  double safety_violation_time{0.0};   // s with the front zone intruded
  double speed_rmse_to_target{0.0};
  std::optional<double> rear_warning_lead_time;  // s
};

struct ScenarioResult {
  std::string scenario;
  std::string controller;
  std::vector<StepRecord> records;
  bool truncated_by_collision{false};
  Metrics metrics;
};

// Closed-loop rollout of a scenario under one controller, deterministic per
// seed. Records one row per state (duration/dt + 1 unless a collision
// truncates the run). Rear predictions are logged passively; no controller
// reads them.
ScenarioResult run_scenario(const ScenarioSpec& spec, const SimConfig& sim,
                            ControllerKind kind, const ControllerBundle& bundle,
                            const ModelSet& models, std::uint32_t seed,
                            double warning_threshold = 0.5);

// Time from the rear prediction first dropping below threshold to the rear
// cumulant first reading 0. nullopt when the cumulant never drops or no
// warning fires; negative values mean the warning came late.
std::optional<double> rear_warning_lead_time(const ScenarioResult& result,
                                             double threshold);

struct SweepRow {
  double gamma{0.0};
  std::optional<double> crossing_time;     // s, prediction first < 0.5
  std::optional<double> first_unsafe_time; // s, cumulant first 0
};

// One model's prediction along the shared approach, next to the safety
// signal the prediction is about.
struct SweepTrace {
  double gamma{0.0};
  std::vector<std::array<double, 3>> rows;  // t, prediction, c_front
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SweepTrace> traces;
};

// Prediction-horizon read-out: drive a constant-command approach into the
// scenario's hazard and record, per model, when its prediction first falls
// below 0.5 on the way in. Models must be front-safety questions.
SweepResult horizon_sweep(
    const ScenarioSpec& spec, const SimConfig& sim,
    const std::vector<std::pair<double, const GvfModel*>>& models_by_gamma,
    std::uint32_t seed, double hold_command = 0.0);

// Delimited-text exports with fixed column sets, plus readers for them.
void write_result_csv(const ScenarioResult& result, const std::string& path);
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};
CsvTable read_csv(const std::string& path);

void write_metrics(const Metrics& metrics, const std::string& path);
Metrics read_metrics(const std::string& path);

void write_sweep_csv(const std::vector<SweepRow>& rows,
                     const std::string& path);
std::vector<SweepRow> read_sweep_csv(const std::string& path);

void write_sweep_trace_csv(const SweepTrace& trace, const std::string& path);

}  // namespace gvfacc
