#include "gvfacc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gvfacc/util.hpp"

namespace gvfacc {

namespace {

using nlohmann::json;

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

const char* kResultHeader =
    "t,x_ego,v_ego,x_lead,v_lead,x_rear,v_rear,action,c_front,c_rear,"
    "pred_front,pred_rear,pred_speed,gap_front,gap_rear,h_front,h_rear";

void require_model(const GvfModel* model, CumulantKind kind,
                   const SimConfig& sim, const char* role) {
  if (!model) {
    throw ModelError(std::string("controller requires a ") + role + " model");
  }
  if (model->question.kind != kind) {
    throw ModelError(std::string(role) + " model slot holds a '" +
                     to_string(model->question.kind) + "' question");
  }
  if (!(model->scaling == FeatureScaling::from(sim))) {
    throw ModelError(std::string(role) +
                     " model was trained with different feature scaling");
  }
}

void check_passive(const GvfModel* model, CumulantKind kind,
                   const SimConfig& sim, const char* role) {
  if (model) require_model(model, kind, sim, role);
}

}  // namespace

double mc_return(std::span<const std::pair<double, double>> rollout,
                 double residual_bound) {
  double total = 0.0;
  double weight = 1.0;
  for (const auto& [c, gamma] : rollout) {
    total += weight * c;
    weight *= gamma;
    if (weight == 0.0) return total;
  }
  if (weight > residual_bound) {
    throw std::invalid_argument(
        "rollout too short: residual discount product " +
        format_double(weight) + " above bound " + format_double(residual_bound));
  }
  return total;
}

double mc_rollout_return(const ScenarioEngine& snapshot, Action first_action,
                         const Question& question, const SimConfig& sim,
                         const SafetyZoneParams& zone, double value_scale,
                         std::mt19937& rng, double residual_bound) {
  ScenarioEngine engine = snapshot;
  engine.reseed(static_cast<std::uint32_t>(rng()));
  const ContinuationParams cont{question.gamma};
  const TargetPolicy policy{question.sigma};

  std::vector<std::pair<double, double>> rollout;
  double weight = 1.0;
  Action a = first_action;
  while (weight > residual_bound) {
    const StepOutcome out = engine.step(a);
    const double gamma_next = continuation(out, question.kind, cont);
    const double c =
        scale_cumulant(raw_cumulant(out, question.kind, zone), gamma_next) /
        value_scale;
    rollout.emplace_back(c, gamma_next);
    weight *= gamma_next;
    if (gamma_next == 0.0) break;
    a = sample_target_action(policy, a, rng, sim.action_min, sim.action_max);
  }
  return mc_return(rollout, residual_bound);
}

std::vector<double> build_tabular_oracle(
    std::span<const double> scaled_cumulants, std::span<const double> gammas) {
  if (scaled_cumulants.empty()) {
    throw std::invalid_argument("chain must have at least one state");
  }
  if (scaled_cumulants.size() != gammas.size()) {
    throw std::invalid_argument("one continuation per chain state required");
  }
  for (double g : gammas) {
    if (!(g >= 0.0 && g < 1.0)) {
      throw std::invalid_argument("chain continuations must lie in [0, 1)");
    }
  }
  const std::size_t n = scaled_cumulants.size();
  std::vector<double> v(n);
  v[n - 1] = scaled_cumulants[n - 1] / (1.0 - gammas[n - 1]);
  for (std::size_t i = n - 1; i-- > 0;) {
    v[i] = scaled_cumulants[i] + gammas[i] * v[i + 1];
  }
  return v;
}

const char* to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::Fuzzy: return "fuzzy";
    case ControllerKind::RuleWithSpeed: return "rule_with_speed";
    case ControllerKind::RuleWithoutSpeed: return "rule_without_speed";
    case ControllerKind::Baseline: return "baseline";
  }
  return "unknown";
}

ControllerKind controller_kind_from_string(const std::string& name) {
  if (name == "fuzzy") return ControllerKind::Fuzzy;
  if (name == "rule_with_speed") return ControllerKind::RuleWithSpeed;
  if (name == "rule_without_speed") return ControllerKind::RuleWithoutSpeed;
  if (name == "baseline") return ControllerKind::Baseline;
  throw ConfigError("unknown controller '" + name +
                    "'; valid: fuzzy rule_with_speed rule_without_speed baseline");
}

ScenarioResult run_scenario(const ScenarioSpec& spec, const SimConfig& sim,
                            ControllerKind kind, const ControllerBundle& bundle,
                            const ModelSet& models, std::uint32_t seed,
                            double warning_threshold) {
  switch (kind) {
    case ControllerKind::Fuzzy:
      require_model(models.front, CumulantKind::FrontSafety, sim, "front-safety");
      require_model(models.speed, CumulantKind::Speed, sim, "speed");
      break;
    case ControllerKind::RuleWithSpeed:
      require_model(models.front, CumulantKind::FrontSafety, sim, "front-safety");
      require_model(models.speed, CumulantKind::Speed, sim, "speed");
      break;
    case ControllerKind::RuleWithoutSpeed:
      require_model(models.front, CumulantKind::FrontSafety, sim, "front-safety");
      if (sim.action_mode != ActionMode::TargetSpeed) {
        throw ConfigError(
            "rule_without_speed emits speed commands; set the simulator to "
            "target_speed action mode");
      }
      if (bundle.rule_without_speed.v_target != sim.target_speed_ceiling) {
        throw ConfigError(
            "rule_without_speed v_target must equal the simulator's "
            "target_speed_ceiling");
      }
      break;
    case ControllerKind::Baseline:
      break;
  }
  check_passive(models.rear, CumulantKind::RearSafety, sim, "rear-safety");
  if (kind == ControllerKind::Baseline) {
    check_passive(models.front, CumulantKind::FrontSafety, sim, "front-safety");
    check_passive(models.speed, CumulantKind::Speed, sim, "speed");
  }

  const Predictor safety =
      models.front ? make_predictor(*models.front) : Predictor{};
  const Predictor speed_pred =
      models.speed ? make_predictor(*models.speed) : Predictor{};

  ScenarioEngine engine(spec, sim, seed);
  const int total_steps =
      static_cast<int>(std::lround(spec.duration / sim.dt));

  ScenarioResult result;
  result.scenario = spec.name;
  result.controller = to_string(kind);
  result.records.reserve(total_steps + 1);

  Action last{0.0};
  double last_cmd_mps = std::clamp(engine.world().ego.speed, 0.0,
                                   bundle.rule_without_speed.v_target);
  bool collided = false;

  for (int k = 0; k <= total_steps; ++k) {
    const WorldState& w = engine.world();
    const FeatureVector fv = extract_features(w, sim, FeatureView::Front);
    const FeatureVector fv_rear = extract_features(w, sim, FeatureView::Rear);

    Action a = last;
    if (!collided) {
      switch (kind) {
        case ControllerKind::Fuzzy:
          a = fuzzy_act(bundle.fuzzy, safety, speed_pred, fv);
          break;
        case ControllerKind::RuleWithSpeed:
          a = rule_act_with_speed(bundle.rule_with_speed, safety, speed_pred,
                                  fv, last);
          break;
        case ControllerKind::RuleWithoutSpeed: {
          last_cmd_mps = rule_act_without_speed(bundle.rule_without_speed,
                                                safety, fv, last_cmd_mps);
          const double span = sim.action_max - sim.action_min;
          a = Action{sim.action_min +
                     span * last_cmd_mps / sim.target_speed_ceiling};
          break;
        }
        case ControllerKind::Baseline:
          a = baseline_act(bundle.baseline, w);
          break;
      }
    }

    StepRecord rec;
    rec.t = k * sim.dt;
    rec.x_ego = w.ego.position;
    rec.v_ego = w.ego.speed;
    rec.x_lead = w.lead ? w.lead->position : kNan;
    rec.v_lead = w.lead ? w.lead->speed : kNan;
    rec.x_rear = w.rear ? w.rear->position : kNan;
    rec.v_rear = w.rear ? w.rear->speed : kNan;
    rec.action = a.command;
    rec.gap_front = w.lead ? front_gap(w) : kNan;
    rec.gap_rear = w.rear ? rear_gap(w) : kNan;
    rec.h_front = headway(w.ego.speed, spec.zone);
    rec.h_rear = w.rear ? headway(w.rear->speed, spec.zone) : kNan;
    rec.c_front =
        front_safety_cumulant(front_gap(w), w.ego.speed, spec.zone);
    rec.c_rear = w.rear ? rear_safety_cumulant(rear_gap(w), w.rear->speed,
                                               spec.zone)
                        : kNan;
    rec.pred_front = models.front ? predict(*models.front, fv, a) : kNan;
    rec.pred_speed = models.speed ? predict(*models.speed, fv, a) : kNan;
    rec.pred_rear = models.rear ? predict(*models.rear, fv_rear, a) : kNan;
    result.records.push_back(rec);

    if (collided || k == total_steps) break;
    const StepOutcome out = engine.step(a);
    collided = out.front_collision || out.rear_collision;
    last = a;
  }
  result.truncated_by_collision = collided;

  // Metrics over the recorded trajectory.
  Metrics& m = result.metrics;
  m.collided = collided;
  m.min_front_gap = kNan;
  double sq_err = 0.0;
  int unsafe_rows = 0;
  for (std::size_t i = 0; i < result.records.size(); ++i) {
    const StepRecord& r = result.records[i];
    if (std::isfinite(r.gap_front) &&
        !(r.gap_front >= m.min_front_gap)) {  // also catches the first NaN
      m.min_front_gap = r.gap_front;
    }
    if (r.c_front == 0.0) ++unsafe_rows;
    sq_err += (r.v_ego - spec.v_target) * (r.v_ego - spec.v_target);
    if (i > 0) {
      const double decel =
          (result.records[i - 1].v_ego - r.v_ego) / sim.dt;
      m.max_decel = std::max(m.max_decel, decel);
    }
  }
  const StepRecord& final_rec = result.records.back();
  m.final_speed = final_rec.v_ego;
  m.ego_at_rest = final_rec.v_ego <= kRestSpeedEpsilon;
  m.final_gap = final_rec.gap_front;
  m.safety_violation_time = unsafe_rows * sim.dt;
  m.speed_rmse_to_target =
      std::sqrt(sq_err / static_cast<double>(result.records.size()));
  m.rear_warning_lead_time = rear_warning_lead_time(result, warning_threshold);
  return result;
}

std::optional<double> rear_warning_lead_time(const ScenarioResult& result,
                                             double threshold) {
  std::optional<double> t_warn;
  std::optional<double> t_unsafe;
  for (const StepRecord& r : result.records) {
    if (!t_warn && std::isfinite(r.pred_rear) && r.pred_rear < threshold) {
      t_warn = r.t;
    }
    if (!t_unsafe && r.c_rear == 0.0) t_unsafe = r.t;
    if (t_warn && t_unsafe) break;
  }
  if (!t_unsafe || !t_warn) return std::nullopt;
  return *t_unsafe - *t_warn;
}

SweepResult horizon_sweep(
    const ScenarioSpec& spec, const SimConfig& sim,
    const std::vector<std::pair<double, const GvfModel*>>& models_by_gamma,
    std::uint32_t seed, double hold_command) {
  for (const auto& [gamma, model] : models_by_gamma) {
    if (!model) throw ModelError("missing model for gamma " + format_double(gamma));
    require_model(model, CumulantKind::FrontSafety, sim, "front-safety");
    if (std::abs(model->question.gamma - gamma) > 1e-9) {
      throw ModelError("model trained at gamma " +
                       format_double(model->question.gamma) +
                       " supplied for gamma " + format_double(gamma));
    }
  }

  ScenarioEngine engine(spec, sim, seed);
  const Action hold{hold_command};
  const int total_steps = static_cast<int>(std::lround(spec.duration / sim.dt));

  std::vector<std::vector<double>> preds(models_by_gamma.size());
  std::vector<double> cumulants;
  for (int k = 0; k <= total_steps; ++k) {
    const WorldState& w = engine.world();
    const FeatureVector fv = extract_features(w, sim, FeatureView::Front);
    for (std::size_t i = 0; i < models_by_gamma.size(); ++i) {
      preds[i].push_back(predict(*models_by_gamma[i].second, fv, hold));
    }
    cumulants.push_back(
        front_safety_cumulant(front_gap(w), w.ego.speed, spec.zone));
    if (k == total_steps) break;
    const StepOutcome out = engine.step(hold);
    if (out.front_collision || out.rear_collision) break;
  }

  std::optional<std::size_t> hazard_idx;
  for (std::size_t k = 0; k < cumulants.size(); ++k) {
    if (cumulants[k] == 0.0) {
      hazard_idx = k;
      break;
    }
  }
  const std::size_t search_end =
      hazard_idx ? *hazard_idx + 1 : cumulants.size();

  SweepResult result;
  for (std::size_t i = 0; i < models_by_gamma.size(); ++i) {
    SweepRow row;
    row.gamma = models_by_gamma[i].first;
    if (hazard_idx) row.first_unsafe_time = *hazard_idx * sim.dt;
    for (std::size_t k = 0; k < search_end; ++k) {
      if (preds[i][k] < 0.5) {
        row.crossing_time = k * sim.dt;
        break;
      }
    }
    result.rows.push_back(row);

    SweepTrace trace;
    trace.gamma = models_by_gamma[i].first;
    for (std::size_t k = 0; k < preds[i].size(); ++k) {
      trace.rows.push_back({k * sim.dt, preds[i][k], cumulants[k]});
    }
    result.traces.push_back(std::move(trace));
  }
  return result;
}

void write_result_csv(const ScenarioResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write result file '" + path + "'");
  out << kResultHeader << '\n';
  for (const StepRecord& r : result.records) {
    const double cols[] = {r.t,          r.x_ego,     r.v_ego,    r.x_lead,
                           r.v_lead,     r.x_rear,    r.v_rear,   r.action,
                           r.c_front,    r.c_rear,    r.pred_front,
                           r.pred_rear,  r.pred_speed, r.gap_front,
                           r.gap_rear,   r.h_front,   r.h_rear};
    for (std::size_t i = 0; i < std::size(cols); ++i) {
      if (i) out << ',';
      out << format_double(cols[i]);
    }
    out << '\n';
  }
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty file '" + path + "'");
  std::stringstream hs(line);
  std::string field;
  while (std::getline(hs, field, ',')) table.header.push_back(field);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    while (std::getline(ls, field, ',')) row.push_back(parse_double(field));
    if (row.size() != table.header.size()) {
      throw ConfigError("ragged row in '" + path + "'");
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_metrics(const Metrics& metrics, const std::string& path) {
  json j;
  j["collided"] = metrics.collided;
  j["ego_at_rest"] = metrics.ego_at_rest;
  j["min_front_gap"] = metrics.min_front_gap;
  j["final_gap"] = metrics.final_gap;
  j["final_speed"] = metrics.final_speed;
  j["max_decel"] = metrics.max_decel;
  j["safety_violation_time"] = metrics.safety_violation_time;
  j["speed_rmse_to_target"] = metrics.speed_rmse_to_target;
  if (metrics.rear_warning_lead_time) {
    j["rear_warning_lead_time"] = *metrics.rear_warning_lead_time;
  } else {
    j["rear_warning_lead_time"] = nullptr;
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write metrics file '" + path + "'");
  out << j.dump(2) << '\n';
}

Metrics read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open metrics file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed metrics file '" + path + "': " + e.what());
  }
  // Non-finite values serialize as JSON null; read them back as NaN.
  const auto num = [&](const char* key) {
    const json& v = j.at(key);
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN()
                       : v.get<double>();
  };
  Metrics m;
  m.collided = j.at("collided").get<bool>();
  m.ego_at_rest = j.at("ego_at_rest").get<bool>();
  m.min_front_gap = num("min_front_gap");
  m.final_gap = num("final_gap");
  m.final_speed = num("final_speed");
  m.max_decel = num("max_decel");
  m.safety_violation_time = num("safety_violation_time");
  m.speed_rmse_to_target = num("speed_rmse_to_target");
  if (!j.at("rear_warning_lead_time").is_null()) {
    m.rear_warning_lead_time = j.at("rear_warning_lead_time").get<double>();
  }
  return m;
}

void write_sweep_csv(const std::vector<SweepRow>& rows,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write sweep file '" + path + "'");
  out << "gamma,crossing_time_s,first_unsafe_time_s\n";
  for (const SweepRow& r : rows) {
    out << format_double(r.gamma) << ','
        << format_double(r.crossing_time.value_or(kNan)) << ','
        << format_double(r.first_unsafe_time.value_or(kNan)) << '\n';
  }
}

void write_sweep_trace_csv(const SweepTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write trace file '" + path + "'");
  out << "t,prediction,c_front\n";
  for (const auto& r : trace.rows) {
    out << format_double(r[0]) << ',' << format_double(r[1]) << ','
        << format_double(r[2]) << '\n';
  }
}

std::vector<SweepRow> read_sweep_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  if (table.header !=
      std::vector<std::string>{"gamma", "crossing_time_s",
                               "first_unsafe_time_s"}) {
    throw ConfigError("unexpected sweep header in '" + path + "'");
  }
  std::vector<SweepRow> rows;
  for (const auto& r : table.rows) {
    SweepRow row;
    row.gamma = r[0];
    if (std::isfinite(r[1])) row.crossing_time = r[1];
    if (std::isfinite(r[2])) row.first_unsafe_time = r[2];
    rows.push_back(row);
  }
  return rows;
}

}  // namespace gvfacc
