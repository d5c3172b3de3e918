#include "gvfacc/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gvfacc/util.hpp"

namespace gvfacc {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

[[noreturn]] void bad_key(const std::string& section, const std::string& key) {
  throw ConfigError("unknown config key '" + section + "." + key + "'");
}

void check_keys(const json& j, const std::string& section,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) {
    throw ConfigError("config section '" + section + "' must be an object");
  }
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed) {
      if (item.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) bad_key(section, item.key());
  }
}

double get_num(const json& j, const std::string& section, const char* key,
               double fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number()) {
    throw ConfigError("config key '" + section + "." + key +
                      "' must be a number");
  }
  return v.get<double>();
}

std::int64_t get_int(const json& j, const std::string& section,
                     const char* key, std::int64_t fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer()) {
    throw ConfigError("config key '" + section + "." + key +
                      "' must be an integer");
  }
  return v.get<std::int64_t>();
}

bool get_bool(const json& j, const std::string& section, const char* key,
              bool fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_boolean()) {
    throw ConfigError("config key '" + section + "." + key +
                      "' must be a boolean");
  }
  return v.get<bool>();
}

std::string get_str(const json& j, const std::string& section, const char* key,
                    const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_string()) {
    throw ConfigError("config key '" + section + "." + key +
                      "' must be a string");
  }
  return v.get<std::string>();
}

std::vector<std::array<double, 2>> get_knots(
    const json& j, const std::string& section, const char* key,
    const std::vector<std::array<double, 2>>& fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_array()) {
    throw ConfigError("config key '" + section + "." + key +
                      "' must be an array of [x, y] pairs");
  }
  std::vector<std::array<double, 2>> knots;
  for (const json& pair : v) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() ||
        !pair[1].is_number()) {
      throw ConfigError("config key '" + section + "." + key +
                        "' must be an array of [x, y] pairs");
    }
    knots.push_back({pair[0].get<double>(), pair[1].get<double>()});
  }
  return knots;
}

FuzzySet get_fuzzy_set(const json& j, const std::string& section,
                       const char* key, const FuzzySet& fallback) {
  if (!j.contains(key)) return fallback;
  const auto knots = get_knots(j, section, key, {});
  try {
    return knots.empty() ? FuzzySet{} : FuzzySet(knots);
  } catch (const ConfigError& e) {
    throw ConfigError("config key '" + section + "." + key + "': " + e.what());
  }
}

void parse_sim(const json& j, SimConfig& sim) {
  check_keys(j, "sim",
             {"dt", "a_max_throttle", "a_max_brake", "v_max", "action_min",
              "action_max", "engine_curve", "ego_length", "lead_length",
              "rear_length", "sensor_range", "d_gap_range", "action_mode",
              "target_speed_ceiling", "speed_layer_gain"});
  sim.dt = get_num(j, "sim", "dt", sim.dt);
  sim.a_max_throttle = get_num(j, "sim", "a_max_throttle", sim.a_max_throttle);
  sim.a_max_brake = get_num(j, "sim", "a_max_brake", sim.a_max_brake);
  sim.v_max = get_num(j, "sim", "v_max", sim.v_max);
  sim.action_min = get_num(j, "sim", "action_min", sim.action_min);
  sim.action_max = get_num(j, "sim", "action_max", sim.action_max);
  sim.engine_curve_knots =
      get_knots(j, "sim", "engine_curve", sim.engine_curve_knots);
  sim.ego_length = get_num(j, "sim", "ego_length", sim.ego_length);
  sim.lead_length = get_num(j, "sim", "lead_length", sim.lead_length);
  sim.rear_length = get_num(j, "sim", "rear_length", sim.rear_length);
  sim.sensor_range = get_num(j, "sim", "sensor_range", sim.sensor_range);
  sim.d_gap_range = get_num(j, "sim", "d_gap_range", sim.d_gap_range);
  const std::string mode = get_str(
      j, "sim", "action_mode",
      sim.action_mode == ActionMode::ThrottleBrake ? "throttle_brake"
                                                   : "target_speed");
  if (mode == "throttle_brake") {
    sim.action_mode = ActionMode::ThrottleBrake;
  } else if (mode == "target_speed") {
    sim.action_mode = ActionMode::TargetSpeed;
  } else {
    throw ConfigError(
        "config key 'sim.action_mode' must be 'throttle_brake' or "
        "'target_speed', got '" +
        mode + "'");
  }
  sim.target_speed_ceiling =
      get_num(j, "sim", "target_speed_ceiling", sim.target_speed_ceiling);
  sim.speed_layer_gain =
      get_num(j, "sim", "speed_layer_gain", sim.speed_layer_gain);

  if (sim.dt <= 0.0) throw ConfigError("sim.dt must be positive");
  if (sim.v_max <= 0.0) throw ConfigError("sim.v_max must be positive");
  if (sim.action_min >= sim.action_max) {
    throw ConfigError("sim.action_min must be below sim.action_max");
  }
  if (sim.sensor_range <= 0.0) {
    throw ConfigError("sim.sensor_range must be positive");
  }
  if (sim.d_gap_range <= 0.0) {
    throw ConfigError("sim.d_gap_range must be positive");
  }
}

void parse_zone(const json& j, SafetyZoneParams& zone) {
  check_keys(j, "zone", {"tau", "d_min", "intrusion_budget"});
  zone.tau = get_num(j, "zone", "tau", zone.tau);
  zone.d_min = get_num(j, "zone", "d_min", zone.d_min);
  zone.intrusion_budget = static_cast<int>(
      get_int(j, "zone", "intrusion_budget", zone.intrusion_budget));
  if (zone.tau < 0.0 || zone.d_min < 0.0 || zone.intrusion_budget < 0) {
    throw ConfigError("zone parameters must be non-negative");
  }
}

void parse_question(const json& j, Question& q) {
  check_keys(j, "question", {"cumulant", "gamma", "sigma"});
  const std::string kind =
      get_str(j, "question", "cumulant", to_string(q.kind));
  q.kind = cumulant_kind_from_string(kind);
  q.gamma = get_num(j, "question", "gamma", q.gamma);
  q.sigma = get_num(j, "question", "sigma", q.sigma);
  if (!(q.gamma >= 0.0 && q.gamma < 1.0)) {
    throw ConfigError("question.gamma must lie in [0, 1)");
  }
  if (q.sigma < 0.0) throw ConfigError("question.sigma must be non-negative");
}

void parse_learner(const json& j, TrainConfig& t) {
  check_keys(j, "learner",
             {"steps", "replay_capacity", "minibatch", "learning_rate",
              "optimizer", "adam_beta1", "adam_beta2", "adam_epsilon",
              "hidden_layers", "reset_probability", "on_policy", "log_every"});
  t.steps = static_cast<std::size_t>(
      get_int(j, "learner", "steps", static_cast<std::int64_t>(t.steps)));
  t.replay_capacity = static_cast<std::size_t>(get_int(
      j, "learner", "replay_capacity",
      static_cast<std::int64_t>(t.replay_capacity)));
  t.minibatch = static_cast<std::size_t>(get_int(
      j, "learner", "minibatch", static_cast<std::int64_t>(t.minibatch)));
  t.learning_rate = get_num(j, "learner", "learning_rate", t.learning_rate);
  const std::string opt =
      get_str(j, "learner", "optimizer",
              t.optimizer == OptimizerMode::Adam ? "adam" : "sgd");
  if (opt == "adam") {
    t.optimizer = OptimizerMode::Adam;
  } else if (opt == "sgd") {
    t.optimizer = OptimizerMode::Sgd;
  } else {
    throw ConfigError(
        "config key 'learner.optimizer' must be 'adam' or 'sgd', got '" + opt +
        "'");
  }
  t.adam_beta1 = get_num(j, "learner", "adam_beta1", t.adam_beta1);
  t.adam_beta2 = get_num(j, "learner", "adam_beta2", t.adam_beta2);
  t.adam_epsilon = get_num(j, "learner", "adam_epsilon", t.adam_epsilon);
  if (j.contains("hidden_layers")) {
    const json& v = j.at("hidden_layers");
    if (!v.is_array()) {
      throw ConfigError(
          "config key 'learner.hidden_layers' must be an array of widths");
    }
    std::vector<int> widths;
    for (const json& w : v) {
      if (!w.is_number_integer() || w.get<std::int64_t>() <= 0) {
        throw ConfigError("learner.hidden_layers widths must be positive");
      }
      widths.push_back(static_cast<int>(w.get<std::int64_t>()));
    }
    t.hidden_layers = widths;
  }
  t.reset_probability =
      get_num(j, "learner", "reset_probability", t.reset_probability);
  t.on_policy = get_bool(j, "learner", "on_policy", t.on_policy);
  t.log_every = static_cast<std::size_t>(get_int(
      j, "learner", "log_every", static_cast<std::int64_t>(t.log_every)));

  if (t.replay_capacity == 0) {
    throw ConfigError("learner.replay_capacity must be positive");
  }
  if (t.minibatch == 0) throw ConfigError("learner.minibatch must be positive");
  if (t.learning_rate <= 0.0) {
    throw ConfigError("learner.learning_rate must be positive");
  }
  if (t.reset_probability < 0.0 || t.reset_probability > 1.0) {
    throw ConfigError("learner.reset_probability must lie in [0, 1]");
  }
  if (t.log_every == 0) throw ConfigError("learner.log_every must be positive");
}

void parse_controllers(const json& j, ControllerBundle& c,
                       const SimConfig& sim) {
  check_keys(j, "controllers",
             {"fuzzy", "rule_with_speed", "rule_without_speed", "baseline"});
  if (j.contains("fuzzy")) {
    const json& f = j.at("fuzzy");
    check_keys(f, "controllers.fuzzy",
               {"action_sweep_count", "greediness", "safety_set", "speed_set",
                "comfort_set"});
    const auto count = get_int(f, "controllers.fuzzy", "action_sweep_count",
                               static_cast<std::int64_t>(
                                   c.fuzzy.action_sweep.size()));
    if (count < 2) {
      throw ConfigError(
          "controllers.fuzzy.action_sweep_count must be at least 2");
    }
    c.fuzzy.action_sweep = uniform_action_sweep(
        static_cast<int>(count), sim.action_min, sim.action_max);
    c.fuzzy.greediness =
        get_num(f, "controllers.fuzzy", "greediness", c.fuzzy.greediness);
    if (c.fuzzy.greediness < 1.0) {
      throw ConfigError("controllers.fuzzy.greediness must be >= 1");
    }
    c.fuzzy.safety_set =
        get_fuzzy_set(f, "controllers.fuzzy", "safety_set", c.fuzzy.safety_set);
    c.fuzzy.speed_set =
        get_fuzzy_set(f, "controllers.fuzzy", "speed_set", c.fuzzy.speed_set);
    c.fuzzy.comfort_set = get_fuzzy_set(f, "controllers.fuzzy", "comfort_set",
                                        c.fuzzy.comfort_set);
  }
  if (j.contains("rule_with_speed")) {
    const json& r = j.at("rule_with_speed");
    check_keys(r, "controllers.rule_with_speed",
               {"beta", "alpha_decel", "alpha_speed", "e_min", "e_max"});
    auto& rc = c.rule_with_speed;
    rc.beta = get_num(r, "controllers.rule_with_speed", "beta", rc.beta);
    rc.alpha_decel =
        get_num(r, "controllers.rule_with_speed", "alpha_decel", rc.alpha_decel);
    rc.alpha_speed =
        get_num(r, "controllers.rule_with_speed", "alpha_speed", rc.alpha_speed);
    rc.e_min = get_num(r, "controllers.rule_with_speed", "e_min", rc.e_min);
    rc.e_max = get_num(r, "controllers.rule_with_speed", "e_max", rc.e_max);
    if (rc.e_min > rc.e_max) {
      throw ConfigError("controllers.rule_with_speed.e_min must be <= e_max");
    }
  }
  if (j.contains("rule_without_speed")) {
    const json& r = j.at("rule_without_speed");
    check_keys(r, "controllers.rule_without_speed",
               {"beta1", "beta2", "alpha_decel", "alpha_accel", "v_target"});
    auto& rc = c.rule_without_speed;
    rc.beta1 = get_num(r, "controllers.rule_without_speed", "beta1", rc.beta1);
    rc.beta2 = get_num(r, "controllers.rule_without_speed", "beta2", rc.beta2);
    rc.alpha_decel = get_num(r, "controllers.rule_without_speed", "alpha_decel",
                             rc.alpha_decel);
    rc.alpha_accel = get_num(r, "controllers.rule_without_speed", "alpha_accel",
                             rc.alpha_accel);
    rc.v_target =
        get_num(r, "controllers.rule_without_speed", "v_target", rc.v_target);
    if (rc.beta1 > rc.beta2) {
      throw ConfigError(
          "controllers.rule_without_speed.beta1 must be <= beta2");
    }
    if (rc.v_target <= 0.0) {
      throw ConfigError(
          "controllers.rule_without_speed.v_target must be positive");
    }
  }
  if (j.contains("baseline")) {
    const json& b = j.at("baseline");
    check_keys(b, "controllers.baseline", {"k_gap", "k_rel", "k_speed"});
    c.baseline.k_gap =
        get_num(b, "controllers.baseline", "k_gap", c.baseline.k_gap);
    c.baseline.k_rel =
        get_num(b, "controllers.baseline", "k_rel", c.baseline.k_rel);
    c.baseline.k_speed =
        get_num(b, "controllers.baseline", "k_speed", c.baseline.k_speed);
  }
}

void parse_eval(const json& j, EvalConfig& e) {
  check_keys(j, "eval", {"warning_threshold", "duration", "v_target"});
  e.warning_threshold =
      get_num(j, "eval", "warning_threshold", e.warning_threshold);
  if (j.contains("duration")) {
    e.duration_override = get_num(j, "eval", "duration", 0.0);
    if (*e.duration_override <= 0.0) {
      throw ConfigError("eval.duration must be positive");
    }
  }
  if (j.contains("v_target")) {
    e.v_target_override = get_num(j, "eval", "v_target", 0.0);
    if (*e.v_target_override < 0.0) {
      throw ConfigError("eval.v_target must be non-negative");
    }
  }
}

ordered_json knots_to_json(const std::vector<std::array<double, 2>>& knots) {
  ordered_json arr = ordered_json::array();
  for (const auto& k : knots) arr.push_back({k[0], k[1]});
  return arr;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  check_keys(j, "<root>",
             {"seed", "output_dir", "sim", "zone", "question", "learner",
              "controllers", "eval"});
  const std::int64_t seed =
      get_int(j, "<root>", "seed", static_cast<std::int64_t>(cfg.seed));
  if (seed < 0 || seed > 0xFFFFFFFFll) {
    throw ConfigError("seed must fit an unsigned 32-bit integer");
  }
  cfg.seed = static_cast<std::uint32_t>(seed);
  cfg.output_dir = get_str(j, "<root>", "output_dir", cfg.output_dir);
  if (j.contains("sim")) parse_sim(j.at("sim"), cfg.sim);
  if (j.contains("zone")) parse_zone(j.at("zone"), cfg.zone);
  if (j.contains("question")) parse_question(j.at("question"), cfg.question);
  if (j.contains("learner")) parse_learner(j.at("learner"), cfg.train);
  if (j.contains("controllers")) {
    parse_controllers(j.at("controllers"), cfg.controllers, cfg.sim);
  }
  if (j.contains("eval")) parse_eval(j.at("eval"), cfg.eval);
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::string run_config_to_text(const RunConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;

  ordered_json sim;
  sim["dt"] = c.sim.dt;
  sim["a_max_throttle"] = c.sim.a_max_throttle;
  sim["a_max_brake"] = c.sim.a_max_brake;
  sim["v_max"] = c.sim.v_max;
  sim["action_min"] = c.sim.action_min;
  sim["action_max"] = c.sim.action_max;
  sim["engine_curve"] = knots_to_json(c.sim.engine_curve_knots);
  sim["ego_length"] = c.sim.ego_length;
  sim["lead_length"] = c.sim.lead_length;
  sim["rear_length"] = c.sim.rear_length;
  sim["sensor_range"] = c.sim.sensor_range;
  sim["d_gap_range"] = c.sim.d_gap_range;
  sim["action_mode"] = c.sim.action_mode == ActionMode::ThrottleBrake
                           ? "throttle_brake"
                           : "target_speed";
  sim["target_speed_ceiling"] = c.sim.target_speed_ceiling;
  sim["speed_layer_gain"] = c.sim.speed_layer_gain;
  j["sim"] = sim;

  ordered_json zone;
  zone["tau"] = c.zone.tau;
  zone["d_min"] = c.zone.d_min;
  zone["intrusion_budget"] = c.zone.intrusion_budget;
  j["zone"] = zone;

  ordered_json q;
  q["cumulant"] = to_string(c.question.kind);
  q["gamma"] = c.question.gamma;
  q["sigma"] = c.question.sigma;
  j["question"] = q;

  ordered_json t;
  t["steps"] = c.train.steps;
  t["replay_capacity"] = c.train.replay_capacity;
  t["minibatch"] = c.train.minibatch;
  t["learning_rate"] = c.train.learning_rate;
  t["optimizer"] = c.train.optimizer == OptimizerMode::Adam ? "adam" : "sgd";
  t["adam_beta1"] = c.train.adam_beta1;
  t["adam_beta2"] = c.train.adam_beta2;
  t["adam_epsilon"] = c.train.adam_epsilon;
  t["hidden_layers"] = c.train.hidden_layers;
  t["reset_probability"] = c.train.reset_probability;
  t["on_policy"] = c.train.on_policy;
  t["log_every"] = c.train.log_every;
  j["learner"] = t;

  ordered_json ctrl;
  ordered_json fuzzy;
  fuzzy["action_sweep_count"] = c.controllers.fuzzy.action_sweep.size();
  fuzzy["greediness"] = c.controllers.fuzzy.greediness;
  fuzzy["safety_set"] = knots_to_json(c.controllers.fuzzy.safety_set.knots());
  fuzzy["speed_set"] = knots_to_json(c.controllers.fuzzy.speed_set.knots());
  fuzzy["comfort_set"] =
      knots_to_json(c.controllers.fuzzy.comfort_set.knots());
  ctrl["fuzzy"] = fuzzy;
  ordered_json rws;
  rws["beta"] = c.controllers.rule_with_speed.beta;
  rws["alpha_decel"] = c.controllers.rule_with_speed.alpha_decel;
  rws["alpha_speed"] = c.controllers.rule_with_speed.alpha_speed;
  rws["e_min"] = c.controllers.rule_with_speed.e_min;
  rws["e_max"] = c.controllers.rule_with_speed.e_max;
  ctrl["rule_with_speed"] = rws;
  ordered_json rwos;
  rwos["beta1"] = c.controllers.rule_without_speed.beta1;
  rwos["beta2"] = c.controllers.rule_without_speed.beta2;
  rwos["alpha_decel"] = c.controllers.rule_without_speed.alpha_decel;
  rwos["alpha_accel"] = c.controllers.rule_without_speed.alpha_accel;
  rwos["v_target"] = c.controllers.rule_without_speed.v_target;
  ctrl["rule_without_speed"] = rwos;
  ordered_json base;
  base["k_gap"] = c.controllers.baseline.k_gap;
  base["k_rel"] = c.controllers.baseline.k_rel;
  base["k_speed"] = c.controllers.baseline.k_speed;
  ctrl["baseline"] = base;
  j["controllers"] = ctrl;

  ordered_json ev;
  ev["warning_threshold"] = c.eval.warning_threshold;
  if (c.eval.duration_override) ev["duration"] = *c.eval.duration_override;
  if (c.eval.v_target_override) ev["v_target"] = *c.eval.v_target_override;
  j["eval"] = ev;

  return j.dump(2) + "\n";
}

void save_run_config(const RunConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file '" + path + "'");
  out << run_config_to_text(config);
}

ScenarioSpec resolve_scenario(const std::string& name,
                              const RunConfig& config) {
  ScenarioSpec spec = scenario_preset(name);
  spec.zone = config.zone;
  if (config.eval.duration_override) {
    spec.duration = *config.eval.duration_override;
  }
  if (config.eval.v_target_override) {
    spec.v_target = *config.eval.v_target_override;
  }
  return spec;
}

ControllerBundle bind_controllers(const ControllerBundle& base,
                                  const ScenarioSpec& spec) {
  ControllerBundle bound = base;
  bound.rule_with_speed.v_target = spec.v_target;
  bound.baseline.v_target = spec.v_target;
  bound.baseline.zone = spec.zone;
  if (bound.fuzzy.speed_set.knots().empty()) {
    bound.fuzzy.speed_set = default_speed_set(spec.v_target);
  }
  return bound;
}

}  // namespace gvfacc
