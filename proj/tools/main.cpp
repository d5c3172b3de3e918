// gvfacc: train safety/speed predictors, run controller evaluations, sweep
// prediction horizons, and check gradients — each run self-describing in its
// own output directory.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gvfacc/config.hpp"
#include "gvfacc/controllers.hpp"
#include "gvfacc/evaluation.hpp"
#include "gvfacc/learner.hpp"
#include "gvfacc/net.hpp"
#include "gvfacc/scenario.hpp"
#include "gvfacc/util.hpp"

namespace fs = std::filesystem;
using namespace gvfacc;

namespace {

constexpr double kGradCheckTolerance = 1e-5;

// Compact numeric spelling for file and directory names.
std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

RunConfig load_config_or_default(const std::string& path) {
  RunConfig cfg = path.empty() ? RunConfig{} : load_run_config(path);
  const char* env = std::getenv("GVFACC_OUTPUT_DIR");
  if (env && *env && cfg.output_dir == RunConfig{}.output_dir) {
    cfg.output_dir = env;
  }
  return cfg;
}

fs::path make_run_dir(const std::string& output_dir,
                      const std::string& name) {
  const fs::path dir = fs::path(output_dir) / name;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw ConfigError("cannot create run directory '" + dir.string() +
                      "': " + ec.message());
  }
  return dir;
}

std::vector<ScenarioSpec> build_pool(const std::vector<std::string>& names,
                                     const SafetyZoneParams& zone) {
  std::vector<ScenarioSpec> pool;
  for (const std::string& name : names) {
    ScenarioSpec spec = scenario_preset(name);
    spec.zone = zone;
    pool.push_back(std::move(spec));
  }
  return pool;
}

std::vector<std::string> default_pool_names(CumulantKind kind) {
  switch (kind) {
    case CumulantKind::FrontSafety: return {"front_training"};
    case CumulantKind::RearSafety: return {"rear_training"};
    case CumulantKind::Speed: return {"free_drive"};
  }
  return {};
}

struct TrainOpts {
  std::string config_path;
  std::string question;
  double gamma{0.0};
  bool gamma_set{false};
  std::uint64_t steps{0};
  bool steps_set{false};
  std::int64_t seed{0};
  bool seed_set{false};
  std::string out_path;
  std::string run_name;
  std::string output_dir;
  std::vector<std::string> scenarios;
};

int run_train(const TrainOpts& o) {
  RunConfig cfg = load_config_or_default(o.config_path);
  if (!o.question.empty()) {
    cfg.question.kind = cumulant_kind_from_string(o.question);
  }
  if (o.gamma_set) {
    if (!(o.gamma >= 0.0 && o.gamma < 1.0)) {
      throw ConfigError("--gamma must lie in [0, 1)");
    }
    cfg.question.gamma = o.gamma;
  }
  if (o.steps_set) cfg.train.steps = o.steps;
  if (o.seed_set) cfg.seed = static_cast<std::uint32_t>(o.seed);
  if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;

  const std::vector<std::string> pool_names =
      o.scenarios.empty() ? default_pool_names(cfg.question.kind)
                          : o.scenarios;
  const std::vector<ScenarioSpec> pool = build_pool(pool_names, cfg.zone);

  const std::string run_name =
      o.run_name.empty()
          ? "train-" + std::string(to_string(cfg.question.kind)) + "-g" +
                short_num(cfg.question.gamma) + "-s" + std::to_string(cfg.seed)
          : o.run_name;
  const fs::path dir = make_run_dir(cfg.output_dir, run_name);
  save_run_config(cfg, (dir / "config.json").string());

  std::mt19937 rng(cfg.seed);
  const TrainResult result = train(cfg.question, pool, cfg.train, cfg.sim, rng);

  fs::path model_path = o.out_path.empty() ? dir / "model.json"
                                           : fs::path(o.out_path);
  if (model_path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(model_path.parent_path(), ec);
  }
  save_model(result.model, model_path.string());
  write_training_log(result.log, (dir / "train_log.csv").string());

  std::cout << "final_td_loss=" << format_double(result.final_loss)
            << " steps=" << cfg.train.steps << " episodes=" << result.episodes
            << " model=" << model_path.string() << '\n';
  return 0;
}

// Loads each model file and slots it by the question recorded inside it.
ModelSet slot_models(const std::vector<GvfModel>& owned) {
  ModelSet set;
  for (const GvfModel& m : owned) {
    const GvfModel** slot = nullptr;
    switch (m.question.kind) {
      case CumulantKind::FrontSafety: slot = &set.front; break;
      case CumulantKind::RearSafety: slot = &set.rear; break;
      case CumulantKind::Speed: slot = &set.speed; break;
    }
    if (*slot) {
      throw ModelError(std::string("two models answer the '") +
                       to_string(m.question.kind) + "' question");
    }
    *slot = &m;
  }
  return set;
}

struct EvalOpts {
  std::string config_path;
  std::string scenario;
  std::string controller;
  std::vector<std::string> model_paths;
  std::int64_t seed{0};
  bool seed_set{false};
  std::string run_name;
  std::string output_dir;
};

int run_eval(const EvalOpts& o) {
  RunConfig cfg = load_config_or_default(o.config_path);
  if (o.seed_set) cfg.seed = static_cast<std::uint32_t>(o.seed);
  if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;

  const ScenarioSpec spec = resolve_scenario(o.scenario, cfg);
  const ControllerKind kind = controller_kind_from_string(o.controller);
  const ControllerBundle bundle = bind_controllers(cfg.controllers, spec);

  std::vector<GvfModel> owned;
  owned.reserve(o.model_paths.size());
  for (const std::string& path : o.model_paths) {
    owned.push_back(load_model(path));
  }
  const ModelSet models = slot_models(owned);

  const std::string run_name =
      o.run_name.empty() ? "eval-" + spec.name + "-" + o.controller + "-s" +
                               std::to_string(cfg.seed)
                         : o.run_name;
  const fs::path dir = make_run_dir(cfg.output_dir, run_name);
  save_run_config(cfg, (dir / "config.json").string());

  const ScenarioResult result =
      run_scenario(spec, cfg.sim, kind, bundle, models, cfg.seed,
                   cfg.eval.warning_threshold);
  write_result_csv(result, (dir / "result.csv").string());
  write_metrics(result.metrics, (dir / "metrics.json").string());

  const Metrics& m = result.metrics;
  std::cout << "scenario=" << spec.name << " controller=" << o.controller
            << " collided=" << (m.collided ? "true" : "false")
            << " min_front_gap=" << format_double(m.min_front_gap)
            << " max_decel=" << format_double(m.max_decel)
            << " final_speed=" << format_double(m.final_speed) << '\n';
  return 0;
}

struct SweepOpts {
  std::string config_path;
  std::vector<double> gammas;
  std::string scenario{"emergency_stop"};
  std::vector<std::string> model_paths;
  bool train_missing{false};
  std::uint64_t steps{0};
  bool steps_set{false};
  std::int64_t seed{0};
  bool seed_set{false};
  std::string run_name;
  std::string output_dir;
};

int run_sweep(const SweepOpts& o) {
  if (o.gammas.empty()) throw ConfigError("--gammas needs at least one value");
  RunConfig cfg = load_config_or_default(o.config_path);
  if (o.seed_set) cfg.seed = static_cast<std::uint32_t>(o.seed);
  if (o.steps_set) cfg.train.steps = o.steps;
  if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;

  const ScenarioSpec spec = resolve_scenario(o.scenario, cfg);

  const std::string run_name =
      o.run_name.empty()
          ? "sweep-" + spec.name + "-s" + std::to_string(cfg.seed)
          : o.run_name;
  const fs::path dir = make_run_dir(cfg.output_dir, run_name);
  save_run_config(cfg, (dir / "config.json").string());

  std::vector<GvfModel> owned;
  owned.reserve(o.model_paths.size() + o.gammas.size());
  for (const std::string& path : o.model_paths) {
    owned.push_back(load_model(path));
  }

  const std::vector<ScenarioSpec> pool =
      build_pool({"front_training"}, cfg.zone);
  for (double gamma : o.gammas) {
    const auto matches = [&](const GvfModel& m) {
      return m.question.kind == CumulantKind::FrontSafety &&
             std::abs(m.question.gamma - gamma) < 1e-9;
    };
    if (std::any_of(owned.begin(), owned.end(), matches)) continue;
    if (!o.train_missing) {
      throw ModelError("no front-safety model for gamma " + short_num(gamma) +
                       "; pass --train-missing to train one");
    }
    Question q{CumulantKind::FrontSafety, gamma, cfg.question.sigma};
    std::mt19937 rng(cfg.seed);
    TrainResult tr = train(q, pool, cfg.train, cfg.sim, rng);
    const fs::path model_path = dir / ("model-g" + short_num(gamma) + ".json");
    save_model(tr.model, model_path.string());
    owned.push_back(std::move(tr.model));
  }

  std::vector<std::pair<double, const GvfModel*>> by_gamma;
  for (double gamma : o.gammas) {
    const GvfModel* found = nullptr;
    for (const GvfModel& m : owned) {
      if (m.question.kind == CumulantKind::FrontSafety &&
          std::abs(m.question.gamma - gamma) < 1e-9) {
        found = &m;
        break;
      }
    }
    by_gamma.emplace_back(gamma, found);
  }

  const SweepResult result = horizon_sweep(spec, cfg.sim, by_gamma, cfg.seed);
  write_sweep_csv(result.rows, (dir / "sweep.csv").string());
  for (const SweepTrace& trace : result.traces) {
    write_sweep_trace_csv(
        trace, (dir / ("trace-g" + short_num(trace.gamma) + ".csv")).string());
  }

  std::cout << "gamma crossing_time_s first_unsafe_time_s\n";
  for (const SweepRow& row : result.rows) {
    std::cout << short_num(row.gamma) << ' '
              << (row.crossing_time ? format_double(*row.crossing_time)
                                    : "none")
              << ' '
              << (row.first_unsafe_time
                      ? format_double(*row.first_unsafe_time)
                      : "none")
              << '\n';
  }
  return 0;
}

struct GradCheckOpts {
  int trials{100};
  std::int64_t seed{12345};
  int corrupt_layer{-1};
};

int run_grad_check(const GradCheckOpts& o) {
  if (o.trials < 0) throw ConfigError("--trials must be non-negative");
  const GradCheckReport report = run_gradient_checks(
      o.trials, static_cast<std::uint32_t>(o.seed), o.corrupt_layer);
  if (o.trials == 0) {
    std::cout << "trials=0 max_rel_error=0 (vacuous pass: no checks run)\n";
    return 0;
  }
  std::cout << "trials=" << report.trials
            << " max_rel_error=" << format_double(report.max_rel_error)
            << " worst_layer=" << report.worst_layer << " ("
            << (report.worst_is_bias ? "bias" : "weight") << ")\n";
  if (report.max_rel_error >= kGradCheckTolerance) {
    std::cerr << "gradient check failed: layer " << report.worst_layer
              << " relative error " << format_double(report.max_rel_error)
              << " exceeds " << format_double(kGradCheckTolerance) << '\n';
    return 5;
  }
  return 0;
}

struct ExportOpts {
  std::string model_path;
  std::string out_path;
};

int run_export(const ExportOpts& o) {
  const GvfModel model = load_model(o.model_path);
  std::size_t params = 0;
  for (const auto& w : model.net.weights) params += w.size();
  for (const auto& b : model.net.biases) params += b.size();

  nlohmann::ordered_json j;
  j["file"] = o.model_path;
  j["question"]["cumulant"] = to_string(model.question.kind);
  j["question"]["gamma"] = model.question.gamma;
  j["question"]["sigma"] = model.question.sigma;
  j["layer_sizes"] = model.net.layer_sizes;
  j["output_activation"] =
      model.net.output_activation == OutputActivation::Sigmoid ? "sigmoid"
                                                               : "identity";
  j["parameter_count"] = params;
  j["value_scale"] = model.value_scale;
  j["feature_scaling"]["sensor_range"] = model.scaling.sensor_range;
  j["feature_scaling"]["d_gap_range"] = model.scaling.d_gap_range;
  j["feature_scaling"]["speed_range"] = model.scaling.speed_range;

  const std::string text = j.dump(2) + "\n";
  if (!o.out_path.empty()) {
    std::ofstream out(o.out_path);
    if (!out) throw ConfigError("cannot write '" + o.out_path + "'");
    out << text;
  }
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Predictive cruise-control toolkit: learned safety/speed predictors, "
      "prediction-driven controllers, and scenario evaluation"};
  app.require_subcommand(1);

  int exit_code = 0;

  TrainOpts train_opts;
  auto* train_cmd = app.add_subcommand(
      "train", "Train a predictor and write the model file + training log");
  train_cmd->add_option("--config", train_opts.config_path,
                        "Run config file (JSON); defaults apply when omitted");
  train_cmd->add_option("--question", train_opts.question,
                        "Cumulant to predict: front, rear, or speed");
  auto* gamma_opt = train_cmd->add_option("--gamma", train_opts.gamma,
                                          "Discount/continuation in [0, 1)");
  auto* steps_opt = train_cmd->add_option("--steps", train_opts.steps,
                                          "Environment steps to train for");
  auto* train_seed = train_cmd->add_option("--seed", train_opts.seed,
                                           "Master seed for this run");
  train_cmd->add_option("--out", train_opts.out_path,
                        "Model file path (default <run dir>/model.json)");
  train_cmd->add_option("--run-name", train_opts.run_name,
                        "Run directory name under the output directory");
  train_cmd->add_option("--output-dir", train_opts.output_dir,
                        "Output directory (overrides config and "
                        "GVFACC_OUTPUT_DIR)");
  train_cmd->add_option("--scenarios", train_opts.scenarios,
                        "Training scenario presets (default per question)");
  train_cmd->callback([&] {
    train_opts.gamma_set = gamma_opt->count() > 0;
    train_opts.steps_set = steps_opt->count() > 0;
    train_opts.seed_set = train_seed->count() > 0;
    exit_code = run_train(train_opts);
  });

  EvalOpts eval_opts;
  auto* eval_cmd = app.add_subcommand(
      "eval", "Run one controller through one scenario and export results");
  eval_cmd->add_option("--config", eval_opts.config_path, "Run config file");
  eval_cmd->add_option("--scenario", eval_opts.scenario, "Scenario preset")
      ->required();
  eval_cmd
      ->add_option("--controller", eval_opts.controller,
                   "fuzzy, rule_with_speed, rule_without_speed, or baseline")
      ->required();
  eval_cmd->add_option("--models", eval_opts.model_paths,
                       "Model files; each is slotted by its own metadata");
  auto* eval_seed =
      eval_cmd->add_option("--seed", eval_opts.seed, "Master seed");
  eval_cmd->add_option("--run-name", eval_opts.run_name, "Run directory name");
  eval_cmd->add_option("--output-dir", eval_opts.output_dir,
                       "Output directory");
  eval_cmd->callback([&] {
    eval_opts.seed_set = eval_seed->count() > 0;
    exit_code = run_eval(eval_opts);
  });

  SweepOpts sweep_opts;
  auto* sweep_cmd = app.add_subcommand(
      "sweep", "Compare 0.5-crossing times of front-safety predictors "
               "trained at different discounts");
  sweep_cmd->add_option("--config", sweep_opts.config_path, "Run config file");
  sweep_cmd->add_option("--gammas", sweep_opts.gammas, "Discounts to compare")
      ->required();
  sweep_cmd->add_option("--scenario", sweep_opts.scenario,
                        "Approach scenario (default emergency_stop)");
  sweep_cmd->add_option("--models", sweep_opts.model_paths,
                        "Pre-trained front-safety model files");
  sweep_cmd->add_flag("--train-missing", sweep_opts.train_missing,
                      "Train a model for any discount without one");
  auto* sweep_steps = sweep_cmd->add_option(
      "--steps", sweep_opts.steps, "Training steps for --train-missing");
  auto* sweep_seed =
      sweep_cmd->add_option("--seed", sweep_opts.seed, "Master seed");
  sweep_cmd->add_option("--run-name", sweep_opts.run_name,
                        "Run directory name");
  sweep_cmd->add_option("--output-dir", sweep_opts.output_dir,
                        "Output directory");
  sweep_cmd->callback([&] {
    sweep_opts.steps_set = sweep_steps->count() > 0;
    sweep_opts.seed_set = sweep_seed->count() > 0;
    exit_code = run_sweep(sweep_opts);
  });

  GradCheckOpts grad_opts;
  auto* grad_cmd = app.add_subcommand(
      "grad-check",
      "Compare analytic gradients against central finite differences");
  grad_cmd->add_option("--trials", grad_opts.trials,
                       "Number of random networks to check");
  grad_cmd->add_option("--seed", grad_opts.seed, "Seed for the random nets");
  grad_cmd
      ->add_option("--corrupt-layer", grad_opts.corrupt_layer,
                   "Perturb this layer's analytic gradient (failure-path "
                   "test hook)")
      ->group("");  // hidden
  grad_cmd->callback([&] { exit_code = run_grad_check(grad_opts); });

  ExportOpts export_opts;
  auto* export_cmd = app.add_subcommand(
      "export", "Print a model file's metadata summary as JSON");
  export_cmd->add_option("--model", export_opts.model_path, "Model file")
      ->required();
  export_cmd->add_option("--out", export_opts.out_path,
                         "Also write the summary to this path");
  export_cmd->callback([&] { exit_code = run_export(export_opts); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return 3;
  } catch (const ModelError& e) {
    std::cerr << "model error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return exit_code;
}
