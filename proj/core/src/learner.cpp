#include "gvfacc/learner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gvfacc/util.hpp"

namespace gvfacc {

namespace {

using nlohmann::json;

constexpr const char* kModelMagic = "gvfacc-model";
constexpr int kModelVersion = 1;

Eigen::VectorXd net_input(const FeatureVector& f, Action a) {
  Eigen::VectorXd x(FeatureVector::kDim + 1);
  x.head<FeatureVector::kDim>() = f.as_vector();
  x(FeatureVector::kDim) = a.command;
  return x;
}

FeatureVector masked_for(const GvfModel& model, const FeatureVector& f) {
  if (model.question.kind != CumulantKind::Speed) return f;
  // Speed predictors are trained on an empty road; pin the gap slots to the
  // readings they saw there so traffic does not push them off-distribution.
  FeatureVector out = f;
  out.gap = 1.0;
  out.d_gap = 0.0;
  out.d_gap_prev = 0.0;
  return out;
}

std::string activation_name(OutputActivation a) {
  return a == OutputActivation::Sigmoid ? "sigmoid" : "identity";
}

OutputActivation activation_from(const std::string& s) {
  if (s == "sigmoid") return OutputActivation::Sigmoid;
  if (s == "identity") return OutputActivation::Identity;
  throw ModelError("unknown output activation '" + s + "'");
}

}  // namespace

FeatureView view_for(CumulantKind kind) {
  switch (kind) {
    case CumulantKind::FrontSafety: return FeatureView::Front;
    case CumulantKind::RearSafety: return FeatureView::Rear;
    case CumulantKind::Speed: return FeatureView::SpeedOnly;
  }
  throw std::logic_error("unhandled cumulant kind");
}

Action sample_target_action(const TargetPolicy& pol, Action last,
                            std::mt19937& rng, double a_min, double a_max) {
  double next = last.command;
  if (pol.sigma > 0.0) {
    next += std::normal_distribution<double>(0.0, pol.sigma)(rng);
  }
  return Action{std::clamp(next, a_min, a_max)};
}

Action sample_behavior_action(const BehaviorPolicy& pol, Action last,
                              std::mt19937& rng, double a_min, double a_max) {
  if (pol.reset_probability > 0.0 &&
      std::uniform_real_distribution<double>(0.0, 1.0)(rng) <
          pol.reset_probability) {
    return Action{std::uniform_real_distribution<double>(a_min, a_max)(rng)};
  }
  return sample_target_action(TargetPolicy{pol.sigma}, last, rng, a_min,
                              a_max);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("replay capacity must be > 0");
  data_.reserve(std::min<std::size_t>(capacity_, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
  }
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= data_.size()) throw std::out_of_range("replay index");
  if (data_.size() < capacity_) return data_[i];
  return data_[(head_ + i) % capacity_];
}

const Transition& ReplayBuffer::sample(std::mt19937& rng) const {
  if (data_.empty()) throw std::invalid_argument("sampling from empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
  return data_[pick(rng)];
}

GvfModel::GvfModel(const GvfModel& other)
    : net(other.net),
      question(other.question),
      scaling(other.scaling),
      value_scale(other.value_scale),
      query_count(other.query_count.load()) {}

GvfModel& GvfModel::operator=(const GvfModel& other) {
  if (this != &other) {
    net = other.net;
    question = other.question;
    scaling = other.scaling;
    value_scale = other.value_scale;
    query_count.store(other.query_count.load());
  }
  return *this;
}

double predict(const GvfModel& model, const FeatureVector& features,
               Action action) {
  model.query_count.fetch_add(1, std::memory_order_relaxed);
  return model.value_scale *
         model.net.forward(net_input(masked_for(model, features), action));
}

void save_model(const GvfModel& model, const std::string& path) {
  json j;
  j["format"] = kModelMagic;
  j["version"] = kModelVersion;
  j["question"] = {{"cumulant", to_string(model.question.kind)},
                   {"gamma", model.question.gamma},
                   {"sigma", model.question.sigma}};
  j["value_scale"] = model.value_scale;
  j["feature_scaling"] = {{"sensor_range", model.scaling.sensor_range},
                          {"d_gap_range", model.scaling.d_gap_range},
                          {"speed_range", model.scaling.speed_range}};
  json net;
  net["layer_sizes"] = model.net.layer_sizes;
  net["output_activation"] = activation_name(model.net.output_activation);
  json weights = json::array();
  json biases = json::array();
  for (const auto& W : model.net.weights) {
    json layer = json::array();
    for (Eigen::Index r = 0; r < W.rows(); ++r) {
      for (Eigen::Index c = 0; c < W.cols(); ++c) layer.push_back(W(r, c));
    }
    weights.push_back(std::move(layer));
  }
  for (const auto& b : model.net.biases) {
    json layer = json::array();
    for (Eigen::Index r = 0; r < b.rows(); ++r) layer.push_back(b(r));
    biases.push_back(std::move(layer));
  }
  net["weights"] = std::move(weights);
  net["biases"] = std::move(biases);
  j["net"] = std::move(net);

  std::ofstream out(path);
  if (!out) throw ModelError("cannot write model file '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw ModelError("failed writing model file '" + path + "'");
}

GvfModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open model file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ModelError("malformed model file '" + path + "': " + e.what());
  }
  if (!j.contains("format") || j["format"] != kModelMagic) {
    throw ModelError("'" + path + "' is not a " + kModelMagic + " file");
  }
  if (!j.contains("version") || j["version"].get<int>() != kModelVersion) {
    throw ModelError("unsupported model format version in '" + path +
                     "' (expected " + std::to_string(kModelVersion) + ")");
  }
  try {
    GvfModel m;
    const json& q = j.at("question");
    m.question.kind = cumulant_kind_from_string(q.at("cumulant"));
    m.question.gamma = q.at("gamma").get<double>();
    m.question.sigma = q.at("sigma").get<double>();
    m.value_scale = j.at("value_scale").get<double>();
    const json& fs = j.at("feature_scaling");
    m.scaling.sensor_range = fs.at("sensor_range").get<double>();
    m.scaling.d_gap_range = fs.at("d_gap_range").get<double>();
    m.scaling.speed_range = fs.at("speed_range").get<double>();
    const json& net = j.at("net");
    m.net.layer_sizes = net.at("layer_sizes").get<std::vector<int>>();
    m.net.output_activation = activation_from(net.at("output_activation"));
    const json& weights = net.at("weights");
    const json& biases = net.at("biases");
    if (m.net.layer_sizes.size() < 2 ||
        weights.size() + 1 != m.net.layer_sizes.size() ||
        biases.size() != weights.size()) {
      throw ModelError("inconsistent layer description in '" + path + "'");
    }
    for (std::size_t l = 0; l + 1 < m.net.layer_sizes.size(); ++l) {
      const int in = m.net.layer_sizes[l];
      const int out = m.net.layer_sizes[l + 1];
      const auto& wl = weights[l];
      const auto& bl = biases[l];
      if (static_cast<int>(wl.size()) != in * out ||
          static_cast<int>(bl.size()) != out) {
        throw ModelError("parameter array size mismatch in '" + path + "'");
      }
      Eigen::MatrixXd W(out, in);
      std::size_t k = 0;
      for (int r = 0; r < out; ++r) {
        for (int c = 0; c < in; ++c) W(r, c) = wl[k++].get<double>();
      }
      Eigen::VectorXd b(out);
      for (int r = 0; r < out; ++r) b(r) = bl[r].get<double>();
      m.net.weights.push_back(std::move(W));
      m.net.biases.push_back(std::move(b));
    }
    return m;
  } catch (const json::exception& e) {
    throw ModelError("malformed model file '" + path + "': " + e.what());
  }
}

double td_target(const Transition& t, const DenseNet& net) {
  return t.c + t.gamma * net.forward(net_input(t.s_next, t.a_next));
}

double train_step(DenseNet& net, OptimizerState& opt,
                  const ReplayBuffer& buffer, std::size_t minibatch,
                  std::mt19937& rng) {
  if (buffer.size() == 0) {
    throw std::invalid_argument("train_step on empty replay buffer");
  }
  if (minibatch == 0) throw std::invalid_argument("minibatch must be > 0");

  const int dim = FeatureVector::kDim + 1;
  Eigen::MatrixXd X(dim, minibatch);
  Eigen::MatrixXd Xn(dim, minibatch);
  Eigen::VectorXd c(minibatch);
  Eigen::VectorXd g(minibatch);
  for (std::size_t i = 0; i < minibatch; ++i) {
    const Transition& t = buffer.sample(rng);
    X.col(i) = net_input(t.s, t.a);
    Xn.col(i) = net_input(t.s_next, t.a_next);
    c(i) = t.c;
    g(i) = t.gamma;
  }

  // Bootstrap targets from frozen parameters; only q(s, a) is differentiated.
  const Eigen::RowVectorXd q_next = net.forward_batch(Xn);
  const Eigen::VectorXd y = c + g.cwiseProduct(q_next.transpose());
  const Eigen::RowVectorXd q = net.forward_batch(X);
  const Eigen::VectorXd delta = y - q.transpose();

  const ParamGrad grad =
      net.backward_weighted(X, delta / static_cast<double>(minibatch));
  apply_update(net, opt, grad, 1.0);

  const double loss = delta.squaredNorm() / static_cast<double>(minibatch);
  if (!std::isfinite(loss)) throw DivergenceError("non-finite td loss");
  return loss;
}

TrainResult train(const Question& question,
                  const std::vector<ScenarioSpec>& pool,
                  const TrainConfig& cfg, const SimConfig& sim,
                  std::mt19937& rng) {
  if (pool.empty()) throw ConfigError("training needs at least one scenario");
  for (const auto& spec : pool) {
    switch (question.kind) {
      case CumulantKind::FrontSafety:
        if (!spec.lead) {
          throw ConfigError("front-safety training scenario '" + spec.name +
                            "' has no lead vehicle");
        }
        break;
      case CumulantKind::RearSafety:
        if (!spec.rear) {
          throw ConfigError("rear-safety training scenario '" + spec.name +
                            "' has no rear vehicle");
        }
        break;
      case CumulantKind::Speed:
        if (spec.lead || spec.rear) {
          throw ConfigError("speed training scenario '" + spec.name +
                            "' must have no other vehicles");
        }
        break;
    }
  }
  if (question.gamma < 0.0 || question.gamma >= 1.0) {
    throw ConfigError("gamma must lie in [0, 1)");
  }

  TrainResult result;
  std::vector<int> sizes{FeatureVector::kDim + 1};
  sizes.insert(sizes.end(), cfg.hidden_layers.begin(),
               cfg.hidden_layers.end());
  sizes.push_back(1);
  const OutputActivation act = question.kind == CumulantKind::Speed
                                   ? OutputActivation::Identity
                                   : OutputActivation::Sigmoid;
  result.model.net = DenseNet(sizes, act, rng());
  result.model.question = question;
  result.model.scaling = FeatureScaling::from(sim);
  result.model.value_scale =
      question.kind == CumulantKind::Speed ? sim.v_max : 1.0;

  OptimizerState opt;
  switch (cfg.optimizer) {
    case OptimizerMode::Sgd:
      opt = OptimizerState::sgd(cfg.learning_rate);
      break;
    case OptimizerMode::Adam:
      opt = OptimizerState::adam(cfg.learning_rate, cfg.adam_beta1,
                                 cfg.adam_beta2, cfg.adam_epsilon);
      break;
  }

  ReplayBuffer buffer(cfg.replay_capacity);
  const BehaviorPolicy behavior{question.sigma, cfg.reset_probability};
  const TargetPolicy target{question.sigma};
  const ContinuationParams cont{question.gamma};
  const FeatureView view = view_for(question.kind);

  std::uniform_int_distribution<std::size_t> pick_spec(0, pool.size() - 1);
  std::size_t t = 0;
  int episode = 0;
  double loss = 0.0;

  while (t < cfg.steps) {
    const ScenarioSpec& spec = pool[pick_spec(rng)];
    ScenarioEngine engine(spec, sim, static_cast<std::uint32_t>(rng()));
    FeatureVector s = extract_features(engine.world(), sim, view);
    Action a = sample_behavior_action(behavior, Action{0.0}, rng,
                                      sim.action_min, sim.action_max);
    while (t < cfg.steps && !engine.episode_over()) {
      const StepOutcome out = engine.step(a);
      const double gamma_next = continuation(out, question.kind, cont);
      const double c = scale_cumulant(raw_cumulant(out, question.kind,
                                                   spec.zone),
                                      gamma_next) /
                       result.model.value_scale;
      const FeatureVector s_next = extract_features(out.next_state, sim, view);
      const Action a_taken = sample_behavior_action(behavior, a, rng,
                                                    sim.action_min,
                                                    sim.action_max);
      const Action a_prime =
          cfg.on_policy ? a_taken
                        : sample_target_action(target, a, rng, sim.action_min,
                                               sim.action_max);
      buffer.push(Transition{s, a, c, gamma_next, s_next, a_prime});
      loss = train_step(result.model.net, opt, buffer, cfg.minibatch, rng);
      ++t;
      if (cfg.log_every > 0 && (t % cfg.log_every) == 0) {
        result.log.push_back(TrainLogRow{t, loss, c, gamma_next, episode});
      }
      if (gamma_next == 0.0 || out.front_collision || out.rear_collision) {
        break;  // episode ends on any contact
      }
      s = s_next;
      a = a_taken;
    }
    ++episode;
  }
  result.final_loss = loss;
  result.episodes = episode;
  return result;
}

void write_training_log(const std::vector<TrainLogRow>& log,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write training log '" + path + "'");
  out << "step,td_loss,cumulant,gamma,episode_id\n";
  for (const auto& row : log) {
    out << row.step << ',' << format_double(row.td_loss) << ','
        << format_double(row.cumulant) << ',' << format_double(row.gamma)
        << ',' << row.episode_id << '\n';
  }
}

std::vector<TrainLogRow> read_training_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open training log '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != "step,td_loss,cumulant,gamma,episode_id") {
    throw ConfigError("unexpected training log header in '" + path + "'");
  }
  std::vector<TrainLogRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    TrainLogRow row;
    std::getline(ss, field, ',');
    row.step = static_cast<std::size_t>(std::stoull(field));
    std::getline(ss, field, ',');
    row.td_loss = parse_double(field);
    std::getline(ss, field, ',');
    row.cumulant = parse_double(field);
    std::getline(ss, field, ',');
    row.gamma = parse_double(field);
    std::getline(ss, field, ',');
    row.episode_id = std::stoi(field);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace gvfacc
