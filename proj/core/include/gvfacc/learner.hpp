#pragma once

#include <atomic>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gvfacc/cumulants.hpp"
#include "gvfacc/net.hpp"
#include "gvfacc/scenario.hpp"
#include "gvfacc/sim.hpp"

namespace gvfacc {

// A predictive question: which signal to accumulate, on what horizon, under
// how much action-hold noise in the conditioning policy.
struct Question {
  CumulantKind kind{CumulantKind::FrontSafety};
  double gamma{0.95};
  double sigma{0.05};
};

// Gaussian hold policy: next action ~ N(last, sigma^2), clamped to bounds.
struct TargetPolicy {
  double sigma{0.05};
};

// Exploration policy: the same Gaussian walk, except that with probability
// reset_probability the action is redrawn uniformly over the bounds.
struct BehaviorPolicy {
  double sigma{0.05};
  double reset_probability{0.01};
};

Action sample_target_action(const TargetPolicy& pol, Action last,
                            std::mt19937& rng, double a_min, double a_max);
Action sample_behavior_action(const BehaviorPolicy& pol, Action last,
                              std::mt19937& rng, double a_min, double a_max);

struct Transition {
  FeatureVector s;
  Action a;
  double c{0.0};      // scaled cumulant observed on arrival
  double gamma{0.0};  // continuation observed on arrival; 0 terminates
  FeatureVector s_next;
  Action a_next;      // action the conditioning policy would take next
};

// Fixed-capacity FIFO store of transitions with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  // i = 0 is the oldest retained transition.
  const Transition& at(std::size_t i) const;
  const Transition& sample(std::mt19937& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_{0};  // insertion point
  std::vector<Transition> data_;
};

// A trained predictor plus everything needed to query it consistently.
struct GvfModel {
  DenseNet net;
  Question question;
  FeatureScaling scaling;
  double value_scale{1.0};  // predictions = value_scale * net output

  GvfModel() = default;
  GvfModel(const GvfModel& other);
  GvfModel& operator=(const GvfModel& other);
  GvfModel(GvfModel&&) = default;
  GvfModel& operator=(GvfModel&&) = default;

  std::uint64_t queries() const { return query_count.load(); }
  // Prediction bookkeeping; predict() is otherwise read-only.
  mutable std::atomic<std::uint64_t> query_count{0};
};

// Expected discounted accumulation for taking `action` now and following the
// question's hold policy afterwards. Speed-question models mask the gap
// feature slots to their trained-on constants before evaluating.
double predict(const GvfModel& model, const FeatureVector& features,
               Action action);

// Structured-text model file: format header, question metadata, feature
// scaling, layer sizes, and full-precision parameters. Loading a stream with
// the wrong header or version throws ModelError.
void save_model(const GvfModel& model, const std::string& path);
GvfModel load_model(const std::string& path);

// Bootstrapped regression target c + gamma * q(s', a'); evaluated with
// frozen parameters, so no gradient flows through it.
double td_target(const Transition& t, const DenseNet& net);

// One sampled-minibatch temporal-difference update. Returns the minibatch
// mean squared td error. Throws on an empty buffer.
double train_step(DenseNet& net, OptimizerState& opt,
                  const ReplayBuffer& buffer, std::size_t minibatch,
                  std::mt19937& rng);

struct TrainConfig {
  std::size_t steps{500000};
  std::size_t replay_capacity{100000};
  std::size_t minibatch{64};
  double learning_rate{1e-3};
  OptimizerMode optimizer{OptimizerMode::Adam};
  double adam_beta1{0.9};
  double adam_beta2{0.999};
  double adam_epsilon{1e-8};
  std::vector<int> hidden_layers{64, 64};
  double reset_probability{0.01};
  // Store the action actually taken next instead of a fresh draw from the
  // hold policy; combined with reset_probability = 0 this is on-policy.
  bool on_policy{false};
  std::size_t log_every{1};
};

struct TrainLogRow {
  std::size_t step{0};
  double td_loss{0.0};
  double cumulant{0.0};
  double gamma{0.0};
  int episode_id{0};
};

struct TrainResult {
  GvfModel model;
  std::vector<TrainLogRow> log;
  double final_loss{0.0};
  int episodes{0};
};

// Off-policy TD(0) with replay, run against episodes drawn uniformly from
// the scenario pool. Safety questions need the matching neighbor vehicle in
// every pool entry; speed questions must train without traffic.
TrainResult train(const Question& question,
                  const std::vector<ScenarioSpec>& pool,
                  const TrainConfig& cfg, const SimConfig& sim,
                  std::mt19937& rng);

// Delimited-text log: step, td_loss, cumulant, gamma, episode_id.
void write_training_log(const std::vector<TrainLogRow>& log,
                        const std::string& path);
std::vector<TrainLogRow> read_training_log(const std::string& path);

// The feature view a question observes the world through.
FeatureView view_for(CumulantKind kind);

}  // namespace gvfacc
