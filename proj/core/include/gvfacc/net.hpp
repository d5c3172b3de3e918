#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace gvfacc {

enum class OutputActivation { Sigmoid, Identity };

// Per-parameter tensor matching a DenseNet's weights and biases; used for
// gradients and optimizer moment accumulators.
struct ParamGrad {
  std::vector<Eigen::MatrixXd> w;
  std::vector<Eigen::VectorXd> b;

  void set_zero();
  bool all_finite() const;
};

// Fully connected scalar-output network with tanh hidden units. Backprop is
// written out analytically; there is no autodiff anywhere.
class DenseNet {
 public:
  DenseNet() = default;
  // layer_sizes = {input, hidden..., 1}. Weights start uniform in
  // +-1/sqrt(fan_in), biases at zero, drawn deterministically from seed.
  DenseNet(std::vector<int> layer_sizes, OutputActivation out_act,
           std::uint32_t seed);

  int input_size() const { return layer_sizes.empty() ? 0 : layer_sizes.front(); }
  int layer_count() const { return static_cast<int>(weights.size()); }

  double forward(const Eigen::VectorXd& x) const;
  // Columns of X are inputs; returns one output per column.
  Eigen::RowVectorXd forward_batch(const Eigen::MatrixXd& X) const;

  // d(output)/d(every parameter) for a single input.
  ParamGrad backward(const Eigen::VectorXd& x) const;
  // sum_i coeff[i] * d(output_i)/d(params) over a batch, in one pass.
  ParamGrad backward_weighted(const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& coeff) const;

  ParamGrad zero_grad() const;
  bool all_finite() const;

  std::vector<int> layer_sizes;
  OutputActivation output_activation{OutputActivation::Sigmoid};
  std::vector<Eigen::MatrixXd> weights;  // [layer] out x in
  std::vector<Eigen::VectorXd> biases;   // [layer] out
};

enum class OptimizerMode { Sgd, Adam };

// First-order optimizer state. Updates move parameters in the direction of
// the supplied gradient (callers hand in ascent directions such as
// td-error-weighted prediction gradients).
struct OptimizerState {
  OptimizerMode mode{OptimizerMode::Adam};
  double learning_rate{1e-3};
  double beta1{0.9};
  double beta2{0.999};
  double epsilon{1e-8};
  std::int64_t step_count{0};
  ParamGrad m;  // first moment (Adam)
  ParamGrad v;  // second moment (Adam)

  static OptimizerState sgd(double lr);
  static OptimizerState adam(double lr, double beta1 = 0.9,
                             double beta2 = 0.999, double epsilon = 1e-8);
};

// theta += lr * step(scale * grad). Throws DivergenceError if the gradient
// or the resulting parameters are not finite.
void apply_update(DenseNet& net, OptimizerState& opt, const ParamGrad& grad,
                  double scale);

struct GradCheckReport {
  double max_rel_error{0.0};
  int worst_layer{-1};
  bool worst_is_bias{false};
  int trials{0};
};

// Central finite differences (step h) on every parameter against the
// analytic backward pass for one input. Only uses forward(), so it stays
// independent of the code path it checks. corrupt_layer >= 0 perturbs that
// layer's analytic weight gradient first (test hook for the failure path).
GradCheckReport gradient_check(const DenseNet& net, const Eigen::VectorXd& x,
                               double h = 1e-5, int corrupt_layer = -1);

// Runs gradient_check over `trials` randomly built nets and inputs.
GradCheckReport run_gradient_checks(int trials, std::uint32_t seed,
                                    int corrupt_layer = -1);

}  // namespace gvfacc
