#include "gvfacc/net.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "gvfacc/util.hpp"

namespace gvfacc {

namespace {

double apply_output(OutputActivation act, double z) {
  switch (act) {
    case OutputActivation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
    case OutputActivation::Identity: return z;
  }
  throw std::logic_error("unhandled output activation");
}

double output_derivative(OutputActivation act, double activated) {
  switch (act) {
    case OutputActivation::Sigmoid: return activated * (1.0 - activated);
    case OutputActivation::Identity: return 1.0;
  }
  throw std::logic_error("unhandled output activation");
}

void check_input(const DenseNet& net, Eigen::Index rows) {
  if (rows != net.input_size()) {
    throw std::invalid_argument("input size does not match network");
  }
  if (net.weights.empty()) {
    throw std::invalid_argument("network has no layers");
  }
}

}  // namespace

void ParamGrad::set_zero() {
  for (auto& m : w) m.setZero();
  for (auto& v : b) v.setZero();
}

bool ParamGrad::all_finite() const {
  for (const auto& m : w) {
    if (!m.allFinite()) return false;
  }
  for (const auto& v : b) {
    if (!v.allFinite()) return false;
  }
  return true;
}

DenseNet::DenseNet(std::vector<int> sizes, OutputActivation out_act,
                   std::uint32_t seed)
    : layer_sizes(std::move(sizes)), output_activation(out_act) {
  if (layer_sizes.size() < 2) {
    throw std::invalid_argument("network needs at least input and output sizes");
  }
  if (layer_sizes.back() != 1) {
    throw std::invalid_argument("network output must be scalar");
  }
  for (int n : layer_sizes) {
    if (n <= 0) throw std::invalid_argument("layer sizes must be positive");
  }
  std::mt19937 rng(seed);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int in = layer_sizes[l];
    const int out = layer_sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Eigen::MatrixXd W(out, in);
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) W(r, c) = dist(rng);
    }
    weights.push_back(std::move(W));
    biases.emplace_back(Eigen::VectorXd::Zero(out));
  }
}

double DenseNet::forward(const Eigen::VectorXd& x) const {
  check_input(*this, x.rows());
  Eigen::VectorXd a = x;
  for (int l = 0; l < layer_count(); ++l) {
    Eigen::VectorXd z = weights[l] * a + biases[l];
    if (l + 1 < layer_count()) {
      a = z.array().tanh();
    } else {
      return apply_output(output_activation, z(0));
    }
  }
  throw std::logic_error("network has no layers");
}

Eigen::RowVectorXd DenseNet::forward_batch(const Eigen::MatrixXd& X) const {
  check_input(*this, X.rows());
  Eigen::MatrixXd A = X;
  for (int l = 0; l < layer_count(); ++l) {
    Eigen::MatrixXd Z = (weights[l] * A).colwise() + biases[l];
    if (l + 1 < layer_count()) {
      A = Z.array().tanh();
    } else {
      Eigen::RowVectorXd out = Z.row(0);
      for (Eigen::Index i = 0; i < out.cols(); ++i) {
        out(i) = apply_output(output_activation, out(i));
      }
      return out;
    }
  }
  throw std::logic_error("network has no layers");
}

ParamGrad DenseNet::zero_grad() const {
  ParamGrad g;
  for (const auto& W : weights) g.w.emplace_back(Eigen::MatrixXd::Zero(W.rows(), W.cols()));
  for (const auto& bv : biases) g.b.emplace_back(Eigen::VectorXd::Zero(bv.rows()));
  return g;
}

bool DenseNet::all_finite() const {
  for (const auto& W : weights) {
    if (!W.allFinite()) return false;
  }
  for (const auto& bv : biases) {
    if (!bv.allFinite()) return false;
  }
  return true;
}

ParamGrad DenseNet::backward(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd X = x;
  Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  return backward_weighted(X, one);
}

ParamGrad DenseNet::backward_weighted(const Eigen::MatrixXd& X,
                                      const Eigen::VectorXd& coeff) const {
  check_input(*this, X.rows());
  if (coeff.rows() != X.cols()) {
    throw std::invalid_argument("one coefficient per batch column required");
  }
  const int L = layer_count();

  // Forward, keeping every layer's activations.
  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(L + 1);
  acts.push_back(X);
  for (int l = 0; l < L; ++l) {
    Eigen::MatrixXd Z = (weights[l] * acts.back()).colwise() + biases[l];
    if (l + 1 < L) {
      acts.push_back(Z.array().tanh().matrix());
    } else {
      for (Eigen::Index i = 0; i < Z.cols(); ++i) {
        Z(0, i) = apply_output(output_activation, Z(0, i));
      }
      acts.push_back(std::move(Z));
    }
  }

  ParamGrad grad = zero_grad();
  // G holds d(sum_i coeff_i * out_i)/d(z_l) for the current layer.
  Eigen::MatrixXd G(1, X.cols());
  for (Eigen::Index i = 0; i < X.cols(); ++i) {
    G(0, i) = coeff(i) * output_derivative(output_activation, acts[L](0, i));
  }
  for (int l = L - 1; l >= 0; --l) {
    grad.w[l] = G * acts[l].transpose();
    grad.b[l] = G.rowwise().sum();
    if (l > 0) {
      // tanh'(z) = 1 - tanh(z)^2, computed from the stored activations.
      G = (weights[l].transpose() * G).array() *
          (1.0 - acts[l].array().square());
    }
  }
  return grad;
}

OptimizerState OptimizerState::sgd(double lr) {
  OptimizerState s;
  s.mode = OptimizerMode::Sgd;
  s.learning_rate = lr;
  return s;
}

OptimizerState OptimizerState::adam(double lr, double beta1, double beta2,
                                    double epsilon) {
  OptimizerState s;
  s.mode = OptimizerMode::Adam;
  s.learning_rate = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon = epsilon;
  return s;
}

void apply_update(DenseNet& net, OptimizerState& opt, const ParamGrad& grad,
                  double scale) {
  if (grad.w.size() != net.weights.size() ||
      grad.b.size() != net.biases.size()) {
    throw std::invalid_argument("gradient shape does not match network");
  }
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    if (grad.w[l].rows() != net.weights[l].rows() ||
        grad.w[l].cols() != net.weights[l].cols() ||
        grad.b[l].rows() != net.biases[l].rows()) {
      throw std::invalid_argument("gradient shape does not match network");
    }
  }
  if (!grad.all_finite() || !std::isfinite(scale)) {
    throw DivergenceError("non-finite gradient in parameter update");
  }
  if (opt.mode == OptimizerMode::Adam && opt.m.w.empty()) {
    opt.m = net.zero_grad();
    opt.v = net.zero_grad();
  }
  opt.step_count += 1;
  const double lr = opt.learning_rate;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    const Eigen::MatrixXd gw = scale * grad.w[l];
    const Eigen::VectorXd gb = scale * grad.b[l];
    switch (opt.mode) {
      case OptimizerMode::Sgd:
        net.weights[l] += lr * gw;
        net.biases[l] += lr * gb;
        break;
      case OptimizerMode::Adam: {
        const double bc1 = 1.0 - std::pow(opt.beta1, opt.step_count);
        const double bc2 = 1.0 - std::pow(opt.beta2, opt.step_count);
        opt.m.w[l] = opt.beta1 * opt.m.w[l] + (1.0 - opt.beta1) * gw;
        opt.v.w[l] = opt.beta2 * opt.v.w[l].array().matrix() +
                     (1.0 - opt.beta2) * gw.array().square().matrix();
        net.weights[l].array() +=
            lr * (opt.m.w[l].array() / bc1) /
            ((opt.v.w[l].array() / bc2).sqrt() + opt.epsilon);
        opt.m.b[l] = opt.beta1 * opt.m.b[l] + (1.0 - opt.beta1) * gb;
        opt.v.b[l] = opt.beta2 * opt.v.b[l].array().matrix() +
                     (1.0 - opt.beta2) * gb.array().square().matrix();
        net.biases[l].array() +=
            lr * (opt.m.b[l].array() / bc1) /
            ((opt.v.b[l].array() / bc2).sqrt() + opt.epsilon);
        break;
      }
    }
  }
  if (!net.all_finite()) {
    throw DivergenceError("non-finite parameters after update");
  }
}

GradCheckReport gradient_check(const DenseNet& net, const Eigen::VectorXd& x,
                               double h, int corrupt_layer) {
  ParamGrad analytic = net.backward(x);
  if (corrupt_layer >= 0 &&
      corrupt_layer < static_cast<int>(analytic.w.size())) {
    analytic.w[corrupt_layer](0, 0) += 1e-3;
  }

  GradCheckReport report;
  report.trials = 1;
  DenseNet probe = net;
  auto relative_error = [](double a, double n) {
    return std::abs(a - n) / std::max(1e-6, std::abs(a) + std::abs(n));
  };
  auto consider = [&](double a, double n, int layer, bool is_bias) {
    const double err = relative_error(a, n);
    if (err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_layer = layer;
      report.worst_is_bias = is_bias;
    }
  };

  for (int l = 0; l < net.layer_count(); ++l) {
    for (Eigen::Index r = 0; r < net.weights[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < net.weights[l].cols(); ++c) {
        const double saved = probe.weights[l](r, c);
        probe.weights[l](r, c) = saved + h;
        const double up = probe.forward(x);
        probe.weights[l](r, c) = saved - h;
        const double down = probe.forward(x);
        probe.weights[l](r, c) = saved;
        consider(analytic.w[l](r, c), (up - down) / (2.0 * h), l, false);
      }
    }
    for (Eigen::Index r = 0; r < net.biases[l].rows(); ++r) {
      const double saved = probe.biases[l](r);
      probe.biases[l](r) = saved + h;
      const double up = probe.forward(x);
      probe.biases[l](r) = saved - h;
      const double down = probe.forward(x);
      probe.biases[l](r) = saved;
      consider(analytic.b[l](r), (up - down) / (2.0 * h), l, true);
    }
  }
  return report;
}

GradCheckReport run_gradient_checks(int trials, std::uint32_t seed,
                                    int corrupt_layer) {
  GradCheckReport worst;
  worst.trials = trials;
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> width(3, 16);
  std::uniform_int_distribution<int> depth(1, 3);
  std::uniform_int_distribution<int> act(0, 1);
  std::uniform_real_distribution<double> input(-2.0, 2.0);
  for (int t = 0; t < trials; ++t) {
    std::vector<int> sizes{width(rng)};
    const int hidden = depth(rng);
    for (int l = 0; l < hidden; ++l) sizes.push_back(width(rng));
    sizes.push_back(1);
    DenseNet net(sizes, act(rng) == 0 ? OutputActivation::Sigmoid
                                      : OutputActivation::Identity,
                 rng());
    Eigen::VectorXd x(net.input_size());
    for (Eigen::Index i = 0; i < x.rows(); ++i) x(i) = input(rng);
    const GradCheckReport r = gradient_check(net, x, 1e-5, corrupt_layer);
    if (r.max_rel_error > worst.max_rel_error) {
      worst.max_rel_error = r.max_rel_error;
      worst.worst_layer = r.worst_layer;
      worst.worst_is_bias = r.worst_is_bias;
    }
  }
  return worst;
}

}  // namespace gvfacc
