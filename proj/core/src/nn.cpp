#include "fedrate/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "fedrate/error.hpp"
#include "fedrate/rng.hpp"

namespace fedrate::nn {

void NetworkArch::validate() const {
  if (widths.size() < 2) {
    throw std::invalid_argument("NetworkArch needs at least input and output widths");
  }
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (widths[i] == 0) {
      throw std::invalid_argument("NetworkArch width " + std::to_string(i) + " is zero");
    }
  }
  if (widths.back() != 1) {
    throw std::invalid_argument("NetworkArch output width must be 1 for scalar regression");
  }
}

NetworkArch NetworkArch::uniform(std::size_t input_dim, std::size_t hidden_layers,
                                 std::size_t width) {
  NetworkArch arch;
  arch.widths.push_back(input_dim);
  for (std::size_t i = 0; i < hidden_layers; ++i) arch.widths.push_back(width);
  arch.widths.push_back(1);
  return arch;
}

NetworkArch NetworkParams::arch() const {
  NetworkArch arch;
  if (layers.empty()) return arch;
  arch.widths.push_back(static_cast<std::size_t>(layers.front().weight.cols()));
  for (const auto& layer : layers) {
    arch.widths.push_back(static_cast<std::size_t>(layer.weight.rows()));
  }
  return arch;
}

std::size_t NetworkParams::count_weights() const {
  std::size_t total = 0;
  for (const auto& layer : layers) total += static_cast<std::size_t>(layer.weight.size());
  return total;
}

std::size_t NetworkParams::count_biases() const {
  std::size_t total = 0;
  for (const auto& layer : layers) total += static_cast<std::size_t>(layer.bias.size());
  return total;
}

double NetworkParams::max_abs() const {
  double best = 0.0;
  for (const auto& layer : layers) {
    if (layer.weight.size() > 0) best = std::max(best, layer.weight.cwiseAbs().maxCoeff());
    if (layer.bias.size() > 0) best = std::max(best, layer.bias.cwiseAbs().maxCoeff());
  }
  return best;
}

bool NetworkParams::all_finite() const {
  return std::all_of(layers.begin(), layers.end(), [](const DenseLayer& layer) {
    return layer.weight.allFinite() && layer.bias.allFinite();
  });
}

void NetworkParams::check_same_shape(const NetworkParams& other) const {
  if (layers.size() != other.layers.size()) {
    throw ShapeError("layer count mismatch: " + std::to_string(layers.size()) + " vs " +
                     std::to_string(other.layers.size()));
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& a = layers[i];
    const auto& b = other.layers[i];
    if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols() ||
        a.bias.size() != b.bias.size()) {
      throw ShapeError("shape mismatch in layer " + std::to_string(i + 1) + ": " +
                       std::to_string(a.weight.rows()) + "x" + std::to_string(a.weight.cols()) +
                       " vs " + std::to_string(b.weight.rows()) + "x" +
                       std::to_string(b.weight.cols()));
    }
  }
}

NetworkParams NetworkParams::zeros(const NetworkArch& arch) {
  arch.validate();
  NetworkParams params;
  for (std::size_t i = 1; i < arch.widths.size(); ++i) {
    const auto rows = static_cast<Eigen::Index>(arch.widths[i]);
    const auto cols = static_cast<Eigen::Index>(arch.widths[i - 1]);
    params.layers.push_back({Eigen::MatrixXd::Zero(rows, cols), Eigen::VectorXd::Zero(rows)});
  }
  return params;
}

NetworkParams& NetworkParams::operator+=(const NetworkParams& other) {
  check_same_shape(other);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].weight += other.layers[i].weight;
    layers[i].bias += other.layers[i].bias;
  }
  return *this;
}

NetworkParams& NetworkParams::operator*=(double scale) {
  for (auto& layer : layers) {
    layer.weight *= scale;
    layer.bias *= scale;
  }
  return *this;
}

bool NetworkParams::operator==(const NetworkParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& a = layers[i];
    const auto& b = other.layers[i];
    if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols() ||
        a.bias.size() != b.bias.size()) {
      return false;
    }
    if (a.weight != b.weight || a.bias != b.bias) return false;
  }
  return true;
}

NetworkParams init_params(const NetworkArch& arch, std::uint64_t seed) {
  NetworkParams params = NetworkParams::zeros(arch);
  Stream stream = make_stream({seed, stream_tag::kInit});
  for (auto& layer : params.layers) {
    const double sd = std::sqrt(2.0 / static_cast<double>(layer.weight.cols()));
    std::normal_distribution<double> normal(0.0, sd);
    // Row-major fill so the draw order matches the checkpoint layout.
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        layer.weight(r, c) = normal(stream);
      }
    }
  }
  return params;
}

namespace {

void check_input(const NetworkParams& params, Eigen::Index rows) {
  if (params.layers.empty()) throw ShapeError("network has no layers");
  const auto expected = params.layers.front().weight.cols();
  if (rows != expected) {
    throw ShapeError("input of length " + std::to_string(rows) + " does not match layer 1 (expects " +
                     std::to_string(expected) + ")");
  }
  for (std::size_t i = 1; i < params.layers.size(); ++i) {
    if (params.layers[i].weight.cols() != params.layers[i - 1].weight.rows()) {
      throw ShapeError("layer " + std::to_string(i + 1) + " expects " +
                       std::to_string(params.layers[i].weight.cols()) + " inputs but layer " +
                       std::to_string(i) + " produces " +
                       std::to_string(params.layers[i - 1].weight.rows()));
    }
    if (params.layers[i].bias.size() != params.layers[i].weight.rows()) {
      throw ShapeError("bias of layer " + std::to_string(i + 1) + " has wrong length");
    }
  }
  if (params.layers.front().bias.size() != params.layers.front().weight.rows()) {
    throw ShapeError("bias of layer 1 has wrong length");
  }
}

}  // namespace

Eigen::VectorXd forward_batch(const NetworkParams& params,
                              const Eigen::Ref<const Eigen::MatrixXd>& x) {
  check_input(params, x.rows());
  Eigen::MatrixXd h = x;
  const std::size_t last = params.layers.size() - 1;
  for (std::size_t i = 0; i <= last; ++i) {
    const auto& layer = params.layers[i];
    Eigen::MatrixXd z = layer.weight * h;
    z.colwise() += layer.bias;
    if (i != last) z = z.cwiseMax(0.0);
    h = std::move(z);
  }
  return h.row(0).transpose();
}

double forward(const NetworkParams& params, std::span<const double> x) {
  const Eigen::Map<const Eigen::MatrixXd> column(x.data(), static_cast<Eigen::Index>(x.size()), 1);
  return forward_batch(params, column)(0);
}

double mse(const NetworkParams& params, const Eigen::Ref<const Eigen::MatrixXd>& x,
           const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (x.cols() == 0) throw std::invalid_argument("mse of an empty batch");
  return (forward_batch(params, x) - y).squaredNorm() / static_cast<double>(x.cols());
}

LossAndGrad loss_and_grad(const NetworkParams& params, const Eigen::Ref<const Eigen::MatrixXd>& x,
                          const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (x.cols() == 0) throw std::invalid_argument("loss_and_grad needs a non-empty batch");
  if (y.size() != x.cols()) {
    throw ShapeError("batch has " + std::to_string(x.cols()) + " inputs but " +
                     std::to_string(y.size()) + " targets");
  }
  check_input(params, x.rows());

  const std::size_t depth = params.layers.size();
  const double batch = static_cast<double>(x.cols());

  // activations[i] is the input to layer i; pre[i] its affine output.
  std::vector<Eigen::MatrixXd> activations(depth);
  std::vector<Eigen::MatrixXd> pre(depth);
  activations[0] = x;
  for (std::size_t i = 0; i < depth; ++i) {
    const auto& layer = params.layers[i];
    pre[i] = layer.weight * activations[i];
    pre[i].colwise() += layer.bias;
    if (i + 1 < depth) activations[i + 1] = pre[i].cwiseMax(0.0);
  }

  const Eigen::RowVectorXd residual = pre[depth - 1].row(0) - y.transpose();
  LossAndGrad out;
  out.loss = residual.squaredNorm() / batch;
  out.grad.layers.resize(depth);

  Eigen::MatrixXd delta = (2.0 / batch) * residual;
  for (std::size_t i = depth; i-- > 0;) {
    out.grad.layers[i].weight = delta * activations[i].transpose();
    out.grad.layers[i].bias = delta.rowwise().sum();
    if (i == 0) break;
    Eigen::MatrixXd back = params.layers[i].weight.transpose() * delta;
    delta = back.cwiseProduct((pre[i - 1].array() > 0.0).cast<double>().matrix());
  }
  return out;
}

AdamState AdamState::fresh(const NetworkArch& arch, AdamHyper hyper) {
  AdamState state;
  state.first_moment = NetworkParams::zeros(arch);
  state.second_moment = NetworkParams::zeros(arch);
  state.hyper = hyper;
  return state;
}

void adam_step(NetworkParams& params, const NetworkParams& grad, AdamState& state) {
  params.check_same_shape(grad);
  params.check_same_shape(state.first_moment);
  params.check_same_shape(state.second_moment);

  const auto& h = state.hyper;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(h.beta1, t);
  const double correction2 = 1.0 - std::pow(h.beta2, t);

  auto update = [&](auto& value, const auto& g, auto& m, auto& v) {
    m = h.beta1 * m + (1.0 - h.beta1) * g;
    v = h.beta2 * v + (1.0 - h.beta2) * g.cwiseProduct(g);
    const auto m_hat = m.array() / correction1;
    const auto v_hat = v.array() / correction2;
    value.array() -= h.lr * m_hat / (v_hat.sqrt() + h.eps);
  };
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    update(params.layers[i].weight, grad.layers[i].weight, state.first_moment.layers[i].weight,
           state.second_moment.layers[i].weight);
    update(params.layers[i].bias, grad.layers[i].bias, state.first_moment.layers[i].bias,
           state.second_moment.layers[i].bias);
  }
}

void sgd_step(NetworkParams& params, const NetworkParams& grad, double lr) {
  params.check_same_shape(grad);
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    params.layers[i].weight -= lr * grad.layers[i].weight;
    params.layers[i].bias -= lr * grad.layers[i].bias;
  }
}

double scheduled_weight_target(std::uint64_t m, std::uint64_t n, double beta, double s) {
  if (m == 0 || n == 0 || !(beta > 0.0) || !(s > 0.0)) {
    throw std::invalid_argument("schedule needs m, n >= 1 and beta, s > 0");
  }
  const double mn = static_cast<double>(m) * static_cast<double>(n);
  return std::pow(mn, s / (2.0 * beta + s)) * std::log(mn);
}

NetworkArch schedule_architecture(std::uint64_t m, std::uint64_t n, double beta, double s,
                                  std::size_t input_dim) {
  if (input_dim == 0) throw std::invalid_argument("schedule needs a positive input dimension");
  const double target = scheduled_weight_target(m, n, beta, s);
  const double mn = static_cast<double>(m) * static_cast<double>(n);
  const auto depth = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(std::log(mn))));
  const std::size_t hidden = depth - 1;

  const auto weights = [&](std::size_t w) {
    const double wd = static_cast<double>(w);
    return static_cast<double>(input_dim) * wd + static_cast<double>(hidden - 1) * wd * wd + wd;
  };

  std::size_t best = 1;
  if (target > 0.0) {
    double best_gap = std::abs(std::log(weights(1) / target));
    for (std::size_t w = 2; weights(w - 1) < 4.0 * target; ++w) {
      const double gap = std::abs(std::log(weights(w) / target));
      if (gap < best_gap) {
        best_gap = gap;
        best = w;
      }
    }
  }
  return NetworkArch::uniform(input_dim, hidden, best);
}

}  // namespace fedrate::nn
