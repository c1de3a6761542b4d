#pragma once

// Dense ReLU networks for scalar regression: forward pass, reverse-mode
// gradients of the mean squared error, and Adam/SGD updates.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace fedrate::nn {

// Layer widths [N0 = input dim, N1, ..., NL]; ReLU on every hidden layer,
// identity on the output layer.
struct NetworkArch {
  std::vector<std::size_t> widths;

  std::size_t depth() const { return widths.size() - 1; }
  std::size_t input_dim() const { return widths.front(); }
  std::size_t output_dim() const { return widths.back(); }

  // Throws std::invalid_argument unless length >= 2, all widths >= 1 and the
  // output width is 1.
  void validate() const;

  // Input width `input_dim`, `hidden_layers` hidden layers of `width` units,
  // scalar output.
  static NetworkArch uniform(std::size_t input_dim, std::size_t hidden_layers,
                             std::size_t width);

  bool operator==(const NetworkArch&) const = default;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

// Also used as the gradient container: a gradient has exactly the shape of
// the parameters it differentiates.
struct NetworkParams {
  std::vector<DenseLayer> layers;

  NetworkArch arch() const;

  // W(f): sum over layers of N_i * N_{i-1}.
  std::size_t count_weights() const;
  std::size_t count_biases() const;

  // B(f): largest absolute entry over all weights and biases.
  double max_abs() const;
  bool all_finite() const;

  // Throws ShapeError naming the first layer whose shape disagrees.
  void check_same_shape(const NetworkParams& other) const;

  static NetworkParams zeros(const NetworkArch& arch);

  NetworkParams& operator+=(const NetworkParams& other);
  NetworkParams& operator*=(double scale);
  bool operator==(const NetworkParams& other) const;
};

// He initialization: weights ~ Normal(0, 2 / fan_in), zero biases.
NetworkParams init_params(const NetworkArch& arch, std::uint64_t seed);

double forward(const NetworkParams& params, std::span<const double> x);

// Column-wise forward over a d x B batch.
Eigen::VectorXd forward_batch(const NetworkParams& params,
                              const Eigen::Ref<const Eigen::MatrixXd>& x);

struct LossAndGrad {
  double loss = 0.0;
  NetworkParams grad;
};

// Mean squared error over the batch (columns of `x`) and its exact gradient.
// The ReLU subgradient at 0 is taken as 0.
LossAndGrad loss_and_grad(const NetworkParams& params,
                          const Eigen::Ref<const Eigen::MatrixXd>& x,
                          const Eigen::Ref<const Eigen::VectorXd>& y);

double mse(const NetworkParams& params,
           const Eigen::Ref<const Eigen::MatrixXd>& x,
           const Eigen::Ref<const Eigen::VectorXd>& y);

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  NetworkParams first_moment;
  NetworkParams second_moment;
  std::int64_t step = 0;
  AdamHyper hyper;

  static AdamState fresh(const NetworkArch& arch, AdamHyper hyper = {});
};

// One bias-corrected Adam update; increments state.step by exactly one.
void adam_step(NetworkParams& params, const NetworkParams& grad,
               AdamState& state);

// params -= lr * grad
void sgd_step(NetworkParams& params, const NetworkParams& grad, double lr);

// Depth and uniform hidden width scaled with the total sample count mn:
// L = max(2, ceil(ln(mn))) and a hidden width whose total weight count is
// closest (in log ratio) to (mn)^{s/(2 beta + s)} * ln(mn).
NetworkArch schedule_architecture(std::uint64_t m, std::uint64_t n,
                                  double beta, double s,
                                  std::size_t input_dim);

// Target weight count the schedule aims for.
double scheduled_weight_target(std::uint64_t m, std::uint64_t n, double beta,
                               double s);

}  // namespace fedrate::nn
