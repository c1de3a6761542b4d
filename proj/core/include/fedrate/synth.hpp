#pragma once

// Two-stage sampling model: theta ~ pi, x | theta ~ lambda_theta,
// y = f0(x) + eps, with the shifted-uniform family used in the synthetic
// experiments and the two regression functions that go with it.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fedrate/rng.hpp"

namespace fedrate::synth {

enum class F0Choice { kF1, kF2 };

std::string_view to_string(F0Choice choice);
F0Choice parse_f0(std::string_view text);

// Hoelder smoothness of each regression function: f0^(1) is in H^2, f0^(2)
// in H^1.
double smoothness(F0Choice choice);

enum class XFamily {
  // First d_int coordinates ~ Unif[theta_k, theta_k + 1], rest zero.
  kShiftedUniform,
  // Same marginal as the mixture (each free coordinate is a sum of two
  // independent Unif[0,1]) but independent of theta: no heterogeneity.
  kHomogeneous,
};

std::string_view to_string(XFamily family);
XFamily parse_family(std::string_view text);

struct ModelSpec {
  std::size_t d = 30;
  std::size_t d_int = 10;
  F0Choice f0 = F0Choice::kF1;
  double noise_sd = 0.1;
  XFamily family = XFamily::kShiftedUniform;

  std::size_t theta_dim() const { return d_int + 4; }
  void validate() const;
};

using RegressionFn = std::function<double(std::span<const double>)>;

double eval_f0_1(std::span<const double> x);
double eval_f0_2(std::span<const double> x);
double eval_f0(F0Choice choice, std::span<const double> x);
RegressionFn regression_function(F0Choice choice);

struct ClientState {
  std::vector<double> theta;
  Eigen::MatrixXd x;  // d x n, one sample per column
  Eigen::VectorXd y;

  std::size_t num_samples() const { return static_cast<std::size_t>(x.cols()); }
};

using Federation = std::vector<ClientState>;

struct Dataset {
  Eigen::MatrixXd x;  // d x n
  Eigen::VectorXd y;
};

std::vector<double> sample_theta(const ModelSpec& spec, Stream& stream);

// Writes one draw from lambda_theta into `out` (length d).
void sample_x(const ModelSpec& spec, std::span<const double> theta, Stream& stream,
              std::span<double> out);

// m clients with n samples each. Client i draws from its own stream keyed by
// (seed, i), so the result does not depend on generation order.
Federation make_federation(const ModelSpec& spec, std::size_t m, std::size_t n,
                           std::uint64_t seed);

// Fresh points from the marginal lambda: a new theta per point.
Dataset sample_nonparticipating(const ModelSpec& spec, std::size_t n_eval, std::uint64_t seed);

// All clients concatenated in client order.
Dataset pool(const Federation& federation);

// CSV with header client_id,theta_0..theta_{k-1},x_0..x_{d-1},y.
// Values are written in shortest round-trip form.
void write_federation_csv(std::ostream& out, const Federation& federation);
Federation read_federation_csv(std::istream& in);

}  // namespace fedrate::synth
