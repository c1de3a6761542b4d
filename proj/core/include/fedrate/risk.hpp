#pragma once

// Monte-Carlo estimates of the excess risk E (f_hat(x) - f0(x))^2 under the
// participating mixture (1/m) sum_i lambda_{theta_i} and under the marginal
// lambda seen by a fresh client.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedrate/nn.hpp"
#include "fedrate/synth.hpp"

namespace fedrate::risk {

struct RiskEstimate {
  double estimate = 0.0;
  double std_err = 0.0;
};

// Mean and standard error of squared gaps at the given points (columns).
RiskEstimate squared_gap(const nn::NetworkParams& model, const synth::RegressionFn& f0,
                         const Eigen::Ref<const Eigen::MatrixXd>& points);

// Fresh points only: each one picks a training theta uniformly at random and
// draws x ~ lambda_theta.
RiskEstimate risk_participating(const nn::NetworkParams& model, const synth::RegressionFn& f0,
                                std::span<const std::vector<double>> thetas,
                                const synth::ModelSpec& spec, std::size_t n_eval,
                                std::uint64_t seed);

RiskEstimate risk_nonparticipating(const nn::NetworkParams& model, const synth::RegressionFn& f0,
                                   const synth::ModelSpec& spec, std::size_t n_eval,
                                   std::uint64_t seed);

inline constexpr std::size_t kDefaultEvalPoints = 10000;

}  // namespace fedrate::risk

namespace fedrate::risk {

// One sweep cell x replication.
struct RiskRecord {
  std::string experiment = "synthetic";
  synth::F0Choice f0 = synth::F0Choice::kF1;
  double beta = 2.0;
  std::size_t d = 30;
  std::size_t d_int = 10;
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t replication = 0;
  std::string arch_policy = "fixed_paper";
  double mse_part = 0.0;
  double se_part = 0.0;
  double mse_nonpart = 0.0;
  double se_nonpart = 0.0;
  double wall_s = 0.0;
  std::uint64_t seed = 0;
  std::size_t n_eval = kDefaultEvalPoints;  // not persisted

  bool valid() const;
};

}  // namespace fedrate::risk
