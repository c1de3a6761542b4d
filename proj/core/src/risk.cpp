#include "fedrate/risk.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "fedrate/rng.hpp"

namespace fedrate::risk {

RiskEstimate squared_gap(const nn::NetworkParams& model, const synth::RegressionFn& f0,
                         const Eigen::Ref<const Eigen::MatrixXd>& points) {
  const auto n = points.cols();
  if (n < 2) throw std::invalid_argument("risk estimate needs at least two points");
  const Eigen::VectorXd predicted = nn::forward_batch(model, points);
  Eigen::VectorXd gaps(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto column = points.col(j);
    const double diff = predicted(j) - f0({column.data(), static_cast<std::size_t>(column.size())});
    gaps(j) = diff * diff;
  }
  const double mean = gaps.mean();
  const double var = (gaps.array() - mean).square().sum() / static_cast<double>(n - 1);
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

RiskEstimate risk_participating(const nn::NetworkParams& model, const synth::RegressionFn& f0,
                                std::span<const std::vector<double>> thetas,
                                const synth::ModelSpec& spec, std::size_t n_eval,
                                std::uint64_t seed) {
  if (thetas.empty()) throw std::invalid_argument("risk_participating needs the training thetas");
  if (n_eval < 2) throw std::invalid_argument("risk_participating needs n_eval >= 2");
  spec.validate();
  Stream stream = make_stream({seed, stream_tag::kEval});
  std::uniform_int_distribution<std::size_t> pick(0, thetas.size() - 1);
  Eigen::MatrixXd points(static_cast<Eigen::Index>(spec.d), static_cast<Eigen::Index>(n_eval));
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    const auto& theta = thetas[pick(stream)];
    synth::sample_x(spec, theta, stream, {points.col(j).data(), spec.d});
  }
  return squared_gap(model, f0, points);
}

RiskEstimate risk_nonparticipating(const nn::NetworkParams& model, const synth::RegressionFn& f0,
                                   const synth::ModelSpec& spec, std::size_t n_eval,
                                   std::uint64_t seed) {
  if (n_eval < 2) throw std::invalid_argument("risk_nonparticipating needs n_eval >= 2");
  const auto fresh = synth::sample_nonparticipating(spec, n_eval, seed);
  return squared_gap(model, f0, fresh.x);
}

}  // namespace fedrate::risk

namespace fedrate::risk {

bool RiskRecord::valid() const {
  auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
  return ok(mse_part) && ok(se_part) && ok(mse_nonpart) && ok(se_nonpart);
}

}  // namespace fedrate::risk
