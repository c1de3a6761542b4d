#include "fedrate/heterogeneity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>

#include "fedrate/rng.hpp"

namespace fedrate::hetero {

namespace {

// Below this log-scale cutoff the remaining mass of int_0^a log t dt is
// smaller than 1e-15.
constexpr double kLogCutoff = -40.0;

// int_a^1 log t dt via t = e^u, which turns the log singularity at t = 0
// into the smooth, exponentially decaying integrand u e^u.
double integral_log_to_one(double a, std::size_t panels) {
  if (a >= 1.0) return 0.0;
  const double lo = a > 0.0 ? std::max(std::log(a), kLogCutoff) : kLogCutoff;
  const double width = (0.0 - lo) / static_cast<double>(panels);
  double total = 0.0;
  for (std::size_t p = 0; p < panels; ++p) {
    const double left = lo + width * static_cast<double>(p);
    total += boost::math::quadrature::gauss<double, 10>::integrate(
        [](double u) { return u * std::exp(u); }, left, left + width);
  }
  return total;
}

}  // namespace

double kl_exact_synth(std::span<const double> theta, const synth::ModelSpec& spec,
                      std::size_t quad_points) {
  spec.validate();
  if (quad_points < 100) throw std::invalid_argument("kl_exact_synth needs quad_points >= 100");
  if (theta.size() < spec.d_int) throw std::invalid_argument("theta shorter than d_int");
  for (double t : theta) {
    if (!(t >= 0.0 && t <= 1.0)) {
      throw std::invalid_argument("theta coordinate outside [0, 1]: " + std::to_string(t));
    }
  }
  if (spec.family == synth::XFamily::kHomogeneous) return 0.0;

  // Per coordinate: g(x) = x on [0,1] and 2 - x on [1,2], so
  // -int_t^{t+1} log g = -int_t^1 log x dx - int_{1-t}^1 log u du.
  double kl = 0.0;
  for (std::size_t k = 0; k < spec.d_int; ++k) {
    const double t = theta[k];
    kl -= integral_log_to_one(t, quad_points) + integral_log_to_one(1.0 - t, quad_points);
  }
  return std::max(kl, 0.0);
}

namespace {

std::vector<std::size_t> active_coordinates(const dim::PointCloud& a, const dim::PointCloud& b) {
  std::vector<std::size_t> active;
  for (std::size_t k = 0; k < a.dim(); ++k) {
    const double ref = a.point(0)[k];
    bool varies = false;
    for (std::size_t i = 0; i < a.size() && !varies; ++i) varies = a.point(i)[k] != ref;
    for (std::size_t i = 0; i < b.size() && !varies; ++i) varies = b.point(i)[k] != ref;
    if (varies) active.push_back(k);
  }
  return active;
}

// Distance from `p` to its k-th nearest point of `cloud`, skipping index
// `skip` (pass size() to skip nothing).
double kth_distance(std::span<const double> p, const dim::PointCloud& cloud, std::size_t skip,
                    std::size_t k, std::span<const std::size_t> active) {
  std::vector<double> best(k, std::numeric_limits<double>::infinity());
  for (std::size_t j = 0; j < cloud.size(); ++j) {
    if (j == skip) continue;
    const auto q = cloud.point(j);
    double dist = 0.0;
    for (std::size_t c : active) {
      dist = std::max(dist, std::abs(p[c] - q[c]));
      if (dist >= best.back()) break;
    }
    if (dist < best.back()) {
      auto pos = std::upper_bound(best.begin(), best.end(), dist);
      best.insert(pos, dist);
      best.pop_back();
    }
  }
  return best.back();
}

}  // namespace

double kl_knn(const dim::PointCloud& samples_p, const dim::PointCloud& samples_q, std::size_t k) {
  if (k == 0) throw std::invalid_argument("kl_knn needs k >= 1");
  if (samples_p.dim() != samples_q.dim()) throw std::invalid_argument("kl_knn: dimension mismatch");
  if (samples_p.size() < 50 || samples_q.size() < 50) {
    throw std::invalid_argument("kl_knn needs at least 50 samples from each distribution");
  }
  if (samples_p.size() <= k || samples_q.size() < k) {
    throw std::invalid_argument("kl_knn: k exceeds sample size");
  }
  constexpr double kFloor = 1e-12;
  const auto active = active_coordinates(samples_p, samples_q);
  if (active.empty()) return 0.0;

  const double n = static_cast<double>(samples_p.size());
  const double m = static_cast<double>(samples_q.size());
  const double d = static_cast<double>(active.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < samples_p.size(); ++i) {
    const auto p = samples_p.point(i);
    const double rho = std::max(kth_distance(p, samples_p, i, k, active), kFloor);
    const double nu = std::max(kth_distance(p, samples_q, samples_q.size(), k, active), kFloor);
    sum += std::log(nu / rho);
  }
  const double estimate = d * sum / n + std::log(m / (n - 1.0));
  return std::max(estimate, 0.0);
}

double orlicz1_norm(const KlSampleSet& values) {
  if (values.values.empty()) throw std::invalid_argument("orlicz1_norm of no values");
  double largest = 0.0;
  for (double v : values.values) {
    if (!std::isfinite(v)) throw std::invalid_argument("orlicz1_norm: non-finite value");
    largest = std::max(largest, std::abs(v));
  }
  if (largest == 0.0) return 0.0;

  const double count = static_cast<double>(values.values.size());
  auto mean_exp = [&](double t) {
    double sum = 0.0;
    for (double v : values.values) sum += std::exp(std::abs(v) / t);
    return sum / count;
  };
  // At lo the largest term alone pushes the mean to >= 2; at hi every term is <= 2.
  double lo = largest / std::log(2.0 * count);
  double hi = largest / std::log(2.0);
  if (mean_exp(lo) <= 2.0) return lo;
  while ((hi - lo) > 1e-12 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (mean_exp(mid) <= 2.0) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

DeltaEstimate delta_estimate(const synth::ModelSpec& spec, std::size_t m_probe, std::uint64_t seed) {
  if (m_probe < 30) throw std::invalid_argument("delta_estimate needs m_probe >= 30");
  spec.validate();
  Stream stream = make_stream({seed, stream_tag::kTheta});
  DeltaEstimate out;
  out.kl.method = KlMethod::kExactSynth;
  out.kl.values.reserve(m_probe);
  for (std::size_t i = 0; i < m_probe; ++i) {
    const auto theta = synth::sample_theta(spec, stream);
    out.kl.values.push_back(kl_exact_synth(theta, spec));
  }
  out.psi1_norm = orlicz1_norm(out.kl);
  out.delta = std::min(out.psi1_norm, 1.0);
  return out;
}

}  // namespace fedrate::hetero
