#pragma once

// Cross-client heterogeneity: per-client KL(lambda_theta, lambda), its
// Orlicz-1 (psi_1) norm over theta ~ pi, and the capped measure
// Delta = min(||KL||_psi1, 1).

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fedrate/cover.hpp"
#include "fedrate/synth.hpp"

namespace fedrate::hetero {

enum class KlMethod { kExactSynth, kKnn };

struct KlSampleSet {
  std::vector<double> values;  // nats, each >= 0
  KlMethod method = KlMethod::kExactSynth;
};

// KL(lambda_theta, lambda) for the synthetic family, by graded composite
// Gauss-Legendre quadrature. Factorizes over the free coordinates; each one
// contributes -int_{theta_k}^{theta_k+1} log g(x) dx with g the triangular
// marginal density on [0, 2]. Zero for the homogeneous family.
double kl_exact_synth(std::span<const double> theta, const synth::ModelSpec& spec,
                      std::size_t quad_points = 200);

// k-nearest-neighbour divergence estimate D(P || Q) under the l-infinity
// metric, clipped below at 0. Distances are floored at 1e-12.
double kl_knn(const dim::PointCloud& samples_p, const dim::PointCloud& samples_q, std::size_t k = 1);

// inf { t > 0 : mean exp(|v| / t) <= 2 } by bisection; 0 when all values are 0.
double orlicz1_norm(const KlSampleSet& values);

struct DeltaEstimate {
  double delta = 0.0;      // min(psi1, 1)
  double psi1_norm = 0.0;
  KlSampleSet kl;
};

// Draws m_probe thetas from pi and evaluates the exact per-theta KL.
DeltaEstimate delta_estimate(const synth::ModelSpec& spec, std::size_t m_probe, std::uint64_t seed);

}  // namespace fedrate::hetero
