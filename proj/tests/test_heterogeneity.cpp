#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fedrate/heterogeneity.hpp"
#include "oracles.hpp"

using namespace fedrate;

namespace {

synth::ModelSpec one_coordinate() {
  synth::ModelSpec spec;
  spec.d = 1;
  spec.d_int = 1;
  spec.f0 = synth::F0Choice::kF2;
  return spec;
}

dim::PointCloud uniform_1d(double lo, double hi, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return dim::PointCloud(1, std::move(v));
}

}  // namespace

TEST(KlExact, ClosedFormValues) {
  const auto spec = one_coordinate();
  EXPECT_NEAR(hetero::kl_exact_synth(std::vector<double>(5, 0.0), spec), 1.0, 1e-4);
  EXPECT_NEAR(hetero::kl_exact_synth(std::vector<double>(5, 0.5), spec), 0.3069, 1e-3);
  EXPECT_NEAR(hetero::kl_exact_synth(std::vector<double>(5, 0.5), spec), 1.0 - std::log(2.0), 1e-9);
}

TEST(KlExact, MatchesClosedFormToRelativeTolerance) {
  const auto spec = one_coordinate();
  for (int i = 0; i <= 100; ++i) {
    const double t = i / 100.0;
    const double expect = oracle::kl_shifted_uniform(t);
    const double got = hetero::kl_exact_synth(std::vector<double>(5, t), spec);
    EXPECT_LE(std::abs(got - expect), 1e-6 * expect + 1e-12) << "theta " << t;
  }
}

TEST(KlExact, ReflectionSymmetry) {
  const auto spec = one_coordinate();
  for (double t : {0.01, 0.2, 0.37, 0.49}) {
    EXPECT_NEAR(hetero::kl_exact_synth(std::vector<double>(5, t), spec),
                hetero::kl_exact_synth(std::vector<double>(5, 1.0 - t), spec), 1e-12);
  }
}

TEST(KlExact, AdditiveOverCoordinates) {
  synth::ModelSpec spec;
  const double one = hetero::kl_exact_synth(std::vector<double>(5, 0.3), one_coordinate());
  for (std::size_t k : {2u, 10u, 20u}) {
    spec.d_int = k;
    EXPECT_NEAR(hetero::kl_exact_synth(std::vector<double>(spec.theta_dim(), 0.3), spec),
                static_cast<double>(k) * one, 1e-10 * static_cast<double>(k));
  }
}

TEST(KlExact, ArgumentErrorsAndHomogeneous) {
  auto spec = one_coordinate();
  EXPECT_THROW(hetero::kl_exact_synth(std::vector<double>(5, 1.5), spec), std::invalid_argument);
  EXPECT_THROW(hetero::kl_exact_synth(std::vector<double>(5, -0.1), spec), std::invalid_argument);
  EXPECT_THROW(hetero::kl_exact_synth(std::vector<double>(5, 0.5), spec, 50), std::invalid_argument);
  spec.family = synth::XFamily::kHomogeneous;
  EXPECT_EQ(hetero::kl_exact_synth(std::vector<double>(5, 0.1), spec), 0.0);
}

TEST(KlKnn, SameDistributionNearZero) {
  const auto p = uniform_1d(0.0, 1.0, 10000, 1);
  const auto q = uniform_1d(0.0, 1.0, 10000, 2);
  const double est = hetero::kl_knn(p, q);
  EXPECT_GE(est, 0.0);
  EXPECT_LE(est, 0.05);
}

TEST(KlKnn, NestedUniformMatchesQuadrature) {
  // P = U[0.5, 1] has density 2 where Q = U[0, 1] has density 1.
  const double truth = oracle::simpson([](double) { return 2.0 * std::log(2.0); }, 0.5, 1.0, 100);
  EXPECT_NEAR(truth, std::log(2.0), 1e-12);
  const auto p = uniform_1d(0.5, 1.0, 10000, 3);
  const auto q = uniform_1d(0.0, 1.0, 10000, 4);
  EXPECT_NEAR(hetero::kl_knn(p, q), truth, 0.1);
}

TEST(KlKnn, DisjointSupportGivesLargeEstimate) {
  const auto p = uniform_1d(0.0, 1.0, 10000, 5);
  const auto q = uniform_1d(0.5, 1.5, 10000, 6);
  EXPECT_GT(hetero::kl_knn(p, q), 1.0);
}

TEST(KlKnn, NonNegativeAndGuards) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    EXPECT_GE(hetero::kl_knn(uniform_1d(0.0, 1.0, 60, s), uniform_1d(-0.5, 1.5, 60, s + 50)), 0.0);
  }
  EXPECT_THROW(hetero::kl_knn(uniform_1d(0, 1, 49, 1), uniform_1d(0, 1, 100, 2)), std::invalid_argument);
  EXPECT_THROW(hetero::kl_knn(uniform_1d(0, 1, 100, 1), uniform_1d(0, 1, 100, 2), 0), std::invalid_argument);
  std::vector<double> dup(100, 0.25);
  EXPECT_TRUE(std::isfinite(hetero::kl_knn(dim::PointCloud(1, dup), uniform_1d(0, 1, 100, 3))));
}

TEST(Orlicz, ClosedForms) {
  EXPECT_EQ(hetero::orlicz1_norm({{0.0, 0.0, 0.0}}), 0.0);
  EXPECT_NEAR(hetero::orlicz1_norm({{std::log(2.0)}}), 1.0, 1e-6);
  EXPECT_NEAR(hetero::orlicz1_norm({{2.0, 2.0, 2.0, 2.0}}), 2.0 / std::log(2.0), 1e-6);
  EXPECT_THROW(hetero::orlicz1_norm(hetero::KlSampleSet{}), std::invalid_argument);
}

TEST(Orlicz, HomogeneousMonotoneAndMatchesOracle) {
  std::mt19937_64 rng(8);
  std::exponential_distribution<double> e(2.0);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> v(50);
    for (auto& x : v) x = e(rng);
    const double norm = hetero::orlicz1_norm({v});
    EXPECT_NEAR(norm, oracle::orlicz1(v), 1e-8 * norm);
    auto scaled = v;
    for (auto& x : scaled) x *= 3.5;
    EXPECT_NEAR(hetero::orlicz1_norm({scaled}), 3.5 * norm, 1e-6 * norm);
    auto larger = v;
    for (auto& x : larger) x += 0.1 * e(rng);
    EXPECT_GE(hetero::orlicz1_norm({larger}), norm);
  }
}

TEST(Delta, HomogeneousFamilyIsZero) {
  synth::ModelSpec spec;
  spec.family = synth::XFamily::kHomogeneous;
  const auto est = hetero::delta_estimate(spec, 200, 1);
  EXPECT_LT(est.delta, 0.05);
}

TEST(Delta, OneFreeCoordinateMatchesPopulationOracle) {
  const double population = oracle::orlicz1_population_one_coordinate();
  EXPECT_NEAR(population, 0.757, 0.002);
  const auto est = hetero::delta_estimate(one_coordinate(), 20000, 3);
  EXPECT_NEAR(est.psi1_norm, population, 0.02);
  EXPECT_EQ(est.delta, std::min(est.psi1_norm, 1.0));
  for (double v : est.kl.values) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0 + 1e-9);
  }
}

TEST(Delta, CappedAtOneForSeveralCoordinates) {
  synth::ModelSpec spec;
  for (std::size_t k : {2u, 10u}) {
    spec.d_int = k;
    const auto est = hetero::delta_estimate(spec, 300, 4);
    EXPECT_GT(est.psi1_norm, 1.0);
    EXPECT_EQ(est.delta, 1.0);
  }
}

TEST(Delta, GuardsAndRange) {
  synth::ModelSpec spec;
  EXPECT_THROW(hetero::delta_estimate(spec, 29, 1), std::invalid_argument);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto est = hetero::delta_estimate(one_coordinate(), 30, s);
    EXPECT_GE(est.delta, 0.0);
    EXPECT_LE(est.delta, 1.0);
  }
}
