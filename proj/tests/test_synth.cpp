#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

#include "fedrate/rng.hpp"
#include "fedrate/synth.hpp"
#include "oracles.hpp"

using namespace fedrate;

namespace {

std::vector<double> col(const Eigen::MatrixXd& x, Eigen::Index j) {
  return {x.col(j).data(), x.col(j).data() + x.rows()};
}

}  // namespace

TEST(ModelSpec, Validation) {
  synth::ModelSpec spec;
  EXPECT_NO_THROW(spec.validate());
  EXPECT_EQ(spec.theta_dim(), 14u);
  spec.d_int = 31;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec.d_int = 0;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec.d_int = 10;
  spec.noise_sd = -0.1;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
}

TEST(ParseNames, RoundTrip) {
  for (auto f : {synth::F0Choice::kF1, synth::F0Choice::kF2}) EXPECT_EQ(synth::parse_f0(synth::to_string(f)), f);
  for (auto f : {synth::XFamily::kShiftedUniform, synth::XFamily::kHomogeneous}) {
    EXPECT_EQ(synth::parse_family(synth::to_string(f)), f);
  }
  EXPECT_THROW(synth::parse_f0("F3"), std::invalid_argument);
  EXPECT_EQ(synth::smoothness(synth::F0Choice::kF1), 2.0);
  EXPECT_EQ(synth::smoothness(synth::F0Choice::kF2), 1.0);
}

TEST(SampleTheta, DeterministicAndInCube) {
  synth::ModelSpec spec;
  auto a = make_stream({42});
  auto b = make_stream({42});
  EXPECT_EQ(synth::sample_theta(spec, a), synth::sample_theta(spec, b));
  auto s = make_stream({1});
  std::vector<double> sums(spec.theta_dim(), 0.0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const auto t = synth::sample_theta(spec, s);
    ASSERT_EQ(t.size(), spec.theta_dim());
    for (std::size_t k = 0; k < t.size(); ++k) {
      ASSERT_GE(t[k], 0.0);
      ASSERT_LE(t[k], 1.0);
      sums[k] += t[k];
    }
  }
  for (double s_k : sums) EXPECT_NEAR(s_k / draws, 0.5, 0.01);
}

TEST(SampleX, SupportAndZeros) {
  synth::ModelSpec spec;
  spec.d_int = 10;
  auto s = make_stream({3});
  std::vector<double> x(spec.d);
  for (int i = 0; i < 1000; ++i) {
    const auto theta = synth::sample_theta(spec, s);
    synth::sample_x(spec, theta, s, x);
    for (std::size_t k = 0; k < spec.d; ++k) {
      if (k < spec.d_int) {
        ASSERT_GE(x[k], theta[k]);
        ASSERT_LE(x[k], theta[k] + 1.0);
      } else {
        ASSERT_EQ(x[k], 0.0);
      }
    }
  }
}

TEST(SampleX, FullIntrinsicDimensionHasNoZeros) {
  synth::ModelSpec spec;
  spec.d = 6;
  spec.d_int = 6;
  auto s = make_stream({8});
  std::vector<double> x(spec.d);
  const std::vector<double> theta(spec.theta_dim(), 0.3);
  for (int i = 0; i < 100; ++i) {
    synth::sample_x(spec, theta, s, x);
    for (double v : x) ASSERT_NE(v, 0.0);
  }
}

TEST(SampleX, ZeroThetaGivesUnitCube) {
  synth::ModelSpec spec;
  const std::vector<double> theta(spec.theta_dim(), 0.0);
  auto s = make_stream({9});
  std::vector<double> x(spec.d);
  for (int i = 0; i < 1000; ++i) {
    synth::sample_x(spec, theta, s, x);
    for (std::size_t k = 0; k < spec.d_int; ++k) {
      ASSERT_GE(x[k], 0.0);
      ASSERT_LE(x[k], 1.0);
    }
  }
}

TEST(SampleX, ShiftedMean) {
  synth::ModelSpec spec;
  spec.d = 3;
  spec.d_int = 2;
  const std::vector<double> theta(spec.theta_dim(), 0.25);
  auto s = make_stream({10});
  std::vector<double> x(spec.d);
  double sum = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    synth::sample_x(spec, theta, s, x);
    sum += x[0];
  }
  EXPECT_NEAR(sum / draws, 0.75, 0.01);
}

TEST(F0First, HandValues) {
  for (std::size_t d : {2u, 5u, 30u}) {
    EXPECT_EQ(synth::eval_f0_1(std::vector<double>(d, 0.0)), 0.0);
    EXPECT_NEAR(synth::eval_f0_1(std::vector<double>(d, 0.5)), 0.25, 1e-15);
  }
}

TEST(F0First, MatchesStraightLineTranscription) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> x(30);
    for (double& v : x) v = u(rng);
    EXPECT_NEAR(synth::eval_f0_1(x), oracle::f0_first(x), 1e-12);
  }
}

TEST(F0First, InvariantUnderReversal) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  std::vector<double> x(30);
  for (double& v : x) v = u(rng);
  auto r = x;
  std::reverse(r.begin(), r.end());
  EXPECT_NEAR(synth::eval_f0_1(x), synth::eval_f0_1(r), 1e-12);
}

TEST(F0Second, HandValues) {
  EXPECT_EQ(synth::eval_f0_2(std::vector<double>(30, 0.0)), 0.0);
  EXPECT_NEAR(synth::eval_f0_2(std::vector<double>(30, 1.0)), -0.25, 1e-15);
  EXPECT_NEAR(synth::eval_f0_2(std::vector<double>(30, 0.5)), 0.25, 1e-15);
}

TEST(F0Second, MatchesTranscriptionAndPermutationInvariant) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> x(30);
    for (double& v : x) v = u(rng);
    const double value = synth::eval_f0_2(x);
    EXPECT_NEAR(value, oracle::f0_second(x), 1e-12);
    std::shuffle(x.begin(), x.end(), rng);
    EXPECT_NEAR(synth::eval_f0_2(x), value, 1e-12);
  }
}

TEST(Federation, ShapesAndDeterminism) {
  synth::ModelSpec spec;
  const auto a = synth::make_federation(spec, 4, 7, 123);
  const auto b = synth::make_federation(spec, 4, 7, 123);
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].num_samples(), 7u);
    EXPECT_EQ(a[i].x.rows(), 30);
    EXPECT_EQ(a[i].theta, b[i].theta);
    EXPECT_TRUE(a[i].x == b[i].x);
    EXPECT_TRUE(a[i].y == b[i].y);
  }
}

TEST(Federation, ClientsIndependentOfCount) {
  synth::ModelSpec spec;
  const auto small = synth::make_federation(spec, 2, 5, 77);
  const auto large = synth::make_federation(spec, 6, 5, 77);
  for (std::size_t i = 0; i < small.size(); ++i) {
    EXPECT_TRUE(small[i].x == large[i].x);
    EXPECT_TRUE(small[i].y == large[i].y);
  }
}

TEST(Federation, NoiselessLabelsEqualF0) {
  synth::ModelSpec spec;
  spec.noise_sd = 0.0;
  spec.f0 = synth::F0Choice::kF2;
  for (const auto& c : synth::make_federation(spec, 3, 10, 5)) {
    for (Eigen::Index j = 0; j < c.x.cols(); ++j) EXPECT_EQ(c.y(j), synth::eval_f0_2(col(c.x, j)));
  }
}

TEST(Federation, ResidualSdMatchesNoiseAndIsIndependentOfX) {
  synth::ModelSpec spec;
  const auto fed = synth::make_federation(spec, 200, 200, 2024);
  std::vector<double> res;
  std::vector<double> x0;
  for (const auto& c : fed) {
    for (Eigen::Index j = 0; j < c.x.cols(); ++j) {
      res.push_back(c.y(j) - synth::eval_f0_1(col(c.x, j)));
      x0.push_back(c.x(0, j));
    }
  }
  const double n = static_cast<double>(res.size());
  const double mr = std::accumulate(res.begin(), res.end(), 0.0) / n;
  const double mx = std::accumulate(x0.begin(), x0.end(), 0.0) / n;
  double vr = 0.0, vx = 0.0, cxr = 0.0;
  for (std::size_t i = 0; i < res.size(); ++i) {
    vr += (res[i] - mr) * (res[i] - mr);
    vx += (x0[i] - mx) * (x0[i] - mx);
    cxr += (res[i] - mr) * (x0[i] - mx);
  }
  EXPECT_NEAR(std::sqrt(vr / (n - 1)), 0.1, 0.005);
  EXPECT_LT(std::abs(cxr / std::sqrt(vr * vx)), 0.02);
}

TEST(Nonparticipating, TriangularMarginalChiSquare) {
  synth::ModelSpec spec;
  spec.d = 1;
  spec.d_int = 1;
  spec.f0 = synth::F0Choice::kF2;
  const auto data = synth::sample_nonparticipating(spec, 10000, 31);
  const int bins = 20;
  std::vector<double> counts(bins, 0.0);
  for (Eigen::Index j = 0; j < data.x.cols(); ++j) {
    const double v = data.x(0, j);
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 2.0);
    counts[std::min(bins - 1, static_cast<int>(v / 2.0 * bins))] += 1.0;
  }
  auto density = [](double x) { return x <= 1.0 ? x : 2.0 - x; };
  double stat = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double lo = 2.0 * b / bins;
    const double hi = 2.0 * (b + 1) / bins;
    const double expected = 10000.0 * oracle::simpson(density, lo, hi, 100);
    stat += (counts[b] - expected) * (counts[b] - expected) / expected;
  }
  const double critical = boost::math::quantile(boost::math::chi_squared(bins - 1), 0.99);
  EXPECT_LT(stat, critical);
}

TEST(Nonparticipating, DeterministicAndSupported) {
  synth::ModelSpec spec;
  const auto a = synth::sample_nonparticipating(spec, 500, 4);
  const auto b = synth::sample_nonparticipating(spec, 500, 4);
  EXPECT_TRUE(a.x == b.x);
  EXPECT_TRUE(a.y == b.y);
  EXPECT_GE(a.x.minCoeff(), 0.0);
  EXPECT_LE(a.x.maxCoeff(), 2.0);
}

TEST(Nonparticipating, MixtureConsistentWithPooledFederation) {
  synth::ModelSpec spec;
  spec.d = 6;
  spec.d_int = 3;
  const auto pooled = synth::pool(synth::make_federation(spec, 10000, 1, 55));
  const auto fresh = synth::sample_nonparticipating(spec, 10000, 56);
  const double critical = oracle::ks_critical(0.01, 10000, 10000);
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(spec.d_int); ++k) {
    std::vector<double> a(pooled.x.cols()), b(fresh.x.cols());
    for (Eigen::Index j = 0; j < pooled.x.cols(); ++j) a[static_cast<std::size_t>(j)] = pooled.x(k, j);
    for (Eigen::Index j = 0; j < fresh.x.cols(); ++j) b[static_cast<std::size_t>(j)] = fresh.x(k, j);
    EXPECT_LT(oracle::ks_statistic(a, b), critical) << "coordinate " << k;
  }
}

TEST(Homogeneous, SameMarginalIndependentOfTheta) {
  synth::ModelSpec spec;
  spec.d = 2;
  spec.d_int = 1;
  spec.family = synth::XFamily::kHomogeneous;
  auto s = make_stream({12});
  std::vector<double> x(2);
  std::vector<double> draws;
  const std::vector<double> theta(spec.theta_dim(), 0.0);
  for (int i = 0; i < 10000; ++i) {
    synth::sample_x(spec, theta, s, x);
    draws.push_back(x[0]);
  }
  spec.family = synth::XFamily::kShiftedUniform;
  spec.f0 = synth::F0Choice::kF2;
  const auto fresh = synth::sample_nonparticipating(spec, 10000, 13);
  std::vector<double> ref;
  for (Eigen::Index j = 0; j < fresh.x.cols(); ++j) ref.push_back(fresh.x(0, j));
  EXPECT_LT(oracle::ks_statistic(draws, ref), oracle::ks_critical(0.01, 10000, 10000));
}

TEST(DatasetCsv, RoundTripAndHeader) {
  synth::ModelSpec spec;
  const auto fed = synth::make_federation(spec, 2, 3, 1);
  std::stringstream s;
  synth::write_federation_csv(s, fed);
  const std::string text = s.str();
  const auto header = text.substr(0, text.find('\n'));
  EXPECT_EQ(header.rfind("client_id,theta_0,", 0), 0u);
  EXPECT_NE(header.find(",x_29,y"), std::string::npos);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 7);
  const auto back = synth::read_federation_csv(s);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].theta, fed[i].theta);
    EXPECT_TRUE(back[i].x == fed[i].x);
    EXPECT_TRUE(back[i].y == fed[i].y);
  }
}
