#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "specstab/experiments.hpp"
#include "test_util.hpp"

using namespace specstab;

TEST(ChainModel, SixBySixMatrix) {
  Matrix expect(6, 6);
  expect << 0, 100, 20, 0, 0, 0,
            100, 0, 0, 20, 0, 0,
            20, 0, 0, 100, 10, 0,
            0, 20, 100, 0, 0, 10,
            0, 0, 10, 0, 0, 100,
            0, 0, 0, 10, 100, 0;
  EXPECT_EQ((reduced_chain_model(3, 20.0).to_dense() - expect).norm(), 0.0);
  EXPECT_DOUBLE_EQ(chain_coupling(3, 2, 20.0), 10.0);
}

TEST(ChainModel, ZeroCouplingIsDisconnected) {
  const EigenSystem sys = laplacian_spectrum(reduced_chain_model(5, 0.0));
  for (int i = 1; i <= 5; ++i) EXPECT_NEAR(sys.value(i), 0.0, 1e-12);
  EXPECT_GT(sys.value(6), 1.0);
  EXPECT_THROW(reduced_chain_model(1, 2.0), ArgumentError);
}

TEST(Sbm, IdentityGivesCompleteComponents) {
  SbmSpec spec;
  spec.community_sizes = {4, 5, 6};
  spec.P = Matrix::Identity(3, 3);
  const WeightMatrix w = sample_sbm(spec);
  EXPECT_EQ(w.pattern().edge_count(), 6u + 10u + 15u);
  EXPECT_EQ(connected_components_via_kernel(w, 1e-9), 3);
}

TEST(Sbm, BlockDensitiesWithinThreeSigma) {
  SbmSpec spec;
  spec.community_sizes = {100, 100, 100};
  spec.P.resize(3, 3);
  spec.P << 1, 0.2, 0, 0.2, 1, 0.1, 0, 0.1, 1;
  spec.seed = 42;
  const WeightMatrix w = sample_sbm(spec);
  const std::vector<int> label = sbm_labels(spec);
  Matrix count = Matrix::Zero(3, 3);
  for (const auto& e : w.pattern().edges()) {
    const int a = std::min(label[e.i], label[e.j]);
    const int b = std::max(label[e.i], label[e.j]);
    count(a, b) += 1;
  }
  const double pairs = 100.0 * 100.0;
  for (auto [a, b] : {std::pair{0, 1}, std::pair{1, 2}, std::pair{0, 2}}) {
    const double p = spec.P(a, b);
    EXPECT_LE(std::abs(count(a, b) - p * pairs), 3.0 * std::sqrt(pairs * p * (1 - p)) + 1e-12) << a << b;
  }
  EXPECT_EQ(count(0, 0), 100.0 * 99.0 / 2.0);
}

TEST(Sbm, ValidatesSpec) {
  SbmSpec spec;
  spec.community_sizes = {3, 3};
  spec.P = Matrix::Constant(2, 2, 1.5);
  EXPECT_THROW(sample_sbm(spec), ArgumentError);
  spec.P.resize(3, 3);
  EXPECT_THROW(sample_sbm(spec), DimensionError);
}

TEST(Centers, SingleGroupMeanAndDeterminism) {
  CentersSpec spec;
  spec.centers = {0.0};
  spec.n = 400;
  spec.seed = 3;
  const std::vector<double> x = sample_centers(spec);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  EXPECT_LE(std::abs(mean), 4.0 / std::sqrt(400.0));
  EXPECT_EQ(sample_centers(spec), x);
  spec.seed = 4;
  EXPECT_NE(sample_centers(spec), x);
}

TEST(Centers, SixBandsAroundCenters) {
  CentersSpec spec;
  spec.seed = 5;
  for (double v : sample_centers(spec)) {
    const double nearest = std::round(v / 8.0) * 8.0;
    EXPECT_LE(std::abs(v - nearest), 4.0);
  }
}

TEST(Similarity, ThresholdCases) {
  const WeightMatrix same = gaussian_similarity({1.0, 1.0}, 0.5);
  ASSERT_EQ(same.pattern().edge_count(), 1u);
  EXPECT_EQ(same.weights()[0], 1.0);
  EXPECT_EQ(gaussian_similarity({0.0, 5.0}, 0.5).pattern().edge_count(), 0u);  // exp(-12.5) < 1e-4
  const WeightMatrix kept = gaussian_similarity({0.0, 6.0}, 0.25);              // exp(-9) >= 1e-4
  ASSERT_EQ(kept.pattern().edge_count(), 1u);
  EXPECT_NEAR(kept.weights()[0], std::exp(-9.0), 1e-18);
  EXPECT_THROW(gaussian_similarity({0.0}, 0.0), ArgumentError);
}

TEST(StreamSeed, IndependentOfOrder) {
  EXPECT_NE(stream_seed(1, 0), stream_seed(1, 1));
  EXPECT_NE(stream_seed(1, 0), stream_seed(2, 0));
  EXPECT_EQ(stream_seed(7, 3), stream_seed(7, 3));
}

TEST(Frequency, ThreadCountDoesNotChangeResults) {
  CentersSpec spec;
  spec.n = 24;
  spec.centers = {0.0, 8.0, 16.0};
  spec.seed = 9;
  OuterConfig cfg;
  cfg.tol_eps = 1e-4;
  const FrequencyTable a = frequency_experiment(spec, 3, 2, 4, cfg, 1);
  const FrequencyTable b = frequency_experiment(spec, 3, 2, 4, cfg, 3);
  EXPECT_EQ(a.gap_counts, b.gap_counts);
  EXPECT_EQ(a.delta_counts, b.delta_counts);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(a.per_sample[i].seed, b.per_sample[i].seed);
  EXPECT_EQ(a.gap_successes, 3);
}

TEST(Frequency, SingleCenterHasNoPreferredK) {
  CentersSpec spec;
  spec.n = 40;
  spec.centers = {0.0};
  spec.seed = 10;
  OuterConfig cfg;
  cfg.tol_eps = 1e-3;
  const FrequencyTable t = frequency_experiment(spec, 6, 4, 8, cfg, thread_count());
  EXPECT_LT(t.gap_percent(6), 85.0);
  EXPECT_LT(t.delta_percent(6), 85.0);
}

TEST(Frequency, RejectsBadRanges) {
  CentersSpec spec;
  EXPECT_THROW(frequency_experiment(spec, 0, 4, 8), ArgumentError);
  EXPECT_THROW(frequency_experiment(spec, 1, 8, 4), ArgumentError);
  EXPECT_THROW(frequency_experiment(spec, 1, 1, 4), ArgumentError);
}
