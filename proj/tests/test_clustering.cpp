#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "specstab/clustering.hpp"
#include "specstab/experiments.hpp"
#include "test_util.hpp"

using namespace specstab;
using specstab::testing::block_diagonal;
using specstab::testing::path_graph;
using specstab::testing::same_partition;

TEST(Embedding, IndicatorStructureOnDisconnectedGraph) {
  std::vector<int> labels;
  const WeightMatrix w = block_diagonal({3, 4, 2}, &labels);
  const Embedding emb = spectral_embed(w, 3);
  for (int i = 0; i < w.n(); ++i)
    for (int j = 0; j < w.n(); ++j)
      if (labels[i] == labels[j]) EXPECT_LE((emb.rows.row(i) - emb.rows.row(j)).norm(), 1e-10);
}

TEST(Embedding, ConstantVectorAndK2) {
  const Embedding one = spectral_embed(path_graph(4), 1);
  EXPECT_LE((one.rows.col(0).cwiseAbs() - Vector::Constant(4, 0.5)).norm(), 1e-12);
  const Embedding two = spectral_embed(path_graph(2), 2);
  EXPECT_LE((two.rows.cwiseAbs() - Matrix::Constant(2, 2, 1.0 / std::sqrt(2.0))).norm(), 1e-12);
  EXPECT_NEAR(two.rows(0, 1) * two.rows(1, 1), -0.5, 1e-12);
}

TEST(KMeans, FourPointSplit) {
  Matrix pts(4, 2);
  pts << 0, 0, 0, 1, 10, 0, 10, 1;
  const ClusterAssignment c = kmeans(pts, 2, 0);
  EXPECT_TRUE(same_partition(c.labels, {0, 0, 1, 1}));
  // both groups of two points at distance 1: inertia 2 * (2 * 0.25)
  EXPECT_NEAR(c.inertia, 1.0, 1e-12);
}

TEST(KMeans, SingleClusterInertiaIsTotalScatter) {
  Matrix pts = Matrix::Random(10, 3);
  const ClusterAssignment c = kmeans(pts, 1, 5);
  const Eigen::RowVectorXd mean = pts.colwise().mean();
  EXPECT_NEAR(c.inertia, (pts.rowwise() - mean).squaredNorm(), 1e-12);
  for (int l : c.labels) EXPECT_EQ(l, 0);
}

TEST(KMeans, InertiaHistoryNonIncreasingAndDeterministic) {
  Matrix pts = Matrix::Random(40, 2);
  const ClusterAssignment a = kmeans(pts, 4, 3);
  const ClusterAssignment b = kmeans(pts, 4, 3);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.inertia, b.inertia);
  for (std::size_t i = 1; i < a.inertia_history.size(); ++i)
    EXPECT_LE(a.inertia_history[i], a.inertia_history[i - 1] + 1e-12);
  EXPECT_THROW(kmeans(pts, 41, 0), ArgumentError);
}

TEST(SpectralCluster, RecoversComponentsAndSingletons) {
  std::vector<int> labels;
  const WeightMatrix w = block_diagonal({4, 5, 3}, &labels);
  for (std::uint64_t seed = 0; seed < 5; ++seed)
    EXPECT_TRUE(same_partition(spectral_cluster(w, 3, seed).labels, labels));
  const ClusterAssignment all = spectral_cluster(path_graph(5), 5, 0);
  EXPECT_TRUE(same_partition(all.labels, {0, 1, 2, 3, 4}));
}

TEST(SpectralCluster, ReducedChainRecoversPairs) {
  const WeightMatrix w = reduced_chain_model(8, 2.0);
  std::vector<int> pairs;
  for (int v = 0; v < 16; ++v) pairs.push_back(v / 2);
  // at mu1 = 0 the pairs are exactly the connected components
  EXPECT_EQ(connected_components_via_kernel(reduced_chain_model(8, 0.0), 1e-9), 8);
  EXPECT_TRUE(same_partition(spectral_cluster(w, 8, 1).labels, pairs));
}
