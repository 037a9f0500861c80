#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "specstab/experiments.hpp"
#include "specstab/sda_outer.hpp"
#include "test_util.hpp"

using namespace specstab;
using specstab::testing::block_diagonal;
using specstab::testing::path_graph;
using specstab::testing::random_graph;

namespace {

// Brute force over admissible perturbations (a, b) of the unit P3 on a grid
// of step h: keep W + (a, b) >= 0 with lambda_1 = lambda_2 (disconnection)
// and return the smallest ||L(a, b)||_F.
double p3_grid_oracle(double h) {
  double best = std::numeric_limits<double>::infinity();
  const int steps = static_cast<int>(std::lround(3.0 / h));
  for (int i = 0; i <= steps; ++i) {
    const double a = -1.0 + i * h;
    for (int j = 0; j <= steps; ++j) {
      const double b = -1.0 + j * h;
      Eigen::Matrix3d l;
      l << 1 + a, -(1 + a), 0, -(1 + a), 2 + a + b, -(1 + b), 0, -(1 + b), 1 + b;
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
      es.computeDirect(l, Eigen::EigenvaluesOnly);
      if (es.eigenvalues()[1] - es.eigenvalues()[0] > 1e-9) continue;
      Eigen::Matrix3d d;
      d << a, -a, 0, -a, a + b, -b, 0, -b, b;
      best = std::min(best, d.norm());
    }
  }
  return best;
}

}  // namespace

TEST(InitialGuess, PathGraph) {
  const InitialGuess g = initial_guess(path_graph(3), 1);
  EXPECT_NEAR(g.eps0, 1.0 / std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(laplacian_norm(g.E0), 1.0, 1e-12);
  EXPECT_TRUE(initial_guess(block_diagonal({2, 2}), 1).coalesced);
}

TEST(Sda, K2IsTwiceTheWeight) {
  for (double w : {1.0, 3.0}) {
    const WeightMatrix k2(make_pattern(2, {{0, 1}}), Vector::Constant(1, w));
    const SdaResult r = compute_sda(k2, 1);
    EXPECT_NEAR(r.epsilon_star, 2.0 * w, 1e-6);
    EXPECT_TRUE(r.feasible);
    EXPECT_EQ(r.certificate_residual, 0.0);  // W* = 0
  }
}

TEST(Sda, PathGraphMatchesGridOracle) {
  const double oracle = p3_grid_oracle(1e-3);
  const SdaResult r = compute_sda(path_graph(3), 1);
  EXPECT_NEAR(r.epsilon_star, oracle, 1e-3);
  EXPECT_NEAR(r.epsilon_star, std::sqrt(15.0) / 2.0, 1e-6);
  EXPECT_LE(r.certificate_residual, 1e-4);
  EXPECT_LT(r.eps_ub - r.eps_lb, 1e-6);
  EXPECT_TRUE(r.feasible);
  EXPECT_EQ(r.status, "ok");
}

TEST(Sda, AlreadyCoalescedIsZero) {
  const SdaResult r = compute_sda(block_diagonal({3, 3}), 1);
  EXPECT_EQ(r.epsilon_star, 0.0);
  EXPECT_TRUE(r.already_coalesced);
}

TEST(Sda, DisconnectedGraphNeverPicksZeroDistance) {
  const SweepResult s = k_opt_sweep(block_diagonal({3, 4, 3}), 2, 3);
  ASSERT_TRUE(s.rows[0].delta.has_value());
  EXPECT_EQ(*s.rows[0].delta, 0.0);
  EXPECT_NE(s.k_opt_delta, 2);
}

TEST(Sda, LowerBoundAndCertificateOnRandomGraphs) {
  std::mt19937_64 rng(30);
  for (int t = 0; t < 8; ++t) {
    const WeightMatrix w = random_graph(6 + t % 3, 0.5, rng);
    const int k = 1 + t % 3;
    const SdaResult r = compute_sda(w, k);
    EXPECT_GE(r.epsilon_star + 1e-8, r.scaled_gap);
    if (r.status == "ok") EXPECT_LE(r.certificate_residual, 1e-4) << "instance " << t;
    EXPECT_GE(r.min_weight(), -1e-10);
    EXPECT_NEAR(laplacian_norm(r.E_star), 1.0, 1e-10);
  }
}

TEST(Certificate, ZeroAtWAndLargeOffExtremizer) {
  const WeightMatrix w = path_graph(3);
  EXPECT_EQ(certificate(w, w.matrix()), 0.0);
  const SdaResult r = compute_sda(w, 1);
  PatternMatrix bad = r.W_star;
  bad.values()[0] += 0.5;
  bad.values()[1] -= 0.4;
  EXPECT_GE(certificate(w, bad), 1e-2);
}

TEST(ValueFunction, DerivativeSignAndFormula) {
  std::mt19937_64 rng(31);
  const WeightMatrix w = random_graph(7, 0.5, rng);
  const int k = 2;
  OuterConfig cfg;
  cfg.inner.tol = 1e-14;
  cfg.inner.stationarity_tol = 1e-10;
  const double eps_star = compute_sda(w, k).epsilon_star;
  for (double frac : {0.2, 0.5}) {
    const FValue fv = f_and_derivative(w, k, frac * eps_star, 0.0, cfg.inner);
    EXPECT_LT(fv.fprime, 0.0);
    const FlowDirection d = flow_direction(w, fv.state);
    const double expect = -frobenius_norm(d.gradient) / frobenius_norm(d.gram);
    EXPECT_NEAR(fv.fprime, expect, 1e-4 * std::abs(expect));
  }
}

TEST(ReducedChain, DeltaEightAtMu2) {
  const SdaResult r = compute_sda(reduced_chain_model(8, 2.0), 8);
  EXPECT_NEAR(r.epsilon_star, 138.914, 0.01 * 138.914);
  EXPECT_LE(r.certificate_residual, 1e-4);
}

TEST(ReducedChain, OptimalKAtSweepEnds) {
  const SweepResult left = k_opt_sweep(reduced_chain_model(8, 2.0), 5, 8);
  EXPECT_EQ(left.k_opt_gap, 8);
  EXPECT_EQ(left.k_opt_delta, 8);
  const SweepResult right = k_opt_sweep(reduced_chain_model(8, 100.0), 5, 8);
  EXPECT_EQ(right.k_opt_gap, 6);
  EXPECT_EQ(right.k_opt_delta, 5);
}

TEST(Sweep, RejectsEmptyRange) {
  EXPECT_THROW(k_opt_sweep(path_graph(4), 3, 2), ArgumentError);
  EXPECT_THROW(k_opt_sweep(path_graph(4), 1, 4), ArgumentError);
}
