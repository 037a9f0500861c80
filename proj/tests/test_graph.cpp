#include <gtest/gtest.h>

#include <random>

#include "specstab/graph.hpp"
#include "test_util.hpp"

using namespace specstab;
using specstab::testing::random_graph;
using specstab::testing::random_pattern_matrix;

namespace {

// Dense reference implementations, written independently of graph.hpp.
Matrix dense_laplacian(const Matrix& a) {
  Matrix l = -a;
  for (Eigen::Index i = 0; i < a.rows(); ++i) l(i, i) = a.row(i).sum() - a(i, i);
  return l;
}

Matrix dense_project(const Matrix& a, const SparsityPattern& p) {
  Matrix out = Matrix::Zero(a.rows(), a.cols());
  for (const auto& e : p.edges()) out(e.i, e.j) = out(e.j, e.i) = 0.5 * (a(e.i, e.j) + a(e.j, e.i));
  return out;
}

}  // namespace

TEST(Pattern, NormalizesAndRejects) {
  SparsityPattern p(4, {{2, 1}, {0, 3}});
  EXPECT_EQ(p.edge(0).i, 0);
  EXPECT_EQ(p.edge(1).i, 1);
  EXPECT_EQ(p.edge(1).j, 2);
  EXPECT_TRUE(p.find(3, 0).has_value());
  EXPECT_FALSE(p.find(1, 3).has_value());
  EXPECT_THROW(SparsityPattern(3, {{1, 1}}), ArgumentError);
  EXPECT_THROW(SparsityPattern(3, {{0, 3}}), DimensionError);
  EXPECT_THROW(SparsityPattern(3, {{0, 1}, {1, 0}}), ArgumentError);
  EXPECT_EQ(SparsityPattern::complete(5).edge_count(), 10u);
}

TEST(WeightMatrix, RejectsNegativeAndNonFinite) {
  auto p = make_pattern(2, {{0, 1}});
  EXPECT_THROW(WeightMatrix(p, Vector::Constant(1, -1.0)), ArgumentError);
  EXPECT_THROW(WeightMatrix(p, Vector::Constant(1, std::nan(""))), NumericalError);
  EXPECT_THROW(PatternMatrix(p, Vector::Zero(2)), DimensionError);
}

TEST(WeightMatrix, FromDenseRejectsAsymmetry) {
  Matrix a(2, 2);
  a << 0, 1, 2, 0;
  EXPECT_THROW(WeightMatrix::from_dense(a), ArgumentError);
}

TEST(Laplacian, ReducedChainSixBySix) {
  Matrix w(6, 6);
  w << 0, 100, 20, 0, 0, 0,
       100, 0, 0, 20, 0, 0,
       20, 0, 0, 100, 10, 0,
       0, 20, 100, 0, 0, 10,
       0, 0, 10, 0, 0, 100,
       0, 0, 0, 10, 100, 0;
  const Matrix l = laplacian(WeightMatrix::from_dense(w));
  Vector diag(6);
  diag << 120, 120, 130, 130, 110, 110;
  EXPECT_EQ((l.diagonal() - diag).norm(), 0.0);
  EXPECT_LE((l * Vector::Ones(6)).norm(), 1e-12);
}

TEST(Laplacian, TrivialCases) {
  auto p = make_pattern(3, {{0, 1}, {1, 2}});
  EXPECT_EQ(laplacian(PatternMatrix::zero(p)).norm(), 0.0);
  const Matrix l = laplacian(WeightMatrix(make_pattern(2, {{0, 1}}), Vector::Constant(1, 2.5)));
  Matrix expect(2, 2);
  expect << 2.5, -2.5, -2.5, 2.5;
  EXPECT_EQ((l - expect).norm(), 0.0);
}

TEST(Laplacian, MatchesDenseReferenceAndMatvec) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    const WeightMatrix w = random_graph(3 + t % 6, 0.5, rng);
    const Matrix ref = dense_laplacian(w.to_dense());
    EXPECT_LE((laplacian(w) - ref).norm(), 1e-12);
    const Vector x = Vector::Random(w.n());
    EXPECT_LE((laplacian_matvec(w.matrix(), x) - ref * x).norm(), 1e-12);
  }
}

TEST(Projection, ConformingAntisymmetricAndAdjoint) {
  const auto full = std::make_shared<const SparsityPattern>(SparsityPattern::complete(4));
  Matrix a = Matrix::Random(4, 4);
  a = (a + a.transpose()).eval();
  Matrix offdiag = a;
  offdiag.diagonal().setZero();
  EXPECT_LE((project_pattern(full, a).to_dense() - offdiag).norm(), 1e-14);

  Matrix skew = Matrix::Random(4, 4);
  skew = (skew - skew.transpose()).eval();
  EXPECT_LE(project_pattern(full, skew).values().norm(), 1e-14);

  std::mt19937_64 rng(2);
  const auto pattern = make_pattern(4, {{0, 1}, {1, 3}, {2, 3}});
  const Matrix r = Matrix::Random(4, 4);
  EXPECT_LE((project_pattern(pattern, r).to_dense() - dense_project(r, *pattern)).norm(), 1e-14);
  for (int t = 0; t < 100; ++t) {
    const PatternMatrix wm = random_pattern_matrix(pattern, rng);
    const double lhs = frobenius_inner(project_pattern(pattern, r), wm);
    const double rhs = frobenius_inner(r, wm.to_dense());
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::abs(rhs)));
  }
}

TEST(Adjoint, IdentityOnRandomPairs) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> size(2, 8);
  for (int t = 0; t < 100; ++t) {
    const WeightMatrix g = random_graph(size(rng), 0.5, rng);
    const PatternMatrix wm = random_pattern_matrix(g.pattern_ptr(), rng);
    const Matrix v = Matrix::Random(g.n(), g.n());
    const double lhs = frobenius_inner(laplacian_adjoint(g.pattern_ptr(), v), wm);
    const double rhs = frobenius_inner(v, laplacian(wm));
    EXPECT_LE(std::abs(lhs - rhs), 1e-12 * std::max(1.0, std::abs(rhs)));
  }
  const auto p = make_pattern(3, {{0, 1}});
  EXPECT_EQ(laplacian_adjoint(p, Matrix::Zero(3, 3)).values().norm(), 0.0);
}

TEST(Adjoint, GramFormula) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    const WeightMatrix g = random_graph(6, 0.6, rng);
    const PatternMatrix e = random_pattern_matrix(g.pattern_ptr(), rng);
    const Matrix dense = e.to_dense();
    const Vector d = dense * Vector::Ones(g.n());
    const Matrix expect = dense_project(d * Vector::Ones(g.n()).transpose(), g.pattern()) + dense;
    EXPECT_LE((laplacian_gram(e).to_dense() - expect).norm(), 1e-12);
    EXPECT_LE((laplacian_adjoint(g.pattern_ptr(), laplacian(e)).values() - laplacian_gram(e).values()).norm(), 1e-12);
    EXPECT_NEAR(laplacian(e).squaredNorm(), frobenius_inner(laplacian_gram(e), e), 1e-10);
    EXPECT_NEAR(laplacian_norm(e), laplacian(e).norm(), 1e-12);
  }
}

TEST(Adjoint, RankOneAndTwoMatchDense) {
  std::mt19937_64 rng(5);
  const WeightMatrix g = random_graph(7, 0.5, rng);
  const Vector x = Vector::Random(7);
  const Vector y = Vector::Random(7);
  const Matrix xy = x * y.transpose();
  EXPECT_LE((rank_one_adjoint(g.pattern_ptr(), x).values() -
             laplacian_adjoint(g.pattern_ptr(), x * x.transpose()).values()).norm(), 1e-12);
  EXPECT_LE((rank_two_adjoint(g.pattern_ptr(), x, y).values() -
             laplacian_adjoint(g.pattern_ptr(), 0.5 * (xy + xy.transpose())).values()).norm(), 1e-12);
}

TEST(InnerProduct, PatternMatchesDense) {
  std::mt19937_64 rng(6);
  const WeightMatrix g = random_graph(6, 0.5, rng);
  const PatternMatrix a = random_pattern_matrix(g.pattern_ptr(), rng);
  const PatternMatrix b = random_pattern_matrix(g.pattern_ptr(), rng);
  EXPECT_NEAR(frobenius_inner(a, b), frobenius_inner(a.to_dense(), b.to_dense()), 1e-12);
  EXPECT_NEAR(frobenius_inner(a, a), std::pow(frobenius_norm(a), 2), 1e-12);
  EXPECT_NEAR(frobenius_norm(a), a.to_dense().norm(), 1e-12);
  const PatternMatrix other(make_pattern(6, {{0, 5}}));
  EXPECT_THROW(a + other, DimensionError);
}
