#pragma once

// Symmetric eigensolves, spectral gaps and the unstructured distance to
// ambiguity. Cluster counts k are 1-based throughout: the kth gap of L(W) is
// lambda_{k+1} - lambda_k with eigenvalues sorted ascending.

#include <Eigen/Eigenvalues>
#include <lapacke.h>

#include <cmath>
#include <string>
#include <vector>

#include "specstab/errors.hpp"
#include "specstab/graph.hpp"

namespace specstab {

/// Default relative tolerance below which two eigenvalues count as coalesced.
inline constexpr double kDefaultCoalescenceTol = 1e-8;

/// True when |hi - lo| <= tol * max(1, |hi|).
inline bool is_coalesced(double lo, double hi, double tol = kDefaultCoalescenceTol) {
  return std::abs(hi - lo) <= tol * std::max(1.0, std::abs(hi));
}

/// Eigenpairs first..first+m-1 (1-based, ascending) of an n x n symmetric matrix;
/// a full decomposition has first = 1 and m = n.
struct EigenSystem {
  Vector values;   // ascending
  Matrix vectors;  // orthonormal columns, sign-normalized
  int first = 1;
  int dim = -1;  // n; -1 means values.size()

  int size() const { return dim >= 0 ? dim : static_cast<int>(values.size()); }
  double value(int one_based) const { return values[one_based - first]; }
  auto vector(int one_based) const { return vectors.col(one_based - first); }
};

namespace detail {

inline void normalize_sign(Matrix& vectors) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
      // strict comparison keeps the lowest index on ties
      if (std::abs(vectors(r, c)) > best + 1e-14) {
        best = std::abs(vectors(r, c));
        arg = r;
      }
    }
    if (vectors(arg, c) < 0.0) vectors.col(c) *= -1.0;
  }
}

}  // namespace detail

/// Full eigendecomposition of a symmetric matrix. Each eigenvector's
/// largest-magnitude component is made positive so traces are reproducible.
inline EigenSystem eig_symmetric(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("eigensolver input is not square");
  if (!a.allFinite()) throw NumericalError("eigensolver input has non-finite entries");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw NumericalError("symmetric eigensolver did not converge");
  EigenSystem sys{solver.eigenvalues(), solver.eigenvectors()};
  detail::normalize_sign(sys.vectors);
  return sys;
}

/// Eigenpairs il..iu (1-based) of a symmetric matrix by LAPACK dsyevr
/// (tridiagonal reduction plus MRRR on the requested index window).
inline EigenSystem eig_symmetric_window(const Matrix& a, int il, int iu) {
  if (a.rows() != a.cols()) throw DimensionError("eigensolver input is not square");
  const auto n = static_cast<lapack_int>(a.rows());
  if (il < 1 || iu < il || iu > n) throw ArgumentError("eigenvalue window out of range");
  if (!a.allFinite()) throw NumericalError("eigensolver input has non-finite entries");
  Matrix work = a;
  lapack_int found = 0;
  const lapack_int cnt = iu - il + 1;
  Vector vals(n);
  Matrix vecs(n, cnt);
  std::vector<lapack_int> support(2 * static_cast<std::size_t>(cnt));
  const lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'I', 'L', n, work.data(), n, 0.0, 0.0, il, iu, 0.0,
                                         &found, vals.data(), vecs.data(), n, support.data());
  if (info != 0 || found != cnt) throw NumericalError("windowed symmetric eigensolver failed");
  EigenSystem sys{vals.head(cnt), std::move(vecs), il, static_cast<int>(n)};
  detail::normalize_sign(sys.vectors);
  return sys;
}

inline EigenSystem laplacian_spectrum(const WeightMatrix& w) { return eig_symmetric(laplacian(w)); }

struct GapReport {
  int k = 0;
  double lambda_k = 0.0;
  double lambda_k1 = 0.0;
  double gap = 0.0;         // lambda_{k+1} - lambda_k
  double scaled_gap = 0.0;  // gap / sqrt(2): the unstructured distance to ambiguity
};

inline void check_cluster_count(int k, int n) {
  if (k < 1 || k >= n)
    throw ArgumentError("cluster count k = " + std::to_string(k) + " must satisfy 1 <= k < n = " + std::to_string(n));
}

inline GapReport gap_report(const EigenSystem& sys, int k) {
  check_cluster_count(k, sys.size());
  GapReport r;
  r.k = k;
  r.lambda_k = sys.value(k);
  r.lambda_k1 = sys.value(k + 1);
  r.gap = std::max(0.0, r.lambda_k1 - r.lambda_k);
  r.scaled_gap = r.gap / std::sqrt(2.0);
  return r;
}

inline GapReport spectral_gap(const WeightMatrix& w, int k) {
  check_cluster_count(k, w.n());
  return gap_report(laplacian_spectrum(w), k);
}

struct UnstructuredNearest {
  Matrix laplacian;    // L~ with lambda_k(L~) = lambda_{k+1}(L~)
  double distance = 0.0;  // ||L(W) - L~||_F = gap / sqrt(2)
  bool simple_pair = true;  // false when lambda_{k-1} = lambda_k or lambda_{k+1} = lambda_{k+2}
};

/// Nearest symmetric matrix to L(W) with coalesced kth pair:
/// L~ = L + (g/2) x_k x_k^T - (g/2) x_{k+1} x_{k+1}^T with g the kth gap.
inline UnstructuredNearest unstructured_minimizer(const WeightMatrix& w, int k) {
  check_cluster_count(k, w.n());
  const Matrix l = laplacian(w);
  const EigenSystem sys = eig_symmetric(l);
  const double g = sys.value(k + 1) - sys.value(k);
  const Vector xk = sys.vector(k);
  const Vector xk1 = sys.vector(k + 1);
  UnstructuredNearest out;
  out.laplacian = l + 0.5 * g * (xk * xk.transpose()) - 0.5 * g * (xk1 * xk1.transpose());
  out.distance = g / std::sqrt(2.0);
  const int n = sys.size();
  if (k > 1 && is_coalesced(sys.value(k - 1), sys.value(k))) out.simple_pair = false;
  if (k + 2 <= n && is_coalesced(sys.value(k + 1), sys.value(k + 2))) out.simple_pair = false;
  return out;
}

/// Number of Laplacian eigenvalues below tol: the count of connected components.
inline int connected_components_via_kernel(const WeightMatrix& w, double tol) {
  if (!(tol > 0.0)) throw ArgumentError("kernel tolerance must be positive");
  const EigenSystem sys = laplacian_spectrum(w);
  int count = 0;
  for (Eigen::Index i = 0; i < sys.values.size(); ++i)
    if (sys.values[i] < tol) ++count;
  return count;
}

}  // namespace specstab
