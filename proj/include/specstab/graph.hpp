#pragma once

// Pattern-supported symmetric matrices and the graph Laplacian map.
//
// A SparsityPattern is the undirected edge set of a graph on n vertices. Matrices
// supported on it (weights W, perturbation directions E, gradients G) store one
// value per edge for the upper triangle; the lower triangle is implied by
// symmetry and every off-pattern entry, including the diagonal, is zero.
//
// The Laplacian of a pattern matrix A is L(A) = diag(A 1) - A. Its adjoint with
// respect to the trace inner product maps a dense V to the pattern matrix
//   L*(V) = P(diagvec(V) 1^T - V),
// where P is the symmetric projection onto the pattern, (a_ij + a_ji)/2 on edges.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "specstab/errors.hpp"

namespace specstab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Unordered vertex pair stored with i < j.
struct Edge {
  int i = 0;
  int j = 0;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

class SparsityPattern {
 public:
  SparsityPattern() = default;

  /// Builds a pattern on n vertices. Pairs may be given in either orientation;
  /// self-loops, duplicates and out-of-range indices are rejected.
  SparsityPattern(int n, std::vector<Edge> edges) : n_(n), edges_(std::move(edges)) {
    if (n < 0) throw ArgumentError("vertex count must be non-negative");
    for (auto& e : edges_) {
      if (e.i > e.j) std::swap(e.i, e.j);
      if (e.i < 0 || e.j >= n_)
        throw DimensionError("edge (" + std::to_string(e.i) + "," + std::to_string(e.j) +
                             ") out of range for n = " + std::to_string(n_));
      if (e.i == e.j) throw ArgumentError("self-loop at vertex " + std::to_string(e.i));
    }
    std::sort(edges_.begin(), edges_.end());
    if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end())
      throw ArgumentError("duplicate edge in pattern");
  }

  /// All pairs i < j, i.e. the complete graph.
  static SparsityPattern complete(int n) {
    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(std::max(n - 1, 0)) / 2);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) edges.push_back({i, j});
    return SparsityPattern(n, std::move(edges));
  }

  int size() const { return n_; }
  std::size_t edge_count() const { return edges_.size(); }
  std::span<const Edge> edges() const { return edges_; }
  const Edge& edge(std::size_t idx) const { return edges_[idx]; }

  /// Position of the pair (i, j) in the edge array, if present.
  std::optional<std::size_t> find(int i, int j) const {
    if (i > j) std::swap(i, j);
    const Edge key{i, j};
    auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
    if (it == edges_.end() || *it != key) return std::nullopt;
    return static_cast<std::size_t>(it - edges_.begin());
  }

  friend bool operator==(const SparsityPattern&, const SparsityPattern&) = default;

 private:
  int n_ = 0;
  std::vector<Edge> edges_;
};

using PatternPtr = std::shared_ptr<const SparsityPattern>;

inline PatternPtr make_pattern(int n, std::vector<Edge> edges) {
  return std::make_shared<const SparsityPattern>(n, std::move(edges));
}

/// Symmetric real matrix supported on a pattern; values may have any sign.
class PatternMatrix {
 public:
  PatternMatrix() : pattern_(std::make_shared<const SparsityPattern>()) {}

  explicit PatternMatrix(PatternPtr pattern)
      : pattern_(std::move(pattern)), values_(Vector::Zero(static_cast<Eigen::Index>(pattern_->edge_count()))) {}

  PatternMatrix(PatternPtr pattern, Vector values) : pattern_(std::move(pattern)), values_(std::move(values)) {
    if (static_cast<std::size_t>(values_.size()) != pattern_->edge_count())
      throw DimensionError("value count " + std::to_string(values_.size()) + " does not match edge count " +
                           std::to_string(pattern_->edge_count()));
  }

  static PatternMatrix zero(PatternPtr pattern) { return PatternMatrix(std::move(pattern)); }

  const PatternPtr& pattern_ptr() const { return pattern_; }
  const SparsityPattern& pattern() const { return *pattern_; }
  int n() const { return pattern_->size(); }
  const Vector& values() const { return values_; }
  Vector& values() { return values_; }
  double value(std::size_t edge_idx) const { return values_[static_cast<Eigen::Index>(edge_idx)]; }

  /// Entry (i, j) of the implied dense matrix.
  double operator()(int i, int j) const {
    auto idx = pattern_->find(i, j);
    return idx ? values_[static_cast<Eigen::Index>(*idx)] : 0.0;
  }

  Matrix to_dense() const {
    Matrix a = Matrix::Zero(n(), n());
    for (std::size_t e = 0; e < pattern_->edge_count(); ++e) {
      const auto [i, j] = pattern_->edge(e);
      a(i, j) = a(j, i) = values_[static_cast<Eigen::Index>(e)];
    }
    return a;
  }

  bool same_pattern(const PatternMatrix& other) const {
    return pattern_ == other.pattern_ || *pattern_ == *other.pattern_;
  }

  PatternMatrix& operator+=(const PatternMatrix& o) {
    check_same(o);
    values_ += o.values_;
    return *this;
  }
  PatternMatrix& operator-=(const PatternMatrix& o) {
    check_same(o);
    values_ -= o.values_;
    return *this;
  }
  PatternMatrix& operator*=(double s) {
    values_ *= s;
    return *this;
  }

  friend PatternMatrix operator+(PatternMatrix a, const PatternMatrix& b) { return a += b; }
  friend PatternMatrix operator-(PatternMatrix a, const PatternMatrix& b) { return a -= b; }
  friend PatternMatrix operator*(double s, PatternMatrix a) { return a *= s; }
  friend PatternMatrix operator*(PatternMatrix a, double s) { return a *= s; }
  friend PatternMatrix operator-(PatternMatrix a) { return a *= -1.0; }

 private:
  void check_same(const PatternMatrix& o) const {
    if (!same_pattern(o)) throw DimensionError("pattern matrices live on different patterns");
  }

  PatternPtr pattern_;
  Vector values_;
};

/// Nonnegative symmetric weights on a pattern: the weight matrix W of a graph.
class WeightMatrix {
 public:
  WeightMatrix() = default;

  WeightMatrix(PatternPtr pattern, Vector weights) : m_(std::move(pattern), std::move(weights)) { validate(); }

  explicit WeightMatrix(PatternMatrix m) : m_(std::move(m)) { validate(); }

  /// Pattern = strictly positive upper-triangle entries of a dense symmetric
  /// matrix. The diagonal is ignored: self-edges do not change the Laplacian.
  static WeightMatrix from_dense(const Matrix& a, double symmetry_tol = 1e-12) {
    if (a.rows() != a.cols()) throw DimensionError("weight matrix must be square");
    const int n = static_cast<int>(a.rows());
    std::vector<Edge> edges;
    std::vector<double> w;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double scale = std::max({1.0, std::abs(a(i, j)), std::abs(a(j, i))});
        if (std::abs(a(i, j) - a(j, i)) > symmetry_tol * scale)
          throw ArgumentError("weight matrix is not symmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
        const double v = 0.5 * (a(i, j) + a(j, i));
        if (v != 0.0) {
          edges.push_back({i, j});
          w.push_back(v);
        }
      }
    }
    Vector values = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
    return WeightMatrix(make_pattern(n, std::move(edges)), std::move(values));
  }

  const PatternMatrix& matrix() const { return m_; }
  const PatternPtr& pattern_ptr() const { return m_.pattern_ptr(); }
  const SparsityPattern& pattern() const { return m_.pattern(); }
  const Vector& weights() const { return m_.values(); }
  int n() const { return m_.n(); }
  Matrix to_dense() const { return m_.to_dense(); }

  /// d = W 1.
  Vector degrees() const {
    Vector d = Vector::Zero(n());
    const auto& p = pattern();
    for (std::size_t e = 0; e < p.edge_count(); ++e) {
      const double w = m_.value(e);
      d[p.edge(e).i] += w;
      d[p.edge(e).j] += w;
    }
    return d;
  }

  /// W + eps E as a pattern matrix; the result may have negative entries.
  PatternMatrix perturbed(double eps, const PatternMatrix& e) const {
    if (!m_.same_pattern(e)) throw DimensionError("perturbation is not on the weight pattern");
    return PatternMatrix(m_.pattern_ptr(), m_.values() + eps * e.values());
  }

 private:
  void validate() const {
    for (Eigen::Index e = 0; e < m_.values().size(); ++e) {
      const double w = m_.values()[e];
      if (!std::isfinite(w)) throw NumericalError("non-finite weight");
      if (w < 0.0) throw ArgumentError("negative weight " + std::to_string(w));
    }
  }

  PatternMatrix m_;
};

/// L(A) = diag(A 1) - A, materialized densely.
inline Matrix laplacian(const PatternMatrix& a) {
  const int n = a.n();
  Matrix l = Matrix::Zero(n, n);
  const auto& p = a.pattern();
  for (std::size_t e = 0; e < p.edge_count(); ++e) {
    const auto [i, j] = p.edge(e);
    const double w = a.value(e);
    l(i, j) -= w;
    l(j, i) -= w;
    l(i, i) += w;
    l(j, j) += w;
  }
  return l;
}

inline Matrix laplacian(const WeightMatrix& w) { return laplacian(w.matrix()); }

/// y = L(A) x without forming L(A); for iterative eigensolvers.
inline Vector laplacian_matvec(const PatternMatrix& a, const Vector& x) {
  if (x.size() != a.n()) throw DimensionError("matvec dimension mismatch");
  Vector y = Vector::Zero(a.n());
  const auto& p = a.pattern();
  for (std::size_t e = 0; e < p.edge_count(); ++e) {
    const auto [i, j] = p.edge(e);
    const double t = a.value(e) * (x[i] - x[j]);
    y[i] += t;
    y[j] -= t;
  }
  return y;
}

/// Trace inner product <A, B> = trace(A^T B) of dense matrices.
inline double frobenius_inner(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("inner product shape mismatch");
  return a.cwiseProduct(b).sum();
}

/// Trace inner product of two pattern matrices: 2 * sum over edges.
inline double frobenius_inner(const PatternMatrix& a, const PatternMatrix& b) {
  if (!a.same_pattern(b)) throw DimensionError("inner product of matrices on different patterns");
  return 2.0 * a.values().dot(b.values());
}

inline double frobenius_norm(const PatternMatrix& a) { return std::sqrt(2.0) * a.values().norm(); }

/// Symmetric projection onto the pattern: (a_ij + a_ji)/2 on edges, 0 elsewhere.
inline PatternMatrix project_pattern(const PatternPtr& pattern, const Matrix& a) {
  const int n = pattern->size();
  if (a.rows() != n || a.cols() != n) throw DimensionError("projection input is not n x n");
  Vector v(static_cast<Eigen::Index>(pattern->edge_count()));
  for (std::size_t e = 0; e < pattern->edge_count(); ++e) {
    const auto [i, j] = pattern->edge(e);
    v[static_cast<Eigen::Index>(e)] = 0.5 * (a(i, j) + a(j, i));
  }
  return PatternMatrix(pattern, std::move(v));
}

/// L*(V) = P(diagvec(V) 1^T - V). On an edge this is (v_ii + v_jj)/2 - (v_ij + v_ji)/2.
inline PatternMatrix laplacian_adjoint(const PatternPtr& pattern, const Matrix& v) {
  const int n = pattern->size();
  if (v.rows() != n || v.cols() != n) throw DimensionError("adjoint input is not n x n");
  Vector out(static_cast<Eigen::Index>(pattern->edge_count()));
  for (std::size_t e = 0; e < pattern->edge_count(); ++e) {
    const auto [i, j] = pattern->edge(e);
    out[static_cast<Eigen::Index>(e)] = 0.5 * (v(i, i) + v(j, j)) - 0.5 * (v(i, j) + v(j, i));
  }
  return PatternMatrix(pattern, std::move(out));
}

/// L*(x x^T), with entries (x_i - x_j)^2 / 2.
inline PatternMatrix rank_one_adjoint(const PatternPtr& pattern, const Vector& x) {
  if (x.size() != pattern->size()) throw DimensionError("vector length does not match pattern");
  Vector out(static_cast<Eigen::Index>(pattern->edge_count()));
  for (std::size_t e = 0; e < pattern->edge_count(); ++e) {
    const auto [i, j] = pattern->edge(e);
    const double d = x[i] - x[j];
    out[static_cast<Eigen::Index>(e)] = 0.5 * d * d;
  }
  return PatternMatrix(pattern, std::move(out));
}

/// L*(sym(x y^T)), with entries (x_i - x_j)(y_i - y_j) / 2.
inline PatternMatrix rank_two_adjoint(const PatternPtr& pattern, const Vector& x, const Vector& y) {
  if (x.size() != pattern->size() || y.size() != pattern->size())
    throw DimensionError("vector length does not match pattern");
  Vector out(static_cast<Eigen::Index>(pattern->edge_count()));
  for (std::size_t e = 0; e < pattern->edge_count(); ++e) {
    const auto [i, j] = pattern->edge(e);
    out[static_cast<Eigen::Index>(e)] = 0.5 * (x[i] - x[j]) * (y[i] - y[j]);
  }
  return PatternMatrix(pattern, std::move(out));
}

/// L*(L(E)) = P(d 1^T) + E with d = E 1, in O(|edges|).
inline PatternMatrix laplacian_gram(const PatternMatrix& e) {
  const auto& p = e.pattern();
  Vector d = Vector::Zero(e.n());
  for (std::size_t k = 0; k < p.edge_count(); ++k) {
    d[p.edge(k).i] += e.value(k);
    d[p.edge(k).j] += e.value(k);
  }
  Vector out(static_cast<Eigen::Index>(p.edge_count()));
  for (std::size_t k = 0; k < p.edge_count(); ++k) {
    const auto [i, j] = p.edge(k);
    out[static_cast<Eigen::Index>(k)] = 0.5 * (d[i] + d[j]) + e.value(k);
  }
  return PatternMatrix(e.pattern_ptr(), std::move(out));
}

/// ||L(E)||_F in O(|edges|): sqrt(sum d_i^2 + 2 sum e_ij^2).
inline double laplacian_norm(const PatternMatrix& e) {
  const auto& p = e.pattern();
  Vector d = Vector::Zero(e.n());
  for (std::size_t k = 0; k < p.edge_count(); ++k) {
    d[p.edge(k).i] += e.value(k);
    d[p.edge(k).j] += e.value(k);
  }
  return std::sqrt(d.squaredNorm() + 2.0 * e.values().squaredNorm());
}

}  // namespace specstab
