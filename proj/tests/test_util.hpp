#pragma once

#include <random>
#include <vector>

#include "specstab/graph.hpp"

namespace specstab::testing {

/// Random pattern on n vertices with edge probability p, always containing a
/// spanning path so the graph is connected. Weights uniform in [lo, hi].
inline WeightMatrix random_graph(int n, double p, std::mt19937_64& rng, double lo = 0.5, double hi = 2.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_real_distribution<double> wdist(lo, hi);
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (j == i + 1 || u(rng) < p) edges.push_back({i, j});
  const auto m = static_cast<Eigen::Index>(edges.size());
  Vector w(m);
  for (Eigen::Index e = 0; e < m; ++e) w[e] = wdist(rng);
  return WeightMatrix(make_pattern(n, std::move(edges)), std::move(w));
}

inline PatternMatrix random_pattern_matrix(const PatternPtr& pattern, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vector v(static_cast<Eigen::Index>(pattern->edge_count()));
  for (auto& x : v) x = g(rng);
  return PatternMatrix(pattern, std::move(v));
}

inline WeightMatrix path_graph(int n, double w = 1.0) {
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1});
  const auto m = static_cast<Eigen::Index>(edges.size());
  return WeightMatrix(make_pattern(n, std::move(edges)), Vector::Constant(m, w));
}

/// Disjoint union of complete graphs with the given sizes, unit weights.
inline WeightMatrix block_diagonal(const std::vector<int>& sizes, std::vector<int>* labels = nullptr) {
  std::vector<Edge> edges;
  int offset = 0;
  int block = 0;
  for (int s : sizes) {
    for (int i = 0; i < s; ++i) {
      if (labels) labels->push_back(block);
      for (int j = i + 1; j < s; ++j) edges.push_back({offset + i, offset + j});
    }
    offset += s;
    ++block;
  }
  const auto m = static_cast<Eigen::Index>(edges.size());
  return WeightMatrix(make_pattern(offset, std::move(edges)), Vector::Ones(m));
}

/// Same partition up to relabeling.
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j)
      if ((a[i] == a[j]) != (b[i] == b[j])) return false;
  return true;
}

}  // namespace specstab::testing
