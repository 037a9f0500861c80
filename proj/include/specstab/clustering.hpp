#pragma once

// Unnormalized spectral clustering: embed vertices by eigenvectors of the
// smallest Laplacian eigenvalues, then cluster the embedded rows with k-means.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "specstab/errors.hpp"
#include "specstab/graph.hpp"
#include "specstab/spectrum.hpp"

namespace specstab {

struct ClusterAssignment {
  std::vector<int> labels;
  int k = 0;
  double inertia = 0.0;
  int iterations = 0;
  std::vector<double> inertia_history;  // of the winning restart, one entry per Lloyd pass
};

/// Row i is the embedding r_i of vertex i.
struct Embedding {
  Matrix rows;
  std::vector<int> eigen_indices;  // 1-based indices of the eigenvectors used
};

struct EmbedOptions {
  // Use eigenvectors of the k smallest *nonzero* eigenvalues instead of the k
  // smallest overall. Off by default (conventional spectral clustering).
  bool skip_zero_eigenvalues = false;
  double zero_tol = 1e-10;
};

inline Embedding spectral_embed(const WeightMatrix& w, int k, const EmbedOptions& opts = {}) {
  const int n = w.n();
  if (k < 1 || k > n)
    throw ArgumentError("embedding dimension k = " + std::to_string(k) + " must satisfy 1 <= k <= n = " + std::to_string(n));
  const EigenSystem sys = laplacian_spectrum(w);
  int first = 1;
  if (opts.skip_zero_eigenvalues) {
    const double scale = std::max(1.0, std::abs(sys.values[n - 1]));
    while (first <= n && sys.value(first) <= opts.zero_tol * scale) ++first;
    if (first + k - 1 > n) throw ArgumentError("not enough nonzero eigenvalues for the requested embedding");
  }
  Embedding emb;
  emb.rows = sys.vectors.middleCols(first - 1, k);
  for (int c = 0; c < k; ++c) emb.eigen_indices.push_back(first + c);
  return emb;
}

struct KMeansOptions {
  int restarts = 20;
  int max_iter = 100;
};

namespace detail {

inline double squared_distance(const Matrix& pts, Eigen::Index i, const Matrix& centers, Eigen::Index c) {
  return (pts.row(i) - centers.row(c)).squaredNorm();
}

/// One Lloyd run from k-means++ seeding. Ties go to the lowest center index.
inline ClusterAssignment lloyd_run(const Matrix& pts, int k, std::mt19937_64& rng, const KMeansOptions& opts) {
  const Eigen::Index n = pts.rows();
  Matrix centers(k, pts.cols());

  // k-means++ seeding
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centers.row(0) = pts.row(pick(rng));
  Vector d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = squared_distance(pts, i, centers, 0);
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      chosen = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        target -= d2[i];
        if (target < 0.0 && d2[i] > 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    centers.row(c) = pts.row(chosen);
    for (Eigen::Index i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(pts, i, centers, c));
  }

  ClusterAssignment out;
  out.k = k;
  out.labels.assign(static_cast<std::size_t>(n), -1);
  std::vector<double> dist(static_cast<std::size_t>(n), 0.0);
  for (int it = 0; it < opts.max_iter; ++it) {
    bool changed = false;
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = squared_distance(pts, i, centers, c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      auto& lbl = out.labels[static_cast<std::size_t>(i)];
      if (lbl != best) changed = true;
      lbl = best;
      dist[static_cast<std::size_t>(i)] = best_d;
      inertia += best_d;
    }

    // Empty-cluster repair: move the empty center to the point farthest from its centroid.
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int l : out.labels) ++counts[static_cast<std::size_t>(l)];
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] != 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < dist.size(); ++i) {
        if (counts[static_cast<std::size_t>(out.labels[i])] > 1 && dist[i] > far_d) {
          far_d = dist[i];
          far = i;
        }
      }
      --counts[static_cast<std::size_t>(out.labels[far])];
      ++counts[static_cast<std::size_t>(c)];
      inertia -= dist[far];
      out.labels[far] = c;
      dist[far] = 0.0;
      centers.row(c) = pts.row(static_cast<Eigen::Index>(far));
      changed = true;
    }

    out.inertia_history.push_back(inertia);
    out.inertia = inertia;
    out.iterations = it + 1;
    if (!changed && it > 0) break;

    centers.setZero();
    for (Eigen::Index i = 0; i < n; ++i) centers.row(out.labels[static_cast<std::size_t>(i)]) += pts.row(i);
    for (int c = 0; c < k; ++c) centers.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
  }

  // Final inertia against the final centers.
  out.inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) out.inertia += squared_distance(pts, i, centers, out.labels[static_cast<std::size_t>(i)]);
  if (out.inertia_history.empty() || out.inertia < out.inertia_history.back()) out.inertia_history.push_back(out.inertia);
  return out;
}

}  // namespace detail

/// Lloyd's k-means with k-means++ seeding; best of opts.restarts runs by
/// inertia, ties to the lowest restart index. Deterministic given the seed.
inline ClusterAssignment kmeans(const Matrix& points, int k, std::uint64_t seed, const KMeansOptions& opts = {}) {
  if (points.rows() == 0) throw ArgumentError("k-means on an empty point set");
  if (k < 1 || k > points.rows())
    throw ArgumentError("k-means with k = " + std::to_string(k) + " for " + std::to_string(points.rows()) + " points");
  if (opts.restarts < 1 || opts.max_iter < 1) throw ArgumentError("k-means needs at least one restart and iteration");
  std::mt19937_64 rng(seed);
  ClusterAssignment best;
  for (int r = 0; r < opts.restarts; ++r) {
    ClusterAssignment run = detail::lloyd_run(points, k, rng, opts);
    if (r == 0 || run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

inline ClusterAssignment spectral_cluster(const WeightMatrix& w, int k, std::uint64_t seed,
                                          const EmbedOptions& embed = {}, const KMeansOptions& km = {}) {
  const Embedding emb = spectral_embed(w, k, embed);
  return kmeans(emb.rows, k, seed, km);
}

}  // namespace specstab
