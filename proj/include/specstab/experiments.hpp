#pragma once

// Generators and harnesses: stochastic block models, the reduced chain model,
// random-centers data with Gaussian similarities, and the k_opt sweeps and
// frequency tables built on them.
//
// Randomness: every generator takes a 64-bit seed and draws from mt19937_64.
// Harnesses derive the seed of sample i as stream_seed(base, i), a SplitMix64
// hash of (base, i), so each sample is reproducible on its own and results do
// not depend on the evaluation order or thread count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "specstab/errors.hpp"
#include "specstab/graph.hpp"
#include "specstab/parallel.hpp"
#include "specstab/sda_outer.hpp"
#include "specstab/spectrum.hpp"

namespace specstab {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of stream `index` derived from `base`.
inline std::uint64_t stream_seed(std::uint64_t base, std::uint64_t index) {
  return splitmix64(splitmix64(base) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

// ---------------------------------------------------------------------------
// Stochastic block model

struct SbmSpec {
  std::vector<int> community_sizes;
  Matrix P;  // symmetric r x r edge probabilities
  std::uint64_t seed = 0;

  void validate() const {
    const auto r = static_cast<Eigen::Index>(community_sizes.size());
    if (r == 0) throw ArgumentError("SBM needs at least one community");
    for (int s : community_sizes)
      if (s < 1) throw ArgumentError("SBM community sizes must be positive");
    if (P.rows() != r || P.cols() != r) throw DimensionError("SBM probability matrix must be r x r");
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < r; ++j) {
        if (!(P(i, j) >= 0.0 && P(i, j) <= 1.0)) throw ArgumentError("SBM probabilities must lie in [0, 1]");
        if (P(i, j) != P(j, i)) throw ArgumentError("SBM probability matrix must be symmetric");
      }
  }
};

/// Community label of every vertex; communities occupy consecutive index ranges.
inline std::vector<int> sbm_labels(const SbmSpec& spec) {
  std::vector<int> labels;
  for (std::size_t c = 0; c < spec.community_sizes.size(); ++c)
    labels.insert(labels.end(), static_cast<std::size_t>(spec.community_sizes[c]), static_cast<int>(c));
  return labels;
}

/// 0/1 adjacency with P(i ~ j) = p_{c(i) c(j)}, pairs drawn in row-major upper-triangle order.
inline WeightMatrix sample_sbm(const SbmSpec& spec) {
  spec.validate();
  const std::vector<int> label = sbm_labels(spec);
  const int n = static_cast<int>(label.size());
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (u(rng) < spec.P(label[static_cast<std::size_t>(i)], label[static_cast<std::size_t>(j)])) edges.push_back({i, j});
  const std::size_t m = edges.size();
  return WeightMatrix(make_pattern(n, std::move(edges)), Vector::Ones(static_cast<Eigen::Index>(m)));
}

/// Coupling mu_k = (r - k)/(r - 1) mu1 between consecutive communities k, k+1 (1-based k).
inline double chain_coupling(int r, int k, double mu1) {
  return static_cast<double>(r - k) / static_cast<double>(r - 1) * mu1;
}

/// Full chain SBM: p_ii = 1, p_{k,k+1} = mu_k / 100, all other probabilities zero.
inline SbmSpec chain_sbm_spec(int r, int community_size, double mu1, std::uint64_t seed) {
  if (r < 2) throw ArgumentError("chain model needs r >= 2");
  SbmSpec spec;
  spec.community_sizes.assign(static_cast<std::size_t>(r), community_size);
  spec.P = Matrix::Identity(r, r);
  for (int k = 1; k < r; ++k) {
    const double p = std::clamp(chain_coupling(r, k, mu1) / 100.0, 0.0, 1.0);
    spec.P(k - 1, k) = spec.P(k, k - 1) = p;
  }
  spec.seed = seed;
  return spec;
}

/// Reduced chain model on 2r vertices: vertices 2k, 2k+1 (0-based) joined with
/// weight community_size, consecutive pairs coupled by mu_k I_2.
inline WeightMatrix reduced_chain_model(int r, double mu1, double community_size = 100.0) {
  if (r < 2) throw ArgumentError("chain model needs r >= 2");
  if (!(mu1 >= 0.0)) throw ArgumentError("mu1 must be nonnegative");
  if (!(community_size > 0.0)) throw ArgumentError("community size must be positive");
  std::vector<Edge> edges;
  std::vector<double> values;
  for (int p = 0; p < r; ++p) {
    edges.push_back({2 * p, 2 * p + 1});
    values.push_back(community_size);
  }
  for (int k = 1; k < r; ++k) {
    const double mu = chain_coupling(r, k, mu1);
    if (mu == 0.0) continue;
    edges.push_back({2 * (k - 1), 2 * k});
    values.push_back(mu);
    edges.push_back({2 * (k - 1) + 1, 2 * k + 1});
    values.push_back(mu);
  }
  auto pattern = make_pattern(2 * r, edges);
  Vector w(static_cast<Eigen::Index>(values.size()));
  for (std::size_t e = 0; e < edges.size(); ++e)
    w[static_cast<Eigen::Index>(*pattern->find(edges[e].i, edges[e].j))] = values[e];
  return WeightMatrix(std::move(pattern), std::move(w));
}

// ---------------------------------------------------------------------------
// Random centers

struct CentersSpec {
  std::vector<double> centers{0.0, 8.0, 16.0, 24.0, 32.0, 40.0};
  int n = 120;
  double alpha = 0.25;
  double weight_tol = 1e-4;
  std::uint64_t seed = 0;

  void validate() const {
    if (centers.empty()) throw ArgumentError("at least one center is required");
    if (n < static_cast<int>(centers.size())) throw ArgumentError("sample count n must be at least the number of centers");
    if (!(alpha > 0.0)) throw ArgumentError("alpha must be positive");
    if (!(weight_tol > 0.0 && weight_tol < 1.0)) throw ArgumentError("weight_tol must lie in (0, 1)");
  }
};

/// n draws: a uniform group j, then x ~ N(m_j, 1).
inline std::vector<double> sample_centers(const CentersSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<std::size_t> group(0, spec.centers.size() - 1);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> x(static_cast<std::size_t>(spec.n));
  for (auto& v : x) {
    const double m = spec.centers[group(rng)];
    v = m + noise(rng);
  }
  return x;
}

/// w_ij = exp(-alpha (x_i - x_j)^2) when that is >= weight_tol, else no edge.
inline WeightMatrix gaussian_similarity(const std::vector<double>& points, double alpha, double weight_tol = 1e-4) {
  if (!(alpha > 0.0)) throw ArgumentError("alpha must be positive");
  if (!(weight_tol >= 0.0 && weight_tol < 1.0)) throw ArgumentError("weight_tol must lie in [0, 1)");
  const int n = static_cast<int>(points.size());
  std::vector<Edge> edges;
  std::vector<double> values;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double d = points[static_cast<std::size_t>(i)] - points[static_cast<std::size_t>(j)];
      const double f = std::exp(-alpha * d * d);
      if (f >= weight_tol && f > 0.0) {
        edges.push_back({i, j});
        values.push_back(f);
      }
    }
  // edges are generated in sorted order, so values line up with the pattern
  return WeightMatrix(make_pattern(n, std::move(edges)),
                      Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size())));
}

// ---------------------------------------------------------------------------
// Sweeps and frequency tables

struct ChainSweepRow {
  double mu1 = 0.0;
  SweepResult sweep;
};

/// k_opt sweep of the reduced chain model for each mu1. Parallel over mu1.
inline std::vector<ChainSweepRow> chain_sweep(int r, double community_size, const std::vector<double>& mu1_values,
                                              int k_min, int k_max, const OuterConfig& cfg = {}, int threads = 1) {
  std::vector<ChainSweepRow> rows(mu1_values.size());
  parallel_for(static_cast<int>(rows.size()), threads, [&](int i) {
    auto& row = rows[static_cast<std::size_t>(i)];
    row.mu1 = mu1_values[static_cast<std::size_t>(i)];
    row.sweep = k_opt_sweep(reduced_chain_model(r, row.mu1, community_size), k_min, k_max, cfg, 1);
  });
  return rows;
}

struct SbmSweepRow {
  double mu1 = 0.0;
  double p1 = 0.0;  // mu1 / 100
  std::uint64_t seed = 0;
  SweepResult sweep;
};

/// Full chain SBM sweep: one sampled graph per mu1, seeded by stream_seed(seed, index).
inline std::vector<SbmSweepRow> sbm_sweep(int r, int community_size, const std::vector<double>& mu1_values, int k_min,
                                          int k_max, std::uint64_t seed, const OuterConfig& cfg = {}, int threads = 1) {
  std::vector<SbmSweepRow> rows(mu1_values.size());
  parallel_for(static_cast<int>(rows.size()), threads, [&](int i) {
    auto& row = rows[static_cast<std::size_t>(i)];
    row.mu1 = mu1_values[static_cast<std::size_t>(i)];
    row.p1 = row.mu1 / 100.0;
    row.seed = stream_seed(seed, static_cast<std::uint64_t>(i));
    const WeightMatrix w = sample_sbm(chain_sbm_spec(r, community_size, row.mu1, row.seed));
    row.sweep = k_opt_sweep(w, k_min, k_max, cfg, 1);
  });
  return rows;
}

struct FrequencySample {
  std::uint64_t seed = 0;
  int k_opt_gap = 0;
  std::optional<int> k_opt_delta;  // empty when some delta_k could not be computed
  int infeasible = 0;              // rows whose penalty schedule was exhausted
  std::string error;
};

struct FrequencyTable {
  int k_min = 0;
  int k_max = 0;
  int samples = 0;
  int gap_successes = 0;
  int delta_successes = 0;
  int delta_failures = 0;
  std::vector<int> gap_counts;    // index k - k_min
  std::vector<int> delta_counts;
  std::vector<FrequencySample> per_sample;

  double gap_percent(int k) const {
    return gap_successes ? 100.0 * gap_counts[static_cast<std::size_t>(k - k_min)] / gap_successes : 0.0;
  }
  double delta_percent(int k) const {
    return delta_successes ? 100.0 * delta_counts[static_cast<std::size_t>(k - k_min)] / delta_successes : 0.0;
  }
};

/// For each sample, draws points from stream_seed(spec.seed, i), builds the
/// Gaussian similarity graph and records k_opt by gap and by delta over
/// [k_min, k_max]. Samples with an unsolved delta_k are excluded from the delta
/// percentages and counted in delta_failures.
inline FrequencyTable frequency_experiment(const CentersSpec& spec, int samples, int k_min, int k_max,
                                           const OuterConfig& cfg = {}, int threads = 1) {
  spec.validate();
  if (samples < 1) throw ArgumentError("at least one sample is required");
  if (k_min < 2 || k_max > spec.n - 1 || k_min > k_max)
    throw ArgumentError("k range must lie within [2, n - 1]");
  FrequencyTable t;
  t.k_min = k_min;
  t.k_max = k_max;
  t.samples = samples;
  t.per_sample.resize(static_cast<std::size_t>(samples));
  parallel_for(samples, threads, [&](int i) {
    FrequencySample& s = t.per_sample[static_cast<std::size_t>(i)];
    CentersSpec sc = spec;
    sc.seed = stream_seed(spec.seed, static_cast<std::uint64_t>(i));
    s.seed = sc.seed;
    const WeightMatrix w = gaussian_similarity(sample_centers(sc), sc.alpha, sc.weight_tol);
    const SweepResult sw = k_opt_sweep(w, k_min, k_max, cfg, 1);
    s.k_opt_gap = sw.k_opt_gap;
    bool all_solved = true;
    for (const auto& row : sw.rows) {
      if (!row.delta) {
        all_solved = false;
        if (s.error.empty()) s.error = "k = " + std::to_string(row.k) + ": " + row.error;
      } else if (!row.feasible) {
        ++s.infeasible;
      }
    }
    if (all_solved) s.k_opt_delta = sw.k_opt_delta;
  });
  const auto width = static_cast<std::size_t>(k_max - k_min + 1);
  t.gap_counts.assign(width, 0);
  t.delta_counts.assign(width, 0);
  for (const auto& s : t.per_sample) {
    ++t.gap_successes;
    ++t.gap_counts[static_cast<std::size_t>(s.k_opt_gap - k_min)];
    if (s.k_opt_delta) {
      ++t.delta_successes;
      ++t.delta_counts[static_cast<std::size_t>(*s.k_opt_delta - k_min)];
    } else {
      ++t.delta_failures;
    }
  }
  return t;
}

}  // namespace specstab
