#pragma once

// Inner iteration of the structured distance to ambiguity: for a fixed
// perturbation size eps and penalty c, minimize
//
//   F_{eps,c}(E) = lambda_{k+1}(L(W + eps E)) - lambda_k(L(W + eps E)) + c Q_eps(E),
//   Q_eps(E)     = 1/2 sum_{(i,j) in pattern, both orders} min(w_ij + eps e_ij, 0)^2,
//
// over pattern matrices E with ||L(E)||_F = 1, by the norm-constrained gradient flow
//
//   E' = -G + kappa L*(L(E)),   kappa = <G, L*(L(E))> / ||L*(L(E))||_F^2,
//
// where G = G_{eps,c}(E) is the gradient of F_{eps,c} rescaled by 1/eps:
//
//   G_{eps,c}(E) = L*(x_{k+1} x_{k+1}^T - x_k x_k^T) + c min(W + eps E, 0).
//
// The flow is discretized by projected explicit Euler steps with step-size
// control that never accepts an increase of F_{eps,c}. Near a coalescence the
// functional has a conical kink and gradient steps zig-zag; an optional
// Gauss-Newton step onto the coalescence set (accepted only if it lowers F)
// handles that regime.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "specstab/errors.hpp"
#include "specstab/graph.hpp"
#include "specstab/spectrum.hpp"

namespace specstab {

struct InnerConfig {
  double tol = 1e-9;               // stop when |F_new - F_old| / |F_new| <= tol
  double stationarity_tol = 1e-6;  // stop when ||G - kappa L*(L(E))|| <= tol * ||G||
  double h0 = 0.1;
  double h_min = 1e-8;
  int max_steps = 2000;
  int max_free_steps = 100;  // free-flow steps of a warm start before renormalizing directly
  int grow_after = 5;  // double h after this many consecutive accepted steps
  bool bb_steps = true;  // Barzilai-Borwein trial step lengths instead of doubling
  double h_max = 1e3;
  double coalescence_tol = kDefaultCoalescenceTol;
  int restarts = 1;  // extra random trajectories on cold starts; lowest F wins
  bool coalescence_projection = true;
  double projection_radius = 0.5;  // largest ||L(D)||_F of an attempted projection step
  double nonneg_tol = 1e-10;       // feasibility target of repair_feasibility
  std::uint64_t seed = 0;
  bool record_trace = false;
};

enum class InnerStatus {
  Running,
  Stationary,   // stationarity residual below tolerance
  Converged,    // relative change of F below tol
  Coalesced,    // kth pair coalesced: the goal state
  MaxSteps,
  Stalled,      // step size fell below h_min without decrease
};

inline const char* to_string(InnerStatus s) {
  switch (s) {
    case InnerStatus::Running: return "running";
    case InnerStatus::Stationary: return "stationary";
    case InnerStatus::Converged: return "converged";
    case InnerStatus::Coalesced: return "coalesced";
    case InnerStatus::MaxSteps: return "max_steps";
    case InnerStatus::Stalled: return "stalled";
  }
  return "unknown";
}

struct EigenPair {
  double lambda_k = 0.0;
  double lambda_k1 = 0.0;
  double lambda_k2 = std::numeric_limits<double>::quiet_NaN();  // lambda_{k+2}, NaN when k+1 = n
  Vector x_k;
  Vector x_k1;
};

/// One row of the per-step diagnostics trace.
struct InnerTraceRow {
  int step = 0;
  double h = 0.0;
  double F = 0.0;
  double kappa = 0.0;
  double min_entry = 0.0;
  double norm = 0.0;
  bool projection = false;
};

struct InnerState {
  PatternMatrix E;
  int k = 1;
  double eps = 0.0;
  double c = 0.0;
  double F = 0.0;        // F_{eps,c}(E)
  double gap = 0.0;      // lambda_{k+1} - lambda_k of L(W + eps E)
  double penalty = 0.0;  // Q_eps(E)
  double kappa = 0.0;
  double residual = std::numeric_limits<double>::quiet_NaN();  // ||G - kappa L*(L(E))|| / ||G||
  double min_weight = 0.0;  // smallest entry of W + eps E
  double norm = 0.0;        // ||L(E)||_F
  EigenPair pair;

  InnerStatus status = InnerStatus::Running;
  bool constrained = true;
  int steps = 0;        // accepted steps of the returned trajectory
  int total_steps = 0;  // accepted steps over all trajectories
  int rejected = 0;
  int projections = 0;
  int free_steps = 0;
  bool norm_reached = true;
  int restart_index = 0;  // 0 = primary start
  double h = 0.0;
  std::vector<InnerTraceRow> trace;

  bool coalesced(double tol) const { return is_coalesced(pair.lambda_k, pair.lambda_k1, tol); }
  bool nonnegative(double tol = 1e-10) const { return min_weight >= -tol; }
};

// ---------------------------------------------------------------------------
// Functional, penalty and gradients

/// Q_eps(E): half the sum of squared negative parts over both symmetric entries.
inline double penalty_Q(const WeightMatrix& w, double eps, const PatternMatrix& e) {
  const PatternMatrix a = w.perturbed(eps, e);
  double q = 0.0;
  for (Eigen::Index i = 0; i < a.values().size(); ++i) {
    const double v = std::min(a.values()[i], 0.0);
    q += v * v;
  }
  return q;  // 1/2 * 2 * sum over the upper triangle
}

/// min(W + eps E, 0) entrywise, as a pattern matrix.
inline PatternMatrix negative_part(const WeightMatrix& w, double eps, const PatternMatrix& e) {
  PatternMatrix a = w.perturbed(eps, e);
  a.values() = a.values().cwiseMin(0.0);
  return a;
}

namespace detail {

inline EigenPair extract_pair(const EigenSystem& sys, int k) {
  EigenPair p;
  p.lambda_k = sys.value(k);
  p.lambda_k1 = sys.value(k + 1);
  if (k + 2 <= sys.size()) p.lambda_k2 = sys.value(k + 2);
  p.x_k = sys.vector(k);
  p.x_k1 = sys.vector(k + 1);
  return p;
}

inline EigenPair perturbed_pair(const WeightMatrix& w, int k, double eps, const PatternMatrix& e) {
  check_cluster_count(k, w.n());
  return extract_pair(eig_symmetric_window(laplacian(w.perturbed(eps, e)), k, std::min(k + 2, w.n())), k);
}

/// L*(y y^T - x x^T) from an eigenpair.
inline PatternMatrix free_gradient(const PatternPtr& pattern, const EigenPair& p) {
  PatternMatrix g = rank_one_adjoint(pattern, p.x_k1);
  g -= rank_one_adjoint(pattern, p.x_k);
  return g;
}

}  // namespace detail

/// F_eps(E) = lambda_{k+1} - lambda_k of L(W + eps E).
inline double functional_F(const WeightMatrix& w, int k, double eps, const PatternMatrix& e) {
  const EigenPair p = detail::perturbed_pair(w, k, eps, e);
  return p.lambda_k1 - p.lambda_k;
}

/// G_eps(E) = L*(x_{k+1} x_{k+1}^T - x_k x_k^T); (1/eps) dF/dt = <G_eps(E), dE/dt>.
inline PatternMatrix gradient_G(const WeightMatrix& w, int k, double eps, const PatternMatrix& e,
                                double coalescence_tol = kDefaultCoalescenceTol) {
  const EigenPair p = detail::perturbed_pair(w, k, eps, e);
  if (is_coalesced(p.lambda_k, p.lambda_k1, coalescence_tol))
    throw CoalescedPair("eigenvalues " + std::to_string(k) + " and " + std::to_string(k + 1) +
                        " coalesce; the gradient is undefined");
  return detail::free_gradient(e.pattern_ptr(), p);
}

/// G_{eps,c}(E) = G_eps(E) + c min(W + eps E, 0).
inline PatternMatrix penalized_gradient(const WeightMatrix& w, int k, double eps, double c, const PatternMatrix& e,
                                        double coalescence_tol = kDefaultCoalescenceTol) {
  PatternMatrix g = gradient_G(w, k, eps, e, coalescence_tol);
  if (c != 0.0) g += c * negative_part(w, eps, e);
  return g;
}

/// Lagrange multiplier kappa = <G, L*(L(E))> / ||L*(L(E))||_F^2 keeping ||L(E)||_F fixed.
inline double multiplier_kappa(const PatternMatrix& g, const PatternMatrix& e) {
  const PatternMatrix m = laplacian_gram(e);
  const double mm = frobenius_inner(m, m);
  if (std::sqrt(mm) < 1e-14) throw DegenerateConstraint("L*(L(E)) vanishes; ||L(E)||_F is not 1");
  return frobenius_inner(g, m) / mm;
}

// ---------------------------------------------------------------------------
// State evaluation and single steps

/// Evaluates F_{eps,c} and the eigen data at E (E is used as given, not normalized).
inline InnerState evaluate_state(const WeightMatrix& w, int k, double eps, double c, PatternMatrix e) {
  if (!w.matrix().same_pattern(e)) throw DimensionError("perturbation is not on the weight pattern");
  InnerState s;
  s.k = k;
  s.eps = eps;
  s.c = c;
  s.pair = detail::perturbed_pair(w, k, eps, e);
  s.gap = s.pair.lambda_k1 - s.pair.lambda_k;
  s.penalty = penalty_Q(w, eps, e);
  s.F = s.gap + c * s.penalty;
  const PatternMatrix a = w.perturbed(eps, e);
  s.min_weight = a.values().size() ? a.values().minCoeff() : 0.0;
  s.norm = laplacian_norm(e);
  s.E = std::move(e);
  return s;
}

/// Gradient of F_{eps,c} at an evaluated state, from its stored eigenvectors.
inline PatternMatrix state_gradient(const WeightMatrix& w, const InnerState& s) {
  PatternMatrix g = detail::free_gradient(s.E.pattern_ptr(), s.pair);
  if (s.c != 0.0) g += s.c * negative_part(w, s.eps, s.E);
  return g;
}

struct FlowDirection {
  PatternMatrix gradient;  // G_{eps,c}(E)
  PatternMatrix gram;      // L*(L(E))
  PatternMatrix direction; // -G + kappa L*(L(E))
  double kappa = 0.0;
  double residual = 0.0;   // ||direction|| / ||G||
};

inline FlowDirection flow_direction(const WeightMatrix& w, const InnerState& s) {
  FlowDirection d;
  d.gradient = state_gradient(w, s);
  d.gram = laplacian_gram(s.E);
  const double mm = frobenius_inner(d.gram, d.gram);
  if (std::sqrt(mm) < 1e-14) throw DegenerateConstraint("L*(L(E)) vanishes; ||L(E)||_F is not 1");
  d.kappa = frobenius_inner(d.gradient, d.gram) / mm;
  d.direction = d.kappa * d.gram - d.gradient;
  const double gn = frobenius_norm(d.gradient);
  d.residual = gn > 0.0 ? frobenius_norm(d.direction) / gn : 0.0;
  return d;
}

/// Normalizes E so that ||L(E)||_F = 1.
inline PatternMatrix normalize_direction(PatternMatrix e) {
  const double nrm = laplacian_norm(e);
  if (!(nrm > 0.0) || !std::isfinite(nrm)) throw DegenerateConstraint("cannot normalize E with L(E) = 0");
  e *= 1.0 / nrm;
  return e;
}

/// One projected explicit Euler step of size h: E + h(-G + kappa L*(L(E))), renormalized.
inline InnerState euler_step(const WeightMatrix& w, const InnerState& s, double h) {
  const FlowDirection d = flow_direction(w, s);
  PatternMatrix e = s.E + h * d.direction;
  return evaluate_state(w, s.k, s.eps, s.c, normalize_direction(std::move(e)));
}

namespace detail {

/// Gauss-Newton step onto the coalescence set {lambda_k = lambda_{k+1}}, tangent to
/// the norm constraint: the smallest D with <G0, D> = -gap/eps, <H, D> = 0 and
/// <L*(L(E)), D> = 0, where G0 = L*(yy^T - xx^T) and H = L*(sym(x y^T)). Both
/// linear conditions make the 2x2 block of L(W + eps(E + D)) on span{x, y} scalar.
inline std::optional<PatternMatrix> coalescence_step(const InnerState& s, const PatternMatrix& gram) {
  const auto& pat = s.E.pattern_ptr();
  const PatternMatrix g0 = free_gradient(pat, s.pair);
  const PatternMatrix h = rank_two_adjoint(pat, s.pair.x_k, s.pair.x_k1);
  const PatternMatrix* basis[3] = {&g0, &h, &gram};
  Eigen::Matrix3d gm;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) gm(a, b) = frobenius_inner(*basis[a], *basis[b]);
  const Eigen::Vector3d rhs(-s.gap / s.eps, 0.0, 0.0);
  Eigen::CompleteOrthogonalDecomposition<Eigen::Matrix3d> cod(gm);
  if (cod.rank() < 2) return std::nullopt;
  const Eigen::Vector3d alpha = cod.solve(rhs);
  if (!alpha.allFinite()) return std::nullopt;
  PatternMatrix d = alpha[0] * g0;
  d += alpha[1] * h;
  d += alpha[2] * gram;
  return d;
}

/// Up to kProjectionChain Gauss-Newton steps; intermediate iterates may raise F
/// (the coalescence set can meet the unit sphere almost tangentially, where a
/// single step overshoots), only the best end point is returned, and only if it
/// lowers F.
inline constexpr int kProjectionChain = 8;

inline std::optional<InnerState> projection_chain(const WeightMatrix& w, const InnerState& s,
                                                  const PatternMatrix& gram, const InnerConfig& cfg) {
  std::optional<InnerState> best;
  InnerState cur = s;
  PatternMatrix m = gram;
  for (int it = 0; it < kProjectionChain; ++it) {
    const std::optional<PatternMatrix> step = coalescence_step(cur, m);
    if (!step || laplacian_norm(*step) > cfg.projection_radius) break;
    InnerState cand = evaluate_state(w, s.k, s.eps, s.c, normalize_direction(cur.E + *step));
    if (!std::isfinite(cand.F)) break;
    if (cand.F < (best ? best->F : s.F)) best = cand;
    if (cand.coalesced(cfg.coalescence_tol)) break;
    cur = std::move(cand);
    m = laplacian_gram(cur.E);
  }
  return best;
}

/// Feasibility repair of a coalesced state with negative entries of W + eps E,
/// carried out on the perturbation P = eps E with its size left free (at a
/// stationary point the norm condition is dependent on the coalescence
/// conditions, so no first-order repair exists at fixed eps). Each damped
/// Gauss-Newton step moves the negative entries of W + P a fraction theta
/// towards zero while the remaining entries take the smallest correction keeping
/// the kth pair coalesced. The result, rescaled to ||L(E)||_F = 1, coalesces at
/// eps' = ||L(P)||_F and is an upper bound of the constrained distance once
/// W + eps' E >= 0. Returns nullopt if that is not reached.
inline constexpr int kRepairSteps = 60;

inline std::optional<PatternMatrix> repair_step(const WeightMatrix& w, const InnerState& cur, double theta) {
  const auto& pat = cur.E.pattern_ptr();
  const Eigen::Index m = cur.E.values().size();
  const Vector a = w.perturbed(cur.eps, cur.E).values();
  std::vector<bool> pinned(static_cast<std::size_t>(m), false);
  PatternMatrix dv(pat, Vector::Zero(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    if (a[i] < 0.0) {
      pinned[static_cast<std::size_t>(i)] = true;
      dv.values()[i] = -theta * a[i];
    }
  }
  const PatternMatrix g0 = free_gradient(pat, cur.pair);
  const PatternMatrix h = rank_two_adjoint(pat, cur.pair.x_k, cur.pair.x_k1);
  const PatternMatrix* basis[2] = {&g0, &h};
  PatternMatrix free_basis[2] = {g0, h};
  for (auto& fb : free_basis)
    for (Eigen::Index i = 0; i < m; ++i)
      if (pinned[static_cast<std::size_t>(i)]) fb.values()[i] = 0.0;
  const Eigen::Vector2d target(-cur.gap, 0.0);
  Eigen::Matrix2d gm;
  Eigen::Vector2d rhs;
  for (int r = 0; r < 2; ++r) {
    rhs[r] = target[r] - frobenius_inner(*basis[r], dv);
    for (int c = 0; c < 2; ++c) gm(r, c) = frobenius_inner(*basis[r], free_basis[c]);
  }
  // Rank deficient when the pair lives on pinned entries only; the minimum-norm
  // least-squares correction still lets the pinned step go ahead.
  const Eigen::Vector2d alpha = Eigen::CompleteOrthogonalDecomposition<Eigen::Matrix2d>(gm).solve(rhs);
  if (!alpha.allFinite()) return std::nullopt;
  PatternMatrix d = std::move(dv);
  for (int c = 0; c < 2; ++c) d += alpha[c] * free_basis[c];
  return d;
}

inline std::optional<InnerState> repair_feasibility(const WeightMatrix& w, const InnerState& s, const InnerConfig& cfg) {
  // States below carry eps = 1 and E = P.
  InnerState cur = evaluate_state(w, s.k, 1.0, s.c, s.eps * s.E);
  const double radius = cfg.projection_radius * s.eps;
  double travelled = 0.0;
  double theta = 1.0;
  for (int it = 0; it < kRepairSteps && theta > 1e-6; ++it) {
    if (cur.min_weight >= -cfg.nonneg_tol && cur.coalesced(cfg.coalescence_tol)) break;
    const std::optional<PatternMatrix> d = repair_step(w, cur, theta);
    if (!d || travelled + laplacian_norm(*d) > radius) {
      theta *= 0.5;
      continue;
    }
    InnerState cand = evaluate_state(w, cur.k, 1.0, cur.c, cur.E + *d);
    double moved = laplacian_norm(*d);
    // Second-order drift off the coalescence set, removed with theta = 0 steps.
    for (int j = 0; j < kProjectionChain && std::isfinite(cand.F) && !cand.coalesced(cfg.coalescence_tol); ++j) {
      const std::optional<PatternMatrix> back = repair_step(w, cand, 0.0);
      if (!back) break;
      moved += laplacian_norm(*back);
      cand = evaluate_state(w, cand.k, 1.0, cand.c, cand.E + *back);
    }
    if (!std::isfinite(cand.F) || !cand.coalesced(cfg.coalescence_tol) || !(cand.penalty < cur.penalty)) {
      theta *= 0.5;
      continue;
    }
    travelled += moved;
    cur = std::move(cand);
    theta = std::min(1.0, 2.0 * theta);
  }
  if (!(cur.min_weight >= -cfg.nonneg_tol) || !cur.coalesced(cfg.coalescence_tol)) return std::nullopt;
  const double eps = laplacian_norm(cur.E);
  InnerState out = evaluate_state(w, s.k, eps, s.c, (1.0 / eps) * cur.E);
  out.status = InnerStatus::Coalesced;
  out.kappa = s.kappa;
  out.steps = s.steps;
  out.total_steps = s.total_steps;
  out.projections = s.projections + 1;
  if (!out.coalesced(cfg.coalescence_tol) || !(out.min_weight >= -cfg.nonneg_tol)) return std::nullopt;
  return out;
}

inline void record(InnerState& s, const InnerConfig& cfg, double h, bool projection) {
  if (!cfg.record_trace) return;
  s.trace.push_back({s.steps, h, s.F, s.kappa, s.min_weight, s.norm, projection});
}

inline PatternMatrix random_direction(const PatternPtr& pattern, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(static_cast<Eigen::Index>(pattern->edge_count()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
  return PatternMatrix(pattern, std::move(v));
}

/// Runs the constrained flow from an evaluated, normalized state.
inline InnerState run_constrained_flow(const WeightMatrix& w, InnerState s, const InnerConfig& cfg) {
  s.constrained = true;
  s.status = InnerStatus::Running;
  double h = s.h > 0.0 ? s.h : cfg.h0;
  int accepted_run = 0;
  int projection_skip = 0;
  int projection_backoff = 1;
  const double scale_floor = 1.0;
  std::optional<std::pair<PatternMatrix, PatternMatrix>> prev;  // last accepted E and flow direction

  while (true) {
    const double scale = std::max(scale_floor, std::abs(s.pair.lambda_k1));
    if (s.coalesced(cfg.coalescence_tol)) {
      s.status = InnerStatus::Coalesced;
      break;
    }
    if (s.steps >= cfg.max_steps) {
      s.status = InnerStatus::MaxSteps;
      break;
    }

    const FlowDirection d = flow_direction(w, s);
    s.kappa = d.kappa;
    s.residual = d.residual;
    if (d.residual <= cfg.stationarity_tol) {
      s.status = InnerStatus::Stationary;
      break;
    }

    // Projection onto the coalescence set, accepted only if it lowers F.
    if (cfg.coalescence_projection && projection_skip-- <= 0) {
      bool taken = false;
      if (std::optional<InnerState> proj = projection_chain(w, s, d.gram, cfg)) {
        InnerState cand = std::move(*proj);
        {
          cand.steps = s.steps + 1;
          cand.total_steps = s.total_steps + 1;
          cand.rejected = s.rejected;
          cand.projections = s.projections + 1;
          cand.free_steps = s.free_steps;
          cand.norm_reached = s.norm_reached;
          cand.restart_index = s.restart_index;
          cand.kappa = s.kappa;
          cand.trace = std::move(s.trace);
          s = std::move(cand);
          record(s, cfg, 0.0, true);
          taken = true;
          projection_backoff = 1;
        }
      }
      if (taken) {
        prev.reset();
        continue;
      }
      projection_skip = projection_backoff;
      projection_backoff = std::min(2 * projection_backoff, 64);
    }

    // Barzilai-Borwein length from the last accepted step; the acceptance test
    // below still rejects any increase of F.
    if (cfg.bb_steps && prev) {
      const PatternMatrix ds = s.E - prev->first;
      const PatternMatrix dy = prev->second - d.direction;
      const double sy = frobenius_inner(ds, dy);
      if (sy > 0.0) h = std::clamp(frobenius_inner(ds, ds) / sy, cfg.h_min, cfg.h_max);
    }

    // Eigenvectors are ill-conditioned right next to a coalescence.
    double h_try = h;
    if (s.gap < 1e-6 * scale) h_try = std::min(h_try, 10.0 * cfg.h_min);

    std::optional<InnerState> next;
    while (h_try >= cfg.h_min) {
      PatternMatrix e = s.E + h_try * d.direction;
      InnerState cand = evaluate_state(w, s.k, s.eps, s.c, normalize_direction(std::move(e)));
      if (cand.F <= s.F) {
        next = std::move(cand);
        break;
      }
      ++s.rejected;
      h_try *= 0.5;
      accepted_run = 0;
    }
    if (!next) {
      s.status = InnerStatus::Stalled;
      break;
    }

    h = h_try;
    const double f_old = s.F;
    prev.emplace(s.E, d.direction);
    next->steps = s.steps + 1;
    next->total_steps = s.total_steps + 1;
    next->rejected = s.rejected;
    next->projections = s.projections;
    next->free_steps = s.free_steps;
    next->norm_reached = s.norm_reached;
    next->restart_index = s.restart_index;
    next->kappa = d.kappa;
    next->trace = std::move(s.trace);
    s = std::move(*next);
    record(s, cfg, h, false);

    if (++accepted_run >= cfg.grow_after) {
      h *= 2.0;
      accepted_run = 0;
    }
    const double rel = s.F != 0.0 ? std::abs(s.F - f_old) / std::abs(s.F) : 0.0;
    if (rel <= cfg.tol && !s.coalesced(cfg.coalescence_tol)) {
      s.status = InnerStatus::Converged;
      break;
    }
  }
  s.h = h;
  if (!s.coalesced(cfg.coalescence_tol)) {
    const FlowDirection d = flow_direction(w, s);
    s.kappa = d.kappa;
    s.residual = d.residual;
  }
  return s;
}

}  // namespace detail

/// Minimizes F_{eps,c} from E0 (normalized first) by the projected Euler flow.
/// With cfg.restarts > 0 additional trajectories start from seeded random
/// directions and the state with the lowest final F is returned.
inline InnerState inner_minimize(const WeightMatrix& w, int k, double eps, double c, const PatternMatrix& e0,
                                 const InnerConfig& cfg = {}) {
  check_cluster_count(k, w.n());
  if (!(eps > 0.0)) throw ArgumentError("perturbation size eps must be positive");
  if (c < 0.0) throw ArgumentError("penalty parameter must be non-negative");
  if (!(cfg.h0 > 0.0) || !(cfg.h_min > 0.0) || cfg.h_min >= cfg.h0 || !(cfg.tol > 0.0))
    throw ArgumentError("inner configuration needs 0 < h_min < h0 and tol > 0");

  InnerState s = evaluate_state(w, k, eps, c, normalize_direction(e0));
  s.h = cfg.h0;
  detail::record(s, cfg, 0.0, false);
  InnerState best = detail::run_constrained_flow(w, std::move(s), cfg);
  int total = best.total_steps;
  for (int r = 1; r <= cfg.restarts; ++r) {
    const std::uint64_t seed = cfg.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(r);
    InnerState t = evaluate_state(w, k, eps, c, normalize_direction(detail::random_direction(w.pattern_ptr(), seed)));
    t.h = cfg.h0;
    t.restart_index = r;
    detail::record(t, cfg, 0.0, false);
    t = detail::run_constrained_flow(w, std::move(t), cfg);
    total += t.total_steps;
    if (t.F < best.F) best = std::move(t);
  }
  best.total_steps = total;
  return best;
}

/// Warm start for a larger perturbation size: integrate the free flow
/// E' = -G_{eps1,c}(E) from (eps0/eps1) E_{eps0} until ||L(E)||_F reaches 1,
/// landing exactly on the unit sphere, then hand over to the constrained flow.
/// If the norm stops growing, E is renormalized directly and norm_reached is false.
inline InnerState free_flow_rescale(const WeightMatrix& w, const InnerState& prev, double eps1, double c,
                                    const InnerConfig& cfg = {}) {
  if (!(eps1 > 0.0)) throw ArgumentError("perturbation size eps must be positive");
  if (eps1 < prev.eps) throw ArgumentError("free-flow warm start requires eps1 >= eps0");
  const int k = prev.k;
  InnerState s = evaluate_state(w, k, eps1, c, (prev.eps / eps1) * prev.E);
  s.constrained = false;
  s.free_steps = 0;
  double h = cfg.h0;
  int accepted_run = 0;
  int shrinking = 0;

  while (s.norm < 1.0 - 1e-14) {
    if (s.free_steps >= cfg.max_free_steps || shrinking >= 10 || s.coalesced(cfg.coalescence_tol)) {
      s.norm_reached = false;
      break;
    }
    const PatternMatrix grad = state_gradient(w, s);
    const PatternMatrix dir = -grad;
    bool accepted = false;
    while (h >= cfg.h_min) {
      PatternMatrix step = h * dir;
      // ||L(E + t step)||^2 = a + 2 t b + t^2 q; stop exactly at norm 1 when crossing it.
      const double a = s.norm * s.norm;
      const double b = frobenius_inner(laplacian_gram(s.E), step);
      const double q = std::pow(laplacian_norm(step), 2);
      double t = 1.0;
      bool lands = false;
      if (a + 2.0 * b + q >= 1.0 && q > 0.0) {
        const double disc = b * b - q * (a - 1.0);
        t = (-b + std::sqrt(std::max(disc, 0.0))) / q;
        t = std::clamp(t, 0.0, 1.0);
        lands = true;
      }
      PatternMatrix e = s.E + t * step;
      if (lands) e = normalize_direction(std::move(e));
      InnerState cand = evaluate_state(w, k, eps1, c, std::move(e));
      if (cand.F <= s.F) {
        shrinking = cand.norm <= s.norm ? shrinking + 1 : 0;
        cand.free_steps = s.free_steps + 1;
        cand.constrained = false;
        s = std::move(cand);
        accepted = true;
        if (lands) s.norm = 1.0;
        break;
      }
      h *= 0.5;
      accepted_run = 0;
    }
    if (!accepted) {
      s.norm_reached = false;
      break;
    }
    if (++accepted_run >= cfg.grow_after) {
      h *= 2.0;
      accepted_run = 0;
    }
  }

  const int free_steps = s.free_steps;
  const bool reached = s.norm_reached;
  InnerState out = evaluate_state(w, k, eps1, c, normalize_direction(s.E));
  out.free_steps = free_steps;
  out.norm_reached = reached;
  out.constrained = true;
  out.h = cfg.h0;
  return out;
}

/// Continues the constrained flow from a state produced by free_flow_rescale.
inline InnerState continue_inner(const WeightMatrix& w, InnerState start, const InnerConfig& cfg = {}) {
  start.E = normalize_direction(std::move(start.E));
  InnerState s = evaluate_state(w, start.k, start.eps, start.c, std::move(start.E));
  s.free_steps = start.free_steps;
  s.norm_reached = start.norm_reached;
  s.h = start.h > 0.0 ? start.h : cfg.h0;
  detail::record(s, cfg, 0.0, false);
  s = detail::run_constrained_flow(w, std::move(s), cfg);
  s.total_steps = s.steps;
  return s;
}

}  // namespace specstab
