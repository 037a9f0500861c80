#pragma once

// Outer iteration: the smallest eps with f(eps) = min_E F_{eps,c}(E) = 0.
//
// For eps below the optimum eps*, f is positive and decreasing with
// f'(eps) = <G_{eps,c}(E_eps), E_eps>, which equals the flow multiplier kappa at
// a stationary inner state. A Newton iteration from the left is safeguarded by
// a bracket [eps_lb, eps_ub] and bisection once f has vanished. The penalty
// parameter c is raised over a schedule until the extremal weights
// W + eps* E* are nonnegative. The returned eps* = ||L(W*) - L(W)||_F is an
// upper bound for the structured distance to ambiguity.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "specstab/errors.hpp"
#include "specstab/graph.hpp"
#include "specstab/parallel.hpp"
#include "specstab/sda_inner.hpp"
#include "specstab/spectrum.hpp"

namespace specstab {

struct OuterConfig {
  int m_max = 100;
  double tol_f = 1e-8;    // f counts as zero below tol_f * max(1, |lambda_{k+1}|)
  double tol_eps = 1e-9;  // stop when eps_ub - eps_lb < tol_eps * max(1, eps_ub)
  double eps_lb0 = 0.0;
  double eps_ub0 = std::numeric_limits<double>::infinity();
  std::vector<double> c_schedule{0.0, 10.0, 100.0, 1000.0};
  double nonneg_tol = 1e-10;      // W + eps E >= -nonneg_tol counts as feasible
  bool feasibility_repair = true; // move an infeasible final state of a stage onto W + eps E >= 0
  double fprime_floor = 1e-12;
  double ceiling_factor = 64.0;   // give up on an upper bound beyond this times ||L(W)||_F
  InnerConfig inner;
};

struct OuterTraceRow {
  int m = 0;
  double c = 0.0;
  double eps = 0.0;
  double f = 0.0;
  double fprime = std::numeric_limits<double>::quiet_NaN();
  double kappa = std::numeric_limits<double>::quiet_NaN();
  double eps_lb = 0.0;
  double eps_ub = 0.0;
  std::string step;  // kind of step that produced the next iterate
  int inner_steps = 0;
  int free_steps = 0;
  std::string inner_status;
  double min_weight = 0.0;
};

struct SdaResult {
  int k = 0;
  double epsilon_star = 0.0;
  PatternMatrix E_star;
  PatternMatrix W_star;  // W + eps* E*, may carry entries down to -nonneg_tol
  double certificate_residual = 0.0;
  double terminal_gap = 0.0;
  double scaled_gap = 0.0;  // lower bound (lambda_{k+1} - lambda_k) / sqrt(2)
  double eps_lb = 0.0;
  double eps_ub = 0.0;
  double c_used = 0.0;
  int restarts = 0;
  bool feasible = true;
  bool converged = true;
  bool already_coalesced = false;
  bool discontinuous = false;  // f(eps_lb) stayed far from zero: eps* sits on a jump of f
  double f_lb = std::numeric_limits<double>::quiet_NaN();
  std::string status = "ok";
  std::vector<OuterTraceRow> trace;

  double min_weight() const { return W_star.values().size() ? W_star.values().minCoeff() : 0.0; }
};

/// |<L(W*) - L(W), L(W*)>| / ||L(W*)||_F^2: residual of the necessary
/// orthogonality condition at an extremizer.
inline double certificate(const WeightMatrix& w, const PatternMatrix& w_star) {
  if (!w.matrix().same_pattern(w_star)) throw DimensionError("certificate needs W* on the pattern of W");
  const Matrix ls = laplacian(w_star);
  const Matrix lw = laplacian(w);
  const double denom = ls.squaredNorm();
  // W* = 0 (every edge removed): the scaled family (1 + delta) W* is a single
  // point and the relation holds trivially, while the quotient is 0/0.
  if (std::sqrt(denom) <= 1e-6 * lw.norm()) return 0.0;
  const Matrix diff = ls - lw;
  return std::abs(frobenius_inner(diff, ls)) / denom;
}

struct InitialGuess {
  double eps0 = 0.0;
  PatternMatrix E0;
  bool coalesced = false;
};

/// eps0 = (lambda_{k+1} - lambda_k)/sqrt(2) and E0 = -G/||L(G)||_F with G the
/// free gradient at E = 0. Already coalesced pairs give (0, 0).
inline InitialGuess initial_guess(const WeightMatrix& w, int k, double coalescence_tol = kDefaultCoalescenceTol) {
  check_cluster_count(k, w.n());
  const EigenSystem sys = laplacian_spectrum(w);
  InitialGuess g;
  g.E0 = PatternMatrix::zero(w.pattern_ptr());
  if (is_coalesced(sys.value(k), sys.value(k + 1), coalescence_tol)) {
    g.coalesced = true;
    return g;
  }
  g.eps0 = (sys.value(k + 1) - sys.value(k)) / std::sqrt(2.0);
  const PatternMatrix grad = detail::free_gradient(w.pattern_ptr(), detail::extract_pair(sys, k));
  const double nrm = laplacian_norm(grad);
  if (nrm > 0.0) g.E0 = (-1.0 / nrm) * grad;
  return g;
}

struct FValue {
  double f = 0.0;
  double fprime = 0.0;
  InnerState state;
};

/// f(eps) and f'(eps) = <G_{eps,c}(E), E> at the inner minimizer. With a warm
/// state at a smaller eps the inner flow starts from the free-flow rescaling of
/// it; otherwise from `cold_start` with the configured random restarts.
inline FValue f_and_derivative(const WeightMatrix& w, int k, double eps, double c, const InnerState* warm,
                               const PatternMatrix& cold_start, const InnerConfig& cfg = {}) {
  FValue out;
  if (warm != nullptr && warm->eps <= eps) {
    InnerState start = free_flow_rescale(w, *warm, eps, c, cfg);
    InnerConfig warm_cfg = cfg;
    warm_cfg.restarts = 0;
    out.state = continue_inner(w, std::move(start), warm_cfg);
  } else {
    out.state = inner_minimize(w, k, eps, c, cold_start, cfg);
  }
  out.f = out.state.F;
  if (!out.state.coalesced(cfg.coalescence_tol)) {
    out.fprime = frobenius_inner(state_gradient(w, out.state), out.state.E);
  } else {
    out.fprime = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

inline FValue f_and_derivative(const WeightMatrix& w, int k, double eps, double c, const InnerConfig& cfg = {}) {
  const InitialGuess g = initial_guess(w, k, cfg.coalescence_tol);
  return f_and_derivative(w, k, eps, c, nullptr, g.E0, cfg);
}

struct BisectionCandidate {
  double eps_lb = 0.0;
  double eps_ub = std::numeric_limits<double>::infinity();
  double eps_last = 0.0;  // the final iterate
  std::optional<InnerState> ub_state;
  std::vector<InnerState> left_states;  // inner minimizers with f >= tol, ascending eps
  std::vector<OuterTraceRow> trace;
  bool converged = false;
  double f_lb = std::numeric_limits<double>::quiet_NaN();  // f(eps_lb) at convergence
  bool discontinuous = false;  // f(eps_lb) too large to vanish inside the final bracket
};

inline constexpr int kMaxLbResets = 8;

namespace detail {

/// eps counts as at or beyond eps*_c when the inner minimizer's gap vanishes.
/// With c > 0 the penalty term may stay positive there; feasibility is judged
/// once the bracket has converged.
inline bool f_below_tol(const InnerState& s, double tol_f) {
  return s.gap < tol_f * std::max(1.0, std::abs(s.pair.lambda_k1));
}

inline const InnerState* nearest_below(const std::vector<InnerState>& pool, double eps) {
  const InnerState* best = nullptr;
  for (const auto& s : pool)
    if (s.eps <= eps && (best == nullptr || s.eps > best->eps)) best = &s;
  return best;
}

inline FValue value_of(const WeightMatrix& w, const InnerState& s) {
  FValue v;
  v.f = s.F;
  v.fprime = frobenius_inner(state_gradient(w, s), s.E);
  v.state.gap = s.gap;
  v.state.pair.lambda_k1 = s.pair.lambda_k1;
  return v;
}

/// True when f at eps is too large to vanish within `dist` at its current slope.
/// Only meaningful for c = 0: with a penalty the minimizer trades gap against c Q.
inline bool far_from_root(const FValue& fv, double dist, double tol_f) {
  const double scale = std::max(1.0, std::abs(fv.state.pair.lambda_k1));
  const double slope = std::isfinite(fv.fprime) ? std::abs(fv.fprime) : 0.0;
  return fv.state.gap > 4.0 * slope * dist + tol_f * scale;
}

/// Inner minimizer at eps started from the direction of a coalesced state at a larger eps.
inline std::optional<FValue> backward_value(const WeightMatrix& w, double eps, const InnerState& above,
                                            const InnerConfig& cfg) {
  InnerConfig icfg = cfg;
  icfg.restarts = 0;
  try {
    FValue out;
    out.state = inner_minimize(w, above.k, eps, above.c, above.E, icfg);
    out.f = out.state.F;
    out.fprime = out.state.coalesced(cfg.coalescence_tol)
                     ? std::numeric_limits<double>::quiet_NaN()
                     : frobenius_inner(state_gradient(w, out.state), out.state.E);
    return out;
  } catch (const CoalescedPair&) {
    return std::nullopt;
  }
}

}  // namespace detail

/// The coalesced state at eps_ub lies on a band of coalescing directions whose
/// width shrinks only like sqrt(eps_ub - eps*); the one reached first depends on
/// the warm start. Re-solving from the closest left state pulls it towards the
/// extremizer. The result is kept only if it still coalesces.
inline void refine_upper_state(const WeightMatrix& w, int k, double c, const OuterConfig& cfg,
                               const InitialGuess& guess, const std::vector<InnerState>& pool,
                               BisectionCandidate& out) {
  const InnerState* warm = detail::nearest_below(pool, out.eps_ub);
  if (warm == nullptr || !(warm->eps > 0.0)) return;
  InnerConfig icfg = cfg.inner;
  icfg.record_trace = false;
  icfg.nonneg_tol = cfg.nonneg_tol;
  FValue fv = f_and_derivative(w, k, out.eps_ub, c, warm, guess.E0, icfg);
  if (!detail::f_below_tol(fv.state, cfg.tol_f)) return;
  if (fv.state.min_weight < out.ub_state->min_weight - cfg.nonneg_tol) return;
  out.ub_state = std::move(fv.state);
}

/// Newton-bisection on eps for a fixed penalty c. `warm_pool` may hold inner
/// minimizers from earlier runs (used only as starting points).
inline BisectionCandidate newton_bisection(const WeightMatrix& w, int k, double c, const OuterConfig& cfg,
                                           const InitialGuess& guess, const std::vector<InnerState>& warm_pool = {}) {
  if (!(cfg.eps_lb0 >= 0.0) || !(cfg.eps_lb0 < cfg.eps_ub0)) throw ArgumentError("need 0 <= eps_lb < eps_ub");
  if (cfg.m_max < 0 || !(cfg.tol_f > 0.0) || !(cfg.tol_eps > 0.0)) throw ArgumentError("invalid outer tolerances");
  BisectionCandidate out;
  out.eps_lb = cfg.eps_lb0;
  out.eps_ub = cfg.eps_ub0;
  const double ceiling = cfg.ceiling_factor * std::max(laplacian(w).norm(), 1e-300);
  std::vector<InnerState> pool = warm_pool;

  double eps = std::clamp(guess.eps0, out.eps_lb, out.eps_ub);
  if (!(eps > out.eps_lb)) eps = std::isfinite(out.eps_ub) ? 0.5 * (out.eps_lb + out.eps_ub) : std::max(2.0 * out.eps_lb, 1e-8);

  bool last_step_newton = false;
  bool last_step_left = false;
  std::optional<FValue> lb_value;  // f and f' at eps_lb (state not kept)
  int lb_resets = 0;
  double left_dist = 0.0;
  for (int m = 0; m <= cfg.m_max; ++m) {
    InnerConfig icfg = cfg.inner;
    icfg.seed = cfg.inner.seed + static_cast<std::uint64_t>(m);
    icfg.nonneg_tol = cfg.nonneg_tol;
    const InnerState* warm = detail::nearest_below(pool, eps);
    FValue fv = f_and_derivative(w, k, eps, c, warm, guess.E0, icfg);
    bool backward = false;
    if (c == 0.0 && out.ub_state && !detail::f_below_tol(fv.state, cfg.tol_f) &&
        detail::far_from_root(fv, out.eps_ub - eps, cfg.tol_f)) {
      // f jumps between eps and eps_ub: the coalesced state at eps_ub belongs to
      // another basin. Continue that basin backwards and keep the lower F.
      if (std::optional<FValue> alt = detail::backward_value(w, eps, *out.ub_state, icfg); alt && alt->f < fv.f) {
        fv = std::move(*alt);
        backward = true;
      }
    }

    OuterTraceRow row;
    row.m = m;
    row.c = c;
    row.eps = eps;
    row.f = fv.f;
    row.fprime = fv.fprime;
    row.kappa = fv.state.kappa;
    row.inner_steps = fv.state.total_steps;
    row.free_steps = fv.state.free_steps;
    row.inner_status = std::string(backward ? "backward_" : "") + to_string(fv.state.status);
    row.min_weight = fv.state.min_weight;

    double next = 0.0;
    const double probe = 0.5 * cfg.tol_eps * std::max(1.0, eps);
    if (detail::f_below_tol(fv.state, cfg.tol_f)) {
      if (eps <= out.eps_ub) {
        out.eps_ub = eps;
        out.ub_state = std::move(fv.state);
      }
      next = 0.5 * (out.eps_lb + out.eps_ub);
      row.step = "bisection";
      // A Newton step from the left usually lands just past eps*: test the
      // point right below it before falling back to bisection.
      if (last_step_newton) {
        left_dist = probe;
      } else if (last_step_left) {
        left_dist *= 16.0;
      }
      if ((last_step_newton || last_step_left) && out.eps_ub - left_dist > next) {
        next = out.eps_ub - left_dist;
        row.step = "left_probe";
      }
    } else {
      out.eps_lb = std::max(out.eps_lb, eps);
      double fp = fv.fprime;
      bool floored = false;
      if (!std::isfinite(fp) || std::abs(fp) < cfg.fprime_floor) {
        fp = -cfg.fprime_floor;
        floored = true;
      }
      next = eps - fv.f / fp;
      row.step = "newton";
      if (floored) {
        next = std::numeric_limits<double>::quiet_NaN();
      } else if (next > eps && next - eps < probe) {
        next = eps + probe;
        row.step = "probe";
      }
      if (!std::isfinite(out.eps_ub) && !(std::isfinite(next) && next > eps)) {
        next = 2.0 * eps;
        row.step = "doubling";
      }
      if (eps >= out.eps_lb) {
        lb_value = FValue{fv.f, fv.fprime, {}};
        lb_value->state.gap = fv.state.gap;
        lb_value->state.pair.lambda_k1 = fv.state.pair.lambda_k1;
      }
      pool.push_back(fv.state);
      out.left_states.push_back(std::move(fv.state));
    }
    if (std::isfinite(out.eps_ub) && !(next > out.eps_lb && next < out.eps_ub)) {
      next = 0.5 * (out.eps_lb + out.eps_ub);
      row.step = "midpoint";
    }
    row.eps_lb = out.eps_lb;
    row.eps_ub = out.eps_ub;
    last_step_newton = row.step == "newton" || row.step == "probe";
    last_step_left = row.step == "left_probe";
    out.trace.push_back(row);
    out.eps_last = next;

    if (std::isfinite(out.eps_ub) && out.eps_ub - out.eps_lb < cfg.tol_eps * std::max(1.0, out.eps_ub)) {
      // A closed bracket with f(eps_lb) far from zero means f jumps: eps_lb was
      // classified with a start from a worse basin. Retry it from above.
      const bool jump = c == 0.0 && lb_value && detail::far_from_root(*lb_value, out.eps_ub - out.eps_lb, cfg.tol_f);
      if (jump && lb_resets < kMaxLbResets) {
        ++lb_resets;
        std::optional<FValue> alt = detail::backward_value(w, out.eps_lb, *out.ub_state, icfg);
        if (alt && detail::f_below_tol(alt->state, cfg.tol_f)) {
          out.eps_ub = out.eps_lb;
          out.ub_state = std::move(alt->state);
          out.eps_lb = cfg.eps_lb0;
          lb_value.reset();
          for (const auto& st : out.left_states) {
            if (st.eps < out.eps_ub && st.eps > out.eps_lb) {
              out.eps_lb = st.eps;
              lb_value = detail::value_of(w, st);
            }
          }
          OuterTraceRow reset = row;
          reset.m = m;
          reset.eps = out.eps_ub;
          reset.f = out.ub_state->F;
          reset.fprime = std::numeric_limits<double>::quiet_NaN();
          reset.step = "lb_reset";
          reset.inner_status = std::string("backward_") + to_string(out.ub_state->status);
          reset.eps_lb = out.eps_lb;
          reset.eps_ub = out.eps_ub;
          out.trace.push_back(reset);
          eps = 0.5 * (out.eps_lb + out.eps_ub);
          last_step_newton = false;
          last_step_left = false;
          continue;
        }
      }
      out.converged = true;
      out.f_lb = lb_value ? lb_value->f : std::numeric_limits<double>::quiet_NaN();
      out.discontinuous = jump;
      break;
    }
    if (!std::isfinite(out.eps_ub) && next > ceiling)
      throw NoUpperBound("no coalescence found below eps = " + std::to_string(ceiling));
    eps = next;
  }
  if (!out.ub_state) throw NoUpperBound("no coalescence found within " + std::to_string(cfg.m_max) + " outer iterations");
  refine_upper_state(w, k, c, cfg, guess, pool, out);
  std::sort(out.left_states.begin(), out.left_states.end(),
            [](const InnerState& a, const InnerState& b) { return a.eps < b.eps; });
  return out;
}

/// Structured distance to ambiguity delta_k(W) (as an upper bound) by Newton-bisection
/// over eps, raising the penalty c until W + eps* E* >= 0.
inline SdaResult compute_sda(const WeightMatrix& w, int k, const OuterConfig& cfg = {}) {
  check_cluster_count(k, w.n());
  if (cfg.c_schedule.empty() || cfg.c_schedule.front() != 0.0)
    throw ArgumentError("penalty schedule must start at c = 0");
  if (!std::is_sorted(cfg.c_schedule.begin(), cfg.c_schedule.end()))
    throw ArgumentError("penalty schedule must be ascending");

  SdaResult res;
  res.k = k;
  res.restarts = cfg.inner.restarts;
  const GapReport gr = spectral_gap(w, k);
  res.scaled_gap = gr.scaled_gap;

  const InitialGuess guess = initial_guess(w, k, cfg.inner.coalescence_tol);
  if (guess.coalesced) {
    res.already_coalesced = true;
    res.E_star = PatternMatrix::zero(w.pattern_ptr());
    res.W_star = w.matrix();
    res.terminal_gap = gr.gap;
    return res;
  }

  std::optional<BisectionCandidate> best;  // feasible stage result, else the least infeasible one
  double best_c = 0.0;
  std::optional<BisectionCandidate> repaired;  // smallest repaired upper bound over the stages
  double repaired_c = 0.0;
  std::vector<InnerState> pool;
  std::string last_error;
  // eps*_c does not decrease with c, so a later stage starts from the previous
  // upper bound with the previous lower bound as its floor.
  OuterConfig stage_cfg = cfg;
  InitialGuess stage_guess = guess;
  for (double c : cfg.c_schedule) {
    BisectionCandidate cand;
    try {
      cand = newton_bisection(w, k, c, stage_cfg, stage_guess, pool);
    } catch (const NoUpperBound& e) {
      last_error = e.what();
      OuterTraceRow row;
      row.c = c;
      row.step = "no_upper_bound";
      res.trace.push_back(row);
      continue;
    }
    stage_cfg.eps_lb0 = std::max(stage_cfg.eps_lb0, cand.eps_lb);
    stage_guess.eps0 = cand.eps_ub;
    res.trace.insert(res.trace.end(), cand.trace.begin(), cand.trace.end());
    pool.insert(pool.end(), cand.left_states.begin(), cand.left_states.end());
    const bool feasible = cand.ub_state->min_weight >= -cfg.nonneg_tol;
    if (!feasible && cfg.feasibility_repair) {
      InnerConfig icfg = cfg.inner;
      icfg.nonneg_tol = cfg.nonneg_tol;
      if (std::optional<InnerState> fixed = detail::repair_feasibility(w, *cand.ub_state, icfg)) {
        OuterTraceRow row = cand.trace.empty() ? OuterTraceRow{} : cand.trace.back();
        row.c = c;
        row.eps = fixed->eps;
        row.f = fixed->F;
        row.fprime = std::numeric_limits<double>::quiet_NaN();
        row.step = "repair";
        row.inner_status = to_string(fixed->status);
        row.min_weight = fixed->min_weight;
        row.eps_ub = fixed->eps;
        res.trace.push_back(row);
        if (!repaired || fixed->eps < repaired->eps_ub) {
          repaired = cand;
          repaired->eps_ub = fixed->eps;
          repaired->ub_state = std::move(*fixed);
          repaired_c = c;
        }
      }
    }
    const bool better = !best || cand.ub_state->min_weight > best->ub_state->min_weight;
    if (feasible || better) {
      best = std::move(cand);
      best_c = c;
    }
    if (feasible) break;
  }
  // The penalty ramp did not reach W + eps E >= 0: fall back to the repaired bound.
  if (repaired && (!best || best->ub_state->min_weight < -cfg.nonneg_tol)) {
    best = std::move(repaired);
    best_c = repaired_c;
  }
  if (!best) throw NoUpperBound(last_error.empty() ? "no upper bound found" : last_error);

  const InnerState& st = *best->ub_state;
  res.epsilon_star = st.eps;
  res.E_star = st.E;
  res.W_star = w.perturbed(st.eps, st.E);
  res.terminal_gap = st.gap;
  res.eps_lb = best->eps_lb;
  res.eps_ub = best->eps_ub;
  res.c_used = best_c;
  res.converged = best->converged;
  res.discontinuous = best->discontinuous;
  res.f_lb = best->f_lb;
  res.feasible = st.min_weight >= -cfg.nonneg_tol;
  res.certificate_residual = certificate(w, res.W_star);
  if (!res.feasible) res.status = "penalty_schedule_exhausted";
  else if (!res.converged) res.status = "max_iterations";
  else if (res.discontinuous) res.status = "discontinuous";
  return res;
}

struct SweepRow {
  int k = 0;
  double gap = 0.0;
  double scaled_gap = 0.0;
  std::optional<double> delta;
  bool feasible = true;
  std::string error;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  int k_opt_gap = 0;    // argmax of the spectral gap, ties to smaller k
  int k_opt_delta = 0;  // argmax of delta_k over solved rows, ties to smaller k; 0 if none
};

inline void fill_argmax(SweepResult& r) {
  double best_g = -1.0;
  double best_d = -1.0;
  r.k_opt_gap = 0;
  r.k_opt_delta = 0;
  for (const auto& row : r.rows) {
    if (row.gap > best_g) {
      best_g = row.gap;
      r.k_opt_gap = row.k;
    }
    if (row.delta && *row.delta > best_d) {
      best_d = *row.delta;
      r.k_opt_delta = row.k;
    }
  }
}

/// Spectral gap and SDA for every k in [k_min, k_max]; per-k failures are
/// recorded in the row instead of aborting the sweep.
inline SweepResult k_opt_sweep(const WeightMatrix& w, int k_min, int k_max, const OuterConfig& cfg = {},
                               int threads = 1) {
  if (k_min < 1 || k_max >= w.n() || k_min > k_max)
    throw ArgumentError("k range [" + std::to_string(k_min) + ", " + std::to_string(k_max) + "] invalid for n = " +
                        std::to_string(w.n()));
  const EigenSystem sys = laplacian_spectrum(w);
  SweepResult out;
  out.rows.resize(static_cast<std::size_t>(k_max - k_min + 1));
  parallel_for(static_cast<int>(out.rows.size()), threads, [&](int idx) {
    SweepRow& row = out.rows[static_cast<std::size_t>(idx)];
    row.k = k_min + idx;
    const GapReport g = gap_report(sys, row.k);
    row.gap = g.gap;
    row.scaled_gap = g.scaled_gap;
    try {
      const SdaResult r = compute_sda(w, row.k, cfg);
      row.delta = r.epsilon_star;
      row.feasible = r.feasible;
    } catch (const Error& e) {
      row.error = e.what();
    }
  });
  fill_argmax(out);
  return out;
}

}  // namespace specstab
