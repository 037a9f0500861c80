#pragma once

// Graph files and result serialization.
//
// Graphs: Matrix Market coordinate files (real, integer or pattern; symmetric
// or general with both triangles present) and the JSON edge list
// {"n": int, "edges": [[i, j, w], ...]} with 0-based indices. Diagonal entries
// are dropped. Floating-point text output uses 17 significant digits.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "specstab/clustering.hpp"
#include "specstab/errors.hpp"
#include "specstab/experiments.hpp"
#include "specstab/graph.hpp"
#include "specstab/sda_outer.hpp"
#include "specstab/spectrum.hpp"

namespace specstab {

using json = nlohmann::json;

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Matrix Market

inline WeightMatrix read_matrix_market(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty Matrix Market input");
  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  auto lower = [](std::string s) {
    for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return s;
  };
  if (tag != "%%MatrixMarket") throw ParseError("missing %%MatrixMarket banner");
  object = lower(object);
  format = lower(format);
  field = lower(field);
  symmetry = lower(symmetry);
  if (object != "matrix" || format != "coordinate") throw ParseError("only 'matrix coordinate' files are supported");
  if (field != "real" && field != "integer" && field != "pattern") throw ParseError("unsupported field '" + field + "'");
  if (symmetry != "symmetric" && symmetry != "general") throw ParseError("unsupported symmetry '" + symmetry + "'");

  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '%' && line.find_first_not_of(" \t\r") != std::string::npos) break;
  }
  long rows = 0, cols = 0, nnz = 0;
  {
    std::istringstream size(line);
    if (!(size >> rows >> cols >> nnz)) throw ParseError("malformed size line");
  }
  if (rows != cols) throw ParseError("weight matrix must be square");
  if (rows < 0 || nnz < 0) throw ParseError("negative size");

  std::map<std::pair<int, int>, std::pair<double, int>> entries;  // (i<j) -> (value, orientations seen)
  for (long e = 0; e < nnz; ++e) {
    do {
      if (!std::getline(in, line)) throw ParseError("expected " + std::to_string(nnz) + " entries, got " + std::to_string(e));
    } while (line.empty() || line[0] == '%' || line.find_first_not_of(" \t\r") == std::string::npos);
    std::istringstream row(line);
    long i = 0, j = 0;
    double v = 1.0;
    if (!(row >> i >> j)) throw ParseError("malformed entry line: " + line);
    if (field != "pattern" && !(row >> v)) throw ParseError("missing value in entry line: " + line);
    if (i < 1 || j < 1 || i > rows || j > rows) throw ParseError("entry index out of range: " + line);
    if (i == j) continue;
    const int a = static_cast<int>(std::min(i, j)) - 1;
    const int b = static_cast<int>(std::max(i, j)) - 1;
    auto [it, fresh] = entries.try_emplace({a, b}, v, 0);
    if (!fresh) {
      if (symmetry == "symmetric") throw ParseError("duplicate entry in symmetric file: " + line);
      if (it->second.first != v) throw ParseError("matrix is not symmetric at entry: " + line);
    }
    it->second.second += (i > j) ? 1 : 2;
  }
  if (symmetry == "general")
    for (const auto& [key, val] : entries)
      if (val.second != 3 && val.first != 0.0)
        throw ParseError("general file lacks the mirror of entry (" + std::to_string(key.first + 1) + "," +
                         std::to_string(key.second + 1) + ")");

  std::vector<Edge> edges;
  std::vector<double> w;
  for (const auto& [key, val] : entries) {
    if (val.first == 0.0) continue;
    if (val.first < 0.0) throw ParseError("negative weight " + format_double(val.first));
    edges.push_back({key.first, key.second});
    w.push_back(val.first);
  }
  Vector values = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
  return WeightMatrix(make_pattern(static_cast<int>(rows), std::move(edges)), std::move(values));
}

/// Lower triangle, 1-based, symmetric real.
inline void write_matrix_market(std::ostream& out, const PatternMatrix& a) {
  const auto& p = a.pattern();
  out << "%%MatrixMarket matrix coordinate real symmetric\n";
  out << a.n() << ' ' << a.n() << ' ' << p.edge_count() << '\n';
  for (std::size_t e = 0; e < p.edge_count(); ++e)
    out << p.edge(e).j + 1 << ' ' << p.edge(e).i + 1 << ' ' << format_double(a.value(e)) << '\n';
}

// ---------------------------------------------------------------------------
// JSON edge list

inline WeightMatrix graph_from_json(const json& j) {
  try {
    if (!j.is_object() || !j.contains("n") || !j.contains("edges")) throw ParseError("graph JSON needs 'n' and 'edges'");
    const long n = j.at("n").get<long>();
    if (n < 0) throw ParseError("negative vertex count");
    std::vector<Edge> edges;
    std::vector<double> w;
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() < 2 || e.size() > 3) throw ParseError("edge entries must be [i, j] or [i, j, w]");
      const long a = e[0].get<long>();
      const long b = e[1].get<long>();
      const double v = e.size() == 3 ? e[2].get<double>() : 1.0;
      if (a < 0 || b < 0 || a >= n || b >= n) throw ParseError("edge index out of range");
      if (a == b || v == 0.0) continue;
      if (v < 0.0) throw ParseError("negative weight " + format_double(v));
      edges.push_back({static_cast<int>(a), static_cast<int>(b)});
      w.push_back(v);
    }
    // Sort values along with the pattern's canonical edge order.
    std::vector<std::size_t> order(edges.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      order[i] = i;
      if (edges[i].i > edges[i].j) std::swap(edges[i].i, edges[i].j);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return edges[x] < edges[y]; });
    std::vector<Edge> sorted_edges;
    Vector values(static_cast<Eigen::Index>(order.size()));
    for (std::size_t i = 0; i < order.size(); ++i) {
      sorted_edges.push_back(edges[order[i]]);
      values[static_cast<Eigen::Index>(i)] = w[order[i]];
    }
    return WeightMatrix(make_pattern(static_cast<int>(n), std::move(sorted_edges)), std::move(values));
  } catch (const json::exception& e) {
    throw ParseError(std::string("graph JSON: ") + e.what());
  } catch (const ArgumentError& e) {
    throw ParseError(std::string("graph JSON: ") + e.what());
  }
}

inline json graph_to_json(const PatternMatrix& a) {
  json edges = json::array();
  const auto& p = a.pattern();
  for (std::size_t e = 0; e < p.edge_count(); ++e) edges.push_back({p.edge(e).i, p.edge(e).j, a.value(e)});
  return {{"n", a.n()}, {"edges", std::move(edges)}};
}

// ---------------------------------------------------------------------------
// Files, format chosen by extension

inline std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return ext;
}

inline WeightMatrix read_graph(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext != ".mtx" && ext != ".json") throw ArgumentError("unknown graph format '" + ext + "' (use .mtx or .json)");
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  if (ext == ".mtx") return read_matrix_market(in);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return graph_from_json(j);
}

inline void write_graph(const std::filesystem::path& path, const PatternMatrix& a) {
  const std::string ext = lower_extension(path);
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write " + path.string());
  if (ext == ".mtx") {
    write_matrix_market(out, a);
  } else if (ext == ".json") {
    out << graph_to_json(a).dump(2) << '\n';
  } else {
    throw ArgumentError("unknown graph format '" + ext + "' (use .mtx or .json)");
  }
}

// ---------------------------------------------------------------------------
// Results

/// NaN and infinities have no JSON literal; they become null.
inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json to_json(const GapReport& g) {
  return {{"k", g.k}, {"lambda_k", g.lambda_k}, {"lambda_k1", g.lambda_k1}, {"gap", g.gap}, {"scaled_gap", g.scaled_gap}};
}

inline json to_json(const OuterTraceRow& r) {
  return {{"m", r.m},
          {"c", r.c},
          {"eps", r.eps},
          {"f", number_or_null(r.f)},
          {"fprime", number_or_null(r.fprime)},
          {"kappa", number_or_null(r.kappa)},
          {"eps_lb", number_or_null(r.eps_lb)},
          {"eps_ub", number_or_null(r.eps_ub)},
          {"step", r.step},
          {"inner_steps", r.inner_steps},
          {"free_steps", r.free_steps},
          {"inner_status", r.inner_status},
          {"min_weight", number_or_null(r.min_weight)}};
}

inline json to_json(const SdaResult& r, bool with_trace = true, bool with_matrices = true) {
  json j = {{"k", r.k},
            {"epsilon_star", r.epsilon_star},
            {"scaled_gap", r.scaled_gap},
            {"certificate_residual", r.certificate_residual},
            {"terminal_gap", r.terminal_gap},
            {"eps_lb", r.eps_lb},
            {"eps_ub", number_or_null(r.eps_ub)},
            {"c_used", r.c_used},
            {"restarts", r.restarts},
            {"feasible", r.feasible},
            {"converged", r.converged},
            {"already_coalesced", r.already_coalesced},
            {"discontinuous", r.discontinuous},
            {"min_weight", r.min_weight()},
            {"status", r.status}};
  if (with_matrices) {
    j["E_star"] = graph_to_json(r.E_star);
    j["W_star"] = graph_to_json(r.W_star);
  }
  if (with_trace) {
    json t = json::array();
    for (const auto& row : r.trace) t.push_back(to_json(row));
    j["trace"] = std::move(t);
  }
  return j;
}

inline void write_trace_csv(std::ostream& out, const std::vector<OuterTraceRow>& trace) {
  out << "m,c,eps,f,fprime,kappa,eps_lb,eps_ub,step,inner_steps,free_steps,inner_status,min_weight\n";
  for (const auto& r : trace)
    out << r.m << ',' << format_double(r.c) << ',' << format_double(r.eps) << ',' << format_double(r.f) << ','
        << format_double(r.fprime) << ',' << format_double(r.kappa) << ',' << format_double(r.eps_lb) << ','
        << format_double(r.eps_ub) << ',' << r.step << ',' << r.inner_steps << ',' << r.free_steps << ','
        << r.inner_status << ',' << format_double(r.min_weight) << '\n';
}

inline void write_inner_trace_csv(std::ostream& out, const std::vector<InnerTraceRow>& trace) {
  out << "step,h,F,kappa,min_entry,norm,projection\n";
  for (const auto& r : trace)
    out << r.step << ',' << format_double(r.h) << ',' << format_double(r.F) << ',' << format_double(r.kappa) << ','
        << format_double(r.min_entry) << ',' << format_double(r.norm) << ',' << (r.projection ? 1 : 0) << '\n';
}

inline json to_json(const ClusterAssignment& c) {
  return {{"k", c.k}, {"labels", c.labels}, {"inertia", c.inertia}, {"iterations", c.iterations}};
}

inline void write_labels_csv(std::ostream& out, const ClusterAssignment& c) {
  out << "vertex,label\n";
  for (std::size_t i = 0; i < c.labels.size(); ++i) out << i << ',' << c.labels[i] << '\n';
}

inline json to_json(const SweepResult& s) {
  json rows = json::array();
  for (const auto& r : s.rows) {
    json row = {{"k", r.k}, {"gap", r.gap}, {"scaled_gap", r.scaled_gap}, {"feasible", r.feasible}};
    row["delta"] = r.delta ? json(*r.delta) : json(nullptr);
    if (!r.error.empty()) row["error"] = r.error;
    rows.push_back(std::move(row));
  }
  return {{"rows", std::move(rows)}, {"k_opt_gap", s.k_opt_gap}, {"k_opt_delta", s.k_opt_delta}};
}

/// Sweep table: first column `axis` (mu1 or p1), then delta_k for every k,
/// g_k (scaled gap) for every k, k_opt_delta and k_opt_g. Unsolved deltas are empty.
inline void write_sweep_csv(std::ostream& out, const std::string& axis, const std::vector<double>& axis_values,
                            const std::vector<const SweepResult*>& sweeps) {
  if (axis_values.size() != sweeps.size()) throw DimensionError("one sweep per axis value is required");
  out << axis;
  if (!sweeps.empty()) {
    for (const auto& r : sweeps.front()->rows) out << ",delta_" << r.k;
    for (const auto& r : sweeps.front()->rows) out << ",g_" << r.k;
  }
  out << ",k_opt_delta,k_opt_g\n";
  for (std::size_t i = 0; i < sweeps.size(); ++i) {
    out << format_double(axis_values[i]);
    for (const auto& r : sweeps[i]->rows) out << ',' << (r.delta ? format_double(*r.delta) : std::string());
    for (const auto& r : sweeps[i]->rows) out << ',' << format_double(r.scaled_gap);
    out << ',' << sweeps[i]->k_opt_delta << ',' << sweeps[i]->k_opt_gap << '\n';
  }
}

inline json to_json(const FrequencyTable& t) {
  json per_k = json::array();
  for (int k = t.k_min; k <= t.k_max; ++k) {
    const auto idx = static_cast<std::size_t>(k - t.k_min);
    per_k.push_back({{"k", k},
                     {"gap_count", t.gap_counts[idx]},
                     {"delta_count", t.delta_counts[idx]},
                     {"gap_percent", t.gap_percent(k)},
                     {"delta_percent", t.delta_percent(k)}});
  }
  json samples = json::array();
  for (const auto& s : t.per_sample) {
    json row = {{"seed", s.seed}, {"k_opt_gap", s.k_opt_gap}, {"infeasible", s.infeasible}};
    row["k_opt_delta"] = s.k_opt_delta ? json(*s.k_opt_delta) : json(nullptr);
    if (!s.error.empty()) row["error"] = s.error;
    samples.push_back(std::move(row));
  }
  return {{"k_min", t.k_min},
          {"k_max", t.k_max},
          {"samples", t.samples},
          {"gap_successes", t.gap_successes},
          {"delta_successes", t.delta_successes},
          {"delta_failures", t.delta_failures},
          {"per_k", std::move(per_k)},
          {"per_sample", std::move(samples)}};
}

inline void write_frequency_csv(std::ostream& out, const FrequencyTable& t) {
  out << "k,gap_count,gap_percent,delta_count,delta_percent\n";
  for (int k = t.k_min; k <= t.k_max; ++k) {
    const auto idx = static_cast<std::size_t>(k - t.k_min);
    out << k << ',' << t.gap_counts[idx] << ',' << format_double(t.gap_percent(k)) << ',' << t.delta_counts[idx] << ','
        << format_double(t.delta_percent(k)) << '\n';
  }
}

}  // namespace specstab
