// specstab: spectral clustering gaps and structured distances to ambiguity.
//
//   specstab gap     GRAPH --k K
//   specstab sda     GRAPH --k K [--tol-f --tol-eps --h0 --c-schedule --restarts --seed --trace] [-o FILE]
//   specstab cluster GRAPH --k K [--seed S] [-o FILE]
//   specstab sweep   --model chain|sbm --k-min A --k-max B [--mu1 ...] [-o DIR]
//   specstab freq    [--samples N --alpha A --weight-tol T --k-min A --k-max B] [-o FILE]
//
// GRAPH is a Matrix Market (.mtx) or JSON edge-list (.json) file.
// Exit codes: 0 ok, 2 parse error, 3 invalid argument, 4 infeasible result, 5 internal error.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "specstab/specstab.hpp"

namespace {

using namespace specstab;
namespace fs = std::filesystem;

constexpr const char* kVersion = "1.0.0";

enum Exit { kOk = 0, kParse = 2, kArgument = 3, kInfeasible = 4, kInternal = 5 };

struct Options {
  std::string graph;
  std::string output;
  std::string format = "json";
  int k = 0;
  int k_min = 0;
  int k_max = 0;
  double tol_f = OuterConfig{}.tol_f;
  double tol_eps = OuterConfig{}.tol_eps;
  double h0 = InnerConfig{}.h0;
  std::vector<double> c_schedule = OuterConfig{}.c_schedule;
  int restarts = InnerConfig{}.restarts;
  std::uint64_t seed = 0;
  bool trace = false;
  // generators
  std::string model = "chain";
  int r = 8;
  double community_size = 100.0;
  std::vector<double> mu1;
  int samples = 50;
  double alpha = 0.25;
  double weight_tol = 1e-4;
  int n = 120;
  std::vector<double> centers{0.0, 8.0, 16.0, 24.0, 32.0, 40.0};
};

OuterConfig outer_config(const Options& o) {
  OuterConfig cfg;
  cfg.tol_f = o.tol_f;
  cfg.tol_eps = o.tol_eps;
  cfg.c_schedule = o.c_schedule;
  cfg.inner.h0 = o.h0;
  cfg.inner.restarts = o.restarts;
  cfg.inner.seed = o.seed;
  return cfg;
}

json config_json(const Options& o) {
  return {{"tol_f", o.tol_f},     {"tol_eps", o.tol_eps},   {"h0", o.h0},
          {"c_schedule", o.c_schedule}, {"restarts", o.restarts}, {"format", o.format}};
}

json manifest(const std::string& command, const Options& o, const json& input, double wall) {
  return {{"command", command}, {"input", input},           {"seed", o.seed},
          {"config", config_json(o)}, {"version", kVersion}, {"wall_time_s", wall}};
}

/// Writes `text` to the output file, or stdout without one. Next to a file
/// output goes FILE.manifest.json.
void emit(const Options& o, const std::string& text, const json& man) {
  if (o.output.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(o.output);
  if (!out) throw ArgumentError("cannot write " + o.output);
  out << text;
  std::ofstream mf(o.output + ".manifest.json");
  mf << man.dump(2) << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cmd_gap(const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const WeightMatrix w = read_graph(o.graph);
  const GapReport g = spectral_gap(w, o.k);
  std::ostringstream s;
  if (o.format == "csv") {
    s << "k,lambda_k,lambda_k1,gap,scaled_gap\n"
      << g.k << ',' << format_double(g.lambda_k) << ',' << format_double(g.lambda_k1) << ',' << format_double(g.gap)
      << ',' << format_double(g.scaled_gap) << '\n';
  } else {
    s << to_json(g).dump(2) << '\n';
  }
  emit(o, s.str(), manifest("gap", o, {{"graph", o.graph}, {"k", o.k}}, seconds_since(t0)));
  return kOk;
}

int cmd_sda(const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const WeightMatrix w = read_graph(o.graph);
  const SdaResult r = compute_sda(w, o.k, outer_config(o));
  const json man = manifest("sda", o, {{"graph", o.graph}, {"k", o.k}}, seconds_since(t0));
  std::ostringstream s;
  if (o.format == "csv") {
    write_trace_csv(s, r.trace);
  } else {
    json j = to_json(r, o.trace);
    j["manifest"] = man;
    s << j.dump(2) << '\n';
  }
  if (o.output.empty()) {
    std::cout << s.str();
  } else {
    emit(o, s.str(), man);
    std::cout << "k=" << r.k << " epsilon_star=" << format_double(r.epsilon_star)
              << " scaled_gap=" << format_double(r.scaled_gap) << " certificate=" << format_double(r.certificate_residual)
              << " c=" << format_double(r.c_used) << " status=" << r.status << '\n';
  }
  if (!r.feasible) {
    std::cerr << "error: penalty schedule exhausted; W + eps E has entries down to " << format_double(r.min_weight())
              << '\n';
    return kInfeasible;
  }
  return kOk;
}

int cmd_cluster(const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const WeightMatrix w = read_graph(o.graph);
  const ClusterAssignment c = spectral_cluster(w, o.k, o.seed);
  std::ostringstream s;
  if (o.format == "json")
    s << to_json(c).dump(2) << '\n';
  else
    write_labels_csv(s, c);
  emit(o, s.str(), manifest("cluster", o, {{"graph", o.graph}, {"k", o.k}}, seconds_since(t0)));
  return kOk;
}

std::vector<double> default_mu1() {
  std::vector<double> v;
  for (int m = 2; m <= 100; m += 2) v.push_back(m);
  return v;
}

int cmd_sweep(const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  if (o.k_min > o.k_max || o.k_min < 1) throw ArgumentError("empty k range");
  const std::vector<double> mu1 = o.mu1.empty() ? default_mu1() : o.mu1;
  const OuterConfig cfg = outer_config(o);
  const int threads = thread_count();
  std::vector<double> axis;
  std::vector<SweepResult> sweeps;
  json generator = {{"model", o.model}, {"r", o.r}, {"community_size", o.community_size}, {"mu1", mu1},
                    {"k_min", o.k_min}, {"k_max", o.k_max}};
  std::string axis_name = "mu1";
  if (o.model == "chain") {
    for (auto& row : chain_sweep(o.r, o.community_size, mu1, o.k_min, o.k_max, cfg, threads)) {
      axis.push_back(row.mu1);
      sweeps.push_back(std::move(row.sweep));
    }
  } else if (o.model == "sbm") {
    axis_name = "p1";
    const int size = static_cast<int>(o.community_size);
    if (size < 1 || static_cast<double>(size) != o.community_size)
      throw ArgumentError("SBM community size must be a positive integer");
    for (auto& row : sbm_sweep(o.r, size, mu1, o.k_min, o.k_max, o.seed, cfg, threads)) {
      axis.push_back(row.p1);
      sweeps.push_back(std::move(row.sweep));
    }
  } else {
    throw ArgumentError("unknown model '" + o.model + "' (chain or sbm)");
  }
  std::ostringstream s;
  if (o.format == "json") {
    json rows = json::array();
    for (std::size_t i = 0; i < sweeps.size(); ++i) {
      json row = to_json(sweeps[i]);
      row[axis_name] = axis[i];
      rows.push_back(std::move(row));
    }
    s << json{{"axis", axis_name}, {"rows", rows}}.dump(2) << '\n';
  } else {
    std::vector<const SweepResult*> ptrs;
    for (const auto& sw : sweeps) ptrs.push_back(&sw);
    write_sweep_csv(s, axis_name, axis, ptrs);
  }
  const json man = manifest("sweep", o, generator, seconds_since(t0));
  if (o.output.empty()) {
    std::cout << s.str();
    return kOk;
  }
  fs::create_directories(o.output);
  const fs::path table = fs::path(o.output) / (o.format == "json" ? "sweep.json" : "sweep.csv");
  std::ofstream(table) << s.str();
  std::ofstream(fs::path(o.output) / "manifest.json") << man.dump(2) << '\n';
  return kOk;
}

int cmd_freq(const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  CentersSpec spec;
  spec.centers = o.centers;
  spec.n = o.n;
  spec.alpha = o.alpha;
  spec.weight_tol = o.weight_tol;
  spec.seed = o.seed;
  const FrequencyTable t = frequency_experiment(spec, o.samples, o.k_min, o.k_max, outer_config(o), thread_count());
  const json generator = {{"centers", o.centers}, {"n", o.n}, {"alpha", o.alpha}, {"weight_tol", o.weight_tol},
                          {"samples", o.samples}, {"k_min", o.k_min}, {"k_max", o.k_max}};
  const json man = manifest("freq", o, generator, seconds_since(t0));
  std::ostringstream s;
  if (o.format == "csv") {
    write_frequency_csv(s, t);
  } else {
    json j = to_json(t);
    j["manifest"] = man;
    s << j.dump(2) << '\n';
  }
  emit(o, s.str(), man);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral clustering gaps and structured distances to ambiguity"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Options o;

  auto add_solver = [&](CLI::App* sub) {
    sub->add_option("--tol-f", o.tol_f, "Relative gap below which f counts as zero")->check(CLI::PositiveNumber);
    sub->add_option("--tol-eps", o.tol_eps, "Relative bracket width at which eps* is returned")->check(CLI::PositiveNumber);
    sub->add_option("--h0", o.h0, "Initial step size of the inner flow")->check(CLI::PositiveNumber);
    sub->add_option("--c-schedule", o.c_schedule, "Penalty values, ascending, starting at 0")->delimiter(',');
    sub->add_option("--restarts", o.restarts, "Extra random inner trajectories on cold starts")->check(CLI::NonNegativeNumber);
    sub->add_option("--seed", o.seed, "Seed");
  };

  CLI::App* gap = app.add_subcommand("gap", "Spectral gap lambda_{k+1} - lambda_k and its scaled form");
  gap->add_option("graph", o.graph, "Graph file (.mtx or .json)")->required();
  gap->add_option("--k", o.k, "Number of clusters")->required();

  CLI::App* sda = app.add_subcommand("sda", "Structured distance to ambiguity delta_k");
  sda->add_option("graph", o.graph, "Graph file (.mtx or .json)")->required();
  sda->add_option("--k", o.k, "Number of clusters")->required();
  sda->add_flag("--trace", o.trace, "Include the outer (eps, f, f') trace");
  add_solver(sda);

  CLI::App* cluster = app.add_subcommand("cluster", "Unnormalized spectral clustering with k-means");
  cluster->add_option("graph", o.graph, "Graph file (.mtx or .json)")->required();
  cluster->add_option("--k", o.k, "Number of clusters")->required();
  cluster->add_option("--seed", o.seed, "k-means seed");

  CLI::App* sweep = app.add_subcommand("sweep", "k_opt sweep over the chain model parameter mu1");
  sweep->add_option("--model", o.model, "chain (reduced 2r-vertex model) or sbm (sampled graph)")
      ->check(CLI::IsMember({"chain", "sbm"}));
  sweep->add_option("--r", o.r, "Number of communities")->check(CLI::Range(2, 1000));
  sweep->add_option("--community-size", o.community_size, "Community size");
  sweep->add_option("--mu1", o.mu1, "mu1 values (default 2,4,...,100)")->delimiter(',');
  sweep->add_option("--k-min", o.k_min, "Smallest k")->required();
  sweep->add_option("--k-max", o.k_max, "Largest k")->required();
  add_solver(sweep);

  CLI::App* freq = app.add_subcommand("freq", "Frequency of k_opt over random-centers samples");
  freq->add_option("--samples", o.samples, "Number of samples")->check(CLI::PositiveNumber);
  freq->add_option("--alpha", o.alpha, "Similarity scale alpha")->check(CLI::PositiveNumber);
  freq->add_option("--weight-tol", o.weight_tol, "Weights below this are dropped");
  freq->add_option("--n", o.n, "Points per sample");
  freq->add_option("--centers", o.centers, "Community centers")->delimiter(',');
  freq->add_option("--k-min", o.k_min, "Smallest k")->default_str("4");
  freq->add_option("--k-max", o.k_max, "Largest k")->default_str("8");
  add_solver(freq);

  // Shared output options; per-subcommand defaults are set before parsing.
  for (auto* sub : {gap, sda, cluster, sweep, freq}) {
    sub->add_option("--format", o.format, "Output format (json or csv)")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("-o,--output", o.output, sub == sweep ? "Output directory (default: stdout)" : "Output file (default: stdout)");
  }
  cluster->preparse_callback([&](std::size_t) { o.format = "csv"; });
  sweep->preparse_callback([&](std::size_t) { o.format = "csv"; });
  freq->preparse_callback([&](std::size_t) {
    o.k_min = 4;
    o.k_max = 8;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kArgument;
  }

  try {
    if (*gap) return cmd_gap(o);
    if (*sda) return cmd_sda(o);
    if (*cluster) return cmd_cluster(o);
    if (*sweep) return cmd_sweep(o);
    if (*freq) return cmd_freq(o);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kParse;
  } catch (const NoUpperBound& e) {
    std::cerr << "no upper bound: " << e.what() << '\n';
    return kInfeasible;
  } catch (const ArgumentError& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kArgument;
  } catch (const DimensionError& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kArgument;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kInternal;
}
