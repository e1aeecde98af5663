// attack: command-line front end for experiments, theory sweeps, metrics and
// builtin oracle hosting.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cgba/bench.hpp"
#include "cgba/theory.hpp"
#include "cgba/wire.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCellFailed = 1;
constexpr int kExitBadConfig = 2;

template <typename T>
std::vector<T> split_list(const std::string& text, T (*conv)(const std::string&)) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(conv(item));
    } catch (const std::exception&) {
      throw cgba::InvalidConfig("cannot parse list element '" + item + "'");
    }
  }
  return out;
}

double to_double(const std::string& s) { return std::stod(s); }
std::uint64_t to_u64(const std::string& s) {
  if (!s.empty() && s.front() == '-') throw cgba::InvalidConfig("negative value");
  return std::stoull(s);
}
cgba::Variant to_variant(const std::string& s) { return cgba::variant_from_string(s); }

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("attack");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("ATTACK_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
}

/// "log:lo,hi,n" (log-spaced) or an explicit comma list; values are in units of h.
std::vector<double> parse_p_grid(const std::string& text, double h) {
  std::vector<double> grid;
  if (text.rfind("log:", 0) == 0) {
    const auto parts = split_list<double>(text.substr(4), to_double);
    if (parts.size() != 3) throw cgba::InvalidConfig("p-grid log:lo,hi,n needs three values");
    grid = cgba::theory::log_grid(parts[0], parts[1], static_cast<int>(parts[2]));
  } else {
    grid = split_list<double>(text, to_double);
  }
  for (double& p : grid) p *= h;
  return grid;
}

struct RunArgs {
  std::string oracle = "halfspace";
  std::string variants = "cgba";
  std::string mode = "nontargeted";
  std::uint64_t budget = 0;
  std::string checkpoints;
  std::uint64_t seed = 0;
  std::string out;
  int k_init = 1;
  std::string subspace = "auto";
  int n0 = 30;
  double sigma = 0.0002;
  double eps = 0.0001;
  int samples = 10;
  int repetitions = 1;
  int workers = 0;
  std::string points;
};

int do_run(const RunArgs& a) {
  cgba::bench::ExperimentSpec spec;
  spec.oracle = a.oracle;
  spec.variants = split_list<cgba::Variant>(a.variants, to_variant);
  if (a.mode == "nontargeted") {
    spec.mode = cgba::bench::AttackMode::kNonTargeted;
  } else if (a.mode == "targeted") {
    spec.mode = cgba::bench::AttackMode::kTargeted;
  } else {
    throw cgba::InvalidConfig("mode must be nontargeted or targeted");
  }
  spec.budget = a.budget;
  if (a.checkpoints.empty()) {
    spec.checkpoints.clear();
    for (std::uint64_t q : {1000, 2000, 5000, 10000, 20000}) {
      if (q < a.budget) spec.checkpoints.push_back(q);
    }
    spec.checkpoints.push_back(a.budget);
  } else {
    spec.checkpoints = split_list<std::uint64_t>(a.checkpoints, to_u64);
  }
  spec.seed = a.seed;
  spec.k_init = a.k_init;
  spec.subspace = a.subspace;
  spec.n0 = a.n0;
  spec.sigma = a.sigma;
  spec.eps = a.eps;
  spec.samples = a.samples;
  spec.repetitions = a.repetitions;
  spec.workers = a.workers;
  spec.points_file = a.points;

  spdlog::info("running {} cells, config hash {}", spec.variants.size() * spec.samples * spec.repetitions,
               cgba::bench::config_hash(spec));
  const auto result = cgba::bench::run_experiment(spec, a.out);
  for (const auto& c : result.cells) {
    if (!c.error.empty()) spdlog::error("{} sample {} rep {}: {}", cgba::to_string(c.variant), c.sample, c.repetition, c.error);
  }
  for (const auto& row : result.aggregate) {
    spdlog::info("{} q={} median_l2={}", row.variant, row.checkpoint, row.median_l2);
  }
  return result.failed_cells > 0 ? kExitCellFailed : kExitOk;
}

int do_sweep(double h, const std::string& deltas, const std::string& p_grid, const std::string& out, bool cross_check) {
  if (!(h > 0.0)) throw cgba::InvalidConfig("h must be > 0");
  const auto rows = cgba::theory::sweep(h, split_list<double>(deltas, to_double), parse_p_grid(p_grid, h),
                                        cgba::theory::SweepOptions{cross_check, 1e-4});
  std::ofstream file(out, std::ios::binary);
  if (!file) throw cgba::InvalidConfig("cannot write " + out);
  cgba::theory::write_sweep_csv(file, rows);
  int disagreements = 0;
  for (const auto& r : rows) disagreements += r.agrees ? 0 : 1;
  if (cross_check) spdlog::info("cross-check disagreements: {}", disagreements);
  return disagreements > 0 ? kExitCellFailed : kExitOk;
}

int do_metrics(const std::string& dir, double threshold, const std::string& out, const std::string& checkpoints) {
  if (!(threshold > 0.0)) throw cgba::InvalidConfig("threshold must be > 0");
  const auto m = cgba::bench::metrics_from_traces(
      dir, threshold, checkpoints.empty() ? std::vector<std::uint64_t>{} : split_list<std::uint64_t>(checkpoints, to_u64));
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [variant, vm] : m) {
    j[variant] = {{"checkpoints", vm.checkpoints}, {"median_l2", vm.median}, {"asr", vm.asr}, {"traces", vm.traces},
                  {"threshold", threshold}};
    if (vm.auc) j[variant]["auc"] = *vm.auc;
  }
  std::ofstream file(out);
  if (!file) throw cgba::InvalidConfig("cannot write " + out);
  file << j.dump(2) << '\n';
  return kExitOk;
}

int do_serve(const std::string& name, const std::string& params, int port, bool stdio) {
  if (name != "halfspace" && name != "parabola" && name != "blobmlp" && name != "cone" && name != "paraboloid") {
    throw cgba::InvalidConfig("unknown builtin oracle '" + name + "'");
  }
  const auto oracle = cgba::bench::build_oracle(cgba::bench::OracleSpec::parse(name + ":" + params));
  if (stdio) {
    cgba::wire::serve_stdio(*oracle);
    return kExitOk;
  }
  cgba::wire::TcpServer server(oracle, port);
  // The bound port goes to stdout so callers using --port 0 can find it.
  std::cout << server.port() << std::endl;
  spdlog::info("serving {} on port {}", name, server.port());
  server.run();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Decision-based hard-label attack toolkit"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run an attack experiment");
  run_cmd->add_option("--oracle", run.oracle, "Oracle spec")->required();
  run_cmd->add_option("--variant", run.variants, "cgba|cgba-h|bsnv, comma separated")->required();
  run_cmd->add_option("--mode", run.mode, "nontargeted|targeted");
  run_cmd->add_option("--budget", run.budget, "Query budget per attack")->required();
  run_cmd->add_option("--checkpoints", run.checkpoints, "Comma separated query checkpoints");
  run_cmd->add_option("--seed", run.seed, "Experiment seed");
  run_cmd->add_option("--out", run.out, "Output directory")->required();
  run_cmd->add_option("--k-init", run.k_init, "Initialisation directions");
  run_cmd->add_option("--subspace", run.subspace, "full|dct:F|auto");
  run_cmd->add_option("--n0", run.n0, "Initial probe count");
  run_cmd->add_option("--sigma", run.sigma, "Probe scale");
  run_cmd->add_option("--eps", run.eps, "Boundary search tolerance");
  run_cmd->add_option("--samples", run.samples, "Number of seeded samples");
  run_cmd->add_option("--repetitions", run.repetitions, "Repetitions per sample");
  run_cmd->add_option("--workers", run.workers, "Worker threads (0: all cores)");
  run_cmd->add_option("--points", run.points, "JSON file with explicit samples");

  auto* theory_cmd = app.add_subcommand("theory", "Parabolic-boundary analysis");
  theory_cmd->require_subcommand(1);
  double h = 1.0;
  std::string deltas = "30,45,60,80", p_grid = "log:0.1,1000,60", sweep_out;
  bool cross_check = false;
  auto* sweep_cmd = theory_cmd->add_subcommand("sweep", "Analytic BSSP vs BSNV sweep");
  sweep_cmd->set_help_flag("--help", "Print this help message and exit");
  sweep_cmd->add_option("--h", h, "Source distance to the vertex")->required();
  sweep_cmd->add_option("--deltas", deltas, "Comma separated angles in degrees");
  sweep_cmd->add_option("--p-grid", p_grid, "log:lo,hi,n or a comma list, in units of h");
  sweep_cmd->add_option("--out", sweep_out, "Output CSV")->required();
  sweep_cmd->add_flag("--cross-check", cross_check, "Also run the query-based searches");

  std::string traces, metrics_out, metric_checkpoints;
  double threshold = 0.0;
  auto* metrics_cmd = app.add_subcommand("metrics", "Median l2, ASR and AUC from trace files");
  metrics_cmd->add_option("--traces", traces, "Run output or trace directory")->required();
  metrics_cmd->add_option("--threshold", threshold, "ASR distance threshold")->required();
  metrics_cmd->add_option("--out", metrics_out, "Output JSON")->required();
  metrics_cmd->add_option("--checkpoints", metric_checkpoints, "Override checkpoints");

  auto* oracle_cmd = app.add_subcommand("oracle", "Oracle utilities");
  oracle_cmd->require_subcommand(1);
  std::string serve_name, serve_params;
  int port = 0;
  bool stdio = false;
  auto* serve_cmd = oracle_cmd->add_subcommand("serve-builtin", "Host a builtin oracle over the wire protocol");
  serve_cmd->add_option("--name", serve_name, "halfspace|parabola|blobmlp|cone|paraboloid")->required();
  serve_cmd->add_option("--params", serve_params, "key=value,... oracle parameters");
  serve_cmd->add_option("--port", port, "TCP port (0: ephemeral)");
  serve_cmd->add_flag("--stdio", stdio, "Serve one session on stdin/stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitBadConfig;
  }

  try {
    if (run_cmd->parsed()) return do_run(run);
    if (sweep_cmd->parsed()) return do_sweep(h, deltas, p_grid, sweep_out, cross_check);
    if (metrics_cmd->parsed()) return do_metrics(traces, threshold, metrics_out, metric_checkpoints);
    if (serve_cmd->parsed()) return do_serve(serve_name, serve_params, port, stdio);
  } catch (const cgba::InvalidConfig& e) {
    spdlog::error("{}", e.what());
    return kExitBadConfig;
  } catch (const cgba::InvalidInput& e) {
    spdlog::error("{}", e.what());
    return kExitBadConfig;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitCellFailed;
  }
  return kExitBadConfig;
}
