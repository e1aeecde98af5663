#ifndef CGBA_BENCH_HPP
#define CGBA_BENCH_HPP

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cgba/attack.hpp"
#include "cgba/blob_mlp.hpp"
#include "cgba/errors.hpp"
#include "cgba/oracle.hpp"
#include "cgba/wire.hpp"

namespace cgba::bench {

// ---------------------------------------------------------------------------
// Metrics

/// The part of a trace the metrics need: (cumulative queries, distance) pairs,
/// first entry being the initial boundary point.
struct TraceCurve {
  std::string variant;
  std::vector<std::pair<std::uint64_t, double>> points;

  static TraceCurve from(const AttackTrace& t) {
    TraceCurve c{to_string(t.variant), {}};
    for (const auto& r : t.records) c.points.emplace_back(r.queries, r.distance);
    return c;
  }

  /// Smallest distance recorded at or before q queries; the initial distance
  /// when nothing was recorded that early.
  double best_at(std::uint64_t q) const {
    if (points.empty()) throw InvalidInput("empty trace");
    double best = points.front().second;
    for (const auto& [queries, dist] : points) {
      if (queries > q) break;
      best = std::min(best, dist);
    }
    return best;
  }
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw InvalidInput("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline double median_l2(const std::vector<TraceCurve>& traces, std::uint64_t checkpoint) {
  if (traces.empty()) throw InvalidInput("median_l2 over an empty trace set");
  std::vector<double> d;
  d.reserve(traces.size());
  for (const auto& t : traces) d.push_back(t.best_at(checkpoint));
  return median_of(std::move(d));
}

/// Fraction of traces whose best distance at the checkpoint is <= threshold.
inline double asr(const std::vector<TraceCurve>& traces, double threshold, std::uint64_t checkpoint) {
  if (traces.empty()) throw InvalidInput("asr over an empty trace set");
  if (!(threshold > 0.0)) throw InvalidInput("asr threshold must be > 0");
  std::size_t hits = 0;
  for (const auto& t : traces) hits += t.best_at(checkpoint) <= threshold ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(traces.size());
}

/// Trapezoidal area under (queries, median) points, in l2 * queries.
inline double auc(const std::vector<std::pair<double, double>>& curve) {
  if (curve.size() < 2) throw InvalidInput("auc needs at least two points");
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (!(curve[i].first > curve[i - 1].first)) throw InvalidInput("auc needs increasing query values");
    area += 0.5 * (curve[i].second + curve[i - 1].second) * (curve[i].first - curve[i - 1].first);
  }
  return area;
}

// ---------------------------------------------------------------------------
// Oracle specs

/// Parsed `--oracle` value, e.g. "halfspace:n=16,c=1", "blobmlp:n=16,classes=4,seed=7",
/// "weights:model.json", "tcp:127.0.0.1:9000", "exec:python3 server.py".
struct OracleSpec {
  std::string kind;
  std::map<std::string, std::string> params;
  std::string target;  // file, host:port or command for weights/tcp/exec

  static OracleSpec parse(const std::string& text) {
    OracleSpec s;
    const auto colon = text.find(':');
    s.kind = text.substr(0, colon);
    const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
    if (s.kind == "weights" || s.kind == "tcp" || s.kind == "exec") {
      if (rest.empty()) throw InvalidConfig("oracle '" + s.kind + "' needs an argument");
      s.target = rest;
      return s;
    }
    if (s.kind != "halfspace" && s.kind != "parabola" && s.kind != "cone" && s.kind != "paraboloid" &&
        s.kind != "blobmlp") {
      throw InvalidConfig("unknown oracle kind '" + s.kind + "'");
    }
    std::stringstream ss(rest);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw InvalidConfig("oracle parameter '" + item + "' is not key=value");
      s.params[item.substr(0, eq)] = item.substr(eq + 1);
    }
    return s;
  }

  double num(const std::string& key, double fallback) const {
    const auto it = params.find(key);
    if (it == params.end()) return fallback;
    try {
      return std::stod(it->second);
    } catch (const std::exception&) {
      throw InvalidConfig("oracle parameter '" + key + "' is not a number");
    }
  }

  bool remote() const { return kind == "tcp" || kind == "exec"; }
};

/// Fixed axis used by the analytic oracles: (1, 1, ..., 1)/sqrt(n) rotated by a seed-free rule.
inline Direction analytic_axis(Eigen::Index n) {
  Eigen::VectorXd a(n);
  for (Eigen::Index k = 0; k < n; ++k) a[k] = 1.0 + 0.1 * static_cast<double>(k % 3);
  return unit(a);
}

inline std::shared_ptr<const DecisionOracle> build_oracle(const OracleSpec& spec) {
  if (spec.kind == "halfspace") {
    const auto n = static_cast<Eigen::Index>(spec.num("n", 16));
    return std::make_shared<HalfSpaceOracle>(analytic_axis(n), spec.num("c", 1.0));
  }
  if (spec.kind == "parabola") return std::make_shared<ParabolicOracle2D>(spec.num("p", 1.0), spec.num("h", 1.0));
  if (spec.kind == "paraboloid") {
    const auto n = static_cast<Eigen::Index>(spec.num("n", 16));
    const double h = spec.num("h", 1.0);
    return std::make_shared<ParaboloidOracle>(analytic_axis(n), spec.num("p", 100.0) * h, h);
  }
  if (spec.kind == "cone") {
    const auto n = static_cast<Eigen::Index>(spec.num("n", 16));
    const Direction axis = analytic_axis(n);
    return std::make_shared<NarrowConeOracle>(spec.num("apex", 1.0) * axis.vec(), axis,
                                              deg_to_rad(spec.num("angle", 5.0)));
  }
  if (spec.kind == "blobmlp") {
    BlobTask task;
    task.dims = static_cast<int>(spec.num("n", 16));
    task.classes = static_cast<int>(spec.num("classes", 4));
    task.seed = static_cast<std::uint64_t>(spec.num("seed", 7));
    return std::make_shared<BlobMlpOracle>(BlobMlpOracle::train(task));
  }
  if (spec.kind == "weights") return std::make_shared<BlobMlpOracle>(BlobMlpOracle::load(spec.target));
  if (spec.kind == "tcp") {
    const auto colon = spec.target.rfind(':');
    if (colon == std::string::npos) throw InvalidConfig("tcp oracle needs host:port");
    return wire::RemoteOracle::connect_tcp(spec.target.substr(0, colon), std::stoi(spec.target.substr(colon + 1)));
  }
  if (spec.kind == "exec") return wire::RemoteOracle::spawn(spec.target);
  throw InvalidConfig("unknown oracle kind '" + spec.kind + "'");
}

// ---------------------------------------------------------------------------
// Samples

struct Sample {
  Point source;
  Indicator indicator;
  std::vector<Point> targets;  // empty: random-direction initialisation
};

enum class AttackMode { kNonTargeted, kTargeted };

namespace detail {

inline Point gaussian_point(std::mt19937_64& rng, Eigen::Index n, double sd) {
  std::normal_distribution<double> g(0.0, sd);
  Point x(n);
  for (Eigen::Index k = 0; k < n; ++k) x[k] = g(rng);
  return x;
}

inline Point uniform_point(std::mt19937_64& rng, Eigen::Index n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Point x(n);
  for (Eigen::Index k = 0; k < n; ++k) x[k] = u(rng);
  return x;
}

}  // namespace detail

/// Seeded source (and target) points for sample `index`. Classification calls
/// made here select samples; they are not part of any attack budget.
inline Sample make_sample(const OracleSpec& spec, const DecisionOracle& oracle, AttackMode mode, int index,
                          std::uint64_t seed, int k_init) {
  std::mt19937_64 rng(cgba::detail::mix_seed(seed, 0x5a3f, static_cast<std::uint64_t>(index)));
  const Eigen::Index n = oracle.dims();
  Sample s;
  if (spec.kind == "cone") {
    const auto& cone = dynamic_cast<const NarrowConeOracle&>(oracle);
    s.source = detail::gaussian_point(rng, n, 0.05);
    s.indicator = Indicator::non_targeted(0);
    const int k = std::max(1, k_init);
    std::uniform_real_distribution<double> depth(1.0, 2.0);
    for (int i = 0; i < k; ++i) {
      Eigen::VectorXd off = detail::gaussian_point(rng, n, 1.0);
      off -= cone.axis().dot(off) * cone.axis().vec();
      const double along = depth(rng);
      const double radius = 0.5 * along * std::tan(cone.half_angle());
      s.targets.push_back(cone.apex() + along * cone.axis().vec() + radius * unit(off).vec());
    }
    return s;
  }
  if (spec.kind == "halfspace" || spec.kind == "parabola" || spec.kind == "paraboloid") {
    const double sd = spec.kind == "parabola" ? 0.2 : 0.1;
    for (int attempt = 0;; ++attempt) {
      if (attempt > 1000) throw NumericalFailure("cannot draw a benign source");
      s.source = detail::gaussian_point(rng, n, sd);
      if (oracle.classify(s.source) == 0) break;
    }
    s.indicator = Indicator::non_targeted(0);
    if (spec.kind == "paraboloid") {
      // Most random directions miss a far, nearly flat cap; start from points inside it.
      const auto& para = dynamic_cast<const ParaboloidOracle&>(oracle);
      std::uniform_real_distribution<double> depth(2.0, 3.0);
      for (int i = 0; i < std::max(1, k_init); ++i) {
        Eigen::VectorXd off = detail::gaussian_point(rng, n, 1.0);
        off -= para.axis().dot(off) * para.axis().vec();
        s.targets.push_back(depth(rng) * para.h() * para.axis().vec() + para.h() * unit(off).vec());
      }
    }
    return s;
  }

  // Image-like oracles (blob MLP, weights file, remote).
  const auto* blob = dynamic_cast<const BlobMlpOracle*>(&oracle);
  const Label classes = oracle.classes();
  if (blob && !blob->prototypes().empty()) {
    const Label src = static_cast<Label>(index % classes);
    s.source = blob->sample_class(src, 1, rng()).front();
    if (mode == AttackMode::kNonTargeted) {
      s.indicator = Indicator::non_targeted(src);
    } else {
      const Label tgt = static_cast<Label>((src + 1 + rng() % (classes - 1)) % classes);
      s.indicator = Indicator::targeted(tgt);
      s.targets = blob->sample_class(tgt, std::max(1, k_init), rng());
    }
    return s;
  }
  s.source = detail::uniform_point(rng, n);
  const Label src = oracle.classify(s.source);
  if (mode == AttackMode::kNonTargeted) {
    s.indicator = Indicator::non_targeted(src);
    return s;
  }
  for (int attempt = 0; static_cast<int>(s.targets.size()) < std::max(1, k_init); ++attempt) {
    if (attempt > 5000) throw NumericalFailure("cannot find target-class points");
    Point cand = detail::uniform_point(rng, n);
    const Label l = oracle.classify(cand);
    if (l == src) continue;
    if (s.targets.empty()) s.indicator = Indicator::targeted(l);
    if (l == s.indicator.label) s.targets.push_back(std::move(cand));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Experiments

struct ExperimentSpec {
  std::string oracle = "halfspace";
  std::vector<Variant> variants{Variant::kCgba};
  AttackMode mode = AttackMode::kNonTargeted;
  std::uint64_t budget = 1000;
  std::vector<std::uint64_t> checkpoints{100, 500, 1000};
  std::uint64_t seed = 0;
  int samples = 10;
  int repetitions = 1;
  int k_init = 1;
  std::string subspace = "auto";  // auto | full | dct:F
  int n0 = 30;
  double sigma = 0.0002;
  double eps = 0.0001;
  int workers = 0;  // 0: hardware concurrency
  /// Optional JSON file with explicit samples: {"samples":[{"source":[..],"label":L,"targets":[[..],..]}]}
  std::string points_file;

  void validate() const {
    if (variants.empty()) throw InvalidConfig("at least one variant is required");
    if (budget == 0) throw InvalidConfig("budget must be > 0");
    if (checkpoints.empty()) throw InvalidConfig("at least one checkpoint is required");
    for (std::size_t i = 1; i < checkpoints.size(); ++i) {
      if (checkpoints[i] <= checkpoints[i - 1]) throw InvalidConfig("checkpoints must be strictly increasing");
    }
    if (samples < 1 || repetitions < 1) throw InvalidConfig("samples and repetitions must be >= 1");
    if (n0 < 1 || !(sigma > 0.0) || !(eps > 0.0)) throw InvalidConfig("n0, sigma and eps must be positive");
    if (subspace != "auto" && subspace != "full" && subspace.rfind("dct:", 0) != 0) {
      throw InvalidConfig("subspace must be full or dct:F");
    }
  }

  nlohmann::json to_json() const {
    std::vector<std::string> vs;
    for (auto v : variants) vs.push_back(to_string(v));
    return {{"oracle", oracle},
            {"variants", vs},
            {"mode", mode == AttackMode::kTargeted ? "targeted" : "nontargeted"},
            {"budget", budget},
            {"checkpoints", checkpoints},
            {"seed", seed},
            {"samples", samples},
            {"repetitions", repetitions},
            {"k_init", k_init},
            {"subspace", subspace},
            {"n0", n0},
            {"sigma", sigma},
            {"eps", eps},
            {"points_file", points_file}};
  }
};

/// 64-bit FNV-1a, rendered as 16 hex digits.
inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string config_hash(const ExperimentSpec& spec) { return fnv1a_hex(spec.to_json().dump()); }

/// Square image shape for n = c * s * s with c in {1, 3}; nullopt when n is not of that form.
inline std::optional<std::array<int, 3>> infer_image_shape(Eigen::Index n) {
  for (int c : {1, 3}) {
    if (n % c != 0) continue;
    const auto side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n / c))));
    if (static_cast<Eigen::Index>(c) * side * side == n) return std::array<int, 3>{c, side, side};
  }
  return std::nullopt;
}

inline SubspaceConfig resolve_subspace(const std::string& text, const DecisionOracle& oracle, double sigma) {
  const Eigen::Index n = oracle.dims();
  if (text == "full" || (text == "auto" && !oracle.is_image())) return SubspaceConfig::full(n, sigma);
  const double factor = text == "auto" ? 4.0 : std::stod(text.substr(4));
  const auto shape = infer_image_shape(n);
  if (!shape) {
    if (text == "auto") return SubspaceConfig::full(n, sigma);
    throw InvalidConfig("dct subspace needs n = c*s*s with c in {1,3}");
  }
  auto cfg = SubspaceConfig::dct((*shape)[0], (*shape)[1], (*shape)[2], factor, sigma);
  if (text == "auto" && (cfg.block_height() < 2 || cfg.block_width() < 2)) return SubspaceConfig::full(n, sigma);
  return cfg;
}

struct CellResult {
  Variant variant = Variant::kCgba;
  int sample = 0;
  int repetition = 0;
  std::uint64_t seed = 0;
  std::optional<AttackTrace> trace;
  std::string error;
};

struct AggregateRow {
  std::string variant;
  std::uint64_t checkpoint = 0;
  double median_l2 = 0.0;
  int samples = 0;
};

struct ExperimentResult {
  std::string config_hash;
  std::vector<CellResult> cells;
  std::vector<AggregateRow> aggregate;
  std::map<std::string, double> auc_by_variant;
  int failed_cells = 0;
};

inline nlohmann::json trace_to_json(const AttackTrace& t) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : t.records) {
    records.push_back({{"t", r.iteration}, {"queries", r.queries}, {"distance", r.distance}, {"snapshot", r.snapshot}});
  }
  nlohmann::json snaps = nlohmann::json::array();
  for (const auto& p : t.snapshots) snaps.push_back(std::vector<double>(p.data(), p.data() + p.size()));
  return {{"variant", to_string(t.variant)},
          {"records", records},
          {"snapshots", snaps},
          {"final_distance", t.final.distance},
          {"final_point", std::vector<double>(t.final.point.data(), t.final.point.data() + t.final.point.size())},
          {"initial_distance", t.initial_distance},
          {"terminated_by", to_string(t.terminated_by)},
          {"queries_used", t.queries_used},
          {"inner_exhausted", t.inner_exhausted},
          {"degenerate_estimates", t.degenerate_estimates},
          {"bsnv_not_found", t.bsnv_not_found},
          {"clipping_active", t.clipping_active}};
}

inline TraceCurve curve_from_json(const nlohmann::json& j) {
  TraceCurve c{j.at("variant").get<std::string>(), {}};
  for (const auto& r : j.at("records")) c.points.emplace_back(r.at("queries").get<std::uint64_t>(), r.at("distance").get<double>());
  return c;
}

inline std::string format_exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// RFC 4180 CSV, LF line endings; values printed with 17 significant digits
/// so re-parsing reproduces them exactly.
inline void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << "variant,checkpoint,median_l2,samples\n";
  for (const auto& r : rows) out << r.variant << ',' << r.checkpoint << ',' << format_exact(r.median_l2) << ',' << r.samples << '\n';
}

inline std::vector<AggregateRow> read_aggregate_csv(std::istream& in) {
  std::vector<AggregateRow> rows;
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("empty aggregate CSV");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string variant, q, med, n;
    std::getline(ss, variant, ',');
    std::getline(ss, q, ',');
    std::getline(ss, med, ',');
    std::getline(ss, n, ',');
    rows.push_back({variant, std::stoull(q), std::stod(med), std::stoi(n)});
  }
  return rows;
}

/// AUC per variant over the (checkpoint, median) rows in file order.
inline std::map<std::string, double> auc_from_rows(const std::vector<AggregateRow>& rows) {
  std::map<std::string, std::vector<std::pair<double, double>>> curves;
  for (const auto& r : rows) curves[r.variant].emplace_back(static_cast<double>(r.checkpoint), r.median_l2);
  std::map<std::string, double> out;
  for (const auto& [v, pts] : curves) {
    if (pts.size() >= 2) out[v] = auc(pts);
  }
  return out;
}

namespace detail {

inline std::vector<Sample> load_points_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open points file " + path);
  const auto j = nlohmann::json::parse(in);
  auto to_point = [](const nlohmann::json& a) {
    std::vector<double> v = a.get<std::vector<double>>();
    return Point(Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  std::vector<Sample> out;
  for (const auto& s : j.at("samples")) {
    Sample smp;
    smp.source = to_point(s.at("source"));
    if (s.contains("targets")) {
      for (const auto& t : s["targets"]) smp.targets.push_back(to_point(t));
    }
    const Label l = s.at("label").get<Label>();
    smp.indicator = s.value("targeted", false) ? Indicator::targeted(l) : Indicator::non_targeted(l);
    out.push_back(std::move(smp));
  }
  if (out.empty()) throw InvalidConfig("points file has no samples");
  return out;
}

}  // namespace detail

/// Runs every (variant, sample, repetition) cell. Cells run on a worker pool;
/// results are assembled by cell index so output does not depend on scheduling.
/// Writes traces/<hash>_<variant>_s<sample>_r<rep>.json, aggregate.csv and
/// summary.json under out_dir when it is non-empty.
inline ExperimentResult run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir = {}) {
  spec.validate();
  const OracleSpec ospec = OracleSpec::parse(spec.oracle);
  ExperimentResult result;
  result.config_hash = config_hash(spec);

  // Local oracles are immutable and shared; remote ones get one connection per cell.
  std::shared_ptr<const DecisionOracle> shared = ospec.remote() ? nullptr : build_oracle(ospec);
  std::shared_ptr<const DecisionOracle> probe = shared;
  std::vector<Sample> samples;
  std::string setup_error;
  try {
    if (!probe) probe = build_oracle(ospec);
    if (!spec.points_file.empty()) {
      samples = detail::load_points_file(spec.points_file);
    } else {
      for (int i = 0; i < spec.samples; ++i) {
        samples.push_back(make_sample(ospec, *probe, spec.mode, i, spec.seed, spec.k_init));
      }
    }
  } catch (const InvalidConfig&) {
    throw;
  } catch (const std::exception& e) {
    setup_error = e.what();
  }

  const int n_samples = setup_error.empty() ? static_cast<int>(samples.size()) : spec.samples;
  for (Variant v : spec.variants)
    for (int i = 0; i < n_samples; ++i)
      for (int r = 0; r < spec.repetitions; ++r)
        result.cells.push_back({v, i, r, cgba::detail::mix_seed(spec.seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(r)), std::nullopt, setup_error});

  std::optional<SubspaceConfig> subspace;
  if (setup_error.empty()) subspace = resolve_subspace(spec.subspace, *probe, spec.sigma);
  if (ospec.remote()) probe.reset();

  auto run_cell = [&](CellResult& cell) {
    if (!cell.error.empty()) return;
    try {
      const std::shared_ptr<const DecisionOracle> oracle = shared ? shared : build_oracle(ospec);
      const Sample& s = samples[static_cast<std::size_t>(cell.sample)];
      AttackConfig cfg;
      cfg.variant = cell.variant;
      cfg.n0 = spec.n0;
      cfg.subspace = *subspace;
      cfg.tolerance = SearchTolerance(spec.eps);
      cfg.budget = spec.budget;
      cfg.rng_seed = cell.seed;
      Initialization init = s.targets.empty() ? Initialization{RandomDirectionInit{cell.seed}}
                                              : Initialization{TargetPointsInit{s.targets}};
      cell.trace = attack(s.source, cfg, oracle, s.indicator, init);
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  };

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t n_workers = std::min<std::size_t>(spec.workers > 0 ? static_cast<std::size_t>(spec.workers) : hw,
                                                      std::max<std::size_t>(1, result.cells.size()));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < n_workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < result.cells.size(); i = next++) run_cell(result.cells[i]);
    });
  }
  for (auto& t : pool) t.join();

  std::map<std::string, std::vector<TraceCurve>> by_variant;
  for (const auto& c : result.cells) {
    if (!c.error.empty()) {
      ++result.failed_cells;
      continue;
    }
    by_variant[to_string(c.variant)].push_back(TraceCurve::from(*c.trace));
  }
  for (Variant v : spec.variants) {
    const auto it = by_variant.find(to_string(v));
    if (it == by_variant.end()) continue;
    for (std::uint64_t q : spec.checkpoints) {
      result.aggregate.push_back({it->first, q, median_l2(it->second, q), static_cast<int>(it->second.size())});
    }
  }
  result.auc_by_variant = auc_from_rows(result.aggregate);

  if (out_dir.empty()) return result;
  std::filesystem::create_directories(out_dir / "traces");
  for (const auto& c : result.cells) {
    if (!c.trace) continue;
    nlohmann::json j = trace_to_json(*c.trace);
    j["config_hash"] = result.config_hash;
    j["sample"] = c.sample;
    j["repetition"] = c.repetition;
    j["seed"] = c.seed;
    j["budget"] = spec.budget;
    j["checkpoints"] = spec.checkpoints;
    const std::string name = result.config_hash + "_" + to_string(c.variant) + "_s" + std::to_string(c.sample) + "_r" +
                             std::to_string(c.repetition) + ".json";
    std::ofstream(out_dir / "traces" / name) << j.dump() << '\n';
  }
  {
    std::ofstream csv(out_dir / "aggregate.csv", std::ios::binary);
    write_aggregate_csv(csv, result.aggregate);
  }
  nlohmann::json errors = nlohmann::json::array();
  std::vector<std::uint64_t> seeds;
  for (const auto& c : result.cells) {
    seeds.push_back(c.seed);
    if (!c.error.empty()) {
      errors.push_back({{"variant", to_string(c.variant)}, {"sample", c.sample}, {"repetition", c.repetition}, {"error", c.error}});
    }
  }
  nlohmann::json auc_json = nlohmann::json::object();
  for (const auto& [v, a] : result.auc_by_variant) auc_json[v] = a;
  const nlohmann::json summary = {{"config", spec.to_json()}, {"config_hash", result.config_hash},
                                  {"seeds", seeds},           {"auc", auc_json},
                                  {"cells", result.cells.size()}, {"failed_cells", result.failed_cells},
                                  {"errors", errors}};
  std::ofstream(out_dir / "summary.json") << summary.dump(2) << '\n';
  return result;
}

// ---------------------------------------------------------------------------
// Metrics over a directory of trace files.

struct VariantMetrics {
  std::vector<std::uint64_t> checkpoints;
  std::vector<double> median;
  std::vector<double> asr;
  std::optional<double> auc;
  int traces = 0;
};

inline std::map<std::string, VariantMetrics> metrics_from_traces(const std::filesystem::path& dir, double threshold,
                                                                 std::vector<std::uint64_t> checkpoints = {}) {
  std::map<std::string, std::vector<TraceCurve>> by_variant;
  std::vector<std::filesystem::path> files;
  const auto root = std::filesystem::exists(dir / "traces") ? dir / "traces" : dir;
  for (const auto& e : std::filesystem::directory_iterator(root)) {
    if (e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::ifstream in(f);
    const auto j = nlohmann::json::parse(in);
    if (!j.contains("records")) continue;
    if (checkpoints.empty() && j.contains("checkpoints")) checkpoints = j["checkpoints"].get<std::vector<std::uint64_t>>();
    auto curve = curve_from_json(j);
    by_variant[curve.variant].push_back(std::move(curve));
  }
  if (by_variant.empty()) throw InvalidInput("no trace files under " + root.string());
  if (checkpoints.empty()) throw InvalidConfig("no checkpoints given and none recorded in the traces");
  std::map<std::string, VariantMetrics> out;
  for (const auto& [v, traces] : by_variant) {
    VariantMetrics m;
    m.checkpoints = checkpoints;
    m.traces = static_cast<int>(traces.size());
    std::vector<std::pair<double, double>> curve;
    for (std::uint64_t q : checkpoints) {
      m.median.push_back(median_l2(traces, q));
      m.asr.push_back(asr(traces, threshold, q));
      curve.emplace_back(static_cast<double>(q), m.median.back());
    }
    if (curve.size() >= 2) m.auc = auc(curve);
    out[v] = std::move(m);
  }
  return out;
}

}  // namespace cgba::bench

#endif  // CGBA_BENCH_HPP
