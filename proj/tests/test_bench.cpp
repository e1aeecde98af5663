#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cgba/bench.hpp"

using namespace cgba;
using namespace cgba::bench;
namespace fs = std::filesystem;

namespace {

TraceCurve curve(std::vector<std::pair<std::uint64_t, double>> pts) { return {"cgba", std::move(pts)}; }

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::path(::testing::TempDir()) / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(ATTACK_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ExperimentSpec halfspace_spec() {
  ExperimentSpec s;
  s.oracle = "halfspace:n=16,c=1";
  s.variants = {Variant::kCgba, Variant::kCgbaH};
  s.budget = 500;
  s.checkpoints = {100, 500};
  s.seed = 3;
  s.samples = 10;
  s.workers = 2;
  return s;
}

}  // namespace

TEST(Median, OddAndEven) {
  EXPECT_EQ(median_of({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median_of({4.0, 1.0, 3.0, 2.0}), 2.5);
  EXPECT_THROW(median_of({}), InvalidInput);
}

TEST(Median, NeverIteratedTraceUsesInitialDistance) {
  const std::vector<TraceCurve> ts{curve({{10, 5.0}}), curve({{10, 4.0}, {50, 1.0}}), curve({{10, 3.0}, {80, 2.0}})};
  EXPECT_EQ(median_l2(ts, 100), 2.0);
  EXPECT_EQ(median_l2(ts, 60), 3.0);
  // Checkpoints before the first record still see the initial point.
  EXPECT_EQ(median_l2(ts, 0), 4.0);
}

TEST(Asr, ThresholdIsInclusive) {
  const std::vector<TraceCurve> ts{curve({{1, 1.0}}), curve({{1, 2.0}}), curve({{1, 0.5}}), curve({{1, 1.0}})};
  EXPECT_EQ(asr(ts, 5.0, 1), 1.0);
  EXPECT_EQ(asr(ts, 0.1, 1), 0.0);
  EXPECT_EQ(asr(ts, 1.0, 1), 0.75);
  EXPECT_THROW(asr(ts, 0.0, 1), InvalidInput);
}

TEST(Auc, Trapezoid) {
  EXPECT_DOUBLE_EQ(auc({{0, 2.0}, {100, 2.0}}), 200.0);
  EXPECT_DOUBLE_EQ(auc({{0, 2.0}, {100, 0.0}}), 100.0);
  EXPECT_THROW(auc({{0, 1.0}}), InvalidInput);
  EXPECT_THROW(auc({{10, 1.0}, {10, 1.0}}), InvalidInput);
}

TEST(OracleSpec, ParsesKindsAndRejectsUnknown) {
  const auto s = OracleSpec::parse("cone:n=8,angle=5");
  EXPECT_EQ(s.kind, "cone");
  EXPECT_EQ(s.num("n", 0), 8.0);
  EXPECT_EQ(s.num("apex", 2.5), 2.5);
  EXPECT_TRUE(OracleSpec::parse("tcp:127.0.0.1:9000").remote());
  EXPECT_THROW(OracleSpec::parse("nonsense:a=1"), InvalidConfig);
}

TEST(Subspace, AutoResolvesByShape) {
  const auto flat = build_oracle(OracleSpec::parse("halfspace:n=16"));
  EXPECT_FALSE(infer_image_shape(17).has_value());
  EXPECT_TRUE(infer_image_shape(3 * 32 * 32).has_value());
  EXPECT_NO_THROW(resolve_subspace("full", *flat, 1e-3));
}

TEST(Experiment, RowsPerVariantAndMonotoneMedian) {
  const auto r = run_experiment(halfspace_spec());
  EXPECT_EQ(r.failed_cells, 0);
  ASSERT_EQ(r.aggregate.size(), 4u);
  for (std::size_t i = 0; i < r.aggregate.size(); i += 2) {
    EXPECT_EQ(r.aggregate[i].variant, r.aggregate[i + 1].variant);
    EXPECT_EQ(r.aggregate[i].samples, 10);
    EXPECT_LE(r.aggregate[i + 1].median_l2, r.aggregate[i].median_l2);
  }
  for (const auto& c : r.cells) EXPECT_LE(c.trace->queries_used, 500u);
}

TEST(Experiment, OutputIsByteIdenticalAcrossRuns) {
  const auto a = fresh_dir("bench_det_a"), b = fresh_dir("bench_det_b");
  auto spec = halfspace_spec();
  run_experiment(spec, a);
  spec.workers = 1;  // scheduling must not matter
  run_experiment(spec, b);
  EXPECT_EQ(slurp(a / "aggregate.csv"), slurp(b / "aggregate.csv"));
  EXPECT_EQ(slurp(a / "summary.json"), slurp(b / "summary.json"));
}

TEST(Experiment, CsvRoundTripReproducesAuc) {
  const auto dir = fresh_dir("bench_auc");
  const auto r = run_experiment(halfspace_spec(), dir);
  std::ifstream in(dir / "aggregate.csv");
  const auto rows = read_aggregate_csv(in);
  ASSERT_EQ(rows.size(), r.aggregate.size());
  const auto again = auc_from_rows(rows);
  for (const auto& [v, a] : r.auc_by_variant) EXPECT_EQ(again.at(v), a);
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  EXPECT_EQ(summary["auc"]["cgba"].get<double>(), r.auc_by_variant.at("cgba"));
}

TEST(Experiment, MetricsFromTracesMatchAggregate) {
  const auto dir = fresh_dir("bench_metrics");
  const auto r = run_experiment(halfspace_spec(), dir);
  const auto m = metrics_from_traces(dir, 10.0);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.at("cgba").traces, 10);
  EXPECT_EQ(m.at("cgba").median[1], r.aggregate[1].median_l2);
  EXPECT_EQ(m.at("cgba").asr[1], 1.0);
}

TEST(Experiment, ConfigHashSeparatesConfigs) {
  auto a = halfspace_spec(), b = halfspace_spec();
  b.seed = 4;
  EXPECT_NE(config_hash(a), config_hash(b));
  a.workers = 7;  // not part of the configuration identity
  EXPECT_EQ(config_hash(a), config_hash(halfspace_spec()));
}

TEST(Experiment, UnreachableRemoteMarksCellsFailed) {
  auto spec = halfspace_spec();
  spec.oracle = "tcp:127.0.0.1:1";
  spec.samples = 2;
  const auto r = run_experiment(spec);
  EXPECT_EQ(r.failed_cells, 4);
  EXPECT_TRUE(r.aggregate.empty());
}

TEST(Experiment, InvalidSpecRejected) {
  auto spec = halfspace_spec();
  spec.checkpoints = {500, 100};
  EXPECT_THROW(run_experiment(spec), InvalidConfig);
  spec = halfspace_spec();
  spec.budget = 0;
  EXPECT_THROW(run_experiment(spec), InvalidConfig);
}

TEST(Cli, ExitCodes) {
  const auto dir = fresh_dir("bench_cli");
  EXPECT_EQ(run_cli("run --oracle halfspace:n=8 --variant cgba --budget 200 --samples 2 --out " + dir.string()), 0);
  EXPECT_TRUE(fs::exists(dir / "aggregate.csv"));
  EXPECT_EQ(run_cli("run --oracle bogus --variant cgba --budget 200 --out " + dir.string()), 2);
  EXPECT_EQ(run_cli("run --oracle halfspace --variant nope --budget 200 --out " + dir.string()), 2);
  EXPECT_EQ(run_cli("run --oracle tcp:127.0.0.1:1 --variant cgba --budget 200 --samples 1 --out " + dir.string()), 1);
  EXPECT_EQ(run_cli("metrics --traces " + dir.string() + " --threshold 5 --out " + (dir / "m.json").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "m.json"));
  EXPECT_EQ(run_cli("theory sweep --h 1 --deltas 45 --p-grid 1,10 --out " + (dir / "s.csv").string()), 0);
  EXPECT_EQ(run_cli("--no-such-flag"), 2);
}
