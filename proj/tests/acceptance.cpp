// Acceptance harness: one line per criterion, nonzero exit if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "cgba/bench.hpp"
#include "cgba/theory.hpp"

using namespace cgba;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Outcome tangent_bssp() {
  const auto t0 = Clock::now();
  const auto s = theory::ParabolicScenario::tangent(1.0, kPi / 4);
  const auto pt = theory::bssp_analytic(s);
  const auto q = theory::bssp_query(s, 1e-6);
  const double secs = seconds_since(t0);
  const bool ok = std::abs(pt.distance() - 1.1217) <= 1e-3 && std::abs(pt.x + 0.4135) <= 2e-3 &&
                  std::abs(pt.y - 1.0427) <= 2e-3 && q.distance && std::abs(*q.distance - pt.distance()) <= 1e-3 &&
                  secs < 1.0;
  return {ok, "r=" + fmt("%.6f", pt.distance()) + " query r=" + fmt("%.6f", q.distance.value_or(NAN)) + " in " +
                  fmt("%.3fs", secs)};
}

Outcome tangent_bsnv() {
  const double h = 1.0, eps = 1e-6;
  const auto s = theory::ParabolicScenario::tangent(h, kPi / 4);
  const auto bn = theory::bsnv_analytic(s);
  const auto q = theory::bsnv_query(s, eps);
  const double ratio = (s.r_t - theory::bssp_analytic(s).distance()) / s.r_t;
  const bool ok = bn.status != theory::BsnvStatus::kNotFound && std::abs(bn.point.x + 2 * h) <= 1e-9 &&
                  std::abs(bn.point.y - 2 * h) <= 1e-9 && q.distance &&
                  std::abs(*q.distance - bn.point.distance()) <= 10 * eps && std::abs(100 * ratio - 60.3) <= 0.3;
  return {ok, "bsnv=(" + fmt("%.9f", bn.point.x) + "," + fmt("%.9f", bn.point.y) + ") reduction " +
                  fmt("%.2f%%", 100 * ratio)};
}

Outcome bsnv_region() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  for (double deg : {30.0, 40.0, 44.0, 46.0, 50.0, 60.0, 80.0}) {
    const auto s = theory::ParabolicScenario::tangent(1.0, deg_to_rad(deg));
    const bool expect_found = deg < 45.0;
    const bool analytic = theory::bsnv_analytic(s).status == theory::BsnvStatus::kFound;
    const bool query = theory::bsnv_query(s, 1e-6).distance.has_value();
    ok = ok && analytic == expect_found && query == expect_found;
    detail += fmt("%g:", deg) + (analytic ? "found " : "none ");
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 5.0, detail + "in " + fmt("%.3fs", secs)};
}

Outcome halfspace_one_iteration() {
  const double h = 0.8, eps = 1e-4;
  const Eigen::Index n = 16;
  const Direction normal = bench::analytic_axis(n);
  const HalfSpaceOracle o(normal, h);
  const Point x_s = Point::Zero(n);
  Eigen::VectorXd dir = normal.vec();
  dir[0] += 0.7;
  dir[5] -= 0.4;
  const Direction d = unit(dir);
  const Point x_bt = (h / normal.dot(d)) * d.vec();
  bool ok = true;
  std::string detail;
  for (Variant v : {Variant::kCgba, Variant::kBsnvBaseline}) {
    QueryCounter counter;
    const Phi phi(o, Indicator::non_targeted(0), counter);
    AttackConfig cfg;
    cfg.variant = v;
    cfg.subspace = SubspaceConfig::full(n);
    cfg.tolerance = SearchTolerance(eps);
    cfg.budget = QueryCounter::kUnlimited;
    cfg.max_iterations = 1;
    cfg.injected_normal = [&](const Point&) { return normal; };
    const auto t = v == Variant::kCgba ? run_cgba(x_s, BoundaryPoint::at(x_s, x_bt), cfg, phi)
                                       : run_bsnv_baseline(x_s, BoundaryPoint::at(x_s, x_bt), cfg, phi);
    const double err = t.iterations() == 1 ? std::abs(t.records[1].distance - h) : INFINITY;
    ok = ok && err <= 2 * eps;
    detail += to_string(v) + " err=" + fmt("%.2e ", err);
  }
  return {ok, detail};
}

Outcome monotonicity_matrix() {
  bool ok = true;
  int runs = 0;
  std::string bad;
  for (const std::string spec_text : {"halfspace:n=16,c=1", "parabola:p=1,h=1", "cone:n=16,angle=5", "blobmlp"}) {
    const auto spec = bench::OracleSpec::parse(spec_text);
    const auto base = bench::build_oracle(spec);
    for (Variant v : {Variant::kCgba, Variant::kCgbaH}) {
      for (int seed = 0; seed < 20; ++seed) {
        const auto smp = bench::make_sample(spec, *base, bench::AttackMode::kNonTargeted, seed, 11, 1);
        auto counted = std::make_shared<CountingOracle>(base);
        AttackConfig cfg;
        cfg.variant = v;
        cfg.subspace = SubspaceConfig::full(base->dims());
        cfg.budget = 800;
        cfg.rng_seed = static_cast<std::uint64_t>(seed);
        const Initialization init = smp.targets.empty() ? Initialization{RandomDirectionInit{cfg.rng_seed}}
                                                        : Initialization{TargetPointsInit{smp.targets}};
        const auto t = attack(smp.source, cfg, counted, smp.indicator, init);
        bool good = t.queries_used == counted->calls() && t.queries_used <= cfg.budget;
        for (std::size_t i = 1; i < t.records.size(); ++i) {
          good = good && t.records[i].distance <= t.records[i - 1].distance &&
                 t.records[i].queries > t.records[i - 1].queries && t.records[i].queries <= t.queries_used;
        }
        if (!good) bad += " " + spec.kind + "/" + to_string(v) + "/" + std::to_string(seed);
        ok = ok && good;
        ++runs;
      }
    }
  }
  return {ok, std::to_string(runs) + " runs" + (bad.empty() ? "" : ", violations:" + bad)};
}

Outcome sweep_dominance() {
  const auto t0 = Clock::now();
  const double h = 10.0;
  auto grid = theory::log_grid(0.1, 1000.0, 60);
  for (double& p : grid) p *= h;
  const auto rows = theory::sweep(h, {30.0, 45.0, 60.0, 80.0}, grid, theory::SweepOptions{true, 1e-4});
  int violations = 0, bsnv_only_fails = 0, disagreements = 0;
  for (const auto& r : rows) {
    if (std::isfinite(r.r_bsnv) && std::isfinite(r.r_bssp) && r.r_bssp > r.r_bsnv + 1e-9) ++violations;
    if (!std::isfinite(r.r_bsnv) && std::isfinite(r.r_bssp)) ++bsnv_only_fails;
    if (!r.agrees) ++disagreements;
  }
  const double secs = seconds_since(t0);
  return {violations == 0 && bsnv_only_fails > 0 && disagreements == 0 && secs < 30.0,
          std::to_string(rows.size()) + " cells, " + std::to_string(violations) + " dominance violations, " +
              std::to_string(bsnv_only_fails) + " bsnv-only failures, " + std::to_string(disagreements) +
              " cross-check disagreements in " + fmt("%.2fs", secs)};
}

double final_median(const bench::ExperimentResult& r, const std::string& variant) {
  double m = NAN;
  for (const auto& row : r.aggregate) {
    if (row.variant == variant) m = row.median_l2;
  }
  return m;
}

Outcome curvature_ordering() {
  const auto t0 = Clock::now();
  bench::ExperimentSpec spec;
  spec.variants = {Variant::kCgba, Variant::kCgbaH};
  spec.budget = 3000;
  spec.checkpoints = {3000};
  spec.samples = 20;
  spec.seed = 1;
  spec.subspace = "full";
  spec.oracle = "cone:n=16,angle=5";
  const auto cone = bench::run_experiment(spec);
  spec.oracle = "paraboloid:n=16,p=100,h=1";
  spec.eps = 1e-6;
  const auto flat = bench::run_experiment(spec);
  const double cone_c = final_median(cone, "cgba"), cone_h = final_median(cone, "cgba-h");
  const double par_c = final_median(flat, "cgba"), par_h = final_median(flat, "cgba-h");
  const double secs = seconds_since(t0);
  const bool ok = cone.failed_cells == 0 && flat.failed_cells == 0 && cone_h < cone_c && par_c <= par_h && secs < 120;
  return {ok, "cone cgba=" + fmt("%.4f", cone_c) + " cgba-h=" + fmt("%.4f", cone_h) + "; paraboloid cgba=" +
                  fmt("%.6f", par_c) + " cgba-h=" + fmt("%.6f", par_h) + " in " + fmt("%.1fs", secs)};
}

Outcome k_init_targets() {
  bench::ExperimentSpec spec;
  spec.oracle = "blobmlp";
  spec.mode = bench::AttackMode::kTargeted;
  spec.budget = 2000;
  spec.checkpoints = {0, 2000};
  spec.samples = 30;
  spec.seed = 1;
  spec.k_init = 20;
  const auto k20 = bench::run_experiment(spec);
  spec.k_init = 1;
  const auto k1 = bench::run_experiment(spec);
  const auto med = [](const bench::ExperimentResult& r, std::size_t i) { return r.aggregate.at(i).median_l2; };
  const bool ok = k20.failed_cells == 0 && k1.failed_cells == 0 && med(k20, 0) < med(k1, 0) && med(k20, 1) <= med(k1, 1);
  return {ok, "initial K=20 " + fmt("%.5f", med(k20, 0)) + " vs K=1 " + fmt("%.5f", med(k1, 0)) + "; final " +
                  fmt("%.6f", med(k20, 1)) + " vs " + fmt("%.6f", med(k1, 1))};
}

Outcome probe_count_accuracy() {
  const Eigen::Index n = 16;
  const Direction normal = bench::analytic_axis(n);
  const HalfSpaceOracle o(normal, 0.0);
  auto median_error = [&](int probes) {
    std::vector<double> errs;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      QueryCounter counter;
      const Phi phi(o, Indicator::non_targeted(0), counter);
      auto batch = sample_probes(SubspaceConfig::full(n, 0.0002), probes, seed);
      errs.push_back(angle_between(estimate_normal(Point::Zero(n), batch, phi).vec(), normal.vec()));
    }
    return bench::median_of(errs);
  };
  const double e250 = median_error(250), e4000 = median_error(4000);
  return {e4000 < e250, "median angle N=250 " + fmt("%.3f deg", rad_to_deg(e250)) + ", N=4000 " +
                            fmt("%.3f deg", rad_to_deg(e4000))};
}

Outcome cli_determinism() {
  const fs::path root = fs::temp_directory_path() / "cgba_acceptance_determinism";
  fs::remove_all(root);
  std::string contents[2];
  for (int i = 0; i < 2; ++i) {
    const fs::path out = root / std::to_string(i);
    const std::string cmd = std::string(ATTACK_CLI) +
                            " run --oracle blobmlp --variant cgba,cgba-h --budget 1000 --checkpoints 250,500,1000"
                            " --samples 6 --seed 5 --out " + out.string() + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return {false, "attack run exited with status " + std::to_string(status)};
    std::ifstream in(out / "aggregate.csv", std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    contents[i] = ss.str();
  }
  fs::remove_all(root);
  return {!contents[0].empty() && contents[0] == contents[1],
          std::to_string(contents[0].size()) + " bytes, " + (contents[0] == contents[1] ? "identical" : "different")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"tangent-45 BSSP point and radius", tangent_bssp},
      {"tangent-45 BSNV point and BSSP reduction", tangent_bsnv},
      {"BSNV convergence region", bsnv_region},
      {"half-space one-iteration convergence", halfspace_one_iteration},
      {"monotone traces and exact query accounting", monotonicity_matrix},
      {"sweep dominance and BSNV-only failures", sweep_dominance},
      {"curvature-dependent variant ordering", curvature_ordering},
      {"K-direction targeted initialisation", k_init_targets},
      {"normal estimate improves with probes", probe_count_accuracy},
      {"CLI aggregate determinism", cli_determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "[PASS]" : "[FAIL]") << " criterion " << i + 1 << ": " << criteria[i].first << " ("
              << o.detail << ")" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
