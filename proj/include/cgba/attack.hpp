#ifndef CGBA_ATTACK_HPP
#define CGBA_ATTACK_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "cgba/boundary_search.hpp"
#include "cgba/errors.hpp"
#include "cgba/geometry.hpp"
#include "cgba/oracle.hpp"
#include "cgba/subspace.hpp"

namespace cgba {

enum class Variant { kCgba, kCgbaH, kBsnvBaseline };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::kCgba: return "cgba";
    case Variant::kCgbaH: return "cgba-h";
    case Variant::kBsnvBaseline: return "bsnv";
  }
  return "?";
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "cgba") return Variant::kCgba;
  if (s == "cgba-h") return Variant::kCgbaH;
  if (s == "bsnv") return Variant::kBsnvBaseline;
  throw InvalidConfig("unknown variant '" + s + "'");
}

struct AttackConfig {
  Variant variant = Variant::kCgba;
  int n0 = 30;
  SubspaceConfig subspace;  // sigma lives here
  SearchTolerance tolerance{1e-4};
  std::uint64_t budget = 1000;
  int max_inner_i = 20;
  int max_iterations = 0;  // 0: iterate until the budget runs out
  std::uint64_t rng_seed = 0;
  /// Expansion schedule for the random-direction initialisation; max <= 0 means 4 sqrt(n).
  RadiusSchedule radius{0.1, 2.0, 0.0};
  /// Cap on the BSNV ray search; <= 0 means 4 sqrt(n).
  double bsnv_r_max = 0.0;
  /// Random directions tried before the non-targeted initialisation gives up.
  int init_attempts = 10;
  /// Test hook: when set, replaces Monte-Carlo normal estimation (no probe queries).
  std::function<Direction(const Point&)> injected_normal;
};

enum class Termination { kBudgetExhausted, kIterationCap, kConverged };

inline std::string to_string(Termination t) {
  switch (t) {
    case Termination::kBudgetExhausted: return "budget_exhausted";
    case Termination::kIterationCap: return "iteration_cap";
    case Termination::kConverged: return "converged";
  }
  return "?";
}

struct TraceRecord {
  int iteration = 0;
  std::uint64_t queries = 0;  // cumulative
  double distance = 0.0;      // ||x_bt - x_s|| after the iteration
  std::size_t snapshot = 0;   // index into AttackTrace::snapshots
};

struct AttackTrace {
  Variant variant = Variant::kCgba;
  std::vector<TraceRecord> records;  // records[0] is the starting point
  std::vector<Point> snapshots;
  BoundaryPoint final;
  double initial_distance = 0.0;
  Termination terminated_by = Termination::kBudgetExhausted;
  std::uint64_t queries_used = 0;  // counter delta over the whole run, including unfinished iterations
  int inner_exhausted = 0;
  int degenerate_estimates = 0;
  int bsnv_not_found = 0;
  bool clipping_active = false;

  int iterations() const { return static_cast<int>(records.size()) - 1; }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b);
}

inline bool outside_unit_box(const Point& p) { return (p.array() < 0.0).any() || (p.array() > 1.0).any(); }

class Engine {
 public:
  Engine(const Point& x_s, const AttackConfig& cfg, const Phi& phi, std::uint64_t base)
      : x_s_(x_s), cfg_(cfg), phi_(phi), base_(base) {
    if (cfg.n0 < 1) throw InvalidConfig("n0 must be >= 1");
    if (cfg.max_inner_i < 1) throw InvalidConfig("max_inner_i must be >= 1");
    if (phi.counter().unlimited() && cfg.max_iterations <= 0) {
      throw InvalidConfig("an unlimited budget needs max_iterations > 0");
    }
    if (!cfg.injected_normal) {
      SubspaceConfig sub = cfg.subspace;
      if (sub.mode == SubspaceConfig::Mode::kFullSpace && sub.dims == 0) sub.dims = x_s.size();
      sub.validate();
      if (sub.dims != x_s.size()) throw InvalidConfig("subspace dimension does not match the source");
      subspace_ = sub;
    }
    bsnv_r_max_ = cfg.bsnv_r_max > 0.0 ? cfg.bsnv_r_max : 4.0 * std::sqrt(static_cast<double>(x_s.size()));
  }

  AttackTrace run(const BoundaryPoint& start) {
    AttackTrace trace;
    trace.variant = cfg_.variant;
    trace.initial_distance = start.distance;
    trace.final = start;
    BoundaryPoint current = start;
    record(trace, 0, current);

    for (int t = 1;; ++t) {
      if (cfg_.max_iterations > 0 && t > cfg_.max_iterations) {
        trace.terminated_by = Termination::kIterationCap;
        break;
      }
      if (current.distance <= cfg_.tolerance.epsilon) {
        trace.terminated_by = Termination::kConverged;
        break;
      }
      const int n_t = cfg_.injected_normal ? 0 : query_schedule(cfg_.n0, t);
      if (!phi_.counter().can_afford(static_cast<std::uint64_t>(n_t) + 1)) {
        trace.terminated_by = Termination::kBudgetExhausted;
        break;
      }
      try {
        step(trace, t, n_t, current);
      } catch (const BudgetExhausted&) {
        trace.terminated_by = Termination::kBudgetExhausted;
        break;
      }
      record(trace, t, current);
    }
    trace.queries_used = phi_.counter().used() - base_;
    return trace;
  }

 private:
  void record(AttackTrace& trace, int t, const BoundaryPoint& current) {
    trace.snapshots.push_back(current.point);
    trace.records.push_back({t, phi_.counter().used() - base_, current.distance, trace.snapshots.size() - 1});
    if (current.distance < trace.final.distance || t == 0) trace.final = current;
    if (outside_unit_box(current.point) && phi_.oracle().is_image()) trace.clipping_active = true;
  }

  std::optional<Direction> normal_at(AttackTrace& trace, int t, int n_t, const Point& x_b) {
    if (cfg_.injected_normal) return cfg_.injected_normal(x_b);
    for (int attempt = 0; attempt < 2; ++attempt) {
      ProbeBatch batch = sample_probes(*subspace_, n_t, mix_seed(cfg_.rng_seed, static_cast<std::uint64_t>(t), attempt));
      try {
        return estimate_normal(x_b, batch, phi_);
      } catch (const DegenerateEstimate&) {
        ++trace.degenerate_estimates;
      }
    }
    return std::nullopt;
  }

  void step(AttackTrace& trace, int t, int n_t, BoundaryPoint& current) {
    const auto eta = normal_at(trace, t, n_t, current.point);
    if (!eta) return;
    switch (cfg_.variant) {
      case Variant::kCgba: cgba_step(trace, *eta, current); break;
      case Variant::kCgbaH: cgbah_step(trace, *eta, current); break;
      case Variant::kBsnvBaseline: bsnv_step(trace, *eta, current); break;
    }
  }

  static void accept_if_closer(BoundaryPoint& current, BoundaryPoint candidate) {
    if (candidate.distance <= current.distance) current = std::move(candidate);
  }

  void cgba_step(AttackTrace& trace, const Direction& eta, BoundaryPoint& current) {
    const SemicircleFrame frame(x_s_, current.point, eta);
    std::optional<Direction> benign;
    std::optional<Direction> last_adversarial;
    for (int i = 1; i <= cfg_.max_inner_i; ++i) {
      Direction zeta = search_direction(frame, cgba_multiplier(frame.theta(), i));
      if (phi_(semicircle_point(frame, zeta)) == -1) {
        benign = std::move(zeta);
        break;
      }
      last_adversarial = std::move(zeta);
    }
    if (benign) {
      accept_if_closer(current, bssp_arc(x_s_, current.point, *benign, frame.v_hat(), phi_, cfg_.tolerance));
      return;
    }
    // Every query up to psi_max was adversarial: bracket against the psi = 90 deg
    // limit, whose semicircle point is the (benign) source itself.
    ++trace.inner_exhausted;
    accept_if_closer(current, bssp_arc(x_s_, current.point, frame.perpendicular(), *last_adversarial, phi_,
                                       cfg_.tolerance));
  }

  void cgbah_step(AttackTrace& trace, const Direction& eta, BoundaryPoint& current) {
    const SemicircleFrame frame(x_s_, current.point, eta);
    for (int i = 1; i <= cfg_.max_inner_i; ++i) {
      const Direction zeta = search_direction(frame, cgbah_multiplier(frame.theta(), i));
      const Point x_q = semicircle_point(frame, zeta);
      if (phi_(x_q) == +1) {
        accept_if_closer(current, binary_search_ray(x_s_, x_q, phi_, cfg_.tolerance));
        return;
      }
    }
    ++trace.inner_exhausted;
    accept_if_closer(current, binary_search_ray(x_s_, current.point, phi_, cfg_.tolerance));
  }

  void bsnv_step(AttackTrace& trace, const Direction& eta, BoundaryPoint& current) {
    auto next = bsnv(x_s_, current.point, eta, phi_, cfg_.tolerance, bsnv_r_max_);
    if (!next) {
      ++trace.bsnv_not_found;
      return;
    }
    current = std::move(*next);
  }

  const Point& x_s_;
  const AttackConfig& cfg_;
  const Phi& phi_;
  std::uint64_t base_;
  std::optional<SubspaceConfig> subspace_;
  double bsnv_r_max_ = 0.0;
};

inline AttackTrace run_variant(const Point& x_s, const BoundaryPoint& start, const AttackConfig& cfg,
                               const Phi& phi, Variant variant, std::uint64_t base) {
  AttackConfig c = cfg;
  c.variant = variant;
  Engine engine(x_s, c, phi, base);
  return engine.run(start);
}

}  // namespace detail

/// CGBA: bracket a benign semicircle point at psi_i = 90 - 90/2^i, then BSSP.
/// The budget is the one carried by phi's counter.
inline AttackTrace run_cgba(const Point& x_s, const BoundaryPoint& start, const AttackConfig& cfg, const Phi& phi) {
  return detail::run_variant(x_s, start, cfg, phi, Variant::kCgba, phi.counter().used());
}

/// CGBA-H: halve the angle towards v_hat until the semicircle point is
/// adversarial, then bisect the chord from the source.
inline AttackTrace run_cgba_h(const Point& x_s, const BoundaryPoint& start, const AttackConfig& cfg, const Phi& phi) {
  return detail::run_variant(x_s, start, cfg, phi, Variant::kCgbaH, phi.counter().used());
}

/// Baseline: binary search along the estimated normal each iteration.
inline AttackTrace run_bsnv_baseline(const Point& x_s, const BoundaryPoint& start, const AttackConfig& cfg,
                                     const Phi& phi) {
  return detail::run_variant(x_s, start, cfg, phi, Variant::kBsnvBaseline, phi.counter().used());
}

struct RandomDirectionInit {
  std::uint64_t seed = 0;
};
struct TargetPointsInit {
  std::vector<Point> targets;
};
using Initialization = std::variant<RandomDirectionInit, TargetPointsInit>;

/// Full attack: validate the source, find x_b1, run the configured variant.
/// Every query, including the source check and initialisation, is charged
/// against cfg.budget. Image oracles are queried through a clip adapter.
inline AttackTrace attack(const Point& x_s, const AttackConfig& cfg, std::shared_ptr<const DecisionOracle> oracle,
                          const Indicator& indicator, const Initialization& init) {
  if (x_s.size() != oracle->dims()) throw InvalidInput("source dimension does not match the oracle");
  if (!all_finite(x_s)) throw InvalidInput("source has non-finite components");
  if (cfg.budget == 0) throw InvalidConfig("budget must be > 0");
  if (oracle->is_image()) oracle = clip_adapter(std::move(oracle));
  QueryCounter counter(cfg.budget);
  const Phi phi(*oracle, indicator, counter);

  if (phi(x_s) == +1) throw InvalidInput("source is already adversarial");

  std::optional<BoundaryPoint> start;
  if (const auto* random = std::get_if<RandomDirectionInit>(&init)) {
    RadiusSchedule sched = cfg.radius;
    if (sched.max <= 0.0) sched.max = RadiusSchedule::for_dims(x_s.size()).max;
    for (int attempt = 0; attempt < std::max(1, cfg.init_attempts) && !start; ++attempt) {
      std::mt19937_64 rng(detail::mix_seed(random->seed, 0x1417, static_cast<std::uint64_t>(attempt)));
      std::normal_distribution<double> gauss(0.0, 1.0);
      Eigen::VectorXd dir(x_s.size());
      for (Eigen::Index k = 0; k < dir.size(); ++k) dir[k] = gauss(rng);
      try {
        start = initial_radius_search(x_s, unit(dir), phi, cfg.tolerance, sched);
      } catch (const NoAdversarialFound&) {
      }
    }
    if (!start) throw NoAdversarialFound();
  } else {
    const auto& targets = std::get<TargetPointsInit>(init).targets;
    for (const Point& tp : targets) {
      if (tp.size() != x_s.size()) throw InvalidInput("target dimension does not match the source");
    }
    start = targets.size() == 1 ? binary_search_ray(x_s, targets.front(), phi, cfg.tolerance)
                                : initialize_targeted(x_s, targets, phi, cfg.tolerance);
  }
  return detail::run_variant(x_s, *start, cfg, phi, cfg.variant, 0);
}

}  // namespace cgba

#endif  // CGBA_ATTACK_HPP
