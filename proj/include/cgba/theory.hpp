#ifndef CGBA_THEORY_HPP
#define CGBA_THEORY_HPP

// Closed-form boundary searches on the 2-D parabolic boundary
//   y = x^2 / (4p) + h
// with the source at the origin and the current boundary point at angle
// delta from the x-axis, plus numeric cross-checks against the query-based
// searches.

#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <unsupported/Eigen/Polynomials>

#include "cgba/boundary_search.hpp"
#include "cgba/errors.hpp"
#include "cgba/geometry.hpp"
#include "cgba/oracle.hpp"

namespace cgba::theory {

/// Distance from the origin to the first boundary crossing at angle delta.
/// Requires p >= h cot^2(delta).
inline double rt_of_delta(double p, double h, double delta) {
  if (!(p > 0.0) || !(h > 0.0)) throw InvalidInput("parabola needs p > 0 and h > 0");
  if (!(delta > 0.0 && delta <= kPi / 2)) throw InvalidInput("delta must lie in (0, pi/2]");
  if (delta == kPi / 2) return h;
  const double cot = std::cos(delta) / std::sin(delta);
  double u = (h / p) * cot * cot;
  if (u > 1.0 + 1e-12) throw NoBoundaryInDirection();
  if (u > 1.0 - 1e-12) u = 1.0;  // tangent: sqrt() would amplify rounding in cot^2
  // 2p sin/cos^2 (1 - sqrt(1-u)) rewritten without the cancellation for large p.
  return 2.0 * h / (std::sin(delta) * (1.0 + std::sqrt(1.0 - u)));
}

struct ParabolicScenario {
  double p = 1.0;
  double h = 1.0;
  double delta = kPi / 4;
  double r_t = 0.0;
  double a_x = 0.0;
  double a_y = 0.0;

  static ParabolicScenario make(double p, double h, double delta) {
    ParabolicScenario s{p, h, delta};
    s.r_t = rt_of_delta(p, h, delta);
    s.a_x = delta == kPi / 2 ? 0.0 : s.r_t * std::cos(delta);
    s.a_y = s.r_t * std::sin(delta);
    return s;
  }

  /// The ray at angle delta is tangent to the parabola at the boundary point.
  static ParabolicScenario tangent(double h, double delta) {
    const double cot = std::cos(delta) / std::sin(delta);
    return make(h * cot * cot, h, delta);
  }

  Eigen::Vector2d boundary_point() const { return {a_x, a_y}; }
  /// True boundary normal at (a_x, a_y), pointing into the adversarial side.
  Eigen::Vector2d normal() const { return Eigen::Vector2d(-a_x / (2.0 * p), 1.0).normalized(); }
};

struct PlanePoint {
  double x = 0.0;
  double y = 0.0;
  double distance() const { return std::hypot(x, y); }
};

enum class BsnvStatus { kFound, kDiverges, kNotFound };

inline std::string to_string(BsnvStatus s) {
  switch (s) {
    case BsnvStatus::kFound: return "found";
    case BsnvStatus::kDiverges: return "diverges";
    case BsnvStatus::kNotFound: return "not_found";
  }
  return "?";
}

struct BsnvSolution {
  BsnvStatus status = BsnvStatus::kNotFound;
  PlanePoint point;  // meaningful unless kNotFound
};

/// Intersection of the normal line y = m x (m = -2p/a_x) with the parabola,
/// nearest to the source. kDiverges flags no progress (new distance >= r_t).
inline BsnvSolution bsnv_analytic(const ParabolicScenario& s) {
  BsnvSolution out;
  if (s.a_x == 0.0) {
    out.status = s.h >= s.r_t * (1.0 - 1e-9) ? BsnvStatus::kDiverges : BsnvStatus::kFound;
    out.point = {0.0, s.h};
    return out;
  }
  const double m = -2.0 * s.p / s.a_x;
  double q = s.h / (s.p * m * m);
  if (q > 1.0 + 1e-12) return out;
  if (q > 1.0 - 1e-12) q = 1.0;
  const double denom = 1.0 + std::sqrt(1.0 - q);
  out.point = {(2.0 * s.h / m) / denom, 2.0 * s.h / denom};
  out.status = out.point.distance() >= s.r_t * (1.0 - 1e-9) ? BsnvStatus::kDiverges : BsnvStatus::kFound;
  return out;
}

namespace detail {

/// Quartic in x from substituting the parabola into the circle through the
/// origin and (a_x, a_y): x^2 + y^2 - a_x x - a_y y = 0. Coefficients are
/// scaled by 16 p^2 and stored lowest degree first.
inline Eigen::Matrix<double, 5, 1> intersection_quartic(const ParabolicScenario& s) {
  const double k = 16.0 * s.p * s.p;
  Eigen::Matrix<double, 5, 1> c;
  c << k * (s.h * s.h - s.a_y * s.h), -k * s.a_x, k + 4.0 * s.p * (2.0 * s.h - s.a_y), 0.0, 1.0;
  return c;
}

inline double horner(const Eigen::Matrix<double, 5, 1>& c, double x) {
  return (((c[4] * x + c[3]) * x + c[2]) * x + c[1]) * x + c[0];
}

inline double horner_derivative(const Eigen::Matrix<double, 5, 1>& c, double x) {
  return ((4.0 * c[4] * x + 3.0 * c[3]) * x + 2.0 * c[2]) * x + c[1];
}

}  // namespace detail

/// Circle residual x^2 + y^2 - a_x x - a_y y of a plane point, in length^2.
inline double circle_residual(const ParabolicScenario& s, const PlanePoint& pt) {
  return pt.x * pt.x + pt.y * pt.y - s.a_x * pt.x - s.a_y * pt.y;
}

/// Second intersection of the Thales circle over [origin, x_bt] with the
/// parabola on the normal's side of the chord. The known root a_x is
/// divided out and the remaining cubic solved through its companion matrix,
/// then each root is Newton-polished on the full quartic.
inline PlanePoint bssp_analytic(const ParabolicScenario& s) {
  const auto quartic = detail::intersection_quartic(s);
  // synthetic division by (x - a_x)
  Eigen::Vector4d cubic;
  cubic[3] = quartic[4];
  cubic[2] = quartic[3] + s.a_x * cubic[3];
  cubic[1] = quartic[2] + s.a_x * cubic[2];
  cubic[0] = quartic[1] + s.a_x * cubic[1];

  Eigen::PolynomialSolver<double, 3> solver;
  solver.compute(cubic);
  std::vector<double> roots;
  solver.realRoots(roots, 1e-6 * std::max(1.0, std::abs(cubic[0])));

  const double scale = std::max({s.h, s.r_t, 1.0});
  const Eigen::Vector2d v(std::cos(s.delta), std::sin(s.delta));
  const Eigen::Vector2d eta = s.normal();
  const double eta_side = v.x() * eta.y() - v.y() * eta.x();

  std::optional<PlanePoint> best;
  bool repeated_known_root = false;
  for (double x : roots) {
    for (int it = 0; it < 50; ++it) {
      const double d = detail::horner_derivative(quartic, x);
      if (d == 0.0) break;
      const double step = detail::horner(quartic, x) / d;
      x -= step;
      if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(x))) break;
    }
    const PlanePoint pt{x, x * x / (4.0 * s.p) + s.h};
    if (std::abs(circle_residual(s, pt)) > 1e-9 * scale * scale) continue;
    if (std::abs(x - s.a_x) <= 1e-9 * scale) {
      repeated_known_root = true;
      continue;
    }
    const double side = v.x() * pt.y - v.y() * pt.x;
    if (side * eta_side < 0.0 && std::abs(side) > 1e-12 * scale) continue;
    if (!best || pt.distance() < best->distance()) best = pt;
  }
  if (best) return *best;
  // Circle touches the parabola only at x_bt (e.g. the vertex at delta = 90 deg).
  if (repeated_known_root || s.a_x == 0.0) return {s.a_x, s.a_y};
  throw NumericalFailure("no second real intersection of circle and parabola");
}

// ---------------------------------------------------------------------------
// Query-based counterparts on ParabolicOracle2D.

struct QueryResult {
  std::optional<double> distance;
  std::uint64_t queries = 0;
};

/// bsnv() from the origin along the true normal at x_bt. r_max = 10 * 2 sqrt(2) h.
inline QueryResult bsnv_query(const ParabolicScenario& s, double eps) {
  const ParabolicOracle2D oracle(s.p, s.h);
  QueryCounter counter;
  const Phi phi(oracle, Indicator::non_targeted(0), counter);
  const Point x_s = Point::Zero(2);
  const Point x_bt = s.boundary_point();
  const Direction eta = unit(s.normal());
  const auto found = bsnv(x_s, x_bt, eta, phi, SearchTolerance(eps), 10.0 * 2.0 * std::sqrt(2.0) * s.h);
  QueryResult out;
  if (found) out.distance = found->distance;
  out.queries = counter.used();
  return out;
}

/// CGBA's bracketing (psi_i = 90 - 90/2^i, true normal) followed by bssp().
inline QueryResult bssp_query(const ParabolicScenario& s, double eps, int max_inner_i = 20) {
  const ParabolicOracle2D oracle(s.p, s.h);
  QueryCounter counter;
  const Phi phi(oracle, Indicator::non_targeted(0), counter);
  const Point x_s = Point::Zero(2);
  const Point x_bt = s.boundary_point();
  const SemicircleFrame frame(x_s, x_bt, unit(s.normal()));
  std::optional<Direction> benign;
  for (int i = 1; i <= max_inner_i && !benign; ++i) {
    Direction zeta = search_direction(frame, cgba_multiplier(frame.theta(), i));
    if (phi(semicircle_point(frame, zeta)) == -1) benign = std::move(zeta);
  }
  const Direction zeta_c = benign ? *benign : frame.perpendicular();
  const BoundaryPoint bp = bssp_arc(x_s, x_bt, zeta_c, frame.v_hat(), phi, SearchTolerance(eps));
  return {bp.distance, counter.used()};
}

// ---------------------------------------------------------------------------

struct SweepRow {
  double delta_deg = 0.0;
  double p = 0.0;
  double r_bsnv = std::numeric_limits<double>::quiet_NaN();
  double r_bssp = std::numeric_limits<double>::quiet_NaN();
  std::string bsnv_status;  // found | diverges | not_found | no_boundary | error
  // cross-check columns (NaN when not run)
  double q_bsnv = std::numeric_limits<double>::quiet_NaN();
  double q_bssp = std::numeric_limits<double>::quiet_NaN();
  bool agrees = true;
};

/// n log-spaced values in [lo, hi].
inline std::vector<double> log_grid(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi >= lo) || n < 1) throw InvalidConfig("log grid needs 0 < lo <= hi and n >= 1");
  std::vector<double> out;
  if (n == 1) return {lo};
  for (int i = 0; i < n; ++i) out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
  return out;
}

struct SweepOptions {
  bool cross_check = false;
  double eps = 1e-4;
};

/// Evaluates both analytic solvers on every (delta, p) cell. With
/// cross_check, also runs the query-based searches and marks cells where
/// they disagree with the closed form by more than 10 eps.
inline std::vector<SweepRow> sweep(double h, const std::vector<double>& deltas_deg, const std::vector<double>& p_grid,
                                   const SweepOptions& opt = {}) {
  if (deltas_deg.empty() || p_grid.empty()) throw InvalidConfig("sweep grids must be non-empty");
  std::vector<SweepRow> rows;
  for (double d_deg : deltas_deg) {
    for (double p : p_grid) {
      SweepRow row;
      row.delta_deg = d_deg;
      row.p = p;
      try {
        const auto s = ParabolicScenario::make(p, h, deg_to_rad(d_deg));
        const auto bsnv_sol = bsnv_analytic(s);
        row.bsnv_status = to_string(bsnv_sol.status);
        if (bsnv_sol.status != BsnvStatus::kNotFound) row.r_bsnv = bsnv_sol.point.distance();
        row.r_bssp = bssp_analytic(s).distance();
        if (opt.cross_check) {
          const double tol = 10.0 * opt.eps;
          const auto qn = bsnv_query(s, opt.eps);
          const auto qs = bssp_query(s, opt.eps);
          if (qn.distance) row.q_bsnv = *qn.distance;
          if (qs.distance) row.q_bssp = *qs.distance;
          const bool bsnv_ok = (bsnv_sol.status == BsnvStatus::kNotFound)
                                   ? !qn.distance
                                   : (qn.distance && std::abs(*qn.distance - row.r_bsnv) <= tol);
          const bool bssp_ok = qs.distance && std::abs(*qs.distance - row.r_bssp) <= tol;
          row.agrees = bsnv_ok && bssp_ok;
        }
      } catch (const NoBoundaryInDirection&) {
        row.bsnv_status = "no_boundary";
      } catch (const Error&) {
        row.bsnv_status = "error";
      }
      rows.push_back(row);
    }
  }
  return rows;
}

inline std::string format_sig9(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

/// CSV with header delta_deg,p,r_bsnv,r_bssp,bsnv_status; 9 significant digits.
inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "delta_deg,p,r_bsnv,r_bssp,bsnv_status\n";
  for (const auto& r : rows) {
    out << format_sig9(r.delta_deg) << ',' << format_sig9(r.p) << ',' << format_sig9(r.r_bsnv) << ','
        << format_sig9(r.r_bssp) << ',' << r.bsnv_status << '\n';
  }
}

}  // namespace cgba::theory

#endif  // CGBA_THEORY_HPP
