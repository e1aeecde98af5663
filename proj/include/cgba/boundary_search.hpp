#ifndef CGBA_BOUNDARY_SEARCH_HPP
#define CGBA_BOUNDARY_SEARCH_HPP

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "cgba/errors.hpp"
#include "cgba/geometry.hpp"
#include "cgba/oracle.hpp"

namespace cgba {

/// l2 stopping tolerance shared by all boundary searches.
struct SearchTolerance {
  double epsilon = 1e-4;

  explicit SearchTolerance(double eps = 1e-4) : epsilon(eps) {
    if (!(eps > 0.0)) throw InvalidConfig("search tolerance must be > 0");
  }
};

/// An adversarial point within epsilon (along the search path) of a benign one.
struct BoundaryPoint {
  Point point;
  double distance = 0.0;  // ||point - source||

  static BoundaryPoint at(const Point& source, Point p) {
    const double d = (p - source).norm();
    return {std::move(p), d};
  }
};

/// Geometric radius expansion: r0, 2 r0, 4 r0, ... capped at r_max.
struct RadiusSchedule {
  double initial = 0.1;
  double growth = 2.0;
  double max = 0.0;

  static RadiusSchedule for_dims(Eigen::Index n) { return {0.1, 2.0, 4.0 * std::sqrt(static_cast<double>(n))}; }
};

/// Bisection on the segment [x_s, x_adv]. x_s is benign and x_adv adversarial
/// by precondition; neither is queried.
inline BoundaryPoint binary_search_ray(const Point& x_s, const Point& x_adv, const Phi& phi,
                                       const SearchTolerance& tol) {
  const Eigen::VectorXd span = x_adv - x_s;
  const double len = span.norm();
  if (!(len > 0.0)) throw InvalidInput("binary search needs x_adv != x_s");
  double lo = 0.0, hi = 1.0;
  while ((hi - lo) * len > tol.epsilon) {
    const double mid = 0.5 * (lo + hi);
    if (phi(x_s + mid * span) == +1) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  if (hi == 1.0) return {x_adv, len};
  return BoundaryPoint::at(x_s, x_s + hi * span);
}

namespace detail {

/// Expands along x_s + r * dir and returns the first adversarial radius.
inline std::optional<double> expand_until_adversarial(const Point& x_s, const Direction& dir, const Phi& phi,
                                                      const RadiusSchedule& sched) {
  if (!(sched.initial > 0.0) || !(sched.growth > 1.0) || !(sched.max > 0.0)) {
    throw InvalidConfig("radius schedule needs initial > 0, growth > 1, max > 0");
  }
  double r = std::min(sched.initial, sched.max);
  while (true) {
    if (phi(x_s + r * dir.vec()) == +1) return r;
    if (r >= sched.max) return std::nullopt;
    r = std::min(r * sched.growth, sched.max);
  }
}

}  // namespace detail

/// Smallest-radius adversarial point along `theta` from x_s, located by
/// geometric expansion followed by bisection.
inline BoundaryPoint initial_radius_search(const Point& x_s, const Direction& theta, const Phi& phi,
                                           const SearchTolerance& tol, const RadiusSchedule& sched) {
  const auto r = detail::expand_until_adversarial(x_s, theta, phi, sched);
  if (!r) throw NoAdversarialFound();
  return binary_search_ray(x_s, x_s + *r * theta.vec(), phi, tol);
}

inline BoundaryPoint initial_radius_search(const Point& x_s, const Direction& theta, const Phi& phi,
                                           const SearchTolerance& tol = SearchTolerance{}) {
  return initial_radius_search(x_s, theta, phi, tol, RadiusSchedule::for_dims(x_s.size()));
}

/// Boundary search along the semicircle of diameter [x_s, x_bt], between
/// the benign direction zeta_c and the adversarial direction zeta_adv.
/// Neither end point is queried; the first query is at the bisecting direction.
inline BoundaryPoint bssp_arc(const Point& x_s, const Point& x_bt, Direction zeta_c, Direction zeta_adv,
                              const Phi& phi, const SearchTolerance& tol) {
  const Eigen::VectorXd chord = x_bt - x_s;
  const double radius = chord.norm();
  if (!(radius > 0.0)) throw InvalidInput("bssp needs x_bt != x_s");
  const Eigen::VectorXd v_hat = chord / radius;
  auto offset = [&](const Direction& z) -> Eigen::VectorXd {
    return (radius * std::clamp(z.dot(v_hat), 0.0, 1.0)) * z.vec();
  };

  bool moved = false;
  for (int iter = 0; (offset(zeta_adv) - offset(zeta_c)).norm() > tol.epsilon; ++iter) {
    if (iter > 200) throw NumericalFailure("bssp failed to converge");
    Direction zeta_r = unit(zeta_c.vec() + zeta_adv.vec());
    if (phi(x_s + offset(zeta_r)) == +1) {
      zeta_adv = std::move(zeta_r);
      moved = true;
    } else {
      zeta_c = std::move(zeta_r);
    }
  }
  if (!moved) return {x_bt, radius};
  return BoundaryPoint::at(x_s, x_s + offset(zeta_adv));
}

/// BSSP between a benign semicircle point x_c and the adversarial anchor x_bt.
inline BoundaryPoint bssp(const Point& x_s, const Point& x_c, const Point& x_bt, const Phi& phi,
                          const SearchTolerance& tol) {
  if ((x_c - x_bt).norm() == 0.0) throw InvalidInput("bssp needs x_c != x_bt");
  if ((x_c - x_s).norm() == 0.0 || (x_bt - x_s).norm() == 0.0) {
    throw InvalidInput("bssp end points must differ from the source");
  }
  return bssp_arc(x_s, x_bt, unit(x_c - x_s), unit(x_bt - x_s), phi, tol);
}

/// Binary search along the estimated normal from the source. Returns nullopt
/// when no adversarial point exists along eta within r_max.
inline std::optional<BoundaryPoint> bsnv(const Point& x_s, const Point& x_bt, const Direction& eta_hat,
                                         const Phi& phi, const SearchTolerance& tol, double r_max) {
  const double r_t = (x_bt - x_s).norm();
  RadiusSchedule sched{r_t > 0.0 ? r_t / 8.0 : 0.1, 2.0, r_max};
  const auto r = detail::expand_until_adversarial(x_s, eta_hat, phi, sched);
  if (!r) return std::nullopt;
  return binary_search_ray(x_s, x_s + *r * eta_hat.vec(), phi, tol);
}

/// K-direction initialisation: bisect towards the first target, then probe each
/// further direction once at the current best radius and only bisect when
/// that probe is adversarial.
inline BoundaryPoint initialize_targeted(const Point& x_s, std::span<const Point> targets, const Phi& phi,
                                         const SearchTolerance& tol) {
  if (targets.empty()) throw InvalidInput("initialisation needs at least one target point");
  BoundaryPoint best = binary_search_ray(x_s, targets.front(), phi, tol);
  for (size_t i = 1; i < targets.size(); ++i) {
    const Eigen::VectorXd dir = targets[i] - x_s;
    if (dir.norm() == 0.0) continue;
    const Point probe = x_s + best.distance * unit(dir).vec();
    if (phi(probe) != +1) continue;
    BoundaryPoint candidate = binary_search_ray(x_s, probe, phi, tol);
    if (candidate.distance < best.distance) best = std::move(candidate);
  }
  return best;
}

}  // namespace cgba

#endif  // CGBA_BOUNDARY_SEARCH_HPP
