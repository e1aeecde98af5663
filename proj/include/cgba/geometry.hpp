#ifndef CGBA_GEOMETRY_HPP
#define CGBA_GEOMETRY_HPP

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Core>

#include "cgba/errors.hpp"

namespace cgba {

/// A sample in input space. Image oracles expect components in [0,1];
/// analytic oracles accept any finite coordinates.
using Point = Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

inline bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

/// Unit-norm vector. The only way to build one is through unit(), so every
/// Direction in circulation satisfies ||coords|| = 1 up to rounding.
class Direction {
 public:
  const Eigen::VectorXd& vec() const { return coords_; }
  Eigen::Index size() const { return coords_.size(); }
  double dot(const Direction& other) const { return coords_.dot(other.coords_); }
  double dot(const Eigen::VectorXd& other) const { return coords_.dot(other); }
  Direction operator-() const { return Direction(-coords_); }

  friend Direction unit(const Eigen::VectorXd& v);

 private:
  explicit Direction(Eigen::VectorXd coords) : coords_(std::move(coords)) {}
  Eigen::VectorXd coords_;
};

inline Direction unit(const Eigen::VectorXd& v) {
  const double norm = v.norm();
  if (!(norm >= 1e-30) || !std::isfinite(norm)) throw ZeroVector();
  return Direction(v / norm);
}

/// Angle between two non-zero vectors. Uses atan2 of the rejection and the
/// projection, which stays accurate for nearly parallel inputs where acos
/// loses half its digits.
inline double angle_between(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na < 1e-30 || nb < 1e-30) throw ZeroVector();
  const Eigen::VectorXd ua = a / na;
  const Eigen::VectorXd ub = b / nb;
  const double c = ua.dot(ub);
  const double s = (ub - c * ua).norm();
  return std::atan2(s, c);
}

/// The 2-plane through the source spanned by v_hat (towards the current
/// boundary point) and eta_hat (estimated boundary normal), together with
/// the circle of diameter [source, anchor] that every query lies on.
class SemicircleFrame {
 public:
  /// Throws InvalidInput when anchor coincides with source. When eta is
  /// numerically parallel to v_hat the plane is completed with the first
  /// coordinate axis that is not parallel to v_hat (Gram-Schmidt).
  SemicircleFrame(Point source, Point anchor, const Direction& eta)
      : source_(std::move(source)),
        anchor_(std::move(anchor)),
        v_hat_(unit_or_invalid(anchor_ - source_)),
        eta_hat_(eta),
        perp_(eta) {
    if (source_.size() != anchor_.size() || eta.size() != source_.size()) {
      throw InvalidInput("frame dimension mismatch");
    }
    radius_ = (anchor_ - source_).norm();
    const double c = v_hat_.dot(eta_hat_);
    if (std::abs(c) > 1.0 - 1e-12) {
      eta_hat_ = complete_against(v_hat_);
    }
    theta_ = std::acos(std::clamp(v_hat_.dot(eta_hat_), -1.0, 1.0));
    perp_ = unit(eta_hat_.vec() - v_hat_.dot(eta_hat_) * v_hat_.vec());
  }

  const Point& source() const { return source_; }
  const Point& anchor() const { return anchor_; }
  double radius_chord() const { return radius_; }
  const Direction& v_hat() const { return v_hat_; }
  const Direction& eta_hat() const { return eta_hat_; }
  /// Unit vector in the plane, orthogonal to v_hat, on the eta side.
  const Direction& perpendicular() const { return perp_; }
  double theta() const { return theta_; }

  /// In-plane direction at angle psi from v_hat, rotated towards eta.
  Direction direction_at(double psi) const {
    return unit(std::cos(psi) * v_hat_.vec() + std::sin(psi) * perp_.vec());
  }

 private:
  static Direction unit_or_invalid(const Eigen::VectorXd& v) {
    try {
      return unit(v);
    } catch (const ZeroVector&) {
      throw InvalidInput("semicircle frame needs anchor != source");
    }
  }

  static Direction complete_against(const Direction& v) {
    const Eigen::Index n = v.size();
    for (Eigen::Index k = 0; k < n; ++k) {
      if (std::abs(v.vec()[k]) > 1.0 - 1e-12) continue;
      Eigen::VectorXd axis = Eigen::VectorXd::Zero(n);
      axis[k] = 1.0;
      return unit(axis - v.dot(axis) * v.vec());
    }
    throw InvalidInput("cannot complete a 2-plane in one dimension");
  }

  Point source_;
  Point anchor_;
  Direction v_hat_;
  Direction eta_hat_;
  Direction perp_;
  double radius_ = 0.0;
  double theta_ = 0.0;
};

/// (eta + m v) / ||eta + m v||.
inline Direction search_direction(const SemicircleFrame& frame, double m) {
  return unit(frame.eta_hat().vec() + m * frame.v_hat().vec());
}

/// Query point on the semicircle in direction zeta:
/// source + ||anchor - source|| (zeta . v_hat) zeta.
inline Point semicircle_point(const SemicircleFrame& frame, const Direction& zeta) {
  double c = zeta.dot(frame.v_hat());
  if (c < -1e-12) throw OutOfHemisphere();
  c = std::clamp(c, 0.0, 1.0);
  return frame.source() + (frame.radius_chord() * c) * zeta.vec();
}

namespace detail {
inline void check_multiplier_args(double theta, int i) {
  if (!(theta > 0.0 && theta < kPi)) throw InvalidInput("theta_t must lie in (0, pi)");
  if (i < 1) throw InvalidInput("multiplier index i must be >= 1");
}
}  // namespace detail

/// Search angle used by the CGBA inner loop: 90deg - 90deg / 2^i.
inline double cgba_search_angle(int i) { return kPi / 2.0 - (kPi / 2.0) / std::ldexp(1.0, i); }

/// m_i placing the search direction at cgba_search_angle(i) from v_hat.
inline double cgba_multiplier(double theta, int i) {
  detail::check_multiplier_args(theta, i);
  return std::sin(theta) / std::tan(cgba_search_angle(i)) - std::cos(theta);
}

/// m_i placing the search direction at theta / 2^i from v_hat.
inline double cgbah_multiplier(double theta, int i) {
  detail::check_multiplier_args(theta, i);
  return std::sin(theta) / std::tan(theta / std::ldexp(1.0, i)) - std::cos(theta);
}

}  // namespace cgba

#endif  // CGBA_GEOMETRY_HPP
