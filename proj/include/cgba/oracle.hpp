#ifndef CGBA_ORACLE_HPP
#define CGBA_ORACLE_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "cgba/errors.hpp"
#include "cgba/geometry.hpp"

namespace cgba {

using Label = std::uint32_t;

/// Hard-label classifier: returns only the top-1 class of a point.
/// Implementations must be deterministic and safe for concurrent classify calls.
class DecisionOracle {
 public:
  virtual ~DecisionOracle() = default;
  virtual Label classify(const Point& x) const = 0;
  virtual Eigen::Index dims() const = 0;
  virtual Label classes() const = 0;
  /// True for oracles over images in [0,1]^n, which the engine queries through a clip adapter.
  virtual bool is_image() const { return false; }
};

/// The +1/-1 adversarial test.
struct Indicator {
  enum class Mode { kNonTargeted, kTargeted };
  Mode mode = Mode::kNonTargeted;
  Label label = 0;  // source label (non-targeted) or target label (targeted)

  static Indicator non_targeted(Label source) { return {Mode::kNonTargeted, source}; }
  static Indicator targeted(Label target) { return {Mode::kTargeted, target}; }

  int evaluate(Label predicted) const {
    const bool adversarial = mode == Mode::kNonTargeted ? predicted != label : predicted == label;
    return adversarial ? +1 : -1;
  }
};

/// Monotone query counter with an optional budget. consume() is atomic and
/// never lets `used` exceed the budget.
class QueryCounter {
 public:
  static constexpr std::uint64_t kUnlimited = std::numeric_limits<std::uint64_t>::max();

  explicit QueryCounter(std::uint64_t budget = kUnlimited) : budget_(budget) {}
  QueryCounter(const QueryCounter&) = delete;
  QueryCounter& operator=(const QueryCounter&) = delete;

  void consume() {
    std::uint64_t cur = used_.load(std::memory_order_relaxed);
    do {
      if (cur >= budget_) throw BudgetExhausted();
    } while (!used_.compare_exchange_weak(cur, cur + 1, std::memory_order_relaxed));
  }

  std::uint64_t used() const { return used_.load(std::memory_order_relaxed); }
  std::uint64_t budget() const { return budget_; }
  bool unlimited() const { return budget_ == kUnlimited; }
  std::uint64_t remaining() const { return budget_ - used(); }
  bool can_afford(std::uint64_t k) const { return remaining() >= k; }

 private:
  std::atomic<std::uint64_t> used_{0};
  std::uint64_t budget_;
};

/// An oracle bound to an indicator and a counter: the phi(.) used by every search.
class Phi {
 public:
  Phi(const DecisionOracle& oracle, Indicator indicator, QueryCounter& counter)
      : oracle_(&oracle), indicator_(indicator), counter_(&counter) {}

  int operator()(const Point& x) const {
    counter_->consume();
    return indicator_.evaluate(oracle_->classify(x));
  }

  const DecisionOracle& oracle() const { return *oracle_; }
  const Indicator& indicator() const { return indicator_; }
  QueryCounter& counter() const { return *counter_; }

 private:
  const DecisionOracle* oracle_;
  Indicator indicator_;
  QueryCounter* counter_;
};

/// Clamps every query to [0,1]^n before forwarding it. The caller's point is not modified.
class ClipAdapter final : public DecisionOracle {
 public:
  explicit ClipAdapter(std::shared_ptr<const DecisionOracle> inner) : inner_(std::move(inner)) {}

  Label classify(const Point& x) const override {
    if ((x.array() >= 0.0).all() && (x.array() <= 1.0).all()) return inner_->classify(x);
    return inner_->classify(x.cwiseMax(0.0).cwiseMin(1.0));
  }
  Eigen::Index dims() const override { return inner_->dims(); }
  Label classes() const override { return inner_->classes(); }
  bool is_image() const override { return inner_->is_image(); }

 private:
  std::shared_ptr<const DecisionOracle> inner_;
};

inline std::shared_ptr<const DecisionOracle> clip_adapter(std::shared_ptr<const DecisionOracle> oracle) {
  return std::make_shared<ClipAdapter>(std::move(oracle));
}

/// Counts raw classify calls; used to audit that traces report every query.
class CountingOracle final : public DecisionOracle {
 public:
  explicit CountingOracle(std::shared_ptr<const DecisionOracle> inner) : inner_(std::move(inner)) {}

  Label classify(const Point& x) const override {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return inner_->classify(x);
  }
  Eigen::Index dims() const override { return inner_->dims(); }
  Label classes() const override { return inner_->classes(); }
  bool is_image() const override { return inner_->is_image(); }
  std::uint64_t calls() const { return calls_.load(); }

 private:
  std::shared_ptr<const DecisionOracle> inner_;
  mutable std::atomic<std::uint64_t> calls_{0};
};

// ---------------------------------------------------------------------------
// Analytic oracles. Label 1 is the adversarial side; points exactly on the
// boundary are adversarial.

/// Label 1 iff x . normal >= offset.
class HalfSpaceOracle final : public DecisionOracle {
 public:
  HalfSpaceOracle(Direction normal, double offset) : normal_(std::move(normal)), offset_(offset) {}

  Label classify(const Point& x) const override { return normal_.dot(x) >= offset_ ? 1 : 0; }
  Eigen::Index dims() const override { return normal_.size(); }
  Label classes() const override { return 2; }

  const Direction& normal() const { return normal_; }
  double offset() const { return offset_; }
  /// Distance from x to the hyperplane.
  double distance(const Point& x) const { return std::abs(normal_.dot(x) - offset_); }

 private:
  Direction normal_;
  double offset_;
};

/// Boundary y = x^2/(4p) + h in a 2-D plane embedded in n-space.
/// Adversarial iff y >= x^2/(4p) + h.
class ParabolicOracle2D final : public DecisionOracle {
 public:
  struct Embedding {
    Point origin;
    Direction x_axis;
    Direction y_axis;
  };

  ParabolicOracle2D(double p, double h) : ParabolicOracle2D(p, h, identity_embedding()) {}

  ParabolicOracle2D(double p, double h, Embedding embedding) : p_(p), h_(h), emb_(std::move(embedding)) {
    if (!(p > 0.0)) throw InvalidConfig("parabola needs p > 0");
    if (std::abs(emb_.x_axis.dot(emb_.y_axis)) > 1e-9) throw InvalidConfig("embedding axes must be orthogonal");
  }

  static Embedding identity_embedding() {
    return {Point::Zero(2), unit(Eigen::Vector2d(1.0, 0.0)), unit(Eigen::Vector2d(0.0, 1.0))};
  }

  /// Label of analytic plane coordinates (x, y).
  Label label_at(double x, double y) const { return y >= x * x / (4.0 * p_) + h_ ? 1 : 0; }

  Label classify(const Point& pt) const override {
    const Eigen::VectorXd rel = pt - emb_.origin;
    return label_at(emb_.x_axis.dot(rel), emb_.y_axis.dot(rel));
  }
  Eigen::Index dims() const override { return emb_.origin.size(); }
  Label classes() const override { return 2; }

  double p() const { return p_; }
  double h() const { return h_; }
  const Embedding& embedding() const { return emb_; }

  /// Unit normal of the boundary at plane abscissa x, pointing into the adversarial side.
  Eigen::Vector2d plane_normal_at(double x) const { return Eigen::Vector2d(-x / (2.0 * p_), 1.0).normalized(); }

  Point embed(double x, double y) const { return emb_.origin + x * emb_.x_axis.vec() + y * emb_.y_axis.vec(); }

 private:
  double p_;
  double h_;
  Embedding emb_;
};

inline Label parabolic_label(const ParabolicOracle2D& oracle, double x, double y) { return oracle.label_at(x, y); }

/// Adversarial region is a circular cone with apex `apex`, axis `axis` and
/// the given half-angle. A highly curved boundary near the apex.
class NarrowConeOracle final : public DecisionOracle {
 public:
  NarrowConeOracle(Point apex, Direction axis, double half_angle)
      : apex_(std::move(apex)), axis_(std::move(axis)), cos_half_(std::cos(half_angle)), half_angle_(half_angle) {
    if (!(half_angle > 0.0 && half_angle < kPi / 2)) throw InvalidConfig("cone half-angle must be in (0, pi/2)");
  }

  Label classify(const Point& x) const override {
    const Eigen::VectorXd rel = x - apex_;
    const double along = axis_.dot(rel);
    if (along < 0.0) return 0;
    const double norm = rel.norm();
    return along >= cos_half_ * norm ? 1 : 0;
  }
  Eigen::Index dims() const override { return apex_.size(); }
  Label classes() const override { return 2; }

  const Point& apex() const { return apex_; }
  const Direction& axis() const { return axis_; }
  double half_angle() const { return half_angle_; }

 private:
  Point apex_;
  Direction axis_;
  double cos_half_;
  double half_angle_;
};

/// n-dimensional paraboloid: adversarial iff x.axis >= |x_perp|^2/(4p) + h,
/// where x_perp is the component of x orthogonal to axis. Large p gives a
/// gently curved, nearly flat boundary.
class ParaboloidOracle final : public DecisionOracle {
 public:
  ParaboloidOracle(Direction axis, double p, double h) : axis_(std::move(axis)), p_(p), h_(h) {
    if (!(p > 0.0)) throw InvalidConfig("paraboloid needs p > 0");
  }

  Label classify(const Point& x) const override {
    const double along = axis_.dot(x);
    const double perp2 = (x - along * axis_.vec()).squaredNorm();
    return along >= perp2 / (4.0 * p_) + h_ ? 1 : 0;
  }
  Eigen::Index dims() const override { return axis_.size(); }
  Label classes() const override { return 2; }

  const Direction& axis() const { return axis_; }
  double p() const { return p_; }
  double h() const { return h_; }

 private:
  Direction axis_;
  double p_;
  double h_;
};

}  // namespace cgba

#endif  // CGBA_ORACLE_HPP
