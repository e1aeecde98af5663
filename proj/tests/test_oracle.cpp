#include <cstdio>
#include <atomic>
#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "cgba/blob_mlp.hpp"
#include "cgba/oracle.hpp"

using namespace cgba;

namespace {

Eigen::VectorXd v2(double a, double b) { return Eigen::Vector2d(a, b); }

/// Labels by the first coordinate and remembers the last point it saw.
class RecordingOracle final : public DecisionOracle {
 public:
  Label classify(const Point& x) const override {
    last = x;
    return x[0] >= 1.0 ? 1 : 0;
  }
  Eigen::Index dims() const override { return 2; }
  Label classes() const override { return 2; }
  mutable Point last;
};

const BlobMlpOracle& default_blob() {
  static const BlobMlpOracle oracle = BlobMlpOracle::train(BlobTask{});
  return oracle;
}

}  // namespace

TEST(Indicator, NonTargetedSameLabelIsMinusOne) { EXPECT_EQ(Indicator::non_targeted(3).evaluate(3), -1); }
TEST(Indicator, NonTargetedOtherLabelIsPlusOne) { EXPECT_EQ(Indicator::non_targeted(3).evaluate(1), +1); }
TEST(Indicator, TargetedHitIsPlusOne) { EXPECT_EQ(Indicator::targeted(2).evaluate(2), +1); }
TEST(Indicator, TargetedMissIsMinusOne) { EXPECT_EQ(Indicator::targeted(2).evaluate(0), -1); }

TEST(Phi, CountsEveryCall) {
  const HalfSpaceOracle o(unit(v2(1, 0)), 0.5);
  QueryCounter counter(10);
  const Phi phi(o, Indicator::non_targeted(0), counter);
  EXPECT_EQ(phi(v2(0, 0)), -1);
  EXPECT_EQ(phi(v2(1, 0)), +1);
  EXPECT_EQ(counter.used(), 2u);
  EXPECT_EQ(counter.remaining(), 8u);
}

TEST(Phi, ZeroBudgetThrows) {
  const HalfSpaceOracle o(unit(v2(1, 0)), 0.5);
  QueryCounter counter(0);
  const Phi phi(o, Indicator::non_targeted(0), counter);
  EXPECT_THROW(phi(v2(0, 0)), BudgetExhausted);
  EXPECT_EQ(counter.used(), 0u);
}

TEST(QueryCounter, NeverExceedsBudgetUnderContention) {
  QueryCounter counter(1000);
  std::vector<std::thread> threads;
  std::atomic<int> refused{0};
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 400; ++i) {
        try {
          counter.consume();
        } catch (const BudgetExhausted&) {
          ++refused;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(counter.used(), 1000u);
  EXPECT_EQ(refused.load(), 600);
}

TEST(ClipAdapter, ClampsUpperAndLower) {
  auto inner = std::make_shared<RecordingOracle>();
  const auto clipped = clip_adapter(inner);
  const Point x = v2(1.3, -0.2);
  clipped->classify(x);
  EXPECT_EQ(inner->last[0], 1.0);
  EXPECT_EQ(inner->last[1], 0.0);
  EXPECT_EQ(x[0], 1.3);  // caller's point untouched
}

TEST(ClipAdapter, IdentityInsideUnitCube) {
  const auto& blob = default_blob();
  auto shared = std::make_shared<BlobMlpOracle>(blob);
  const auto clipped = clip_adapter(shared);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    Point x(16);
    for (auto& v : x) v = u(rng);
    EXPECT_EQ(clipped->classify(x), blob.classify(x));
  }
}

TEST(ClipAdapter, Idempotent) {
  auto shared = std::make_shared<BlobMlpOracle>(default_blob());
  const auto once = clip_adapter(shared);
  const auto twice = clip_adapter(once);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-0.5, 1.5);
  for (int i = 0; i < 1000; ++i) {
    Point x(16);
    for (auto& v : x) v = u(rng);
    ASSERT_EQ(once->classify(x), twice->classify(x));
  }
}

TEST(HalfSpace, SignFlipsExactlyAtPlane) {
  const Direction n = unit(Eigen::Vector3d(1, 2, 2));
  const HalfSpaceOracle o(n, 0.7);
  QueryCounter counter;
  const Phi phi(o, Indicator::non_targeted(0), counter);
  double lo = 0.0, hi = 5.0;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    (phi(mid * n.vec()) == +1 ? hi : lo) = mid;
  }
  EXPECT_NEAR(hi, 0.7, 1e-9);
  EXPECT_NEAR(o.distance(Eigen::Vector3d::Zero()), 0.7, 1e-15);
}

TEST(Parabola, LabelsFromBoundaryEquation) {
  const ParabolicOracle2D o(1.0, 1.0);
  EXPECT_EQ(parabolic_label(o, 0.0, 1.0), 1u);
  EXPECT_EQ(parabolic_label(o, 0.0, 0.999), 0u);
  EXPECT_EQ(parabolic_label(o, 2.0, 2.0), 1u);
  EXPECT_EQ(o.classify(v2(2.0, 1.99)), 0u);
}

TEST(Parabola, EmbeddingMatchesPlaneLabels) {
  Point origin = Eigen::VectorXd::Zero(5);
  origin[4] = 0.3;
  Eigen::VectorXd ex = Eigen::VectorXd::Zero(5), ey = Eigen::VectorXd::Zero(5);
  ex[1] = 1.0;
  ey[3] = 1.0;
  const ParabolicOracle2D o(2.0, 0.5, {origin, unit(ex), unit(ey)});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const double x = u(rng), y = u(rng);
    EXPECT_EQ(o.classify(o.embed(x, y)), o.label_at(x, y));
  }
  EXPECT_EQ(o.dims(), 5);
}

TEST(Parabola, RejectsNonPositiveP) { EXPECT_THROW(ParabolicOracle2D(0.0, 1.0), InvalidConfig); }

TEST(NarrowCone, AxisInsideApexOutsideOffAxisBenign) {
  const Direction axis = unit(Eigen::Vector3d(0, 0, 1));
  const NarrowConeOracle o(Eigen::Vector3d(0, 0, 1), axis, deg_to_rad(5.0));
  EXPECT_EQ(o.classify(Eigen::Vector3d(0, 0, 2)), 1u);
  EXPECT_EQ(o.classify(Eigen::Vector3d(0, 0, 1)), 1u);
  EXPECT_EQ(o.classify(Eigen::Vector3d(0.1, 0, 2)), 0u);  // tan 5.7 deg > tan 5 deg
  EXPECT_EQ(o.classify(Eigen::Vector3d(0.08, 0, 2)), 1u);
  EXPECT_EQ(o.classify(Eigen::Vector3d(0, 0, 0)), 0u);
}

TEST(Paraboloid, LabelsFromBoundaryEquation) {
  const ParaboloidOracle o(unit(Eigen::Vector3d(0, 0, 1)), 2.0, 1.0);
  EXPECT_EQ(o.classify(Eigen::Vector3d(0, 0, 1)), 1u);
  EXPECT_EQ(o.classify(Eigen::Vector3d(0, 0, 0.99)), 0u);
  EXPECT_EQ(o.classify(Eigen::Vector3d(2, 2, 2)), 1u);  // 8/8 + 1
  EXPECT_EQ(o.classify(Eigen::Vector3d(2, 2, 1.99)), 0u);
}

TEST(CountingOracle, CountsRawCalls) {
  auto counted = std::make_shared<CountingOracle>(std::make_shared<HalfSpaceOracle>(unit(v2(1, 0)), 0.0));
  for (int i = 0; i < 7; ++i) counted->classify(v2(i, 0));
  EXPECT_EQ(counted->calls(), 7u);
}

TEST(BlobMlp, PrototypesAndProbeLabelsMatchIndependentEvaluation) {
  // Labels computed offline with numpy from the saved weights of the default task.
  const auto& o = default_blob();
  ASSERT_EQ(o.prototypes().size(), 4u);
  for (Label c = 0; c < 4; ++c) EXPECT_EQ(o.classify(o.prototypes()[c]), c);
  const std::vector<Label> expected{2, 2, 2, 0, 0};
  const double levels[] = {0.1, 0.3, 0.5, 0.7, 0.9};
  for (int i = 0; i < 5; ++i) EXPECT_EQ(o.classify(Eigen::VectorXd::Constant(16, levels[i])), expected[i]);
}

TEST(BlobMlp, TrainingIsDeterministic) {
  const BlobMlpOracle again = BlobMlpOracle::train(BlobTask{});
  EXPECT_EQ(again.weights().w1, default_blob().weights().w1);
  EXPECT_EQ(again.weights().b2, default_blob().weights().b2);
}

TEST(BlobMlp, SaveLoadRoundTrip) {
  const std::string path = ::testing::TempDir() + "blob_roundtrip.json";
  default_blob().save(path);
  const BlobMlpOracle loaded = BlobMlpOracle::load(path);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    Point x(16);
    for (auto& v : x) v = u(rng);
    ASSERT_EQ(loaded.classify(x), default_blob().classify(x));
  }
  EXPECT_EQ(loaded.prototypes().size(), 4u);
  std::remove(path.c_str());
}

TEST(BlobMlp, SampleClassIsCorrectlyClassified) {
  for (Label c = 0; c < 4; ++c) {
    for (const auto& x : default_blob().sample_class(c, 10, 99)) {
      EXPECT_EQ(default_blob().classify(x), c);
      EXPECT_TRUE((x.array() >= 0.0).all() && (x.array() <= 1.0).all());
    }
  }
}

TEST(BlobMlp, DimensionMismatchRejected) { EXPECT_THROW(default_blob().classify(v2(0.5, 0.5)), InvalidInput); }
