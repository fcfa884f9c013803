#include "qnewt/qspace.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "qnewt/error.hpp"
#include "qnewt/euclidean.hpp"

namespace qnewt {
namespace {

/// Asymmetric toy quasi-metric on the line: moving right costs the plain
/// gap, moving left costs twice the gap. Satisfies QMS1-3, not symmetry.
struct UphillLine {
  using Point = double;
  double distance(double a, double b) const {
    return b >= a ? b - a : 2.0 * (a - b);
  }
};

TEST(Ball, MembershipTestsCandidateAgainstCenter) {
  UphillLine space;
  Ball<UphillLine> ball{0.0, 1.0, false};
  // distance(candidate, center): 0.9 -> 0 costs 1.8 (leftward), outside;
  // -0.45 -> 0 costs 0.45 (rightward), inside. The reversed convention would
  // flip both answers.
  EXPECT_FALSE(ball.contains(space, 0.9));
  EXPECT_TRUE(ball.contains(space, -0.45));
}

TEST(Ball, ClosedBallIncludesBoundary) {
  UphillLine space;
  Ball<UphillLine> open{0.0, 1.0, false};
  Ball<UphillLine> closed{0.0, 1.0, true};
  EXPECT_FALSE(open.contains(space, 0.5));   // distance exactly 1.0
  EXPECT_TRUE(closed.contains(space, 0.5));
}

TEST(SetDistances, PointToSetUsesInfimumInDeclaredOrder) {
  UphillLine space;
  const std::vector<double> set{1.0, -1.0};
  // dist_point_set: inf over a of distance(x, a); from x = 0 rightward to 1
  // costs 1, leftward to -1 costs 2.
  EXPECT_DOUBLE_EQ(dist_point_set(space, 0.0, set), 1.0);
  // dist_set_point: inf over a of distance(a, x); from 1 leftward to 0 costs
  // 2, from -1 rightward costs 1.
  EXPECT_DOUBLE_EQ(dist_set_point(space, set, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(dist_set_point(space, {1.0}, 0.0), 2.0);
}

TEST(SetDistances, EmptyOperandsThrow) {
  UphillLine space;
  const std::vector<double> empty;
  const std::vector<double> set{1.0};
  EXPECT_THROW(dist_point_set(space, 0.0, empty), Error);
  EXPECT_THROW(dist_set_point(space, empty, 0.0), Error);
  EXPECT_THROW(dist_set_set(space, empty, set), Error);
  EXPECT_THROW(dist_set_set(space, set, empty), Error);
}

TEST(SetDistances, SetToSetIsSymmetrizedSup) {
  EuclideanSpace space{1};
  const std::vector<Vector> a{scalar_point(0.0), scalar_point(1.0)};
  const std::vector<Vector> b{scalar_point(0.0)};
  // sup_a dist(a, B) = 1 (from the point 1); sup_b dist(A, b) = 0.
  EXPECT_DOUBLE_EQ(dist_set_set(space, a, b), 1.0);
}

TEST(SingletonCheck, RequiresStrictlyDecreasingPositiveRadii) {
  EuclideanSpace space{1};
  const std::vector<Vector> probes;
  EXPECT_THROW(
      ball_intersection_singleton_check(space, scalar_point(0.0), {}, probes), Error);
  EXPECT_THROW(
      ball_intersection_singleton_check(space, scalar_point(0.0), {1.0, 1.0}, probes),
      Error);
  EXPECT_THROW(
      ball_intersection_singleton_check(space, scalar_point(0.0), {1.0, -0.5}, probes),
      Error);
}

TEST(SingletonCheck, SurvivorInsideSmallestRadiusBreaksSingleton) {
  EuclideanSpace space{1};
  const std::vector<double> radii{1.0, 0.5, 0.25};
  const std::vector<Vector> far{scalar_point(0.3), scalar_point(-0.9)};
  const auto ok = ball_intersection_singleton_check(space, scalar_point(0.0), radii, far);
  EXPECT_TRUE(ok.singleton);
  EXPECT_DOUBLE_EQ(ok.min_radius, 0.25);

  const std::vector<Vector> close{scalar_point(0.2)};
  const auto bad =
      ball_intersection_singleton_check(space, scalar_point(0.0), radii, close);
  EXPECT_FALSE(bad.singleton);
  ASSERT_TRUE(bad.witness.has_value());
  EXPECT_DOUBLE_EQ((*bad.witness)[0], 0.2);
}

TEST(SingletonCheck, CenterRepresentativesDoNotCount) {
  EuclideanSpace space{1};
  const std::vector<Vector> probes{scalar_point(0.0)};  // the center itself
  const auto r = ball_intersection_singleton_check(space, scalar_point(0.0), {0.5}, probes);
  EXPECT_TRUE(r.singleton);
}

// --- classify_rate calibration --------------------------------------------

std::vector<double> geometric(double c, int n) {
  std::vector<double> d;
  double v = 1.0;
  for (int k = 0; k < n; ++k) {
    d.push_back(v);
    v *= c;
  }
  return d;
}

TEST(ClassifyRate, GeometricHalvingIsLinear) {
  const auto report = classify_rate(geometric(0.5, 30));
  EXPECT_EQ(report.classification, RateClass::linear);
  ASSERT_TRUE(report.c_bound.has_value());
  EXPECT_NEAR(*report.c_bound, 0.5, 1e-12);
}

TEST(ClassifyRate, QuadraticSequenceIsRateGamma) {
  std::vector<double> d;
  for (int k = 0; k < 8; ++k) d.push_back(std::pow(0.5, std::pow(2.0, k)));
  const auto report = classify_rate(d);
  ASSERT_TRUE(report.classification == RateClass::rate_gamma ||
              report.classification == RateClass::super_rate_gamma)
      << to_string(report.classification);
  ASSERT_TRUE(report.gamma_estimate.has_value());
  EXPECT_NEAR(*report.gamma_estimate, 2.0, 0.2);
}

TEST(ClassifyRate, FactorialDecayIsSuperlinear) {
  std::vector<double> d;
  double v = 1.0;
  for (int k = 0; k < 18; ++k) {
    d.push_back(v);
    v /= static_cast<double>(k + 1);
  }
  const auto report = classify_rate(d);
  EXPECT_EQ(report.classification, RateClass::superlinear) << to_string(report.classification);
}

TEST(ClassifyRate, GrowthIsDiverged) {
  const auto report = classify_rate(geometric(2.0, 12));
  EXPECT_EQ(report.classification, RateClass::diverged);
}

TEST(ClassifyRate, ConstantSequenceIsInconclusive) {
  const std::vector<double> d(10, 0.7);
  const auto report = classify_rate(d);
  EXPECT_EQ(report.classification, RateClass::inconclusive);
}

TEST(ClassifyRate, ZeroFloorTruncatesPrefix) {
  std::vector<double> d = geometric(0.5, 10);
  d.push_back(1e-16);      // below the floor: prefix ends here
  d.push_back(0.9);        // garbage after the floor must be ignored
  const auto report = classify_rate(d);
  EXPECT_EQ(report.used_entries, 10u);
  EXPECT_EQ(report.classification, RateClass::linear);
}

TEST(ClassifyRate, ShortSequencesThrowInsufficientData) {
  try {
    classify_rate({1.0, 0.5, 0.25});
    FAIL() << "expected insufficient_data";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::insufficient_data);
  }
}

TEST(ClassifyRate, NegativeEntriesThrow) {
  EXPECT_THROW(classify_rate({1.0, -0.5, 0.25, 0.1}), Error);
}

TEST(CauchyDefect, SumsRemainingSteps) {
  EXPECT_DOUBLE_EQ(cauchy_defect({1.0, 0.5, 0.25}), 1.75);
  EXPECT_DOUBLE_EQ(cauchy_defect({1.0, 0.5, 0.25}, 1), 0.75);
  EXPECT_DOUBLE_EQ(cauchy_defect({}, 0), 0.0);
}

// --- Lipschitz estimation --------------------------------------------------

TEST(Lipschitz, HalvingMapHasConstantHalf) {
  EuclideanSpace space{1};
  std::vector<std::pair<Vector, Vector>> pairs;
  for (int i = 0; i < 10; ++i)  // varied separations so the exponent fit is well-posed
    pairs.emplace_back(scalar_point(0.0), scalar_point(0.1 * (i + 1)));
  const auto report = lipschitz_estimate(
      space, space, [](const Vector& x) -> Vector { return x / 2.0; }, pairs);
  EXPECT_NEAR(report.constant, 0.5, 1e-12);
  EXPECT_TRUE(report.contraction);
  EXPECT_NEAR(report.holder_exponent, 1.0, 1e-6);
}

TEST(Lipschitz, ZeroArgumentDistanceWithDistinctImagesThrows) {
  // Degenerate domain whose distance is identically zero: any non-constant
  // map has an unbounded constant.
  struct CrushedLine {
    using Point = double;
    double distance(double, double) const { return 0.0; }
  } crushed;
  EuclideanSpace cod{1};
  std::vector<std::pair<double, double>> pairs{{0.0, 1.0}};
  try {
    lipschitz_estimate(crushed, cod, [](double x) { return scalar_point(x); }, pairs);
    FAIL() << "expected infinite_constant";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::infinite_constant);
  }
}

// --- Axiom suite ------------------------------------------------------------

TEST(AxiomSuite, EuclideanPassesCleanly) {
  EuclideanSpace space{3};
  const auto report = check_axioms(
      space, [](Rng& rng) { return detail::gaussian_vector(3, rng); }, 2000, 1e-12, 7);
  EXPECT_TRUE(report.passed());
  EXPECT_EQ(report.violations, 0u);
  EXPECT_GE(report.worst_triangle_slack, -1e-12);
  EXPECT_LE(report.worst_self_distance, 1e-12);
}

TEST(AxiomSuite, SignedGapSpaceIsCaught) {
  // distance(a, b) = b - a can be negative: not a quasi-metric.
  struct SignedGap {
    using Point = double;
    double distance(double a, double b) const { return b - a; }
  } bad;
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const auto report = check_axioms(
      bad, [&unit](Rng& rng) { return unit(rng); }, 500, 1e-12, 7);
  EXPECT_FALSE(report.passed());
  EXPECT_GT(report.violations, 0u);
  EXPECT_LT(report.worst_negative_distance, 0.0);
}

}  // namespace
}  // namespace qnewt
