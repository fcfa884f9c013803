#include "qnewt/differential.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "qnewt/error.hpp"
#include "qnewt/euclidean.hpp"

namespace qnewt {
namespace {

Vector square_fn(const Vector& x) { return scalar_point(x[0] * x[0]); }
Vector sine_fn(const Vector& x) { return scalar_point(std::sin(x[0])); }

NewtonDifferential<EuclideanSpace> square_bundle() {
  return euclidean_bundle(
      [](const Vector& x) { return Matrix::Constant(1, 1, 2.0 * x[0]); }, 1);
}

NewtonDifferential<EuclideanSpace> sine_bundle() {
  return euclidean_bundle(
      [](const Vector& x) { return Matrix::Constant(1, 1, std::cos(x[0])); }, 1);
}

TEST(ModelResidual, MatchesHandComputedValue) {
  // F = x^2, anchor 0.3, probe 0.5, slope 0.6:
  // |0.25 - 0.09 + 0.6*(0.3 - 0.5)| = |0.16 - 0.12| = 0.04.
  const auto sel = linear_selection(Matrix::Constant(1, 1, 0.6));
  const double r = model_residual_norm<EuclideanSpace>(
      square_fn, sel.map, scalar_point(0.5), scalar_point(0.3));
  EXPECT_NEAR(r, 0.04, 1e-15);
}

TEST(ShellRadii, DefaultLadderIsDecreasingAndEndsAtTenThousandth) {
  const auto radii = default_shell_radii();
  ASSERT_EQ(radii.size(), 8u);
  for (std::size_t i = 1; i < radii.size(); ++i) EXPECT_LT(radii[i], radii[i - 1]);
  EXPECT_DOUBLE_EQ(radii.back(), 1e-4);
}

TEST(Pointwise, DerivativeBundleOfSquareIsPointwise) {
  // Residual of the tangent model is exactly (x - xbar)^2, so the ratio at
  // shell radius r equals r and the finest shell lands at 1e-4.
  EuclideanSpace space{1};
  const auto report =
      check_pointwise_diffability(space, square_fn, square_bundle(), scalar_point(0.3));
  EXPECT_EQ(report.mode, DiffabilityMode::pointwise);
  EXPECT_NEAR(report.shells.back().sup_ratio, 1e-4, 1e-10);
}

TEST(Pointwise, MatchedExponentGivesWeakPointwise) {
  // At xbar = 0 with the vanishing tangent model the residual is d^2; against
  // gamma = 2 every ratio is exactly 1: bounded but not vanishing.
  EuclideanSpace space{1};
  PointwiseOptions opts;
  opts.gamma = 2.0;
  const auto report = check_pointwise_diffability(space, square_fn, square_bundle(),
                                                  scalar_point(0.0), opts);
  EXPECT_EQ(report.mode, DiffabilityMode::weak_pointwise);
  EXPECT_NEAR(report.limit_estimate, 1.0, 1e-9);
}

TEST(Pointwise, TooLargeExponentIsInconclusive) {
  EuclideanSpace space{1};
  PointwiseOptions opts;
  opts.gamma = 3.0;
  const auto report = check_pointwise_diffability(space, square_fn, square_bundle(),
                                                  scalar_point(0.0), opts);
  EXPECT_EQ(report.mode, DiffabilityMode::inconclusive);
}

TEST(Pointwise, WrongSlopeModelIsWeakPointwise) {
  // F = 2x against the unit-slope model: residual |x - xbar|, ratio
  // identically 1 at gamma = 1.
  EuclideanSpace space{1};
  NewtonDifferential<EuclideanSpace> unit_slope = euclidean_bundle(
      [](const Vector&) { return Matrix::Constant(1, 1, 1.0); }, 1);
  const auto f = [](const Vector& x) { return scalar_point(2.0 * x[0]); };
  const auto report =
      check_pointwise_diffability(space, f, unit_slope, scalar_point(0.4));
  EXPECT_EQ(report.mode, DiffabilityMode::weak_pointwise);
  EXPECT_NEAR(report.limit_estimate, 1.0, 1e-9);
}

TEST(Pointwise, NonDecreasingRadiiThrow) {
  EuclideanSpace space{1};
  PointwiseOptions opts;
  opts.radii = {0.1, 0.1};
  EXPECT_THROW(check_pointwise_diffability(space, square_fn, square_bundle(),
                                           scalar_point(0.3), opts),
               Error);
}

TEST(Pointwise, EmptySelectionListThrows) {
  EuclideanSpace space{1};
  NewtonDifferential<EuclideanSpace> empty;
  empty.n = 1;
  empty.selections_at = [](const Vector&) {
    return std::vector<Selection<EuclideanSpace>>{};
  };
  try {
    check_pointwise_diffability(space, square_fn, empty, scalar_point(0.3));
    FAIL() << "expected empty_selection";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::empty_selection);
  }
}

// --- Combinators ------------------------------------------------------------

TEST(Combinators, SumOfBundlesIsPointwise) {
  EuclideanSpace space{1};
  const auto f = [](const Vector& x) { return scalar_point(x[0] * x[0] + std::sin(x[0])); };
  const auto hf = combine_sum(square_bundle(), sine_bundle());
  const auto report = check_pointwise_diffability(space, f, hf, scalar_point(0.3));
  EXPECT_EQ(report.mode, DiffabilityMode::pointwise);
}

TEST(Combinators, ProductOfBundlesIsPointwise) {
  EuclideanSpace space{1};
  const auto f = [](const Vector& x) { return scalar_point(x[0] * x[0] * std::sin(x[0])); };
  const auto hf = combine_product(square_bundle(), sine_bundle(), square_fn, sine_fn);
  const auto report = check_pointwise_diffability(space, f, hf, scalar_point(0.3));
  EXPECT_EQ(report.mode, DiffabilityMode::pointwise);
}

TEST(Combinators, ChainOfBundlesIsPointwise) {
  EuclideanSpace space{1};
  const auto f = [](const Vector& x) { return scalar_point(std::sin(x[0] * x[0])); };
  const auto hf = combine_chain<EuclideanSpace>(sine_bundle(), square_fn);
  const auto report = check_pointwise_diffability(space, f, hf, scalar_point(0.3));
  EXPECT_EQ(report.mode, DiffabilityMode::pointwise);
}

TEST(Combinators, DirectSumOfBundlesIsPointwise) {
  EuclideanSpace space{1};
  const auto f = [](const Vector& x) -> Vector {
    Vector out(2);
    out[0] = x[0] * x[0];
    out[1] = std::sin(x[0]);
    return out;
  };
  const auto hf = combine_direct_sum(square_bundle(), sine_bundle());
  EXPECT_EQ(hf.n, 2);
  const auto report = check_pointwise_diffability(space, f, hf, scalar_point(0.3));
  EXPECT_EQ(report.mode, DiffabilityMode::pointwise);
}

TEST(Combinators, SumRejectsMismatchedDimensions) {
  NewtonDifferential<EuclideanSpace> two = combine_direct_sum(square_bundle(), sine_bundle());
  EXPECT_THROW(combine_sum(square_bundle(), two), Error);
}

TEST(Combinators, ProductRequiresScalarFactors) {
  NewtonDifferential<EuclideanSpace> two = combine_direct_sum(square_bundle(), sine_bundle());
  EXPECT_THROW(combine_product(two, sine_bundle(), square_fn, sine_fn), Error);
}

// --- Uniform check ----------------------------------------------------------

std::vector<Vector> interval_region(double lo, double hi, int count) {
  std::vector<Vector> region;
  for (int i = 0; i < count; ++i)
    region.push_back(scalar_point(lo + (hi - lo) * i / (count - 1)));
  return region;
}

TEST(Uniform, SquareMapOnBoundedRegionIsUniform) {
  EuclideanSpace space{1};
  const auto report = check_uniform_diffability(space, square_fn, square_bundle(),
                                                interval_region(-1.0, 1.0, 16));
  EXPECT_EQ(report.mode, DiffabilityMode::uniform);
  for (const auto& stat : report.uniform_stats) EXPECT_TRUE(stat.found);
}

TEST(Uniform, ConstantRatioModelIsUniformWeakBand) {
  // F = 2x against the unit-slope model keeps the ratio pinned at 1; the
  // plain uniform phase cannot get under any epsilon but the band phase
  // brackets the constant.
  EuclideanSpace space{1};
  NewtonDifferential<EuclideanSpace> unit_slope = euclidean_bundle(
      [](const Vector&) { return Matrix::Constant(1, 1, 1.0); }, 1);
  const auto f = [](const Vector& x) { return scalar_point(2.0 * x[0]); };
  const auto report = check_uniform_diffability(space, f, unit_slope,
                                                interval_region(-1.0, 1.0, 16));
  EXPECT_EQ(report.mode, DiffabilityMode::uniform_weak);
  EXPECT_NEAR(report.limit_estimate, 1.0, 1e-9);
}

TEST(Uniform, EmptyRegionThrows) {
  EuclideanSpace space{1};
  EXPECT_THROW(
      check_uniform_diffability(space, square_fn, square_bundle(), {}), Error);
}

// --- Linear growth bound ----------------------------------------------------

TEST(KBound, TripleSlopeSitsExactlyAtThree) {
  EuclideanSpace space{1};
  NewtonDifferential<EuclideanSpace> hf = euclidean_bundle(
      [](const Vector&) { return Matrix::Constant(1, 1, 3.0); }, 1);
  const auto at_three =
      check_k_bound(space, hf, 3.0 + 1e-6, scalar_point(0.0), 1.0);
  EXPECT_TRUE(at_three.ok);
  EXPECT_NEAR(at_three.worst_ratio, 3.0, 1e-9);
  const auto too_small = check_k_bound(space, hf, 2.9, scalar_point(0.0), 1.0);
  EXPECT_FALSE(too_small.ok);
  EXPECT_TRUE(too_small.witness_y.has_value());
}

}  // namespace
}  // namespace qnewt
