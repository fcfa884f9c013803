#include "qnewt/solver.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "qnewt/error.hpp"
#include "qnewt/euclidean.hpp"

namespace qnewt {
namespace {

Vector double_fn(const Vector& x) { return scalar_point(2.0 * x[0]); }

/// Two selections for F = 2x: index 0 is deliberately damped (slope 4, half
/// steps), index 1 is exact (slope 2, one-shot).
NewtonDifferential<EuclideanSpace> damped_then_exact() {
  return euclidean_bundle(
      std::vector<JacobianFn>{
          [](const Vector&) { return Matrix::Constant(1, 1, 4.0); },
          [](const Vector&) { return Matrix::Constant(1, 1, 2.0); },
      },
      1);
}

TEST(NewtonStep, FirstPolicyTakesDeclaredOrder) {
  EuclideanSpace space{1};
  const auto step =
      newton_step(space, double_fn, damped_then_exact(), scalar_point(1.0));
  EXPECT_EQ(step.selection_index, 0u);
  EXPECT_DOUBLE_EQ(step.next[0], 0.5);  // damped: 1 - 2/4
}

TEST(NewtonStep, IndexPolicyPicksAndValidates) {
  EuclideanSpace space{1};
  SelectionPolicy policy;
  policy.kind = SelectionPolicy::Kind::index;
  policy.index = 1;
  const auto step =
      newton_step(space, double_fn, damped_then_exact(), scalar_point(1.0), policy);
  EXPECT_EQ(step.selection_index, 1u);
  EXPECT_DOUBLE_EQ(step.next[0], 0.0);  // exact: 1 - 2/2

  policy.index = 5;
  try {
    newton_step(space, double_fn, damped_then_exact(), scalar_point(1.0), policy);
    FAIL() << "expected out_of_range";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::out_of_range);
  }
}

TEST(NewtonStep, LookaheadPicksTheSmallerResidual) {
  EuclideanSpace space{1};
  SelectionPolicy policy;
  policy.kind = SelectionPolicy::Kind::min_residual_lookahead;
  const auto step =
      newton_step(space, double_fn, damped_then_exact(), scalar_point(1.0), policy);
  EXPECT_EQ(step.selection_index, 1u);  // exact beats damped
  EXPECT_DOUBLE_EQ(step.next[0], 0.0);
}

TEST(NewtonStep, LookaheadTieKeepsLowestIndex) {
  EuclideanSpace space{1};
  const auto hf = euclidean_bundle(
      std::vector<JacobianFn>{
          [](const Vector&) { return Matrix::Constant(1, 1, 2.0); },
          [](const Vector&) { return Matrix::Constant(1, 1, 2.0); },
      },
      1);
  SelectionPolicy policy;
  policy.kind = SelectionPolicy::Kind::min_residual_lookahead;
  const auto step = newton_step(space, double_fn, hf, scalar_point(1.0), policy);
  EXPECT_EQ(step.selection_index, 0u);
}

TEST(NewtonStep, LookaheadSkipsSelectionsWithoutInverse) {
  EuclideanSpace space{1};
  const auto hf = euclidean_bundle(
      std::vector<JacobianFn>{
          [](const Vector&) { return Matrix::Zero(1, 1); },  // singular: skipped
          [](const Vector&) { return Matrix::Constant(1, 1, 2.0); },
      },
      1);
  SelectionPolicy policy;
  policy.kind = SelectionPolicy::Kind::min_residual_lookahead;
  const auto step = newton_step(space, double_fn, hf, scalar_point(1.0), policy);
  EXPECT_EQ(step.selection_index, 1u);
}

TEST(NewtonSolve, RootStartYieldsSinglePointTrace) {
  EuclideanSpace space{1};
  const auto trace =
      newton_solve(space, double_fn, damped_then_exact(), scalar_point(0.0));
  EXPECT_EQ(trace.stop_reason, StopReason::residual_tol);
  EXPECT_EQ(trace.points.size(), 1u);
  EXPECT_EQ(trace.residual_norms.size(), 1u);
  EXPECT_TRUE(trace.step_dists.empty());
  EXPECT_TRUE(trace.selection_indices.empty());
}

TEST(NewtonSolve, EmptySelectionListStopsWithNoSelection) {
  EuclideanSpace space{1};
  NewtonDifferential<EuclideanSpace> empty;
  empty.n = 1;
  empty.selections_at = [](const Vector&) {
    return std::vector<Selection<EuclideanSpace>>{};
  };
  const auto trace = newton_solve(space, double_fn, empty, scalar_point(1.0));
  EXPECT_EQ(trace.stop_reason, StopReason::no_selection);
  EXPECT_EQ(trace.points.size(), 1u);
}

TEST(NewtonSolve, SingularSelectionStopsWithNoInverse) {
  EuclideanSpace space{1};
  const auto hf =
      euclidean_bundle([](const Vector&) { return Matrix::Zero(1, 1); }, 1);
  const auto trace = newton_solve(space, double_fn, hf, scalar_point(1.0));
  EXPECT_EQ(trace.stop_reason, StopReason::no_inverse);
  EXPECT_EQ(trace.points.size(), 1u);
}

TEST(NewtonSolve, GrowingResidualTripsDivergenceWindow) {
  // Inverse that overshoots: the update maps x to 21x, so the residual grows
  // by 21 per step and exceeds the factor-1e6 window after five steps.
  EuclideanSpace space{1};
  Selection<EuclideanSpace> sel;
  sel.map.n = 1;
  sel.map.label = "overshoot";
  sel.map.eval = [](const Vector& y, const Vector& z) -> Vector { return z - y; };
  QuasiInverse<EuclideanSpace> inv;
  inv.eval = [](const Vector& x, const Vector& v) -> Vector { return x - 20.0 * v; };
  inv.norm_bound = 20.0;
  sel.inverse = inv;
  NewtonDifferential<EuclideanSpace> hf;
  hf.n = 1;
  hf.selections_at = [sel](const Vector&) {
    return std::vector<Selection<EuclideanSpace>>{sel};
  };
  const auto f = [](const Vector& x) -> Vector { return x; };
  SolveConfig<EuclideanSpace> cfg;
  cfg.max_iters = 50;
  const auto trace = newton_solve(space, f, hf, scalar_point(1.0), cfg);
  EXPECT_EQ(trace.stop_reason, StopReason::diverged);
  EXPECT_EQ(trace.points.size(), 6u);  // x0 plus five 21x blowup steps fill the window
  EXPECT_GT(trace.residual_norms.back(),
            1e6 * trace.residual_norms[trace.residual_norms.size() - 1 - 5]);
}

TEST(NewtonSolve, TinyStepsStopOnStepTol) {
  // F = x^3 with its tangent model contracts x by 2/3 per step; residuals
  // stay positive long after the steps fall under the tolerance.
  EuclideanSpace space{1};
  const auto f = [](const Vector& x) { return scalar_point(x[0] * x[0] * x[0]); };
  const auto hf = euclidean_bundle(
      [](const Vector& x) { return Matrix::Constant(1, 1, 3.0 * x[0] * x[0]); }, 1);
  SolveConfig<EuclideanSpace> cfg;
  cfg.residual_tol = 0.0;
  cfg.step_tol = 1e-12;
  cfg.max_iters = 100;
  const auto trace = newton_solve(space, f, hf, scalar_point(1.0), cfg);
  EXPECT_EQ(trace.stop_reason, StopReason::step_tol);
  EXPECT_LE(trace.step_dists.back(), 1e-12);
  EXPECT_GT(trace.residual_norms.back(), 0.0);
  EXPECT_EQ(trace.points.size(), trace.step_dists.size() + 1);
  EXPECT_EQ(trace.residual_norms.size(), trace.points.size());
}

TEST(NewtonSolve, MaxItersBoundsTheTraceShape) {
  EuclideanSpace space{1};
  const auto hf = euclidean_bundle(
      [](const Vector&) { return Matrix::Constant(1, 1, 4.0); }, 1);  // damped
  SolveConfig<EuclideanSpace> cfg;
  cfg.max_iters = 3;
  cfg.residual_tol = 0.0;
  cfg.step_tol = 0.0;
  const auto trace = newton_solve(space, double_fn, hf, scalar_point(1.0), cfg);
  EXPECT_EQ(trace.stop_reason, StopReason::max_iters);
  EXPECT_EQ(trace.points.size(), 4u);
  EXPECT_EQ(trace.residual_norms.size(), 4u);
  EXPECT_EQ(trace.step_dists.size(), 3u);
  EXPECT_EQ(trace.selection_indices.size(), 3u);
}

// --- Set-valued fixed-point iteration ---------------------------------------

TEST(Banach, HalvingMapContractsLinearly) {
  EuclideanSpace space{1};
  const auto images = [](const Vector& x) {
    return std::vector<Vector>{x / 2.0};
  };
  const auto trace = banach_iterate(space, images, scalar_point(1.0), 100, 1e-12);
  EXPECT_EQ(trace.stop_reason, StopReason::step_tol);
  EXPECT_EQ(trace.residual_norms.size(), trace.points.size());
  EXPECT_LE(trace.residual_norms.back(), 1e-12);
  const auto analysis = analyze_trace(trace);
  EXPECT_TRUE(analysis.used_step_proxy);
  EXPECT_EQ(analysis.report.classification, RateClass::linear);
  ASSERT_TRUE(analysis.report.c_bound.has_value());
  EXPECT_NEAR(*analysis.report.c_bound, 0.5, 1e-9);
}

TEST(Banach, FirstPolicyIgnoresBetterLaterImages) {
  EuclideanSpace space{1};
  const auto images = [](const Vector& x) {
    return std::vector<Vector>{x / 2.0, x / 3.0};
  };
  const auto trace =
      banach_iterate(space, images, scalar_point(1.0), 60, 1e-13, BanachSelection::first);
  EXPECT_EQ(trace.stop_reason, StopReason::step_tol);
  for (std::size_t idx : trace.selection_indices) EXPECT_EQ(idx, 0u);
}

TEST(Banach, NearestToPreviousPicksTheSmallestStep) {
  EuclideanSpace space{1};
  const auto images = [](const Vector& x) {
    return std::vector<Vector>{x / 3.0, x / 2.0};  // x/2 is nearer to x
  };
  const auto trace = banach_iterate(space, images, scalar_point(1.0), 60, 1e-13,
                                    BanachSelection::nearest_to_previous);
  ASSERT_FALSE(trace.selection_indices.empty());
  for (std::size_t idx : trace.selection_indices) EXPECT_EQ(idx, 1u);
}

TEST(Banach, EmptyImageThrows) {
  EuclideanSpace space{1};
  const auto images = [](const Vector&) { return std::vector<Vector>{}; };
  try {
    banach_iterate(space, images, scalar_point(1.0));
    FAIL() << "expected empty_set";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::empty_set);
  }
}

TEST(Banach, MaxItersKeepsSizeInvariant) {
  EuclideanSpace space{1};
  const auto images = [](const Vector& x) {
    return std::vector<Vector>{x / 2.0};
  };
  const auto trace = banach_iterate(space, images, scalar_point(1.0), 3, 0.0);
  EXPECT_EQ(trace.stop_reason, StopReason::max_iters);
  EXPECT_EQ(trace.points.size(), 4u);
  EXPECT_EQ(trace.residual_norms.size(), 4u);
  EXPECT_EQ(trace.step_dists.size(), 3u);
}

// --- Trace analysis ---------------------------------------------------------

TEST(AnalyzeTrace, PrefersReferenceDistances) {
  IterationTrace<EuclideanSpace> trace;
  trace.dists_to_ref.emplace();
  double d = 1.0;
  for (int k = 0; k < 12; ++k) {
    trace.dists_to_ref->push_back(d);
    trace.step_dists.push_back(1.0);  // garbage proxy that must be ignored
    d *= 0.5;
  }
  const auto analysis = analyze_trace(trace);
  EXPECT_FALSE(analysis.used_step_proxy);
  EXPECT_EQ(analysis.report.classification, RateClass::linear);
}

TEST(AnalyzeTrace, ShortTraceIsInconclusiveNotFatal) {
  IterationTrace<EuclideanSpace> trace;
  trace.step_dists = {1.0, 0.5};
  const auto analysis = analyze_trace(trace);
  EXPECT_TRUE(analysis.insufficient);
  EXPECT_TRUE(analysis.used_step_proxy);
  EXPECT_EQ(analysis.report.classification, RateClass::inconclusive);
  EXPECT_EQ(analysis.report.note, "trace too short to classify");
}

}  // namespace
}  // namespace qnewt
