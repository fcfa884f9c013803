#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qnewt/differential.hpp"
#include "qnewt/error.hpp"
#include "qnewt/pseudolinear.hpp"
#include "qnewt/qspace.hpp"

namespace qnewt {

enum class StopReason {
  residual_tol,  ///< |F(x)| fell below the residual tolerance
  step_tol,      ///< the last step distance fell below the step tolerance
  max_iters,
  diverged,      ///< residual grew past the divergence factor over the window
  no_selection,  ///< differential returned no selections at the iterate
  no_inverse,    ///< chosen selection carries no quasi-inverse
};

inline const char* to_string(StopReason r) noexcept {
  switch (r) {
    case StopReason::residual_tol: return "residual_tol";
    case StopReason::step_tol: return "step_tol";
    case StopReason::max_iters: return "max_iters";
    case StopReason::diverged: return "diverged";
    case StopReason::no_selection: return "no_selection";
    case StopReason::no_inverse: return "no_inverse";
  }
  return "unknown";
}

struct SelectionPolicy {
  enum class Kind {
    first,                    ///< first selection in declared order
    min_residual_lookahead,   ///< try each invertible selection, keep min |F|
    index,                    ///< fixed index into the selection list
  };
  Kind kind = Kind::first;
  std::size_t index = 0;
};

/// One run of an iterative method. Per-point quantities have one entry per
/// iterate; per-step quantities (step_dists, selection_indices) have one
/// entry per transition and describe the step *leaving* that iterate.
template <QuasiMetricSpace S>
struct IterationTrace {
  std::vector<typename S::Point> points;
  std::vector<double> residual_norms;                 ///< |F(x^k)|, size == points
  std::vector<double> step_dists;                     ///< distance(x^{k+1}, x^k)
  std::optional<std::vector<double>> dists_to_ref;    ///< distance(x^k, reference)
  std::vector<std::size_t> selection_indices;
  StopReason stop_reason = StopReason::max_iters;
};

template <QuasiMetricSpace S>
struct SolveConfig {
  int max_iters = 100;
  double residual_tol = 1e-10;
  double step_tol = 1e-12;
  SelectionPolicy selection;
  std::optional<typename S::Point> reference_root;
  /// Divergence detector: stop when the residual grows by more than
  /// `divergence_factor` over `divergence_window` consecutive steps.
  double divergence_factor = 1e6;
  int divergence_window = 5;
};

template <QuasiMetricSpace S>
struct StepResult {
  typename S::Point next;
  std::size_t selection_index = 0;
};

/// One Newton-type update: picks a selection H at x per policy and returns
/// H_inv(x, -F(x)). Throws empty_selection / inverse_missing / out_of_range
/// when the policy cannot be honored.
template <QuasiMetricSpace S, class F>
StepResult<S> newton_step(const S& space, F&& f, const NewtonDifferential<S>& hf,
                          const typename S::Point& x,
                          const SelectionPolicy& policy = {}) {
  const auto selections = hf.selections_at(x);
  if (selections.empty()) fail(ErrorCode::empty_selection, "no selections at the iterate");
  const Vector rhs = -f(x);

  const auto apply = [&](std::size_t i) -> typename S::Point {
    const auto& sel = selections[i];
    if (!sel.inverse)
      fail(ErrorCode::inverse_missing,
           "selection " + std::to_string(i) + " has no quasi-inverse");
    return sel.inverse->eval(x, rhs);
  };

  switch (policy.kind) {
    case SelectionPolicy::Kind::first:
      return {apply(0), 0};
    case SelectionPolicy::Kind::index:
      if (policy.index >= selections.size())
        fail(ErrorCode::out_of_range, "selection index " + std::to_string(policy.index) +
                                          " of " + std::to_string(selections.size()));
      return {apply(policy.index), policy.index};
    case SelectionPolicy::Kind::min_residual_lookahead: {
      std::optional<std::size_t> best;
      double best_residual = std::numeric_limits<double>::infinity();
      typename S::Point best_point{};
      for (std::size_t i = 0; i < selections.size(); ++i) {
        if (!selections[i].inverse) continue;
        auto candidate = selections[i].inverse->eval(x, rhs);
        const double res = f(candidate).norm();
        if (res < best_residual) {  // strict: ties keep the lowest index
          best_residual = res;
          best = i;
          best_point = candidate;
        }
      }
      if (!best) fail(ErrorCode::inverse_missing, "no invertible selection at the iterate");
      return {best_point, *best};
    }
  }
  fail(ErrorCode::out_of_range, "unknown selection policy");
}

/// Newton-type iteration x^{k+1} = H_inv(x^k, -F(x^k)). Stop checks run in
/// the order residual_tol, divergence, max_iters, then (after stepping)
/// step_tol; a starting point that already meets residual_tol returns a
/// single-point trace. Step errors (no selection / no inverse) end the run
/// and are recorded as the stop reason.
template <QuasiMetricSpace S, class F>
IterationTrace<S> newton_solve(const S& space, F&& f, const NewtonDifferential<S>& hf,
                               const typename S::Point& x0, const SolveConfig<S>& cfg = {}) {
  IterationTrace<S> trace;
  if (cfg.reference_root) trace.dists_to_ref.emplace();
  auto push_point = [&](const typename S::Point& p) {
    trace.points.push_back(p);
    trace.residual_norms.push_back(f(p).norm());
    if (cfg.reference_root)
      trace.dists_to_ref->push_back(space.distance(p, *cfg.reference_root));
  };
  push_point(x0);

  while (true) {
    if (trace.residual_norms.back() <= cfg.residual_tol) {
      trace.stop_reason = StopReason::residual_tol;
      return trace;
    }
    const std::size_t k = trace.residual_norms.size();
    const auto window = static_cast<std::size_t>(cfg.divergence_window);
    if (k > window &&
        trace.residual_norms.back() >
            cfg.divergence_factor * trace.residual_norms[k - 1 - window]) {
      trace.stop_reason = StopReason::diverged;
      return trace;
    }
    if (static_cast<int>(trace.step_dists.size()) >= cfg.max_iters) {
      trace.stop_reason = StopReason::max_iters;
      return trace;
    }
    StepResult<S> step;
    try {
      step = newton_step(space, f, hf, trace.points.back(), cfg.selection);
    } catch (const Error& e) {
      trace.stop_reason = e.code() == ErrorCode::empty_selection ? StopReason::no_selection
                                                                 : StopReason::no_inverse;
      return trace;
    }
    const double step_dist = space.distance(step.next, trace.points.back());
    trace.step_dists.push_back(step_dist);
    trace.selection_indices.push_back(step.selection_index);
    push_point(step.next);
    if (step_dist <= cfg.step_tol) {
      trace.stop_reason = StopReason::step_tol;
      return trace;
    }
  }
}

enum class BanachSelection { first, nearest_to_previous };

/// Fixed-point iteration for a set-valued self-map: x^{k+1} is chosen from
/// images(x^k) by the policy (`nearest_to_previous` minimizes
/// distance(image, x^k); ties keep the lowest index). The residual recorded
/// at each iterate is the prospective step distance(image, x^k), so a run
/// stops after a step of length <= tol. Throws empty_set on an empty image.
template <QuasiMetricSpace S, class TMap>
IterationTrace<S> banach_iterate(const S& space, TMap&& images, const typename S::Point& x0,
                                 int max_iters = 100, double tol = 1e-12,
                                 BanachSelection policy = BanachSelection::first) {
  IterationTrace<S> trace;
  trace.points.push_back(x0);
  trace.stop_reason = StopReason::max_iters;
  while (true) {
    const auto& cur = trace.points.back();
    const std::vector<typename S::Point> image = images(cur);
    if (image.empty()) fail(ErrorCode::empty_set, "empty image in banach_iterate");
    std::size_t pick = 0;
    if (policy == BanachSelection::nearest_to_previous) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < image.size(); ++i) {
        const double d = space.distance(image[i], cur);
        if (d < best) {
          best = d;
          pick = i;
        }
      }
    }
    const double step = space.distance(image[pick], cur);
    trace.residual_norms.push_back(step);
    if (step <= tol) {  // prospective step below tol: stay put and stop
      trace.stop_reason = StopReason::step_tol;
      return trace;
    }
    if (static_cast<int>(trace.step_dists.size()) >= max_iters) {
      trace.stop_reason = StopReason::max_iters;
      return trace;
    }
    trace.step_dists.push_back(step);
    trace.selection_indices.push_back(pick);
    trace.points.push_back(image[pick]);
  }
}

struct TraceAnalysis {
  RateReport report;
  bool used_step_proxy = false;  ///< no reference distances; steps were classified
  bool insufficient = false;     ///< too short to classify; report is inconclusive
};

/// Rate classification of a trace: uses distances to the reference when the
/// trace has them, otherwise falls back to the step distances as a proxy
/// (flagged). Traces too short to classify yield an inconclusive report
/// instead of an error.
template <QuasiMetricSpace S>
TraceAnalysis analyze_trace(const IterationTrace<S>& trace, double tol = 0.15) {
  TraceAnalysis analysis;
  const std::vector<double>* seq = nullptr;
  if (trace.dists_to_ref) {
    seq = &*trace.dists_to_ref;
  } else {
    seq = &trace.step_dists;
    analysis.used_step_proxy = true;
  }
  try {
    analysis.report = classify_rate(*seq, tol);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::insufficient_data) throw;
    analysis.insufficient = true;
    analysis.report.classification = RateClass::inconclusive;
    analysis.report.note = "trace too short to classify";
  }
  return analysis;
}

}  // namespace qnewt
