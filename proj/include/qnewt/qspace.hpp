#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qnewt/error.hpp"

namespace qnewt {

using Rng = std::mt19937_64;

/// A space with a quasi-metric: distance(x, y) >= 0, zero exactly on equal
/// points, triangle inequality — but *no* symmetry requirement. Every
/// distance-sensitive routine in this library documents which argument order
/// it uses, because distance(x, y) and distance(y, x) may differ.
template <class S>
concept QuasiMetricSpace = requires(const S& s, const typename S::Point& a,
                                    const typename S::Point& b) {
  typename S::Point;
  { s.distance(a, b) } -> std::convertible_to<double>;
};

/// A quasi-metric space that can produce random points at (approximately) a
/// requested distance from a center; used by all sampling-based checkers.
template <class S>
concept SampleableSpace =
    QuasiMetricSpace<S> &&
    requires(const S& s, const typename S::Point& c, double r, Rng& rng) {
      { s.sample_at_distance(c, r, rng) } -> std::convertible_to<typename S::Point>;
    };

/// Ball of radius `radius` about `center`. Membership puts the *candidate*
/// first: p is inside iff distance(p, center) < radius (<= when closed).
template <QuasiMetricSpace S>
struct Ball {
  typename S::Point center;
  double radius = 0.0;
  bool closed = false;

  bool contains(const S& space, const typename S::Point& p) const {
    const double d = space.distance(p, center);
    return closed ? d <= radius : d < radius;
  }
};

/// inf over a of distance(x, a). Throws empty_set on an empty range.
template <QuasiMetricSpace S>
double dist_point_set(const S& space, const typename S::Point& x,
                      const std::vector<typename S::Point>& set) {
  if (set.empty()) fail(ErrorCode::empty_set, "dist_point_set: empty set");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& a : set) best = std::min(best, space.distance(x, a));
  return best;
}

/// inf over a of distance(a, x) — the other argument order.
template <QuasiMetricSpace S>
double dist_set_point(const S& space, const std::vector<typename S::Point>& set,
                      const typename S::Point& x) {
  if (set.empty()) fail(ErrorCode::empty_set, "dist_set_point: empty set");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& a : set) best = std::min(best, space.distance(a, x));
  return best;
}

/// max{ sup_a distance(a, B), sup_b distance(A, b) } with the point/set
/// distances in the orders above. Throws empty_set if either side is empty.
template <QuasiMetricSpace S>
double dist_set_set(const S& space, const std::vector<typename S::Point>& a_set,
                    const std::vector<typename S::Point>& b_set) {
  if (a_set.empty() || b_set.empty())
    fail(ErrorCode::empty_set, "dist_set_set: empty operand");
  double sup_a = 0.0;
  for (const auto& a : a_set) sup_a = std::max(sup_a, dist_point_set(space, a, b_set));
  double sup_b = 0.0;
  for (const auto& b : b_set) sup_b = std::max(sup_b, dist_set_point(space, a_set, b));
  return std::max(sup_a, sup_b);
}

template <QuasiMetricSpace S>
struct SingletonCheck {
  bool singleton = true;                      ///< no probe other than the center survives
  std::optional<typename S::Point> witness;   ///< a surviving probe, if any
  double min_radius = 0.0;                    ///< the binding (smallest) radius
};

/// Checks that the intersection of the closed balls B_{r_i}(center) over a
/// strictly decreasing radius list contains no probe other than the center:
/// a probe survives iff distance(probe, center) <= min radius. Probes at
/// distance zero from the center count as the center itself.
template <QuasiMetricSpace S>
SingletonCheck<S> ball_intersection_singleton_check(
    const S& space, const typename S::Point& center,
    const std::vector<double>& radii,
    const std::vector<typename S::Point>& probes) {
  if (radii.empty()) fail(ErrorCode::invalid_radii, "no radii supplied");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0))
      fail(ErrorCode::invalid_radii, "radii must be positive");
    if (i > 0 && !(radii[i] < radii[i - 1]))
      fail(ErrorCode::invalid_radii, "radii must be strictly decreasing");
  }
  SingletonCheck<S> result;
  result.min_radius = radii.back();
  for (const auto& p : probes) {
    const double d = space.distance(p, center);
    if (d == 0.0) continue;  // same point (possibly another representative)
    if (d <= result.min_radius) {
      result.singleton = false;
      result.witness = p;
      break;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Convergence-rate classification
// ---------------------------------------------------------------------------

enum class RateClass {
  linear,           ///< ratios bounded by some c < 1
  superlinear,      ///< ratios tend to 0
  rate_gamma,       ///< d_{k+1} <= c * d_k^gamma with gamma > 1
  super_rate_gamma, ///< like rate_gamma with the coefficient tending to 0
  diverged,         ///< distances grow
  inconclusive,
};

inline const char* to_string(RateClass c) noexcept {
  switch (c) {
    case RateClass::linear: return "linear";
    case RateClass::superlinear: return "superlinear";
    case RateClass::rate_gamma: return "rate_gamma";
    case RateClass::super_rate_gamma: return "super_rate_gamma";
    case RateClass::diverged: return "diverged";
    case RateClass::inconclusive: return "inconclusive";
  }
  return "unknown";
}

struct RateReport {
  RateClass classification = RateClass::inconclusive;
  std::vector<double> c_estimates;       ///< successive ratios d_{k+1}/d_k over the analyzed prefix
  std::optional<double> gamma_estimate;  ///< set only for the rate_gamma classes
  std::optional<double> c_bound;         ///< for linear: max tail ratio
  std::size_t used_entries = 0;          ///< length of the analyzed prefix
  std::size_t tail_start = 0;            ///< index of the first tail entry
  std::string note;
};

namespace detail {

/// Least-squares slope/intercept of y over x. Returns {slope, intercept, rms}.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms_residual = 0.0;
  std::size_t n = 0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  LineFit fit;
  fit.n = x.size();
  if (fit.n < 2) return fit;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < fit.n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(fit.n);
  my /= static_cast<double>(fit.n);
  double cov = 0.0, var = 0.0;
  for (std::size_t i = 0; i < fit.n; ++i) {
    cov += (x[i] - mx) * (y[i] - my);
    var += (x[i] - mx) * (x[i] - mx);
  }
  if (var == 0.0) return fit;
  fit.slope = cov / var;
  fit.intercept = my - fit.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < fit.n; ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ss += r * r;
  }
  fit.rms_residual = std::sqrt(ss / static_cast<double>(fit.n));
  return fit;
}

}  // namespace detail

/// Classifies the convergence behavior of a sequence of distances to a limit.
///
/// Distances below 1e-14 are treated as exact convergence and terminate the
/// analyzed prefix. The tail used for fitting is the last max(4, ceil(n/2))
/// entries of that prefix. Decision order:
///   1. diverged   — tail ratios grow on average and the tail ends higher
///                   than it starts;
///   2. rate_gamma — the log d_{k+1} on log d_k regression slope exceeds
///                   1 + tol with a stable fit (>= 3 pairs, RMS log-residual
///                   <= 0.5, all tail ratios < 1, net decrease); super-rate
///                   if the implied coefficients d_{k+1}/d_k^gamma tend to 0;
///   3. superlinear — tail ratios are non-increasing and their extrapolated
///                   limit (intercept of c_k against 1/(k+2)) is below 1e-2;
///   4. linear     — every ratio is below 1 + tol and every tail ratio is
///                   strictly below 1;
///   5. inconclusive otherwise.
///
/// `tol` is the slack on the gamma slope (and the pre-asymptotic ratio slack
/// for linear). Throws insufficient_data if the prefix has fewer than 4
/// entries.
inline RateReport classify_rate(const std::vector<double>& dists, double tol = 0.15) {
  constexpr double kZeroFloor = 1e-14;
  constexpr double kSuperlinearLimit = 1e-2;

  std::vector<double> d;
  for (double v : dists) {
    if (!std::isfinite(v) || v < 0.0)
      fail(ErrorCode::insufficient_data, "non-finite or negative distance entry");
    if (v < kZeroFloor) break;  // exact convergence: stop the analyzed prefix
    d.push_back(v);
  }
  if (d.size() < 4)
    fail(ErrorCode::insufficient_data,
         "need at least 4 usable entries, got " + std::to_string(d.size()));

  RateReport report;
  report.used_entries = d.size();
  for (std::size_t k = 0; k + 1 < d.size(); ++k)
    report.c_estimates.push_back(d[k + 1] / d[k]);

  const std::size_t n = d.size();
  const std::size_t tail_len = std::max<std::size_t>(4, (n + 1) / 2);
  const std::size_t tail_start = n - std::min(tail_len, n);
  report.tail_start = tail_start;

  // Ratios whose *numerator* index lies in the tail: c_k for k in
  // [tail_start, n-2].
  std::vector<double> tail_ratios(report.c_estimates.begin() + static_cast<std::ptrdiff_t>(tail_start),
                                  report.c_estimates.end());

  // 1. Divergence.
  double ratio_mean = 0.0;
  for (double c : tail_ratios) ratio_mean += c;
  ratio_mean /= static_cast<double>(tail_ratios.size());
  if (ratio_mean > 1.0 + 1e-9 && d.back() > d[tail_start]) {
    report.classification = RateClass::diverged;
    report.note = "tail ratios grow on average";
    return report;
  }

  const bool tail_decreasing_net = d.back() < d[tail_start];
  const bool tail_ratios_below_one =
      std::all_of(tail_ratios.begin(), tail_ratios.end(), [](double c) { return c < 1.0; });

  // 2. Rate gamma via log-log regression over consecutive tail entries.
  std::vector<double> lx, ly;
  for (std::size_t k = tail_start; k + 1 < n; ++k) {
    lx.push_back(std::log(d[k]));
    ly.push_back(std::log(d[k + 1]));
  }
  const auto fit = detail::fit_line(lx, ly);
  const bool fit_stable = fit.n >= 3 && fit.rms_residual <= 0.5;
  if (fit_stable && fit.slope >= 1.0 + tol && tail_ratios_below_one && tail_decreasing_net) {
    report.gamma_estimate = fit.slope;
    // Coefficients c_k^(gamma) = d_{k+1} / d_k^gamma; if they tend to zero
    // the rate is a super-rate.
    std::vector<double> coeff;
    for (std::size_t k = tail_start; k + 1 < n; ++k)
      coeff.push_back(d[k + 1] / std::pow(d[k], fit.slope));
    bool coeff_decreasing = true;
    for (std::size_t i = 0; i + 1 < coeff.size(); ++i)
      if (coeff[i + 1] > coeff[i] * (1.0 + 1e-9)) coeff_decreasing = false;
    const bool coeff_vanishing =
        coeff_decreasing && coeff.back() <= kSuperlinearLimit * std::max(1.0, coeff.front());
    report.classification =
        coeff_vanishing ? RateClass::super_rate_gamma : RateClass::rate_gamma;
    return report;
  }

  // 3. Superlinear: non-increasing tail ratios whose extrapolated limit
  // (least-squares intercept of c_k against 1/(k+2)) is below the threshold.
  bool ratios_nonincreasing = true;
  for (std::size_t i = 0; i + 1 < tail_ratios.size(); ++i)
    if (tail_ratios[i + 1] > tail_ratios[i] * (1.0 + 1e-9)) ratios_nonincreasing = false;
  if (ratios_nonincreasing && tail_ratios_below_one && tail_ratios.size() >= 2) {
    std::vector<double> u, c;
    for (std::size_t k = tail_start; k + 1 < n; ++k) {
      u.push_back(1.0 / static_cast<double>(k + 2));
      c.push_back(report.c_estimates[k]);
    }
    const auto cfit = detail::fit_line(u, c);
    const double limit = std::max(0.0, cfit.intercept);
    if (limit <= kSuperlinearLimit) {
      report.classification = RateClass::superlinear;
      report.note = "extrapolated ratio limit " + std::to_string(limit);
      return report;
    }
  }

  // 4. Linear: all ratios below 1 + tol, tail ratios strictly below 1.
  const bool all_ratios_bounded = std::all_of(
      report.c_estimates.begin(), report.c_estimates.end(),
      [tol](double c) { return c < 1.0 + tol; });
  if (all_ratios_bounded && tail_ratios_below_one) {
    report.classification = RateClass::linear;
    report.c_bound = *std::max_element(tail_ratios.begin(), tail_ratios.end());
    return report;
  }

  report.classification = RateClass::inconclusive;
  return report;
}

/// Largest concatenated step-sum over any window after `from`; a sequence of
/// steps is Cauchy-consistent at tolerance eps when this is <= eps.
inline double cauchy_defect(const std::vector<double>& step_dists, std::size_t from = 0) {
  double total = 0.0;
  for (std::size_t i = from; i < step_dists.size(); ++i) total += step_dists[i];
  return total;
}

// ---------------------------------------------------------------------------
// Lipschitz / Hölder estimation
// ---------------------------------------------------------------------------

struct LipschitzReport {
  double constant = 0.0;        ///< sup of image-distance / argument-distance
  double holder_exponent = 1.0; ///< log-log regression slope across the pairs
  bool contraction = false;     ///< constant < 1
  std::size_t pairs_used = 0;
};

/// Estimates a Lipschitz constant (and a Hölder exponent) of `map` from
/// supplied argument pairs. Ratios use distance_cod(map(x), map(y)) over
/// distance_dom(x, y) in that order. A pair at domain distance zero with
/// distinct images throws infinite_constant; pairs at distance zero with
/// coincident images are skipped.
template <QuasiMetricSpace SDom, QuasiMetricSpace SCod, class Map>
LipschitzReport lipschitz_estimate(
    const SDom& dom, const SCod& cod, Map&& map,
    const std::vector<std::pair<typename SDom::Point, typename SDom::Point>>& pairs) {
  if (pairs.empty()) fail(ErrorCode::empty_set, "lipschitz_estimate: no pairs");
  LipschitzReport report;
  std::vector<double> lx, ly;
  for (const auto& [x, y] : pairs) {
    const double da = dom.distance(x, y);
    const double di = cod.distance(map(x), map(y));
    if (da == 0.0) {
      if (di > 0.0)
        fail(ErrorCode::infinite_constant,
             "distinct images over a zero argument distance");
      continue;
    }
    report.constant = std::max(report.constant, di / da);
    if (di > 0.0) {
      lx.push_back(std::log(da));
      ly.push_back(std::log(di));
    }
    ++report.pairs_used;
  }
  if (report.pairs_used == 0)
    fail(ErrorCode::insufficient_data, "lipschitz_estimate: no usable pairs");
  const auto fit = detail::fit_line(lx, ly);
  if (fit.n >= 3) report.holder_exponent = fit.slope;
  report.contraction = report.constant < 1.0;
  return report;
}

// ---------------------------------------------------------------------------
// Axiom suite
// ---------------------------------------------------------------------------

struct AxiomReport {
  std::size_t triples = 0;
  std::size_t violations = 0;
  /// min over triples of distance(x,y) + distance(y,z) - distance(x,z).
  double worst_triangle_slack = std::numeric_limits<double>::infinity();
  /// max over points of |distance(x,x)|.
  double worst_self_distance = 0.0;
  /// most negative distance seen (0 when none).
  double worst_negative_distance = 0.0;
  std::string first_violation;

  bool passed() const { return violations == 0; }
};

/// Randomized check of the quasi-metric axioms on `triples` sampled triples:
/// nonnegativity, zero self-distance, positivity on metrically distinct
/// points (zero one way but positive the other flags a violation), and the
/// triangle inequality — symmetry deliberately not among them. `sample` draws
/// one point from the space's natural distribution.
template <QuasiMetricSpace S, class Sampler>
AxiomReport check_axioms(const S& space, Sampler&& sample, std::size_t triples,
                         double tol = 1e-12, unsigned long seed = 42) {
  Rng rng(seed);
  AxiomReport report;
  report.triples = triples;
  auto record = [&](const std::string& what) {
    ++report.violations;
    if (report.first_violation.empty()) report.first_violation = what;
  };
  for (std::size_t i = 0; i < triples; ++i) {
    const auto x = sample(rng);
    const auto y = sample(rng);
    const auto z = sample(rng);
    const double dxy = space.distance(x, y);
    const double dyz = space.distance(y, z);
    const double dxz = space.distance(x, z);
    const double dyx = space.distance(y, x);
    for (double d : {dxy, dyz, dxz, dyx}) {
      if (d < report.worst_negative_distance) report.worst_negative_distance = d;
      if (d < -tol) record("negative distance");
    }
    // QMS1 on metrically distinct points: a vanishing forward distance with
    // a positive backward distance separates the points, so zero is illegal.
    if (dxy <= tol && dyx > tol) record("zero distance between distinct points");
    const double self = std::abs(space.distance(x, x));
    report.worst_self_distance = std::max(report.worst_self_distance, self);
    if (self > tol) record("nonzero self-distance");
    const double slack = dxy + dyz - dxz;
    report.worst_triangle_slack = std::min(report.worst_triangle_slack, slack);
    if (slack < -tol) record("triangle inequality violated");
  }
  return report;
}

}  // namespace qnewt
