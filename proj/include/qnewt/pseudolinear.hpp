#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qnewt/error.hpp"
#include "qnewt/qspace.hpp"

namespace qnewt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A two-point map H : M x M -> R^n that vanishes on the diagonal,
/// H(x, x) = 0. On Euclidean space the model instance is
/// H(y, z) = T (z - y); orientation matters and all consumers in this
/// library assume that convention (second argument minus first under the
/// linear model).
template <QuasiMetricSpace S>
struct PseudoLinearMap {
  int n = 1;  ///< output dimension
  std::function<Vector(const typename S::Point&, const typename S::Point&)> eval;
  std::string label;  ///< free-form tag used in diagnostics
};

/// Quasi-inverse for a pseudo-linear map H: a map (x, v) -> point with
/// H_inv(x, 0) = x and
///   distance(H_inv(x, v), H_inv(y, w)) <= m * |v - w - H(x, y)|
/// for some finite m. `norm_bound` is a certified upper bound on the best
/// such m when the instance knows one (NaN otherwise).
template <QuasiMetricSpace S>
struct QuasiInverse {
  std::function<typename S::Point(const typename S::Point&, const Vector&)> eval;
  double norm_bound = std::numeric_limits<double>::quiet_NaN();
};

/// A pseudo-linear map together with its quasi-inverse when one is available.
template <QuasiMetricSpace S>
struct Selection {
  PseudoLinearMap<S> map;
  std::optional<QuasiInverse<S>> inverse;
};

// ---------------------------------------------------------------------------
// Samplers shared by the sampling-based checkers
// ---------------------------------------------------------------------------

template <QuasiMetricSpace S>
struct TupleSamplingOptions {
  std::function<typename S::Point(Rng&)> point_sampler;  ///< required
  /// Center for the value draws; defaults to the zero vector. Typical use is
  /// the objective itself so v, w live near observed F-values.
  std::function<Vector(const typename S::Point&)> value_center;
  double value_radius = 1.0;
  std::size_t count = 4096;
  std::uint64_t seed = 42;
};

namespace detail {

inline Vector gaussian_vector(int n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

template <QuasiMetricSpace S>
Vector draw_value(const TupleSamplingOptions<S>& opts, const typename S::Point& at,
                  int n, Rng& rng) {
  Vector center = opts.value_center ? opts.value_center(at) : Vector::Zero(n);
  return center + opts.value_radius * gaussian_vector(n, rng);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Checks
// ---------------------------------------------------------------------------

template <QuasiMetricSpace S>
struct DiagonalCheck {
  bool ok = true;
  double worst = 0.0;
  std::optional<typename S::Point> witness;
};

/// Verifies the diagonal identity |H(x, x)| <= tol over the supplied points.
template <QuasiMetricSpace S>
DiagonalCheck<S> check_pseudo_linear(const S&, const PseudoLinearMap<S>& h,
                                     const std::vector<typename S::Point>& points,
                                     double tol = 1e-9) {
  DiagonalCheck<S> result;
  for (const auto& p : points) {
    const double v = h.eval(p, p).norm();
    if (v > result.worst) {
      result.worst = v;
      result.witness = p;
    }
  }
  result.ok = result.worst <= tol;
  return result;
}

struct OperatorNormEstimate {
  double empirical_sup = 0.0;  ///< lower bound on the true operator norm
  std::size_t tuples_used = 0;
  std::size_t skipped_zero_denominator = 0;
};

/// Samples tuples (x, y, v, w) and returns the empirical supremum of
///   distance(H_inv(x, v), H_inv(y, w)) / |v - w - H(x, y)|.
/// This is a lower bound on the operator norm; instances with a certified
/// bound expose it as QuasiInverse::norm_bound. Denominators below 1e-12 are
/// skipped and counted.
template <QuasiMetricSpace S>
OperatorNormEstimate estimate_operator_norm(const S& space, const PseudoLinearMap<S>& h,
                                            const QuasiInverse<S>& h_inv,
                                            const TupleSamplingOptions<S>& opts) {
  if (!opts.point_sampler)
    fail(ErrorCode::sampling_error, "estimate_operator_norm: no point sampler");
  Rng rng(opts.seed);
  OperatorNormEstimate est;
  for (std::size_t i = 0; i < opts.count; ++i) {
    const auto x = opts.point_sampler(rng);
    const auto y = opts.point_sampler(rng);
    const Vector v = detail::draw_value(opts, x, h.n, rng);
    const Vector w = detail::draw_value(opts, y, h.n, rng);
    const double den = (v - w - h.eval(x, y)).norm();
    if (den < 1e-12) {
      ++est.skipped_zero_denominator;
      continue;
    }
    const double num = space.distance(h_inv.eval(x, v), h_inv.eval(y, w));
    est.empirical_sup = std::max(est.empirical_sup, num / den);
    ++est.tuples_used;
  }
  if (est.tuples_used == 0)
    fail(ErrorCode::sampling_error, "estimate_operator_norm: all tuples degenerate");
  return est;
}

template <QuasiMetricSpace S>
struct StrongCompatibilityReport {
  bool ok = true;
  /// Worst round-trip defect |v - H(x, H_inv(x, v))| observed.
  double worst_roundtrip = 0.0;
  std::optional<typename S::Point> roundtrip_witness_x;
  std::optional<Vector> roundtrip_witness_v;
  /// True if some v != 0 mapped back to x exactly (H_inv(x, v) = x).
  bool zero_violation = false;
  std::optional<Vector> zero_witness_v;
  std::size_t samples = 0;
};

/// Strong inverse compatibility: v = H(x, H_inv(x, v)) for all sampled
/// (x, v), and H_inv(x, v) = x only for v = 0. Round-trip defects above
/// `tol` or a nonzero v collapsing onto x fail the check and are reported
/// with witnesses.
template <QuasiMetricSpace S>
StrongCompatibilityReport<S> check_strong_compatibility(
    const S& space, const Selection<S>& sel, const TupleSamplingOptions<S>& opts,
    double tol = 1e-9) {
  if (!opts.point_sampler)
    fail(ErrorCode::sampling_error, "check_strong_compatibility: no point sampler");
  if (!sel.inverse)
    fail(ErrorCode::inverse_missing, "check_strong_compatibility: selection has no inverse");
  Rng rng(opts.seed);
  StrongCompatibilityReport<S> report;
  for (std::size_t i = 0; i < opts.count; ++i) {
    const auto x = opts.point_sampler(rng);
    const Vector v = detail::draw_value(opts, x, sel.map.n, rng);
    const auto image = sel.inverse->eval(x, v);
    const double defect = (v - sel.map.eval(x, image)).norm();
    if (defect > report.worst_roundtrip) {
      report.worst_roundtrip = defect;
      report.roundtrip_witness_x = x;
      report.roundtrip_witness_v = v;
    }
    if (space.distance(image, x) <= 1e-12 && v.norm() > tol) {
      report.zero_violation = true;
      if (!report.zero_witness_v) report.zero_witness_v = v;
    }
    ++report.samples;
  }
  report.ok = report.worst_roundtrip <= tol && !report.zero_violation;
  return report;
}

template <QuasiMetricSpace S>
struct HSmoothReport {
  bool ok = true;
  double worst_margin = std::numeric_limits<double>::infinity();  ///< min of rhs - lhs
  std::size_t violations = 0;
  std::size_t samples = 0;
  std::optional<typename S::Point> witness_x;
};

template <QuasiMetricSpace S>
struct HSmoothOptions {
  std::function<typename S::Point(Rng&)> x_sampler;  ///< draws base points x
  /// Draws the (y, z) argument pairs of the reference map.
  std::function<std::pair<typename S::Point, typename S::Point>(Rng&)> pair_sampler;
  std::size_t count = 2048;
  std::uint64_t seed = 42;
  double tol = 1e-9;
};

/// Smoothness of the selection family relative to its value at x0:
///   distance(H(x)_inv(x, H(x0)(z, y)), x)
///     <= (1 + kappa * distance(x, x0)^alpha) * distance(y, z).
/// Argument orders are exactly as displayed; they matter in quasi-metric
/// spaces. `base_selection` maps a base point to its (H, H_inv) pair.
template <QuasiMetricSpace S>
HSmoothReport<S> check_h_smooth(
    const S& space,
    const std::function<Selection<S>(const typename S::Point&)>& base_selection,
    const typename S::Point& x0, double kappa, double alpha,
    const HSmoothOptions<S>& opts) {
  if (!opts.x_sampler || !opts.pair_sampler)
    fail(ErrorCode::sampling_error, "check_h_smooth: missing sampler");
  const Selection<S> at_x0 = base_selection(x0);
  Rng rng(opts.seed);
  HSmoothReport<S> report;
  for (std::size_t i = 0; i < opts.count; ++i) {
    const auto x = opts.x_sampler(rng);
    const auto [y, z] = opts.pair_sampler(rng);
    const Selection<S> at_x = base_selection(x);
    if (!at_x.inverse)
      fail(ErrorCode::inverse_missing, "check_h_smooth: selection has no inverse");
    const Vector ref = at_x0.map.eval(z, y);
    const double lhs = space.distance(at_x.inverse->eval(x, ref), x);
    const double rhs =
        (1.0 + kappa * std::pow(space.distance(x, x0), alpha)) * space.distance(y, z);
    const double margin = rhs - lhs;
    if (margin < report.worst_margin) {
      report.worst_margin = margin;
      report.witness_x = x;
    }
    if (margin < -opts.tol) ++report.violations;
    ++report.samples;
  }
  report.ok = report.violations == 0;
  return report;
}

// ---------------------------------------------------------------------------
// Algebra on pseudo-linear maps (all preserve the vanishing diagonal)
// ---------------------------------------------------------------------------

/// (H1 + H2)(x, y) = H1(x, y) + H2(x, y); dimensions must match.
template <QuasiMetricSpace S>
PseudoLinearMap<S> algebra_sum(const PseudoLinearMap<S>& a, const PseudoLinearMap<S>& b) {
  if (a.n != b.n)
    fail(ErrorCode::dimension_error, "algebra_sum: dimensions " + std::to_string(a.n) +
                                         " vs " + std::to_string(b.n));
  PseudoLinearMap<S> out;
  out.n = a.n;
  out.label = "(" + a.label + "+" + b.label + ")";
  out.eval = [ea = a.eval, eb = b.eval](const auto& x, const auto& y) -> Vector {
    return ea(x, y) + eb(x, y);
  };
  return out;
}

/// <H1, H2>(x, y) = dot(H1(x, y), H2(x, y)); scalar-valued output.
template <QuasiMetricSpace S>
PseudoLinearMap<S> algebra_inner(const PseudoLinearMap<S>& a, const PseudoLinearMap<S>& b) {
  if (a.n != b.n)
    fail(ErrorCode::dimension_error, "algebra_inner: dimensions " + std::to_string(a.n) +
                                         " vs " + std::to_string(b.n));
  PseudoLinearMap<S> out;
  out.n = 1;
  out.label = "<" + a.label + "," + b.label + ">";
  out.eval = [ea = a.eval, eb = b.eval](const auto& x, const auto& y) -> Vector {
    Vector r(1);
    r[0] = ea(x, y).dot(eb(x, y));
    return r;
  };
  return out;
}

/// (scalar_map . h)(x, y) = scalar_map(x, y)[0] * h(x, y); scalar_map must be
/// one-dimensional.
template <QuasiMetricSpace S>
PseudoLinearMap<S> algebra_scale(const PseudoLinearMap<S>& scalar_map,
                                 const PseudoLinearMap<S>& h) {
  if (scalar_map.n != 1)
    fail(ErrorCode::dimension_error, "algebra_scale: scalar factor must have n == 1");
  PseudoLinearMap<S> out;
  out.n = h.n;
  out.label = "(" + scalar_map.label + "*" + h.label + ")";
  out.eval = [es = scalar_map.eval, eh = h.eval](const auto& x, const auto& y) -> Vector {
    return es(x, y)[0] * eh(x, y);
  };
  return out;
}

/// (H1 (+) H2)(x, y) stacks the two outputs into R^{n1+n2}.
template <QuasiMetricSpace S>
PseudoLinearMap<S> algebra_direct_sum(const PseudoLinearMap<S>& a,
                                      const PseudoLinearMap<S>& b) {
  PseudoLinearMap<S> out;
  out.n = a.n + b.n;
  out.label = "(" + a.label + "(+)" + b.label + ")";
  out.eval = [ea = a.eval, eb = b.eval, na = a.n, nb = b.n](const auto& x,
                                                            const auto& y) -> Vector {
    Vector r(na + nb);
    r.head(na) = ea(x, y);
    r.tail(nb) = eb(x, y);
    return r;
  };
  return out;
}

}  // namespace qnewt
