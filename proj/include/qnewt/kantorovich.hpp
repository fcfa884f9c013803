#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qnewt/differential.hpp"
#include "qnewt/error.hpp"
#include "qnewt/pseudolinear.hpp"
#include "qnewt/qspace.hpp"
#include "qnewt/solver.hpp"

namespace qnewt {

/// Scalar majorant for the existence certificate: a C^2 function on
/// [0, t_bar] whose Newton iterates dominate the step sizes of the real
/// iteration. `L`, `B`, `eta`, `gamma` are the constants the conditions
/// are phrased in; `family` names the construction for reports.
struct Majorant {
  std::function<double(double)> f;
  std::function<double(double)> df;
  std::function<double(double)> ddf;
  double t_bar = 0.0;
  double eta = 0.0;
  double gamma = 2.0;
  double L = 1.0;
  double B = 1.0;
  std::string family = "custom";
};

/// The default family f(t) = (LB/2) t^2 - t + eta with
/// t_bar = (1 - sqrt(1 - 2LB*eta)) / (LB), applicable when gamma = 2,
/// B >= 1 and 2LB*eta <= 1. Outside that region the family's hypotheses
/// fail, so construction refuses (invalid_majorant).
inline Majorant quadratic_majorant(double l, double b, double eta) {
  if (!(l > 0.0)) fail(ErrorCode::invalid_majorant, "quadratic family needs L > 0");
  if (!(b >= 1.0))
    fail(ErrorCode::invalid_majorant,
         "quadratic family needs B >= 1, got " + std::to_string(b));
  if (!(eta >= 0.0)) fail(ErrorCode::invalid_majorant, "quadratic family needs eta >= 0");
  const double lb = l * b;
  const double disc = 1.0 - 2.0 * lb * eta;
  if (disc < 0.0)
    fail(ErrorCode::invalid_majorant,
         "2LB*eta = " + std::to_string(2.0 * lb * eta) + " > 1: no real root");
  Majorant m;
  m.f = [lb, eta](double t) { return 0.5 * lb * t * t - t + eta; };
  m.df = [lb](double t) { return lb * t - 1.0; };
  m.ddf = [lb](double) { return lb; };
  m.t_bar = (1.0 - std::sqrt(disc)) / lb;
  m.eta = eta;
  m.gamma = 2.0;
  m.L = l;
  m.B = b;
  m.family = "quadratic";
  return m;
}

/// N(t) = t - f(t)/f'(t). For a valid majorant N maps [0, t_bar] into
/// itself with t <= N(t) <= t_bar. Requires f'(t) < 0.
inline double scalar_newton_map(const Majorant& m, double t) {
  const double fp = m.df(t);
  if (fp >= 0.0)
    fail(ErrorCode::invalid_majorant,
         "f'(" + std::to_string(t) + ") = " + std::to_string(fp) + " >= 0");
  return t - m.f(t) / fp;
}

/// t_0 = 0, t_{k+1} = N(t_k), clamped into [0, t_bar] against roundoff.
/// Produces `count + 1` values (indices 0..count); stops extending early
/// once the sequence is stationary (but still pads to the requested length
/// so callers can index it alongside an iterate sequence).
inline std::vector<double> scalar_majorant_sequence(const Majorant& m, std::size_t count) {
  std::vector<double> t;
  t.reserve(count + 1);
  t.push_back(0.0);
  for (std::size_t k = 0; k < count; ++k) {
    const double cur = t.back();
    double next = cur;
    if (cur < m.t_bar) next = std::min(scalar_newton_map(m, cur), m.t_bar);
    t.push_back(next);
  }
  return t;
}

/// Iterates N from 0 until |t_bar - t_k| <= tol or the sequence stalls;
/// returns the whole scalar trajectory.
inline std::vector<double> scalar_iterates_to_limit(const Majorant& m, double tol = 1e-10,
                                                    int max_iters = 200) {
  std::vector<double> t{0.0};
  for (int k = 0; k < max_iters; ++k) {
    const double cur = t.back();
    if (m.t_bar - cur <= tol) break;
    const double next = std::min(scalar_newton_map(m, cur), m.t_bar);
    t.push_back(next);
    if (next <= cur) break;  // stationary: no further progress possible
  }
  return t;
}

/// One verified hypothesis: `worst_margin` is the smallest slack observed
/// on the grid (negative = violated by that amount), at abscissa `worst_t`.
struct ConditionCheck {
  bool holds = false;
  double worst_margin = std::numeric_limits<double>::infinity();
  double worst_t = 0.0;
};

struct MajorantChecks {
  ConditionCheck a;  ///< (LB/2)(-f/f')^gamma <= f(N(t))
  ConditionCheck b;  ///< f(0) = eta, f > 0 inside, f(t_bar) = 0
  ConditionCheck c;  ///< f' < 0 and f' >= -(1 + L t^(gamma-1))^-1
  ConditionCheck d;  ///< f'' > 0
  std::size_t grid = 0;
  double tol = 0.0;

  bool all_hold() const { return a.holds && b.holds && c.holds && d.holds; }
};

namespace detail {

inline void record_margin(ConditionCheck& c, double margin, double t) {
  if (margin < c.worst_margin) {
    c.worst_margin = margin;
    c.worst_t = t;
  }
}

}  // namespace detail

/// Checks hypotheses (a)-(d) on the uniform grid t_i = t_bar * i / grid_size,
/// i = 0..grid_size-1 (t_bar itself is excluded: f' may vanish there). The
/// endpoint identities f(0) = eta and f(t_bar) = 0 are evaluated directly.
/// Report-only: failures appear as negative margins, never as errors.
inline MajorantChecks verify_majorant(const Majorant& m, std::size_t grid_size = 1024,
                                      double tol = 1e-9) {
  if (grid_size < 16) fail(ErrorCode::out_of_range, "grid_size must be >= 16");
  MajorantChecks checks;
  checks.grid = grid_size;
  checks.tol = tol;

  // Endpoint identities belong to condition (b).
  detail::record_margin(checks.b, -std::abs(m.f(0.0) - m.eta), 0.0);
  detail::record_margin(checks.b, -std::abs(m.f(m.t_bar)), m.t_bar);

  if (m.t_bar > 0.0) {
    for (std::size_t i = 0; i < grid_size; ++i) {
      const double t = m.t_bar * static_cast<double>(i) / static_cast<double>(grid_size);
      const double ft = m.f(t);
      const double fpt = m.df(t);
      const double fppt = m.ddf(t);

      if (i > 0) detail::record_margin(checks.b, ft, t);  // interior positivity
      detail::record_margin(checks.c, -fpt, t);
      detail::record_margin(checks.c, fpt + 1.0 / (1.0 + m.L * std::pow(t, m.gamma - 1.0)), t);
      detail::record_margin(checks.d, fppt, t);

      if (fpt < 0.0) {
        const double step = -ft / fpt;
        const double lhs = 0.5 * m.L * m.B * std::pow(step, m.gamma);
        detail::record_margin(checks.a, m.f(t + step) - lhs, t);
      } else {
        detail::record_margin(checks.a, -1e300, t);  // N(t) undefined here
      }
    }
  } else {
    // Degenerate eta = 0 interval: nothing to check on (0, t_bar).
    checks.a.worst_margin = checks.c.worst_margin = checks.d.worst_margin = 0.0;
  }

  for (ConditionCheck* c : {&checks.a, &checks.b, &checks.c, &checks.d})
    c->holds = c->worst_margin >= -tol;
  return checks;
}

/// Empirical sup of dist(x, y) / |H(x, y)| over sampled distinct pairs: a
/// lower bound on B for the selection at the anchor point. A vanishing
/// denominator on a pair at distance > 1e-9 means B is unbounded for this
/// map (b_unbounded).
template <QuasiMetricSpace S>
double estimate_B(const S& space, const Selection<S>& h0,
                  const std::vector<std::pair<typename S::Point, typename S::Point>>& pairs) {
  double sup = 0.0;
  for (const auto& [x, y] : pairs) {
    const double d = space.distance(x, y);
    const double den = h0.map.eval(x, y).norm();
    if (den < 1e-12) {
      if (d > 1e-9)
        fail(ErrorCode::b_unbounded, "H(x,y) vanishes on a pair at distance " + std::to_string(d));
      continue;
    }
    sup = std::max(sup, d / den);
  }
  return sup;
}

/// Empirical smoothness constant: 2 * sup of
/// |F(y) - F(x) + H(x)(y, x)| / dist(y, x)^gamma over sampled pairs,
/// using the selection taken at the base point x of each pair.
template <QuasiMetricSpace S, class F>
double estimate_smoothness_L(
    const S& space, F&& f,
    const std::function<Selection<S>(const typename S::Point&)>& h_at,
    const std::vector<std::pair<typename S::Point, typename S::Point>>& pairs, double gamma) {
  double sup = 0.0;
  for (const auto& [x, y] : pairs) {
    const double d = space.distance(y, x);
    if (d < 1e-12) continue;
    const double rem = model_residual_norm(f, h_at(x).map, y, x);
    sup = std::max(sup, rem / std::pow(d, gamma));
  }
  return 2.0 * sup;
}

/// First Newton step length dist(x0, H(x0)^-(x0, -F(x0))): the measured eta.
template <QuasiMetricSpace S, class F>
double measure_eta(const S& space, F&& f, const Selection<S>& h0, const typename S::Point& x0) {
  if (!h0.inverse) fail(ErrorCode::inverse_missing, "eta needs the quasi-inverse at x0");
  return space.distance(h0.inverse->eval(x0, -f(x0)), x0);
}

/// Per-iterate residual comparison; the f(t_k)/B bound is derived for
/// iterates k >= 1, so index 0 is recorded but not enforced.
struct ResidualBound {
  double residual = 0.0;
  double bound = 0.0;
  bool applicable = false;
};

/// Everything the certified run verifies. Margins follow the convention
/// "required_bound - observed": nonnegative (up to tol) means satisfied.
struct MajorantCertificate {
  std::vector<double> t_sequence;            ///< t_0 = 0, t_{k+1} = N(t_k)
  MajorantChecks condition_checks;
  std::vector<bool> sigma_membership;        ///< x^k in Sigma(t_k)
  std::vector<double> step_bound_margins;    ///< (t_{k+1} - t_k) - dist(x^{k+1}, x^k)
  std::vector<double> anchor_bound_margins;  ///< t_k - dist(x^k, x0)
  std::vector<ResidualBound> residual_bounds;
  bool domain_check_defaulted = true;        ///< no membership predicate was supplied
  bool valid = false;
  std::optional<std::size_t> failing_index;  ///< first iterate violating a bound
  double tol = 1e-9;

  /// Telescoped Cauchy bound dist(x^m, x^n) <= t_m - t_n for m >= n.
  double cauchy_bound(std::size_t m, std::size_t n) const {
    if (n > m || m >= t_sequence.size())
      fail(ErrorCode::out_of_range, "cauchy_bound needs n <= m < " +
                                        std::to_string(t_sequence.size()));
    return t_sequence[m] - t_sequence[n];
  }
};

template <QuasiMetricSpace S>
struct CertifiedRun {
  IterationTrace<S> trace;
  MajorantCertificate certificate;
};

/// Runs the Newton iteration alongside the scalar majorant sequence and
/// verifies, per iterate: the step bound dist(x^{k+1}, x^k) <= t_{k+1} - t_k,
/// the anchor bound dist(x^k, x0) <= t_k, membership in
/// Sigma(t_k) = {x | dist(x, x0) <= t_k, dist(x, H(x0)^-(x, -F(x))) <= f(t_k)},
/// and the residual bound |F(x^k)| <= f(t_k)/B for k >= 1. Violations
/// invalidate the certificate (recording the first failing iterate) but the
/// iteration always runs to completion for diagnostics. `in_domain`, when
/// given, is the domain-invariance hypothesis checked per iterate; when
/// omitted every point is accepted and the certificate says so.
template <QuasiMetricSpace S, class F>
CertifiedRun<S> run_certified_newton(
    const S& space, F&& f,
    const std::function<Selection<S>(const typename S::Point&)>& h_at,
    const typename S::Point& x0, const Majorant& majorant, const SolveConfig<S>& cfg = {},
    const std::function<bool(const typename S::Point&)>& in_domain = nullptr,
    double tol = 1e-9) {
  CertifiedRun<S> run;
  NewtonDifferential<S> hf;
  hf.n = h_at(x0).map.n;
  hf.selections_at = [h_at](const typename S::Point& x) {
    return std::vector<Selection<S>>{h_at(x)};
  };
  run.trace = newton_solve(space, f, hf, x0, cfg);

  MajorantCertificate& cert = run.certificate;
  cert.tol = tol;
  cert.condition_checks = verify_majorant(majorant, 1024, tol);
  cert.domain_check_defaulted = !static_cast<bool>(in_domain);

  const std::size_t n_points = run.trace.points.size();
  cert.t_sequence = scalar_majorant_sequence(majorant, n_points == 0 ? 0 : n_points - 1);

  const Selection<S> h0 = h_at(x0);
  if (!h0.inverse)
    fail(ErrorCode::inverse_missing, "certificate needs the quasi-inverse at x0");

  const bool ok = cert.condition_checks.all_hold();
  std::optional<std::size_t> first_bad;
  auto mark = [&](std::size_t k) {
    if (!first_bad) first_bad = k;
  };

  for (std::size_t k = 0; k < n_points; ++k) {
    const auto& xk = run.trace.points[k];
    const double tk = cert.t_sequence[k];
    const double anchor = space.distance(xk, x0);
    cert.anchor_bound_margins.push_back(tk - anchor);
    if (anchor > tk + tol) mark(k);

    const double sigma_dist = space.distance(h0.inverse->eval(xk, -f(xk)), xk);
    const bool in_sigma = anchor <= tk + tol && sigma_dist <= majorant.f(tk) + tol;
    cert.sigma_membership.push_back(in_sigma);
    if (!in_sigma) mark(k);

    ResidualBound rb;
    rb.residual = run.trace.residual_norms[k];
    rb.bound = majorant.f(tk) / majorant.B;
    rb.applicable = k >= 1;
    cert.residual_bounds.push_back(rb);
    if (rb.applicable && rb.residual > rb.bound + tol) mark(k);

    if (in_domain && !in_domain(xk)) mark(k);
  }
  for (std::size_t k = 0; k + 1 < n_points; ++k) {
    const double allowed = cert.t_sequence[k + 1] - cert.t_sequence[k];
    cert.step_bound_margins.push_back(allowed - run.trace.step_dists[k]);
    if (run.trace.step_dists[k] > allowed + tol) mark(k);
  }

  cert.failing_index = first_bad;
  cert.valid = ok && !first_bad;
  return run;
}

}  // namespace qnewt
