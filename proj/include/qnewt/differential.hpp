#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qnewt/error.hpp"
#include "qnewt/pseudolinear.hpp"
#include "qnewt/qspace.hpp"

namespace qnewt {

/// Set-valued derivative object: at each point it offers a finite family of
/// pseudo-linear selections (each possibly carrying a quasi-inverse). Any
/// nonempty subset of a valid family is again a valid family, so consumers
/// may thin the selection list freely.
template <QuasiMetricSpace S>
struct NewtonDifferential {
  int n = 1;
  std::function<std::vector<Selection<S>>(const typename S::Point&)> selections_at;
};

/// First-order model residual of F at x against the anchor xbar:
///   | F(x) - F(xbar) + H(x, xbar) |
/// with H a selection map in the T(z - y) orientation. Under the linear
/// model this is the Taylor remainder based at x, and it is exactly the
/// quantity the quasi-inverse inequality converts into the step bound
///   distance(next, root) <= norm_bound * residual.
template <QuasiMetricSpace S, class F>
double model_residual_norm(F&& f, const PseudoLinearMap<S>& h,
                           const typename S::Point& x, const typename S::Point& xbar) {
  return (f(x) - f(xbar) + h.eval(x, xbar)).norm();
}

// ---------------------------------------------------------------------------
// Differentiability reports
// ---------------------------------------------------------------------------

enum class DiffabilityMode {
  weak_pointwise,  ///< ratios stay bounded as x -> xbar
  pointwise,       ///< ratios tend to 0 as x -> xbar
  uniform_weak,    ///< ratios stay inside a band around a constant, uniformly
  uniform,         ///< ratios tend to 0 uniformly over the region
  inconclusive,    ///< no property could be verified at the sampled scale
};

inline const char* to_string(DiffabilityMode m) noexcept {
  switch (m) {
    case DiffabilityMode::weak_pointwise: return "weak_pointwise";
    case DiffabilityMode::pointwise: return "pointwise";
    case DiffabilityMode::uniform_weak: return "uniform_weak";
    case DiffabilityMode::uniform: return "uniform";
    case DiffabilityMode::inconclusive: return "inconclusive";
  }
  return "unknown";
}

struct ShellStat {
  double radius = 0.0;     ///< requested shell radius
  double sup_ratio = 0.0;  ///< sup over samples and selections of residual / dist^gamma
  std::size_t samples = 0;
};

struct UniformStat {
  double epsilon = 0.0;
  double delta = 0.0;     ///< the delta that worked (last tried if not found)
  double sup_ratio = 0.0; ///< worst ratio at that delta
  bool found = false;
};

struct DiffabilityReport {
  DiffabilityMode mode = DiffabilityMode::inconclusive;
  double gamma = 1.0;           ///< exponent the ratios were formed with
  double limit_estimate = 0.0;  ///< observed limsup (weak modes) or band center
  std::vector<ShellStat> shells;        ///< pointwise runs
  std::vector<UniformStat> uniform_stats;  ///< uniform runs
  std::string note;
};

// ---------------------------------------------------------------------------
// Pointwise check
// ---------------------------------------------------------------------------

/// Eight geometric shell radii from 1e-1 down to exactly 1e-4.
inline std::vector<double> default_shell_radii() {
  std::vector<double> radii;
  for (int k = 0; k < 8; ++k) radii.push_back(std::pow(10.0, -1.0 - 3.0 * k / 7.0));
  radii.back() = 1e-4;
  return radii;
}

struct PointwiseOptions {
  /// Strictly decreasing shell radii; scaled by base_scale.
  std::vector<double> radii = default_shell_radii();
  double base_scale = 1.0;
  std::size_t samples_per_radius = 32;
  double gamma = 1.0;
  std::uint64_t seed = 42;
  /// Ratio threshold at the finest shell below which the check reports
  /// `pointwise`.
  double pointwise_tol = 1e-3;
};

/// Samples shells of shrinking radius around xbar and records the per-shell
/// supremum of
///   sup_{H in HF(x)} |F(x) - F(xbar) + H(x, xbar)| / distance(x, xbar)^gamma,
/// with the measured distance(x, xbar) in the denominator. Classification:
/// `pointwise` when the finest-shell supremum falls below pointwise_tol,
/// `weak_pointwise` when the suprema are merely bounded (finest <= first, or
/// <= twice the median), `inconclusive` when they grow as the radius shrinks.
template <SampleableSpace S, class F>
DiffabilityReport check_pointwise_diffability(const S& space, F&& f,
                                              const NewtonDifferential<S>& hf,
                                              const typename S::Point& xbar,
                                              const PointwiseOptions& opts = {}) {
  if (opts.radii.empty()) fail(ErrorCode::invalid_radii, "no shell radii");
  for (std::size_t i = 1; i < opts.radii.size(); ++i)
    if (!(opts.radii[i] < opts.radii[i - 1]))
      fail(ErrorCode::invalid_radii, "shell radii must be strictly decreasing");

  Rng rng(opts.seed);
  DiffabilityReport report;
  report.gamma = opts.gamma;
  const Vector f_bar = f(xbar);
  for (double base_r : opts.radii) {
    const double r = base_r * opts.base_scale;
    ShellStat stat;
    stat.radius = r;
    for (std::size_t i = 0; i < opts.samples_per_radius; ++i) {
      const auto x = space.sample_at_distance(xbar, r, rng);
      const double d = space.distance(x, xbar);
      if (d < 1e-14) continue;
      const auto selections = hf.selections_at(x);
      if (selections.empty())
        fail(ErrorCode::empty_selection, "no selections at a sampled point");
      double worst = 0.0;
      const Vector fx = f(x);
      for (const auto& sel : selections) {
        const double res = (fx - f_bar + sel.map.eval(x, xbar)).norm();
        worst = std::max(worst, res / std::pow(d, opts.gamma));
      }
      stat.sup_ratio = std::max(stat.sup_ratio, worst);
      ++stat.samples;
    }
    if (stat.samples == 0)
      fail(ErrorCode::sampling_error, "shell produced no usable samples");
    report.shells.push_back(stat);
  }

  std::vector<double> sups;
  for (const auto& s : report.shells) sups.push_back(s.sup_ratio);
  const double s_first = sups.front();
  const double s_last = sups.back();
  std::vector<double> sorted = sups;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[sorted.size() / 2];
  const std::size_t tail = std::min<std::size_t>(3, sups.size());
  report.limit_estimate = *std::max_element(sups.end() - static_cast<std::ptrdiff_t>(tail), sups.end());

  if (s_last <= opts.pointwise_tol) {
    report.mode = DiffabilityMode::pointwise;
  } else if (s_last <= s_first * (1.0 + 1e-9) || s_last <= 2.0 * median) {
    report.mode = DiffabilityMode::weak_pointwise;
  } else {
    report.mode = DiffabilityMode::inconclusive;
    report.note = "shell suprema grow as the radius shrinks";
  }
  return report;
}

// ---------------------------------------------------------------------------
// Uniform check
// ---------------------------------------------------------------------------

struct UniformOptions {
  std::vector<double> epsilons = {1e-1, 3e-2, 1e-2};
  double delta0 = 0.5;
  double shrink = 0.5;
  std::size_t max_tries = 24;
  std::size_t pairs_per_delta = 64;
  std::uint64_t seed = 42;
};

/// Uniform differentiability over a sampled region V: for each epsilon,
/// searches a delta such that every sampled pair (x near y, y in V) with
/// distance(x, y) <= delta has ratio
///   sup_H |F(x) - F(y) + H(x, y)| / distance(x, y) < epsilon.
/// If that fails, retries with the two-sided band |ratio - c| < epsilon
/// around the band center c estimated at the finest probed delta, reporting
/// `uniform_weak` on success. Otherwise `inconclusive`.
template <SampleableSpace S, class F>
DiffabilityReport check_uniform_diffability(const S& space, F&& f,
                                            const NewtonDifferential<S>& hf,
                                            const std::vector<typename S::Point>& region,
                                            const UniformOptions& opts = {}) {
  if (region.empty()) fail(ErrorCode::empty_set, "uniform check: empty region");

  const auto sup_ratio_at = [&](double delta, Rng& rng) {
    double sup = 0.0;
    for (std::size_t i = 0; i < opts.pairs_per_delta; ++i) {
      const auto& y = region[i % region.size()];
      std::uniform_real_distribution<double> unit(0.05, 1.0);
      const auto x = space.sample_at_distance(y, delta * unit(rng), rng);
      const double d = space.distance(x, y);
      if (d < 1e-14) continue;
      const auto selections = hf.selections_at(x);
      if (selections.empty())
        fail(ErrorCode::empty_selection, "no selections at a sampled point");
      const Vector fx = f(x);
      const Vector fy = f(y);
      for (const auto& sel : selections)
        sup = std::max(sup, (fx - fy + sel.map.eval(x, y)).norm() / d);
    }
    return sup;
  };

  DiffabilityReport report;
  report.gamma = 1.0;

  // Phase 1: plain uniform mode (ratios below epsilon).
  Rng rng(opts.seed);
  bool uniform_ok = true;
  double delta = opts.delta0;
  double finest_delta = opts.delta0;
  for (double eps : opts.epsilons) {
    UniformStat stat;
    stat.epsilon = eps;
    stat.found = false;
    for (std::size_t attempt = 0; attempt < opts.max_tries; ++attempt) {
      const double sup = sup_ratio_at(delta, rng);
      stat.delta = delta;
      stat.sup_ratio = sup;
      finest_delta = std::min(finest_delta, delta);
      if (sup < eps) {
        stat.found = true;
        break;
      }
      delta *= opts.shrink;
    }
    report.uniform_stats.push_back(stat);
    if (!stat.found) {
      uniform_ok = false;
      break;
    }
  }
  if (uniform_ok) {
    report.mode = DiffabilityMode::uniform;
    report.limit_estimate = 0.0;
    return report;
  }

  // Phase 2: band mode around an estimated constant.
  Rng band_rng(opts.seed + 1);
  const double center = sup_ratio_at(finest_delta, band_rng);
  report.limit_estimate = center;
  report.uniform_stats.clear();
  Rng rng2(opts.seed + 2);
  delta = opts.delta0;
  for (double eps : opts.epsilons) {
    UniformStat stat;
    stat.epsilon = eps;
    stat.found = false;
    for (std::size_t attempt = 0; attempt < opts.max_tries; ++attempt) {
      // For the band test every sampled ratio must stay inside (c-eps, c+eps);
      // track the worst deviation from the center.
      double worst_dev = 0.0;
      double sup = 0.0;
      for (std::size_t i = 0; i < opts.pairs_per_delta; ++i) {
        const auto& y = region[i % region.size()];
        std::uniform_real_distribution<double> unit(0.05, 1.0);
        const auto x = space.sample_at_distance(y, delta * unit(rng2), rng2);
        const double d = space.distance(x, y);
        if (d < 1e-14) continue;
        const Vector fx = f(x);
        const Vector fy = f(y);
        for (const auto& sel : hf.selections_at(x)) {
          const double ratio = (fx - fy + sel.map.eval(x, y)).norm() / d;
          worst_dev = std::max(worst_dev, std::abs(ratio - center));
          sup = std::max(sup, ratio);
        }
      }
      stat.delta = delta;
      stat.sup_ratio = sup;
      if (worst_dev < eps) {
        stat.found = true;
        break;
      }
      delta *= opts.shrink;
    }
    report.uniform_stats.push_back(stat);
    if (!stat.found) {
      report.mode = DiffabilityMode::inconclusive;
      report.note = "no delta reached the band for epsilon " + std::to_string(eps);
      return report;
    }
  }
  report.mode = DiffabilityMode::uniform_weak;
  return report;
}

// ---------------------------------------------------------------------------
// Calculus combinators
// ---------------------------------------------------------------------------

/// Sum rule: selections of F + G are the pairwise sums of selections.
/// Quasi-inverses do not transfer.
template <QuasiMetricSpace S>
NewtonDifferential<S> combine_sum(const NewtonDifferential<S>& a,
                                  const NewtonDifferential<S>& b) {
  if (a.n != b.n) fail(ErrorCode::dimension_error, "combine_sum: dimension mismatch");
  NewtonDifferential<S> out;
  out.n = a.n;
  out.selections_at = [a, b](const typename S::Point& x) {
    std::vector<Selection<S>> result;
    for (const auto& sa : a.selections_at(x))
      for (const auto& sb : b.selections_at(x))
        result.push_back({algebra_sum(sa.map, sb.map), std::nullopt});
    return result;
  };
  return out;
}

/// Product rule for scalar-valued F, G:
///   selection (y, z) -> H_F(y, z) G(x) + F(x) H_G(y, z)
/// where x is the base point the selections were requested at.
template <QuasiMetricSpace S, class FFn, class GFn>
NewtonDifferential<S> combine_product(const NewtonDifferential<S>& hf,
                                      const NewtonDifferential<S>& hg, FFn f, GFn g) {
  if (hf.n != 1 || hg.n != 1)
    fail(ErrorCode::dimension_error, "combine_product: factors must be scalar-valued");
  NewtonDifferential<S> out;
  out.n = 1;
  out.selections_at = [hf, hg, f, g](const typename S::Point& x) {
    const double fx = f(x)[0];
    const double gx = g(x)[0];
    std::vector<Selection<S>> result;
    for (const auto& sf : hf.selections_at(x)) {
      for (const auto& sg : hg.selections_at(x)) {
        PseudoLinearMap<S> map;
        map.n = 1;
        map.label = "(" + sf.map.label + "*g+f*" + sg.map.label + ")";
        map.eval = [ef = sf.map.eval, eg = sg.map.eval, fx, gx](const auto& y,
                                                                const auto& z) -> Vector {
          return ef(y, z) * gx + fx * eg(y, z);
        };
        result.push_back({std::move(map), std::nullopt});
      }
    }
    return result;
  };
  return out;
}

/// Chain rule for G after F: the selections at x are
///   (y, z) -> H_G(F(y), F(z))   for H_G a selection of G at F(x).
/// `hg` lives on the codomain space of F. The theorem behind this rule also
/// needs a global bound |H(y, z)| <= K distance(y, z) on the selections of
/// the *inner* differential; validate it separately with check_k_bound.
template <QuasiMetricSpace S, QuasiMetricSpace SCod, class FFn>
NewtonDifferential<S> combine_chain(const NewtonDifferential<SCod>& hg, FFn f) {
  NewtonDifferential<S> out;
  out.n = hg.n;
  out.selections_at = [hg, f](const typename S::Point& x) {
    std::vector<Selection<S>> result;
    for (const auto& sg : hg.selections_at(f(x))) {
      PseudoLinearMap<S> map;
      map.n = sg.map.n;
      map.label = "chain(" + sg.map.label + ")";
      map.eval = [eg = sg.map.eval, f](const typename S::Point& y,
                                       const typename S::Point& z) -> Vector {
        return eg(f(y), f(z));
      };
      result.push_back({std::move(map), std::nullopt});
    }
    return result;
  };
  return out;
}

/// Direct-sum rule: selections of (F, G) stacked into R^{nF+nG}.
template <QuasiMetricSpace S>
NewtonDifferential<S> combine_direct_sum(const NewtonDifferential<S>& a,
                                         const NewtonDifferential<S>& b) {
  NewtonDifferential<S> out;
  out.n = a.n + b.n;
  out.selections_at = [a, b](const typename S::Point& x) {
    std::vector<Selection<S>> result;
    for (const auto& sa : a.selections_at(x))
      for (const auto& sb : b.selections_at(x))
        result.push_back({algebra_direct_sum(sa.map, sb.map), std::nullopt});
    return result;
  };
  return out;
}

template <QuasiMetricSpace S>
struct KBoundReport {
  bool ok = true;
  double worst_ratio = 0.0;  ///< sup |H(y, z)| / distance(y, z) observed
  std::size_t samples = 0;
  std::optional<typename S::Point> witness_y;
};

/// Samples argument pairs near `center` and checks the linear growth bound
/// |H(y, z)| <= k * distance(y, z) for every selection of `hf` at sampled
/// base points. Violations do not throw; the caller decides (the chain-rule
/// consumer downgrades its report to inconclusive).
template <SampleableSpace S>
KBoundReport<S> check_k_bound(const S& space, const NewtonDifferential<S>& hf, double k,
                              const typename S::Point& center, double radius,
                              std::size_t count = 512, std::uint64_t seed = 42,
                              double tol = 1e-9) {
  Rng rng(seed);
  KBoundReport<S> report;
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  for (std::size_t i = 0; i < count; ++i) {
    const auto x = space.sample_at_distance(center, radius * unit(rng), rng);
    const auto y = space.sample_at_distance(center, radius * unit(rng), rng);
    const auto z = space.sample_at_distance(center, radius * unit(rng), rng);
    const double d = space.distance(y, z);
    if (d < 1e-14) continue;
    for (const auto& sel : hf.selections_at(x)) {
      const double ratio = sel.map.eval(y, z).norm() / d;
      if (ratio > report.worst_ratio) {
        report.worst_ratio = ratio;
        report.witness_y = y;
      }
    }
    ++report.samples;
  }
  report.ok = report.worst_ratio <= k * (1.0 + tol);
  return report;
}

}  // namespace qnewt
