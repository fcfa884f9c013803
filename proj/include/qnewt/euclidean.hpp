#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "qnewt/differential.hpp"
#include "qnewt/error.hpp"
#include "qnewt/pseudolinear.hpp"
#include "qnewt/qspace.hpp"

namespace qnewt {

/// R^n with the Euclidean norm distance |a - b| (a symmetric quasi-metric).
struct EuclideanSpace {
  using Point = Vector;
  int n = 1;

  double distance(const Point& a, const Point& b) const { return (a - b).norm(); }

  /// Uniform random direction at exact distance r from the center.
  Point sample_at_distance(const Point& c, double r, Rng& rng) const {
    Vector dir = detail::gaussian_vector(static_cast<int>(c.size()), rng);
    const double len = dir.norm();
    if (len == 0.0) {
      dir = Vector::Zero(c.size());
      dir[0] = 1.0;
      return c + r * dir;
    }
    return c + (r / len) * dir;
  }
};

inline Vector scalar_point(double x) {
  Vector v(1);
  v[0] = x;
  return v;
}

/// Selection induced by an invertible matrix T:
///   H(y, z) = T (z - y),  H_inv(x, v) = x + T^{-1} v,
/// with the certified operator norm |T^{-1}| = 1 / sigma_min(T) from an SVD.
/// A singular T yields a selection without a quasi-inverse.
inline Selection<EuclideanSpace> linear_selection(const Matrix& t,
                                                  const std::string& label = "linear") {
  if (t.rows() != t.cols()) fail(ErrorCode::dimension_error, "linear_selection: T not square");
  Selection<EuclideanSpace> sel;
  sel.map.n = static_cast<int>(t.rows());
  sel.map.label = label;
  sel.map.eval = [t](const Vector& y, const Vector& z) -> Vector { return t * (z - y); };

  Eigen::JacobiSVD<Matrix> svd(t);
  const double sigma_min = svd.singularValues().minCoeff();
  if (sigma_min > 1e-300) {
    QuasiInverse<EuclideanSpace> inv;
    const auto lu = t.partialPivLu();
    inv.eval = [lu](const Vector& x, const Vector& v) -> Vector { return x + lu.solve(v); };
    inv.norm_bound = 1.0 / sigma_min;
    sel.inverse = std::move(inv);
  }
  return sel;
}

using JacobianFn = std::function<Matrix(const Vector&)>;

/// Differential whose single selection at x is the linear model induced by
/// jac(x). This is the classical-derivative bundle: with a continuous
/// Jacobian the point limit of the model residual over the distance is zero.
inline NewtonDifferential<EuclideanSpace> euclidean_bundle(JacobianFn jac, int n) {
  NewtonDifferential<EuclideanSpace> hf;
  hf.n = n;
  hf.selections_at = [jac](const Vector& x) {
    return std::vector<Selection<EuclideanSpace>>{linear_selection(jac(x), "jacobian")};
  };
  return hf;
}

/// Multi-selection variant: one linear selection per supplied Jacobian map.
inline NewtonDifferential<EuclideanSpace> euclidean_bundle(std::vector<JacobianFn> jacs,
                                                           int n) {
  if (jacs.empty()) fail(ErrorCode::empty_selection, "euclidean_bundle: no jacobians");
  NewtonDifferential<EuclideanSpace> hf;
  hf.n = n;
  hf.selections_at = [jacs](const Vector& x) {
    std::vector<Selection<EuclideanSpace>> result;
    result.reserve(jacs.size());
    for (std::size_t i = 0; i < jacs.size(); ++i)
      result.push_back(linear_selection(jacs[i](x), "jacobian" + std::to_string(i)));
    return result;
  };
  return hf;
}

}  // namespace qnewt
