#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "geobridge/errors.hpp"

// Exact geometry kernels for the unit sphere S^n embedded in R^{n+1}.
// Points are unit vectors, tangent vectors at p are ambient vectors
// orthogonal to p, and the metric is the restriction of the Euclidean
// inner product. All kernels are pure functions of their inputs.

namespace geobridge::sphere {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;
/// Inner products this close to -1 count as the antipode (cut locus).
inline constexpr double kCutLocusTol = 1e-9;

inline double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

/// Orthogonal projection of an ambient vector onto the tangent space at p:
/// xi - <xi,p> p. Idempotent; matrix form has entries delta_ij - p_i p_j.
inline VectorXd project_tangent(const VectorXd& p, const VectorXd& xi) {
  return xi - p.dot(xi) * p;
}

/// Geodesic endpoint reached from p with initial velocity v after unit time:
/// cos(|v|) p + sin(|v|) v/|v|. Rejects |v| at or beyond the antipode.
inline VectorXd exp_map(const VectorXd& p, const VectorXd& v) {
  const double n = v.norm();
  if (n >= kPi - kCutLocusTol)
    throw CutLocusError("sphere exp: |v| = " + std::to_string(n) + " reaches the cut locus");
  if (n <= 1e-14) return p;
  VectorXd q = std::cos(n) * p + (std::sin(n) / n) * v;
  q.normalize();
  return q;
}

/// Inverse of exp_map: the tangent vector at p whose geodesic reaches q.
/// |result| equals the geodesic distance arccos<p,q>. Zero for q ~ p,
/// CutLocusError for q antipodal to p.
inline VectorXd log_map(const VectorXd& p, const VectorXd& q) {
  const double c = clamp_unit(p.dot(q));
  if (c <= -1.0 + kCutLocusTol)
    throw CutLocusError("sphere log: points are antipodal");
  if (c >= 1.0 - 1e-14) return VectorXd::Zero(p.size());
  VectorXd rej = q - c * p;
  const double rn = rej.norm();
  return (std::acos(c) / rn) * rej;
}

/// Geodesic distance arccos<p,q>, evaluated through the chord for nearby
/// points (2 asin(|p-q|/2)), where arccos sheds half the digits; exact
/// zero for bit-identical inputs.
inline double distance(const VectorXd& p, const VectorXd& q) {
  const double c = p.dot(q);
  if (c < 0.5) return std::acos(clamp_unit(c));
  return 2.0 * std::asin(std::min(1.0, 0.5 * (p - q).norm()));
}

/// Pulls an ambient point back onto the sphere (drift correction after
/// solver steps). Rejects near-zero inputs where the direction is lost.
inline VectorXd retract(const VectorXd& x) {
  const double n = x.norm();
  if (n < 1e-8) throw RetractionError("sphere retract: norm " + std::to_string(n) + " below 1e-8");
  return x / n;
}

/// Deterministic orthonormal basis of the tangent space at p: the n
/// canonical axes least aligned with p, Gram-Schmidt'd against p and each
/// other. Columns of the result are the basis vectors.
inline MatrixXd tangent_basis(const VectorXd& p) {
  const Eigen::Index d = p.size();
  Eigen::Index drop = 0;
  p.cwiseAbs().maxCoeff(&drop);
  MatrixXd basis(d, d - 1);
  Eigen::Index col = 0;
  for (Eigen::Index axis = 0; axis < d; ++axis) {
    if (axis == drop) continue;
    VectorXd e = VectorXd::Zero(d);
    e(axis) = 1.0;
    e -= p.dot(e) * p;
    for (Eigen::Index j = 0; j < col; ++j) e -= basis.col(j).dot(e) * basis.col(j);
    basis.col(col++) = e.normalized();
  }
  return basis;
}

// ---- batched variants (rows are samples) ----

inline MatrixXd project_tangent_rows(const MatrixXd& P, const MatrixXd& Xi) {
  VectorXd dots = (P.array() * Xi.array()).rowwise().sum();
  return Xi - dots.asDiagonal() * P;
}

inline MatrixXd retract_rows(const MatrixXd& X) {
  VectorXd norms = X.rowwise().norm();
  if ((norms.array() < 1e-8).any())
    throw RetractionError("sphere retract: a row norm fell below 1e-8");
  return norms.cwiseInverse().asDiagonal() * X;
}

}  // namespace geobridge::sphere
