#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "geobridge/errors.hpp"

// Geometry kernels for the rotation group. Elements are 3x3 orthogonal
// matrices with det +1; tangent vectors at p are ambient matrices v with
// p^T v skew-symmetric. The Riemannian inner product on tangent matrices
// is <A,B> = tr(A^T B)/2, the single place where the sqrt(2) between
// Frobenius and axis-angle norms is fixed: with it, the norm of a tangent
// matrix p*skew(w) is |w| and geodesic distance equals the rotation angle.

namespace geobridge::so3 {

using Eigen::Matrix3d;
using Eigen::Vector3d;

inline constexpr double kPi = 3.14159265358979323846;
/// Traces within this of -1 count as the angle-pi cut locus; looser than
/// the sphere tolerance because arccos loses half the digits near -1.
inline constexpr double kTraceTol = 1e-7;

/// Cross-product matrix: skew(w) u = w x u.
inline Matrix3d skew(const Vector3d& w) {
  Matrix3d s;
  s << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return s;
}

inline Vector3d unskew(const Matrix3d& s) {
  return Vector3d(s(2, 1), s(0, 2), s(1, 0));
}

/// Reads the vector of the antisymmetric part of a; exact on skew input and
/// tolerant of small symmetric contamination from upstream arithmetic.
inline Vector3d unskew_antisym(const Matrix3d& a) {
  return 0.5 * Vector3d(a(2, 1) - a(1, 2), a(0, 2) - a(2, 0), a(1, 0) - a(0, 1));
}

/// Metric inner product on ambient tangent matrices.
inline double metric_inner(const Matrix3d& a, const Matrix3d& b) {
  return 0.5 * (a.array() * b.array()).sum();
}

/// Metric norm: |p*skew(w)| = |w|.
inline double metric_norm(const Matrix3d& a) {
  return std::sqrt(std::max(0.0, metric_inner(a, a)));
}

/// Checks the axis-angle precondition |w| < pi.
inline void check_axis_angle(const Vector3d& w) {
  if (w.norm() >= kPi)
    throw RangeError("axis-angle norm " + std::to_string(w.norm()) + " must be < pi");
}

/// Rodrigues' rotation formula, exp at the identity. Small angles use the
/// 2nd-order expansions of sin(t)/t and (1-cos(t))/t^2.
inline Matrix3d exp(const Vector3d& w) {
  const double theta = w.norm();
  const double t2 = theta * theta;
  double a, b;  // sin(t)/t, (1-cos(t))/t^2
  if (theta <= 1e-7) {
    a = 1.0 - t2 / 6.0;
    b = 0.5 - t2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / t2;
  }
  const Matrix3d k = skew(w);
  return Matrix3d::Identity() + a * k + b * (k * k);
}

/// Rotation angle arccos((tr R - 1)/2), the geodesic distance from the
/// identity, evaluated as atan2 of the measured sin/cos pair so it stays
/// conditioned at both ends and is exactly zero at the identity.
inline double angle(const Matrix3d& r) {
  const double s =
      0.5 * Vector3d(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1)).norm();
  const double c = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::atan2(s, c);
}

/// Log at the identity: gamma/(2 sin gamma) * (R - R^T) read off as a
/// vector. Rejects traces at the angle-pi cut locus where the axis is
/// ambiguous. sin(gamma) is taken as the norm of the antisymmetric part
/// and gamma from atan2, which stays fully conditioned toward the cut
/// locus where arccos alone loses half the digits.
inline Vector3d log(const Matrix3d& r) {
  if (r.trace() <= -1.0 + kTraceTol)
    throw CutLocusError("so3 log: trace " + std::to_string(r.trace()) + " at the cut locus");
  const Vector3d half_antisym =
      0.5 * Vector3d(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const double s = half_antisym.norm();  // sin(gamma) for gamma in [0, pi]
  const double c = (r.trace() - 1.0) / 2.0;
  const double gamma = std::atan2(s, c);
  if (gamma <= 1e-7) return half_antisym;  // limit factor gamma/sin -> 1
  return (gamma / s) * half_antisym;
}

/// Left-translated exponential: the geodesic from p with initial tangent
/// matrix v = p*skew(w) ends at p*exp(w).
inline Matrix3d exp_at(const Matrix3d& p, const Matrix3d& v) {
  return p * exp(unskew_antisym(p.transpose() * v));
}

/// Left-translated logarithm as an ambient tangent matrix at p.
inline Matrix3d log_at(const Matrix3d& p, const Matrix3d& q) {
  return p * skew(log(p.transpose() * q));
}

inline double distance(const Matrix3d& p, const Matrix3d& q) {
  return angle(p.transpose() * q);
}

}  // namespace geobridge::so3
