#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>

#include "geobridge/errors.hpp"

// Truncation-orthogonalization embedding between rotations and R^6: a
// rotation maps to its first two columns stacked into a 6-vector, and any
// 6-vector with independent halves maps back through Gram-Schmidt plus a
// cross product. The two maps are mutually inverse on rotations, which
// puts rotation-valued distributions on a submanifold of a sphere in R^6
// (after scaling by 1/sqrt(2), since the stacked columns have norm
// sqrt(2)). Gram-Schmidt ignores scale, so the inverse map absorbs it.

namespace geobridge::embed {

using Eigen::Matrix3d;
using Eigen::Vector3d;
using Vector6d = Eigen::Matrix<double, 6, 1>;

inline constexpr double kSqrt2 = 1.4142135623730951;

/// Stacks the first two columns of a rotation.
inline Vector6d truncate(const Matrix3d& r) {
  Vector6d l;
  l << r.col(0), r.col(1);
  return l;
}

/// Gram-Schmidt on the two halves of l, third column by cross product.
/// Rejects a vanishing first half or (near-)parallel halves, where the
/// frame is not determined.
inline Matrix3d orthonormalize(const Vector6d& l) {
  Vector3d l1 = l.head<3>(), l2 = l.tail<3>();
  const double n1 = l1.norm();
  if (n1 < 1e-12)
    throw DegenerateEmbeddingError("orthonormalize: first column is zero");
  const Vector3d r1 = l1 / n1;
  Vector3d rej = l2 - r1.dot(l2) * r1;
  const double n2 = rej.norm();
  // sin(angle between l1 and l2) = |rej| / |l2|; reject below 1e-8 rad.
  if (n2 <= 1e-8 * l2.norm() || l2.norm() < 1e-12)
    throw DegenerateEmbeddingError("orthonormalize: columns are parallel");
  const Vector3d r2 = rej / n2;
  Matrix3d r;
  r.col(0) = r1;
  r.col(1) = r2;
  r.col(2) = r1.cross(r2);
  return r;
}

/// Rotation -> unit vector on the sphere in R^6 (process state).
inline Vector6d to_unit_sphere(const Matrix3d& r) { return truncate(r) / kSqrt2; }

/// Any admissible 6-vector (unit or not) -> rotation.
inline Matrix3d from_unit_sphere(const Vector6d& v) { return orthonormalize(v); }

/// Drift correction for rotation-valued states: Gram-Schmidt on the
/// column-stacked matrix, the same construction as orthonormalize.
inline Matrix3d retract(const Matrix3d& m) {
  try {
    return orthonormalize(truncate(m));
  } catch (const DegenerateEmbeddingError& e) {
    throw RetractionError(std::string("so3 retract: ") + e.what());
  }
}

}  // namespace geobridge::embed
