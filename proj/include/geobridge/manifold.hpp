#pragma once

#include <Eigen/Core>
#include <string>

#include "geobridge/embedding.hpp"
#include "geobridge/errors.hpp"
#include "geobridge/so3.hpp"
#include "geobridge/sphere.hpp"

namespace geobridge {

/// State spaces handled by the library. Sphere covers every ambient
/// dimension (rows of length d are points of S^{d-1}); Rotation rows are
/// 3x3 matrices stored row-major in 9 columns.
enum class ManifoldKind { Sphere, Rotation };

inline std::string kind_name(ManifoldKind k) {
  return k == ManifoldKind::Sphere ? "sphere" : "rotation";
}

/// Intrinsic dimension given the ambient column count.
inline int intrinsic_dim(ManifoldKind k, int ambient_cols) {
  return k == ManifoldKind::Sphere ? ambient_cols - 1 : 3;
}

inline Eigen::Matrix3d row_to_rotation(const Eigen::RowVectorXd& row) {
  if (row.size() != 9) throw SizeError("rotation rows need 9 columns");
  return Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(row.data());
}

inline Eigen::RowVectorXd rotation_to_row(const Eigen::Matrix3d& r) {
  Eigen::Matrix<double, 3, 3, Eigen::RowMajor> rm = r;
  return Eigen::Map<const Eigen::RowVectorXd>(rm.data(), 9);
}

inline bool is_unit(const Eigen::VectorXd& x, double tol = 1e-12) {
  return std::abs(x.norm() - 1.0) <= tol;
}

inline bool is_rotation(const Eigen::Matrix3d& r, double tol = 1e-10) {
  const double ortho = (r.transpose() * r - Eigen::Matrix3d::Identity()).norm();
  return ortho <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

inline bool is_tangent_at(const Eigen::VectorXd& p, const Eigen::VectorXd& v,
                          double tol = 1e-10) {
  return std::abs(p.dot(v)) <= tol;
}

/// Pulls an ambient row back onto the manifold.
inline Eigen::RowVectorXd retract_row(ManifoldKind k, const Eigen::RowVectorXd& row) {
  if (k == ManifoldKind::Sphere) return sphere::retract(row.transpose()).transpose();
  return rotation_to_row(embed::retract(row_to_rotation(row)));
}

/// Geodesic distance between two rows of the same manifold.
inline double geodesic_distance(ManifoldKind k, const Eigen::RowVectorXd& a,
                                const Eigen::RowVectorXd& b) {
  if (k == ManifoldKind::Sphere) return sphere::distance(a.transpose(), b.transpose());
  return so3::distance(row_to_rotation(a), row_to_rotation(b));
}

}  // namespace geobridge
