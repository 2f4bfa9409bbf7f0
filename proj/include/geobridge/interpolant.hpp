#pragma once

#include <Eigen/Core>
#include <cmath>
#include <utility>
#include <vector>

#include "geobridge/errors.hpp"
#include "geobridge/so3.hpp"
#include "geobridge/sphere.hpp"

// Geodesic bridges between coupled endpoint pairs and their exact path
// velocities. On the sphere the bridge through x0, x1 at time t is
//   cos(t|L|) x0 + sin(t|L|) L/|L|,        L = log_map(x0, x1),
// with velocity cos(t|L|) L - |L| sin(t|L|) x0, so the speed equals |L|
// for every t. On rotations the bridge is x0 exp(t w), w = log(x0^T x1),
// with velocity x0 exp(t w) skew(w).

namespace geobridge {

/// Point and velocity of the spherical bridge at one time.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> interp_sphere(
    double t, const Eigen::VectorXd& x0, const Eigen::VectorXd& x1) {
  const Eigen::VectorXd l = sphere::log_map(x0, x1);
  const double speed = l.norm();
  const double c = std::cos(t * speed), s = std::sin(t * speed);
  Eigen::VectorXd xt, dxt;
  if (speed <= 1e-14) {
    xt = x0;
    dxt = l;
  } else {
    xt = c * x0 + (s / speed) * l;
    xt.normalize();
    dxt = c * l - speed * s * x0;
  }
  return {xt, dxt};
}

/// Point and velocity of the rotation bridge; the velocity is an ambient
/// tangent matrix at the returned point.
inline std::pair<Eigen::Matrix3d, Eigen::Matrix3d> interp_so3(
    double t, const Eigen::Matrix3d& x0, const Eigen::Matrix3d& x1) {
  const Eigen::Vector3d w = so3::log(x0.transpose() * x1);
  const Eigen::Matrix3d xt = x0 * so3::exp(t * w);
  return {xt, xt * so3::skew(w)};
}

/// Coupled triples (t, x0, x1) with the cached endpoint logarithm, bridge
/// point, and exact bridge velocity, rows aligned across all members.
struct InterpolantBatch {
  Eigen::VectorXd t;
  Eigen::MatrixXd x0, x1;
  Eigen::MatrixXd log01;  // log_map(x0, x1) per row
  Eigen::MatrixXd xt, dxt;

  Eigen::Index size() const { return t.size(); }
};

/// Builds the sphere-route batch. Throws CutLocusError if any pair is
/// antipodal; callers filter or re-pair first.
inline InterpolantBatch make_interpolant_batch(const Eigen::VectorXd& t,
                                               const Eigen::MatrixXd& x0,
                                               const Eigen::MatrixXd& x1) {
  if (t.size() != x0.rows() || x0.rows() != x1.rows() || x0.cols() != x1.cols())
    throw SizeError("interpolant batch: mismatched shapes");
  InterpolantBatch b;
  b.t = t;
  b.x0 = x0;
  b.x1 = x1;
  b.log01.resize(x0.rows(), x0.cols());
  b.xt.resize(x0.rows(), x0.cols());
  b.dxt.resize(x0.rows(), x0.cols());
  for (Eigen::Index i = 0; i < x0.rows(); ++i) {
    const Eigen::VectorXd l = sphere::log_map(x0.row(i).transpose(), x1.row(i).transpose());
    b.log01.row(i) = l.transpose();
    const double speed = l.norm();
    const double c = std::cos(t(i) * speed), s = std::sin(t(i) * speed);
    if (speed <= 1e-14) {
      b.xt.row(i) = x0.row(i);
      b.dxt.row(i).setZero();
    } else {
      b.xt.row(i) = (c * x0.row(i) + (s / speed) * l.transpose()).normalized();
      b.dxt.row(i) = c * l.transpose() - speed * s * x0.row(i);
    }
  }
  return b;
}

/// Cut-locus predicate for coupled sphere rows.
inline bool sphere_pair_admissible(const Eigen::RowVectorXd& x0, const Eigen::RowVectorXd& x1) {
  return x0.dot(x1) > -1.0 + sphere::kCutLocusTol;
}

/// Removes pairs whose bridge is undefined (antipodal endpoints on the
/// sphere, trace at -1 on rotations). Returns the kept row indices and the
/// rejected count; deterministic in the input order.
struct CutLocusFilter {
  std::vector<Eigen::Index> kept;
  Eigen::Index rejected = 0;
};

inline CutLocusFilter filter_cut_locus_sphere(const Eigen::MatrixXd& x0,
                                              const Eigen::MatrixXd& x1) {
  if (x0.rows() != x1.rows()) throw SizeError("filter: mismatched pair counts");
  CutLocusFilter f;
  f.kept.reserve(x0.rows());
  for (Eigen::Index i = 0; i < x0.rows(); ++i) {
    if (sphere_pair_admissible(x0.row(i), x1.row(i)))
      f.kept.push_back(i);
    else
      ++f.rejected;
  }
  return f;
}

inline CutLocusFilter filter_cut_locus_so3(const std::vector<Eigen::Matrix3d>& x0,
                                           const std::vector<Eigen::Matrix3d>& x1) {
  if (x0.size() != x1.size()) throw SizeError("filter: mismatched pair counts");
  CutLocusFilter f;
  f.kept.reserve(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) {
    if ((x0[i].transpose() * x1[i]).trace() > -1.0 + so3::kTraceTol)
      f.kept.push_back(static_cast<Eigen::Index>(i));
    else
      ++f.rejected;
  }
  return f;
}

}  // namespace geobridge
