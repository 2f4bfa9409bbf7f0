#pragma once

#include <Eigen/Core>
#include <random>

#include "geobridge/rng.hpp"
#include "geobridge/so3.hpp"
#include "geobridge/sphere.hpp"

namespace testutil {

inline Eigen::VectorXd random_unit(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> n01;
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = n01(rng);
  return v.normalized();
}

/// Random tangent vector at p with norm drawn uniformly in (0, max_norm).
inline Eigen::VectorXd random_tangent(std::mt19937_64& rng, const Eigen::VectorXd& p,
                                      double max_norm) {
  std::uniform_real_distribution<double> u01(1e-6, 1.0);
  Eigen::VectorXd v = random_unit(rng, static_cast<int>(p.size()));
  v -= p.dot(v) * p;
  while (v.norm() < 1e-8) {
    v = random_unit(rng, static_cast<int>(p.size()));
    v -= p.dot(v) * p;
  }
  return (u01(rng) * max_norm) * v.normalized();
}

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  Eigen::Vector4d q;
  for (int i = 0; i < 4; ++i) q(i) = n01(rng);
  q.normalize();
  const double w = q(0), x = q(1), y = q(2), z = q(3);
  Eigen::Matrix3d r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

/// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j])
      ++i;
    else
      ++j;
    const double fa = static_cast<double>(i) / a.size();
    const double fb = static_cast<double>(j) / b.size();
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

/// Critical value of the two-sample KS test at level alpha.
inline double ks_critical(double alpha, std::size_t n, std::size_t m) {
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  return c * std::sqrt(static_cast<double>(n + m) / (static_cast<double>(n) * m));
}

}  // namespace testutil
