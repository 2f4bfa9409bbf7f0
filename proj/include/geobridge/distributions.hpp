#pragma once

#include <Eigen/Core>
#include <atomic>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "geobridge/errors.hpp"
#include "geobridge/manifold.hpp"
#include "geobridge/parallel.hpp"
#include "geobridge/rng.hpp"
#include "geobridge/sample_set.hpp"

// Priors and synthetic targets: uniform laws on spheres and rotations,
// von Mises-Fisher mixtures on S^2, wrapped Gaussian mixtures on the
// rotation group, geographic CSV ingestion, and the analytic densities
// used by the evaluation pipeline (always computed in log space).
//
// All sampling is pure in (spec, count, seed): the index range is cut into
// fixed chunks and every chunk draws from its own (seed, chunk) stream, so
// outputs are bit-identical for any thread count.

namespace geobridge {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr std::size_t kSampleChunk = 1024;

/// Mixture over one manifold: rows of `centers` are component centers
/// (sphere rows or 9-column rotation rows); `concentrations` holds the
/// vMF kappa or the wrapped-Gaussian sigma^2 per component; `weights`
/// lies on the simplex (uniform by default).
struct MixtureSpec {
  ManifoldKind kind = ManifoldKind::Sphere;
  Eigen::MatrixXd centers;
  Eigen::VectorXd concentrations;
  Eigen::VectorXd weights;

  Eigen::Index components() const { return centers.rows(); }

  void validate() const {
    if (centers.rows() == 0) throw ConfigError("mixture has no components");
    if (concentrations.size() != centers.rows() || weights.size() != centers.rows())
      throw ConfigError("mixture arrays disagree on component count");
    if ((concentrations.array() <= 0.0).any())
      throw ConfigError("mixture concentrations must be positive");
    if (std::abs(weights.sum() - 1.0) > 1e-12 || (weights.array() < 0).any())
      throw ConfigError("mixture weights must lie on the simplex");
  }
};

inline Eigen::VectorXd uniform_weights(Eigen::Index k) {
  return Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
}

namespace detail {

inline Eigen::VectorXd gaussian_vector(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> n01;
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = n01(rng);
  return v;
}

/// Inverse-CDF component pick on the cumulative weights.
inline Eigen::Index pick_component(std::mt19937_64& rng, const Eigen::VectorXd& weights) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double u = u01(rng), acc = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    acc += weights(i);
    if (u <= acc) return i;
  }
  return weights.size() - 1;
}

/// Rotation taking the north pole e3 to mu (assumes |mu| = 1).
inline Eigen::Matrix3d frame_from_pole(const Eigen::Vector3d& mu) {
  const Eigen::Vector3d e3(0, 0, 1);
  const double c = std::clamp(e3.dot(mu), -1.0, 1.0);
  if (c > 1.0 - 1e-14) return Eigen::Matrix3d::Identity();
  if (c < -1.0 + 1e-14) {
    Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
    flip(1, 1) = flip(2, 2) = -1.0;
    return flip;
  }
  const Eigen::Vector3d axis = e3.cross(mu).normalized();
  return so3::exp(std::acos(c) * axis);
}

inline Eigen::Matrix3d quaternion_to_rotation(const Eigen::Vector4d& q) {
  const double w = q(0), x = q(1), y = q(2), z = q(3);
  Eigen::Matrix3d r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

}  // namespace detail

/// Uniform law: normalized Gaussians on S^{d-1}; Haar on rotations via
/// uniform unit quaternions.
inline SampleSet sample_uniform(ManifoldKind kind, int ambient_dim, Eigen::Index count,
                                std::uint64_t seed, int threads = 1) {
  if (count < 1) throw SizeError("sample count must be >= 1");
  SampleSet s;
  s.kind = kind;
  s.seed = seed;
  s.source = "uniform(" + kind_name(kind) + ")";
  const int cols = kind == ManifoldKind::Rotation ? 9 : ambient_dim;
  s.points.resize(count, cols);
  parallel_chunks(static_cast<std::size_t>(count), kSampleChunk, threads,
                  [&](std::size_t chunk, std::size_t begin, std::size_t end) {
                    auto rng = make_stream(seed, chunk);
                    for (std::size_t i = begin; i < end; ++i) {
                      if (kind == ManifoldKind::Sphere) {
                        Eigen::VectorXd g = detail::gaussian_vector(rng, ambient_dim);
                        while (g.norm() < 1e-8) g = detail::gaussian_vector(rng, ambient_dim);
                        s.points.row(i) = (g / g.norm()).transpose();
                      } else {
                        Eigen::VectorXd g = detail::gaussian_vector(rng, 4);
                        while (g.norm() < 1e-8) g = detail::gaussian_vector(rng, 4);
                        s.points.row(i) = rotation_to_row(
                            detail::quaternion_to_rotation(Eigen::Vector4d(g / g.norm())));
                      }
                    }
                  });
  return s;
}

/// von Mises-Fisher mixture on S^2. The cosine against the component mean
/// uses the closed-form inverse CDF w = 1 + log(u + (1-u) e^{-2k}) / k,
/// the tangential angle is uniform, and the frame is rotated to the mean.
inline SampleSet sample_vmf_mixture(const MixtureSpec& spec, Eigen::Index count,
                                    std::uint64_t seed, int threads = 1) {
  spec.validate();
  if (spec.kind != ManifoldKind::Sphere || spec.centers.cols() != 3)
    throw ConfigError("vmf mixture requires sphere components in R^3");
  if (count < 1) throw SizeError("sample count must be >= 1");

  std::vector<Eigen::Matrix3d> frames(spec.components());
  for (Eigen::Index k = 0; k < spec.components(); ++k)
    frames[k] = detail::frame_from_pole(spec.centers.row(k).transpose());

  SampleSet s;
  s.kind = ManifoldKind::Sphere;
  s.seed = seed;
  s.source = "vmf-mixture(k=" + std::to_string(spec.components()) + ")";
  s.points.resize(count, 3);
  parallel_chunks(static_cast<std::size_t>(count), kSampleChunk, threads,
                  [&](std::size_t chunk, std::size_t begin, std::size_t end) {
                    auto rng = make_stream(seed, chunk);
                    std::uniform_real_distribution<double> u01(0.0, 1.0);
                    for (std::size_t i = begin; i < end; ++i) {
                      const Eigen::Index k = detail::pick_component(rng, spec.weights);
                      const double kappa = spec.concentrations(k);
                      double u = u01(rng);
                      while (u == 0.0) u = u01(rng);
                      const double w = std::max(
                          -1.0, 1.0 + std::log(u + (1.0 - u) * std::exp(-2.0 * kappa)) / kappa);
                      const double r = std::sqrt(std::max(0.0, 1.0 - w * w));
                      const double phi = 2.0 * kPi * u01(rng);
                      const Eigen::Vector3d local(r * std::cos(phi), r * std::sin(phi), w);
                      s.points.row(i) = (frames[k] * local).transpose();
                    }
                  });
  return s;
}

/// Wrapped Gaussian mixture on rotations: a tangent Gaussian with variance
/// sigma^2 per axis at the component center, pushed through the group
/// exponential. Draws with |omega| >= pi are rejected and redrawn.
inline SampleSet sample_wrapped_gaussian_so3(const MixtureSpec& spec, Eigen::Index count,
                                             std::uint64_t seed, int threads = 1,
                                             long* rejections = nullptr) {
  spec.validate();
  if (spec.kind != ManifoldKind::Rotation || spec.centers.cols() != 9)
    throw ConfigError("wrapped gaussian mixture requires rotation components");
  if (count < 1) throw SizeError("sample count must be >= 1");

  std::vector<Eigen::Matrix3d> centers(spec.components());
  for (Eigen::Index k = 0; k < spec.components(); ++k)
    centers[k] = row_to_rotation(spec.centers.row(k));

  SampleSet s;
  s.kind = ManifoldKind::Rotation;
  s.seed = seed;
  s.source = "wrapped-gaussian(k=" + std::to_string(spec.components()) + ")";
  s.points.resize(count, 9);
  std::atomic<long> rejected{0};
  parallel_chunks(static_cast<std::size_t>(count), kSampleChunk, threads,
                  [&](std::size_t chunk, std::size_t begin, std::size_t end) {
                    auto rng = make_stream(seed, chunk);
                    long local_rejected = 0;
                    for (std::size_t i = begin; i < end; ++i) {
                      const Eigen::Index k = detail::pick_component(rng, spec.weights);
                      const double sigma = std::sqrt(spec.concentrations(k));
                      Eigen::Vector3d omega;
                      for (;;) {
                        omega = sigma * Eigen::Vector3d(detail::gaussian_vector(rng, 3));
                        if (omega.norm() < kPi) break;
                        ++local_rejected;
                      }
                      s.points.row(i) = rotation_to_row(centers[k] * so3::exp(omega));
                    }
                    rejected += local_rejected;
                  });
  if (rejections) *rejections = rejected.load();
  return s;
}

/// K random centers drawn uniformly, equal weights, one concentration.
inline MixtureSpec make_random_vmf_spec(Eigen::Index k, double kappa, std::uint64_t seed) {
  MixtureSpec spec;
  spec.kind = ManifoldKind::Sphere;
  spec.centers = sample_uniform(ManifoldKind::Sphere, 3, k, seed).points;
  spec.concentrations = Eigen::VectorXd::Constant(k, kappa);
  spec.weights = uniform_weights(k);
  return spec;
}

inline MixtureSpec make_random_wrapped_spec(Eigen::Index k, double sigma2, std::uint64_t seed) {
  MixtureSpec spec;
  spec.kind = ManifoldKind::Rotation;
  spec.centers = sample_uniform(ManifoldKind::Rotation, 9, k, seed).points;
  spec.concentrations = Eigen::VectorXd::Constant(k, sigma2);
  spec.weights = uniform_weights(k);
  return spec;
}

/// Reads `lat,lon` degree records into unit vectors
/// (cos(lat)cos(lon), cos(lat)sin(lon), sin(lat)), preserving row order.
inline SampleSet ingest_latlon_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "lat,lon")
    throw ParseError(path + ":1: expected header 'lat,lon', got '" + line + "'");

  std::vector<double> coords;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected 'lat,lon' record");
    double lat = 0, lon = 0;
    try {
      std::size_t used = 0;
      lat = std::stod(line.substr(0, comma), &used);
      lon = std::stod(line.substr(comma + 1), &used);
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": bad number in '" + line + "'");
    }
    if (lat < -90.0 || lat > 90.0)
      throw RangeError(path + ":" + std::to_string(lineno) + ": latitude " +
                       std::to_string(lat) + " outside [-90, 90]");
    if (lon <= -180.0 || lon > 180.0)
      throw RangeError(path + ":" + std::to_string(lineno) + ": longitude " +
                       std::to_string(lon) + " outside (-180, 180]");
    const double phi = lat * kPi / 180.0, lam = lon * kPi / 180.0;
    coords.push_back(std::cos(phi) * std::cos(lam));
    coords.push_back(std::cos(phi) * std::sin(lam));
    coords.push_back(std::sin(phi));
  }
  SampleSet s;
  s.kind = ManifoldKind::Sphere;
  s.source = path;
  s.points = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>>(
      coords.data(), static_cast<Eigen::Index>(coords.size() / 3), 3);
  return s;
}

// ---- analytic densities (log space internally, exp at the interface) ----

/// log of the Riemannian area of S^{d-1} embedded in R^d: 2 pi^{d/2} / Gamma(d/2).
inline double log_sphere_area(int ambient_dim) {
  const double half = 0.5 * ambient_dim;
  return std::log(2.0) + half * std::log(kPi) - std::lgamma(half);
}

/// Uniform density w.r.t. the Riemannian volume: 1/(4 pi) on S^2,
/// 1/(8 pi^2) on rotations (angle-metric volume), 1/area generally.
inline double log_density_uniform(ManifoldKind kind, int ambient_dim) {
  if (kind == ManifoldKind::Rotation) return -std::log(8.0 * kPi * kPi);
  return -log_sphere_area(ambient_dim);
}

inline double density_uniform(ManifoldKind kind, int ambient_dim) {
  return std::exp(log_density_uniform(kind, ambient_dim));
}

/// log(sinh k) without overflow: k + log1p(-e^{-2k}) - log 2.
inline double log_sinh(double k) {
  return k + std::log1p(-std::exp(-2.0 * k)) - std::log(2.0);
}

inline double log_density_vmf_mixture(const MixtureSpec& spec, const Eigen::Vector3d& x) {
  double best = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd terms(spec.components());
  for (Eigen::Index k = 0; k < spec.components(); ++k) {
    const double kappa = spec.concentrations(k);
    const double log_c = std::log(kappa) - std::log(4.0 * kPi) - log_sinh(kappa);
    terms(k) = std::log(spec.weights(k)) + log_c + kappa * spec.centers.row(k).dot(x);
    best = std::max(best, terms(k));
  }
  return best + std::log((terms.array() - best).exp().sum());
}

inline double density_vmf_mixture(const MixtureSpec& spec, const Eigen::Vector3d& x) {
  return std::exp(log_density_vmf_mixture(spec, x));
}

/// Mean resultant length of a vMF law on S^2: coth(k) - 1/k.
inline double vmf_mean_resultant(double kappa) {
  return 1.0 / std::tanh(kappa) - 1.0 / kappa;
}

}  // namespace geobridge
