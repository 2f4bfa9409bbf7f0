#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "geobridge/errors.hpp"
#include "geobridge/manifold.hpp"

namespace geobridge {

/// A batch of manifold points, one per row: 3 columns for sphere points in
/// R^3, 6 for sphere points in R^6, 9 (row-major) for rotations. Carries
/// the seed and a source descriptor for provenance.
struct SampleSet {
  ManifoldKind kind = ManifoldKind::Sphere;
  Eigen::MatrixXd points;
  std::uint64_t seed = 0;
  std::string source;

  Eigen::Index size() const { return points.rows(); }
  int ambient_dim() const { return static_cast<int>(points.cols()); }

  /// Throws unless every row satisfies its manifold invariants.
  void validate(double tol = 1e-9) const {
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      if (kind == ManifoldKind::Sphere) {
        if (!is_unit(points.row(i).transpose(), tol))
          throw RangeError("sample " + std::to_string(i) + " is not a unit vector");
      } else {
        if (!is_rotation(row_to_rotation(points.row(i)), tol))
          throw RangeError("sample " + std::to_string(i) + " is not a rotation");
      }
    }
  }
};

/// Writes the persistence format: header c0,c1,... then one row per point
/// with full double round-trip precision.
inline void write_sample_csv(const SampleSet& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (int c = 0; c < s.points.cols(); ++c) out << (c ? "," : "") << "c" << c;
  out << "\n";
  char buf[32];
  for (Eigen::Index i = 0; i < s.points.rows(); ++i) {
    for (Eigen::Index c = 0; c < s.points.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", s.points(i, c));
      out << (c ? "," : "") << buf;
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

/// Reads the persistence format; the manifold kind is inferred from the
/// column count (9 columns = rotations, otherwise sphere points).
inline SampleSet read_sample_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("c0", 0) != 0)
    throw ParseError(path + ":1: expected header starting with c0");
  const Eigen::Index cols = std::count(line.begin(), line.end(), ',') + 1;

  std::vector<double> values;
  Eigen::Index rows = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    Eigen::Index got = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
      ++got;
    }
    if (got != cols)
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(cols) + " columns, got " + std::to_string(got));
    ++rows;
  }
  SampleSet s;
  s.kind = cols == 9 ? ManifoldKind::Rotation : ManifoldKind::Sphere;
  s.points = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                            Eigen::RowMajor>>(values.data(), rows, cols);
  s.source = path;
  return s;
}

}  // namespace geobridge
