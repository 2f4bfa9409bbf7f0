#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "geobridge/errors.hpp"
#include "geobridge/manifold.hpp"
#include "geobridge/parallel.hpp"
#include "geobridge/rng.hpp"
#include "geobridge/sample_set.hpp"
#include "geobridge/samplers.hpp"

// Quantitative comparison of sample sets: empirical Wasserstein-2 with
// squared geodesic cost solved exactly by shortest-augmenting-path
// assignment, a nearest-neighbor KL estimator with geodesic distances, and
// the strong/weak convergence-order benchmark of the stochastic schemes.

namespace geobridge {

/// Exact linear assignment (Jonker-Volkenant style shortest augmenting
/// paths with potentials) on a square cost matrix. Returns the column
/// assigned to each row.
inline std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw SizeError("assignment needs a square cost matrix");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, -1), way(n + 1, 0);
  for (int i = 0; i < n; ++i) {
    p[n] = i;
    int j0 = n;
    std::fill(minv.begin(), minv.end(), inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = -1;
      for (int j = 0; j < n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != -1);
    for (; j0 != n;) {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    }
  }
  std::vector<int> col_of_row(n, -1);
  for (int j = 0; j < n; ++j)
    if (p[j] >= 0) col_of_row[p[j]] = j;
  return col_of_row;
}

namespace detail {

/// Seeded subsample of `count` distinct rows (partial Fisher-Yates).
inline Eigen::MatrixXd subsample_rows(const Eigen::MatrixXd& m, Eigen::Index count,
                                      std::uint64_t seed) {
  if (count >= m.rows()) return m;
  std::vector<Eigen::Index> idx(m.rows());
  std::iota(idx.begin(), idx.end(), 0);
  auto rng = make_stream(seed, 0x73756273);
  for (Eigen::Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, m.rows() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  Eigen::MatrixXd out(count, m.cols());
  for (Eigen::Index i = 0; i < count; ++i) out.row(i) = m.row(idx[i]);
  return out;
}

inline Eigen::MatrixXd geodesic_cost_matrix(ManifoldKind kind, const Eigen::MatrixXd& a,
                                            const Eigen::MatrixXd& b, int threads) {
  Eigen::MatrixXd c(a.rows(), b.rows());
  parallel_chunks(static_cast<std::size_t>(a.rows()), 64, threads,
                  [&](std::size_t, std::size_t begin, std::size_t end) {
                    for (std::size_t i = begin; i < end; ++i)
                      for (Eigen::Index j = 0; j < b.rows(); ++j)
                        c(i, j) = geodesic_distance(kind, a.row(i), b.row(j));
                  });
  return c;
}

}  // namespace detail

/// Empirical Wasserstein-2 with squared geodesic ground cost: exact optimal
/// transport between equal-size subsamples (cap max_n, seeded), returning
/// the square root of the optimal mean cost.
inline double w2_empirical(const SampleSet& a, const SampleSet& b, Eigen::Index max_n = 2048,
                           std::uint64_t seed = 0, int threads = 1) {
  if (a.size() == 0 || b.size() == 0) throw SizeError("w2: empty sample set");
  if (a.kind != b.kind || a.points.cols() != b.points.cols())
    throw SizeError("w2: sample sets live on different manifolds");
  const Eigen::Index n = std::min({max_n, a.size(), b.size()});
  const Eigen::MatrixXd sa = detail::subsample_rows(a.points, n, mix64(seed) ^ 0xa);
  const Eigen::MatrixXd sb = detail::subsample_rows(b.points, n, mix64(seed) ^ 0xb);
  Eigen::MatrixXd cost = detail::geodesic_cost_matrix(a.kind, sa, sb, threads);
  cost = cost.array().square();
  const std::vector<int> match = solve_assignment(cost);
  double total = 0.0;
  for (int i = 0; i < static_cast<int>(n); ++i) total += cost(i, match[i]);
  return std::sqrt(total / static_cast<double>(n));
}

struct KlEstimate {
  double raw = 0.0;      // nearest-neighbor estimate, may be negative
  double clipped = 0.0;  // max(raw, 0), the reported value
};

/// Nearest-neighbor KL(p||q) with geodesic distances: the classical
/// k-NN estimator (dim/n) sum log(s_k/r_k) + log(m/(n-1)), where r_k is
/// the k-th neighbor distance within p and s_k the k-th neighbor distance
/// to q, and dim is the manifold dimension.
inline KlEstimate kl_knn(const SampleSet& p, const SampleSet& q, int k = 5, int threads = 1) {
  if (p.kind != q.kind || p.points.cols() != q.points.cols())
    throw SizeError("kl: sample sets live on different manifolds");
  const Eigen::Index n = p.size(), m = q.size();
  if (n < k + 1 || m < k + 1) throw SizeError("kl: need at least k+1 samples per set");
  const int dim = intrinsic_dim(p.kind, p.ambient_dim());

  Eigen::VectorXd log_ratio(n);
  std::atomic<bool> degenerate{false};
  parallel_chunks(
      static_cast<std::size_t>(n), 64, threads,
      [&](std::size_t, std::size_t begin, std::size_t end) {
        std::vector<double> dp, dq;
        dp.reserve(n - 1);
        dq.reserve(m);
        for (std::size_t i = begin; i < end; ++i) {
          dp.clear();
          dq.clear();
          for (Eigen::Index j = 0; j < n; ++j) {
            if (j == static_cast<Eigen::Index>(i)) continue;
            dp.push_back(geodesic_distance(p.kind, p.points.row(i), p.points.row(j)));
          }
          for (Eigen::Index j = 0; j < m; ++j)
            dq.push_back(geodesic_distance(p.kind, p.points.row(i), q.points.row(j)));
          std::nth_element(dp.begin(), dp.begin() + (k - 1), dp.end());
          std::nth_element(dq.begin(), dq.begin() + (k - 1), dq.end());
          const double rk = dp[k - 1], sk = dq[k - 1];
          // duplicate points make the estimator meaningless (log 0 terms)
          if (rk <= 0.0 || sk <= 0.0 ||
              *std::min_element(dq.begin(), dq.begin() + k) <= 0.0) {
            degenerate = true;
            log_ratio(i) = 0.0;
          } else {
            log_ratio(i) = std::log(sk / rk);
          }
        }
      });
  if (degenerate)
    throw DegeneracyError("kl: zero k-th neighbor distance (duplicate samples)");
  KlEstimate est;
  est.raw = (static_cast<double>(dim) / static_cast<double>(n)) * log_ratio.sum() +
            std::log(static_cast<double>(m) / static_cast<double>(n - 1));
  est.clipped = std::max(0.0, est.raw);
  return est;
}

/// Least-squares slope of y against x.
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw SizeError("slope fit needs >= 2 points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct BenchResult {
  std::map<std::string, double> slopes;              // scheme name -> fitted order
  std::map<std::string, std::vector<double>> errors; // per step level
  std::vector<int> steps;
};

/// Convergence-order benchmark on the sphere with zero drift and diffusion
/// epsilon. Embedding schemes are measured by strong error against a
/// common-noise reference path on an 8x finer grid; the geodesic random
/// walk (whose intrinsic Gaussians admit no common-noise coupling) is
/// measured by the weak error |E<X_1, x0> - exp(-eps*n)| of the
/// heat-kernel first moment. Step counts must grow by factors of 2, at
/// least 4 levels.
inline BenchResult convergence_bench(const std::vector<Scheme>& schemes, double eps,
                                     const std::vector<int>& steps, Eigen::Index paths,
                                     std::uint64_t seed, int ambient_dim = 3, int threads = 1,
                                     Eigen::Index weak_paths = 0) {
  if (steps.size() < 4) throw ConfigError("convergence bench needs at least 4 step levels");
  for (std::size_t i = 1; i < steps.size(); ++i)
    if (steps[i] != 2 * steps[i - 1])
      throw ConfigError("step levels must grow by factors of 2");
  if (paths < 10000) throw ConfigError("convergence bench needs >= 10^4 paths");
  if (eps <= 0) throw ConfigError("convergence bench needs epsilon > 0");
  if (weak_paths <= 0) weak_paths = paths;

  const int d = ambient_dim;
  const int n_intrinsic = d - 1;
  const int ref_steps = steps.back() * 8;
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(d);
  x0(0) = 1.0;

  BenchResult out;
  out.steps = steps;
  std::vector<double> log_dt;
  for (int s : steps) log_dt.push_back(std::log(1.0 / s));

  const bool want_em = std::count(schemes.begin(), schemes.end(), Scheme::EsdeEm) > 0;
  const bool want_heun = std::count(schemes.begin(), schemes.end(), Scheme::EsdeHeun) > 0;
  const bool want_grw = std::count(schemes.begin(), schemes.end(), Scheme::Grw) > 0;

  if (want_em || want_heun) {
    const std::size_t levels = steps.size();
    // per (level, scheme) accumulated strong error, combined in chunk order
    const std::size_t n_chunks = (static_cast<std::size_t>(paths) + 255) / 256;
    std::vector<std::vector<double>> em_err(n_chunks, std::vector<double>(levels, 0.0));
    std::vector<std::vector<double>> heun_err = em_err;
    parallel_chunks(
        static_cast<std::size_t>(paths), 256, threads,
        [&](std::size_t chunk, std::size_t begin, std::size_t end) {
          std::normal_distribution<double> n01;
          Eigen::MatrixXd fine(ref_steps, d);
          const double ref_dt = 1.0 / ref_steps;
          const double ref_sqdt = std::sqrt(ref_dt);
          for (std::size_t path = begin; path < end; ++path) {
            auto rng = make_stream(seed, path);
            for (int k = 0; k < ref_steps; ++k)
              for (int c = 0; c < d; ++c) fine(k, c) = ref_sqdt * n01(rng);
            // reference: Euler-Heun on the finest grid, shared noise
            Eigen::VectorXd xref = x0;
            const Eigen::VectorXd zero_drift = Eigen::VectorXd::Zero(d);
            for (int k = 0; k < ref_steps; ++k)
              xref = detail::esde_heun_step(xref, zero_drift, eps, ref_dt,
                                            fine.row(k).transpose());
            for (std::size_t lev = 0; lev < levels; ++lev) {
              const int n_steps = steps[lev];
              const int group = ref_steps / n_steps;
              const double dt = 1.0 / n_steps;
              Eigen::VectorXd xem = x0, xheun = x0;
              for (int k = 0; k < n_steps; ++k) {
                Eigen::VectorXd dw = Eigen::VectorXd::Zero(d);
                for (int g = 0; g < group; ++g) dw += fine.row(k * group + g).transpose();
                if (want_em)
                  xem = detail::esde_em_step(xem, zero_drift, eps, dt, dw);
                if (want_heun)
                  xheun = detail::esde_heun_step(xheun, zero_drift, eps, dt, dw);
              }
              if (want_em) em_err[chunk][lev] += (xem - xref).norm();
              if (want_heun) heun_err[chunk][lev] += (xheun - xref).norm();
            }
          }
        });
    auto reduce = [&](const std::vector<std::vector<double>>& parts) {
      std::vector<double> err(levels, 0.0);
      for (const auto& part : parts)
        for (std::size_t lev = 0; lev < levels; ++lev) err[lev] += part[lev];
      for (auto& e : err) e /= static_cast<double>(paths);
      return err;
    };
    if (want_em) {
      out.errors["esde-em"] = reduce(em_err);
      std::vector<double> log_err;
      for (double e : out.errors["esde-em"]) log_err.push_back(std::log(e));
      out.slopes["esde-em"] = fit_slope(log_dt, log_err);
    }
    if (want_heun) {
      out.errors["esde-heun"] = reduce(heun_err);
      std::vector<double> log_err;
      for (double e : out.errors["esde-heun"]) log_err.push_back(std::log(e));
      out.slopes["esde-heun"] = fit_slope(log_dt, log_err);
    }
  }

  if (want_grw) {
    const double exact = std::exp(-eps * n_intrinsic);
    std::vector<double> err;
    const Drift zero = make_zero_drift();
    for (std::size_t lev = 0; lev < steps.size(); ++lev) {
      SamplerConfig cfg;
      cfg.scheme = Scheme::Grw;
      cfg.steps = steps[lev];
      cfg.epsilon = eps;
      cfg.seed = mix64(seed ^ (0x677277ULL + lev));
      Eigen::MatrixXd starts = x0.transpose().replicate(weak_paths, 1);
      const SampleRun run = run_sampler(zero, starts, cfg, threads);
      const double moment = (run.states * x0).mean();
      err.push_back(std::abs(moment - exact));
    }
    out.errors["grw"] = err;
    std::vector<double> log_err;
    for (double e : err) log_err.push_back(std::log(std::max(e, 1e-300)));
    out.slopes["grw"] = fit_slope(log_dt, log_err);
  }
  return out;
}

/// Flat key=value metrics file; keys are a stable interface.
struct MetricsReport {
  std::optional<double> w2;
  std::optional<double> kl;
  std::optional<double> kl_raw;
  std::optional<double> mean_nll;
  std::map<std::string, double> slopes;
  Eigen::Index n_a = 0, n_b = 0;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> config_echo;
};

inline void write_metrics(const MetricsReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  char buf[40];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return std::string(buf);
  };
  if (r.w2) out << "w2=" << num(*r.w2) << "\n";
  if (r.kl) out << "kl=" << num(*r.kl) << "\n";
  if (r.kl_raw) out << "kl_raw=" << num(*r.kl_raw) << "\n";
  if (r.mean_nll) out << "mean_nll=" << num(*r.mean_nll) << "\n";
  for (const auto& [k, v] : r.slopes) out << "slope." << k << "=" << num(v) << "\n";
  out << "n_a=" << r.n_a << "\n";
  out << "n_b=" << r.n_b << "\n";
  out << "seed=" << r.seed << "\n";
  for (const auto& [k, v] : r.config_echo) out << "config." << k << "=" << v << "\n";
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace geobridge
