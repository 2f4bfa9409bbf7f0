#pragma once

#include <Eigen/Core>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "geobridge/errors.hpp"
#include "geobridge/fieldnet.hpp"
#include "geobridge/parallel.hpp"
#include "geobridge/rng.hpp"
#include "geobridge/sphere.hpp"

// Generation on the sphere routes: the intrinsic geodesic random walk, the
// extrinsic embedding-SDE schemes built on projection noise, deterministic
// ODE flows, and the likelihood ODE. The projection Stratonovich diffusion
// sqrt(2e) P(X) o dW is realized two ways: Euler-Maruyama integrates the
// Ito form with the explicit correction drift -e*n*X, and Euler-Heun
// integrates the Stratonovich form directly by averaging the diffusion
// coefficient at a predictor point. Every scheme retracts after each step.
//
// Paths are independent; all randomness for path i comes from the stream
// (seed, i), so results are invariant to scheduling and thread count.

namespace geobridge {

enum class Scheme { OdeEuler, OdeRk4, Grw, EsdeEm, EsdeHeun };
enum class Direction { Forward, Backward };

inline std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::OdeEuler: return "ode-euler";
    case Scheme::OdeRk4: return "ode-rk4";
    case Scheme::Grw: return "grw";
    case Scheme::EsdeEm: return "esde-em";
    case Scheme::EsdeHeun: return "esde-heun";
  }
  return "?";
}

inline Scheme scheme_from_name(const std::string& s) {
  if (s == "ode-euler") return Scheme::OdeEuler;
  if (s == "ode-rk4") return Scheme::OdeRk4;
  if (s == "grw") return Scheme::Grw;
  if (s == "esde-em") return Scheme::EsdeEm;
  if (s == "esde-heun") return Scheme::EsdeHeun;
  throw ConfigError("unknown scheme '" + s + "'");
}

inline bool is_stochastic(Scheme s) {
  return s == Scheme::Grw || s == Scheme::EsdeEm || s == Scheme::EsdeHeun;
}

struct SamplerConfig {
  Scheme scheme = Scheme::OdeRk4;
  int steps = 100;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  Direction direction = Direction::Forward;

  void validate() const {
    if (steps < 1) throw ConfigError("sampler needs steps >= 1");
    if (epsilon < 0) throw ConfigError("epsilon must be >= 0");
    if (!is_stochastic(scheme) && epsilon != 0.0)
      throw ConfigError("deterministic schemes force epsilon = 0");
  }
};

/// Drift of the sampling dynamics in scheme time s in [0,1]: tangent rows
/// at the given states. `divergence` is needed only by the likelihood ODE.
struct Drift {
  std::function<Eigen::MatrixXd(double, const Eigen::MatrixXd&)> eval;
  std::function<Eigen::VectorXd(double, const Eigen::MatrixXd&)> divergence;
};

/// Perturbed drift v + e(s) s_hat of trained fields; the backward
/// direction runs the reversed-time dynamics -v(1-s) + e(1-s) s_hat(1-s),
/// which transports the data law back to the prior.
inline Drift make_perturbed_drift(const FieldNet& velocity, const FieldNet* score,
                                  double epsilon, Direction dir = Direction::Forward,
                                  std::function<double(double)> epsilon_schedule = {}) {
  if (epsilon > 0 && score == nullptr)
    throw ConfigError("epsilon > 0 needs a score net");
  auto eps_at = [epsilon, epsilon_schedule](double t) {
    return epsilon_schedule ? epsilon_schedule(t) : epsilon;
  };
  Drift d;
  d.eval = [&velocity, score, eps_at, dir](double s, const Eigen::MatrixXd& x) {
    const double t = dir == Direction::Forward ? s : 1.0 - s;
    const Eigen::VectorXd tv = Eigen::VectorXd::Constant(x.rows(), t);
    Eigen::MatrixXd v = field_eval_tangent(velocity, tv, x);
    if (dir == Direction::Backward) v = -v;
    const double e = eps_at(t);
    if (e > 0 && score) v += e * field_eval_tangent(*score, tv, x);
    return v;
  };
  d.divergence = [&velocity, dir](double s, const Eigen::MatrixXd& x) {
    const double t = dir == Direction::Forward ? s : 1.0 - s;
    const Eigen::VectorXd tv = Eigen::VectorXd::Constant(x.rows(), t);
    Eigen::VectorXd div = field_divergence(velocity, tv, x);
    if (dir == Direction::Backward) div = -div;
    return div;
  };
  return d;
}

/// Analytic drift from a plain tangent-field function (tests, benches).
inline Drift make_analytic_drift(
    std::function<Eigen::MatrixXd(double, const Eigen::MatrixXd&)> f,
    std::function<Eigen::VectorXd(double, const Eigen::MatrixXd&)> div = {}) {
  Drift d;
  d.eval = std::move(f);
  d.divergence = std::move(div);
  return d;
}

inline Drift make_zero_drift() {
  return make_analytic_drift(
      [](double, const Eigen::MatrixXd& x) { return Eigen::MatrixXd::Zero(x.rows(), x.cols()); },
      [](double, const Eigen::MatrixXd& x) { return Eigen::VectorXd::Zero(x.rows()); });
}

struct Trajectory {
  Eigen::VectorXd times;
  Eigen::MatrixXd states;
};

struct SampleRun {
  Eigen::MatrixXd states;       // endpoint per path
  long grw_clamped = 0;         // tangent steps clamped at the cut-locus guard
  bool degraded_to_ode = false; // stochastic scheme requested with epsilon = 0
  std::vector<Trajectory> trajectories;  // filled only when recording
};

namespace detail {

/// One geodesic-random-walk step: exp at x of drift*dt plus an isotropic
/// tangent Gaussian scaled by sqrt(2 e dt). Steps whose tangent norm
/// reaches the cut-locus guard are clamped to pi - 1e-6 and counted.
inline Eigen::VectorXd grw_step(const Eigen::VectorXd& x, const Eigen::VectorXd& drift_dt,
                                double eps, double dt, std::mt19937_64& rng, long& clamped) {
  Eigen::VectorXd step = drift_dt;
  if (eps > 0) {
    std::normal_distribution<double> n01;
    const Eigen::MatrixXd basis = sphere::tangent_basis(x);
    const double scale = std::sqrt(2.0 * eps * dt);
    for (Eigen::Index j = 0; j < basis.cols(); ++j) step += scale * n01(rng) * basis.col(j);
  }
  const double norm = step.norm();
  if (norm >= sphere::kPi - 1e-9) {
    step *= (sphere::kPi - 1e-6) / norm;
    ++clamped;
  }
  return sphere::exp_map(x, step);
}

inline Eigen::VectorXd esde_em_step(const Eigen::VectorXd& x, const Eigen::VectorXd& drift,
                                    double eps, double dt, const Eigen::VectorXd& dw) {
  const double n = static_cast<double>(x.size() - 1);
  Eigen::VectorXd y = x + drift * dt;
  if (eps > 0) {
    y -= eps * n * x * dt;  // Stratonovich-to-Ito correction of projection noise
    y += std::sqrt(2.0 * eps) * sphere::project_tangent(x, dw);
  }
  return sphere::retract(y);
}

inline Eigen::VectorXd esde_heun_step(const Eigen::VectorXd& x, const Eigen::VectorXd& drift,
                                      double eps, double dt, const Eigen::VectorXd& dw) {
  Eigen::VectorXd y = x + drift * dt;
  if (eps > 0) {
    const double scale = std::sqrt(2.0 * eps);
    const Eigen::VectorXd bw0 = scale * sphere::project_tangent(x, dw);
    const Eigen::VectorXd pred = sphere::retract(y + bw0);
    y += 0.5 * (bw0 + scale * sphere::project_tangent(pred, dw));
  }
  return sphere::retract(y);
}

}  // namespace detail

/// Runs a batch of independent paths of the configured scheme from the
/// rows of x0 over scheme time [0,1]. A stochastic scheme with epsilon = 0
/// degrades to the Euler ODE and flags it. Trajectories are recorded when
/// `record` is true (memory: paths x steps).
inline SampleRun run_sampler(const Drift& drift, const Eigen::MatrixXd& x0, SamplerConfig cfg,
                             int threads = 1, bool record = false) {
  cfg.validate();
  SampleRun out;
  Scheme scheme = cfg.scheme;
  if (is_stochastic(scheme) && cfg.epsilon == 0.0) {
    scheme = Scheme::OdeEuler;
    out.degraded_to_ode = true;
  }
  const Eigen::Index n_paths = x0.rows();
  const int d = static_cast<int>(x0.cols());
  const double dt = 1.0 / cfg.steps;
  out.states.resize(n_paths, d);
  if (record) out.trajectories.resize(n_paths);
  std::atomic<long> clamped{0};

  // Deterministic ODE schemes integrate whole row-blocks at once.
  if (scheme == Scheme::OdeEuler || scheme == Scheme::OdeRk4) {
    parallel_chunks(static_cast<std::size_t>(n_paths), 4096, threads,
                    [&](std::size_t, std::size_t begin, std::size_t end) {
                      Eigen::MatrixXd x = x0.middleRows(begin, end - begin);
                      auto maybe_record = [&](int k, const Eigen::MatrixXd& xs) {
                        if (!record) return;
                        for (std::size_t i = begin; i < end; ++i) {
                          auto& tr = out.trajectories[i];
                          if (k == 0) {
                            tr.times.resize(cfg.steps + 1);
                            tr.states.resize(cfg.steps + 1, d);
                          }
                          tr.times(k) = k * dt;
                          tr.states.row(k) = xs.row(i - begin);
                        }
                      };
                      maybe_record(0, x);
                      for (int k = 0; k < cfg.steps; ++k) {
                        const double s = k * dt;
                        if (scheme == Scheme::OdeEuler) {
                          x = sphere::retract_rows(x + dt * drift.eval(s, x));
                        } else {
                          const Eigen::MatrixXd k1 = drift.eval(s, x);
                          const Eigen::MatrixXd k2 =
                              drift.eval(s + dt / 2, sphere::retract_rows(x + (dt / 2) * k1));
                          const Eigen::MatrixXd k3 =
                              drift.eval(s + dt / 2, sphere::retract_rows(x + (dt / 2) * k2));
                          const Eigen::MatrixXd k4 =
                              drift.eval(s + dt, sphere::retract_rows(x + dt * k3));
                          x = sphere::retract_rows(x + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4));
                        }
                        maybe_record(k + 1, x);
                      }
                      out.states.middleRows(begin, end - begin) = x;
                    });
    return out;
  }

  // Stochastic schemes: per-path streams, drift evaluated on the block.
  parallel_chunks(
      static_cast<std::size_t>(n_paths), 256, threads,
      [&](std::size_t, std::size_t begin, std::size_t end) {
        const Eigen::Index rows = static_cast<Eigen::Index>(end - begin);
        Eigen::MatrixXd x = x0.middleRows(begin, rows);
        std::vector<std::mt19937_64> streams;
        streams.reserve(rows);
        for (std::size_t i = begin; i < end; ++i) streams.push_back(make_stream(cfg.seed, i));
        std::normal_distribution<double> n01;
        long local_clamped = 0;
        auto maybe_record = [&](int k, const Eigen::MatrixXd& xs) {
          if (!record) return;
          for (std::size_t i = begin; i < end; ++i) {
            auto& tr = out.trajectories[i];
            if (k == 0) {
              tr.times.resize(cfg.steps + 1);
              tr.states.resize(cfg.steps + 1, d);
            }
            tr.times(k) = k * dt;
            tr.states.row(k) = xs.row(i - begin);
          }
        };
        maybe_record(0, x);
        for (int k = 0; k < cfg.steps; ++k) {
          const double s = k * dt;
          const Eigen::MatrixXd v = drift.eval(s, x);
          for (Eigen::Index i = 0; i < rows; ++i) {
            auto& rng = streams[i];
            if (scheme == Scheme::Grw) {
              x.row(i) = detail::grw_step(x.row(i).transpose(), dt * v.row(i).transpose(),
                                          cfg.epsilon, dt, rng, local_clamped)
                             .transpose();
            } else {
              Eigen::VectorXd dw(d);
              const double sqrt_dt = std::sqrt(dt);
              for (int c = 0; c < d; ++c) dw(c) = sqrt_dt * n01(rng);
              if (scheme == Scheme::EsdeEm)
                x.row(i) = detail::esde_em_step(x.row(i).transpose(), v.row(i).transpose(),
                                                cfg.epsilon, dt, dw)
                               .transpose();
              else
                x.row(i) = detail::esde_heun_step(x.row(i).transpose(), v.row(i).transpose(),
                                                  cfg.epsilon, dt, dw)
                               .transpose();
            }
          }
          maybe_record(k + 1, x);
        }
        clamped += local_clamped;
        out.states.middleRows(begin, rows) = x;
      });
  out.grw_clamped = clamped.load();
  return out;
}

/// Per-sample negative log density under the deterministic flow of
/// `drift`: integrates states backward from scheme time 1 to 0 with
/// classical RK4 while accumulating the divergence along the path, then
/// adds the closed-form prior log density at the reached start point.
inline Eigen::VectorXd nll_ode(const Drift& drift, const Eigen::MatrixXd& x1,
                               const std::function<double(const Eigen::VectorXd&)>& log_prior,
                               int steps, int threads = 1) {
  if (!drift.divergence) throw ConfigError("nll_ode needs a drift with a divergence");
  if (steps < 1) throw ConfigError("nll_ode needs steps >= 1");
  const Eigen::Index n = x1.rows();
  const int d = static_cast<int>(x1.cols());
  Eigen::VectorXd nll(n);
  const double dt = 1.0 / steps;

  parallel_chunks(
      static_cast<std::size_t>(n), 4096, threads,
      [&](std::size_t, std::size_t begin, std::size_t end) {
        const Eigen::Index rows = static_cast<Eigen::Index>(end - begin);
        Eigen::MatrixXd x = x1.middleRows(begin, rows);
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(rows);
        // d/ds [x; A] = [v(s,x); div v(s,x)], integrated with step -dt.
        for (int k = 0; k < steps; ++k) {
          const double s = 1.0 - k * dt;
          const Eigen::MatrixXd k1 = drift.eval(s, x);
          const Eigen::VectorXd a1 = drift.divergence(s, x);
          const Eigen::MatrixXd x2 = sphere::retract_rows(x - (dt / 2) * k1);
          const Eigen::MatrixXd k2 = drift.eval(s - dt / 2, x2);
          const Eigen::VectorXd a2 = drift.divergence(s - dt / 2, x2);
          const Eigen::MatrixXd x3 = sphere::retract_rows(x - (dt / 2) * k2);
          const Eigen::MatrixXd k3 = drift.eval(s - dt / 2, x3);
          const Eigen::VectorXd a3 = drift.divergence(s - dt / 2, x3);
          const Eigen::MatrixXd x4 = sphere::retract_rows(x - dt * k3);
          const Eigen::MatrixXd k4 = drift.eval(s - dt, x4);
          const Eigen::VectorXd a4 = drift.divergence(s - dt, x4);
          x = sphere::retract_rows(x - (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4));
          acc -= (dt / 6) * (a1 + 2 * a2 + 2 * a3 + a4);
        }
        // acc = -int_0^1 div ds; log rho1 = log rho0(x0) + acc.
        for (Eigen::Index i = 0; i < rows; ++i)
          nll(begin + i) = -(log_prior(x.row(i).transpose()) + acc(i));
      });
  return nll;
}

}  // namespace geobridge
