#include <catch2/catch_amalgamated.hpp>

#include "geobridge/distributions.hpp"
#include "geobridge/samplers.hpp"
#include "helpers.hpp"

using namespace geobridge;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

namespace {

Drift rotation_drift(const Vector3d& axis) {
  return make_analytic_drift(
      [axis](double, const MatrixXd& x) {
        MatrixXd out(x.rows(), 3);
        for (Eigen::Index i = 0; i < x.rows(); ++i)
          out.row(i) = axis.cross(Vector3d(x.row(i).transpose())).transpose();
        return out;
      },
      [](double, const MatrixXd& x) { return VectorXd::Zero(x.rows()); });
}

double heat_moment(Scheme scheme, double eps, int steps, Eigen::Index paths,
                   std::uint64_t seed) {
  SamplerConfig cfg;
  cfg.scheme = scheme;
  cfg.steps = steps;
  cfg.epsilon = eps;
  cfg.seed = seed;
  const Vector3d x0(0, 0, 1);
  const MatrixXd starts = x0.transpose().replicate(paths, 1);
  const SampleRun run = run_sampler(make_zero_drift(), starts, cfg, 2);
  return (run.states * x0).mean();
}

}  // namespace

TEST_CASE("trivial steps", "[samplers]") {
  // zero drift, zero noise: identity for every scheme
  auto rng = make_stream(3, 0);
  MatrixXd x0(16, 3);
  for (int i = 0; i < 16; ++i) x0.row(i) = testutil::random_unit(rng, 3).transpose();
  for (Scheme s : {Scheme::OdeEuler, Scheme::OdeRk4, Scheme::Grw, Scheme::EsdeEm,
                   Scheme::EsdeHeun}) {
    SamplerConfig cfg;
    cfg.scheme = s;
    cfg.steps = 8;
    cfg.epsilon = 0.0;
    const SampleRun run = run_sampler(make_zero_drift(), x0, cfg);
    REQUIRE((run.states - x0).norm() < 1e-12);
  }
}

TEST_CASE("one geodesic step is exact for the walk", "[samplers]") {
  // constant-speed field along a great circle: one step of length v dt
  auto rng = make_stream(5, 0);
  const VectorXd p = testutil::random_unit(rng, 3);
  const VectorXd v = testutil::random_tangent(rng, p, 1.0);
  long clamped = 0;
  auto stream = make_stream(7, 0);
  const VectorXd q = detail::grw_step(p, 0.25 * v, 0.0, 0.25, stream, clamped);
  CHECK(std::abs(sphere::distance(p, q) - 0.25 * v.norm()) <= 1e-12);
  CHECK(clamped == 0);
}

TEST_CASE("oversized tangent steps are clamped and counted", "[samplers]") {
  auto rng = make_stream(11, 0);
  const VectorXd p = testutil::random_unit(rng, 3);
  VectorXd v = testutil::random_tangent(rng, p, 1.0).normalized() * 3.2;
  long clamped = 0;
  auto stream = make_stream(13, 0);
  const VectorXd q = detail::grw_step(p, v, 0.0, 1.0, stream, clamped);
  CHECK(clamped == 1);
  CHECK(std::abs(sphere::distance(p, q) - (sphere::kPi - 1e-6)) <= 1e-9);
}

TEST_CASE("stochastic schemes with zero epsilon degrade to the euler ode", "[samplers]") {
  const Drift drift = rotation_drift(Vector3d(0.2, 0.5, -0.1));
  auto rng = make_stream(17, 0);
  MatrixXd x0(32, 3);
  for (int i = 0; i < 32; ++i) x0.row(i) = testutil::random_unit(rng, 3).transpose();

  SamplerConfig ode;
  ode.scheme = Scheme::OdeEuler;
  ode.steps = 50;
  const SampleRun ref = run_sampler(drift, x0, ode);
  for (Scheme s : {Scheme::Grw, Scheme::EsdeEm, Scheme::EsdeHeun}) {
    SamplerConfig cfg;
    cfg.scheme = s;
    cfg.steps = 50;
    cfg.epsilon = 0.0;
    const SampleRun run = run_sampler(drift, x0, cfg);
    REQUIRE(run.degraded_to_ode);
    REQUIRE(run.states == ref.states);  // bit-identical
  }
}

TEST_CASE("heat-kernel first moment, reduced scale", "[samplers][slow]") {
  // E<X_1, x0> -> exp(-eps n t) = 1/e for eps = 1/2 on the 2-sphere
  const double expect = std::exp(-1.0);
  const double grw = heat_moment(Scheme::Grw, 0.5, 200, 20000, 19);
  const double heun = heat_moment(Scheme::EsdeHeun, 0.5, 200, 20000, 23);
  const double em = heat_moment(Scheme::EsdeEm, 0.5, 200, 20000, 29);
  CHECK(std::abs(grw - expect) <= 0.02);
  CHECK(std::abs(heun - expect) <= 0.02);
  CHECK(std::abs(em - expect) <= 0.02);
}

TEST_CASE("walk and embedding schemes agree on the moment", "[samplers][slow]") {
  const double a = heat_moment(Scheme::Grw, 0.5, 512, 20000, 31);
  const double b = heat_moment(Scheme::EsdeHeun, 0.5, 512, 20000, 37);
  // each estimate has se ~ 0.48/sqrt(2e4); allow two combined ses
  const double se = 0.48 / std::sqrt(20000.0);
  CHECK(std::abs(a - b) <= 2.0 * std::sqrt(2.0) * se);
}

TEST_CASE("brownian motion preserves the uniform law", "[samplers][slow]") {
  const Eigen::Index n = 100000;
  const MatrixXd start = sample_uniform(ManifoldKind::Sphere, 3, n, 41, 2).points;
  SamplerConfig cfg;
  cfg.scheme = Scheme::EsdeHeun;
  cfg.steps = 128;
  cfg.epsilon = 0.4;
  cfg.seed = 43;
  const SampleRun run = run_sampler(make_zero_drift(), start, cfg, 2);
  for (int c = 0; c < 3; ++c) {
    std::vector<double> before(n), after(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      before[i] = start(i, c);
      after[i] = run.states(i, c);
    }
    REQUIRE(testutil::ks_statistic(before, after) < testutil::ks_critical(0.01, n, n));
  }
}

TEST_CASE("deterministic flow hits the geodesic endpoint", "[samplers]") {
  // the exact bridge field of one pair, integrated from x0, lands on x1
  auto rng = make_stream(47, 0);
  const VectorXd x0 = testutil::random_unit(rng, 3);
  const VectorXd x1 = testutil::random_unit(rng, 3);
  const VectorXd l = sphere::log_map(x0, x1);
  const double speed = l.norm();

  // velocity field of the bridge as a function of position along it
  const Drift drift = make_analytic_drift([x0, x1, l, speed](double t, const MatrixXd& x) {
    MatrixXd out(x.rows(), 3);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const VectorXd p = x.row(i).transpose();
      const double c = std::cos(t * speed), s = std::sin(t * speed);
      out.row(i) = (c * l - speed * s * x0).transpose();
    }
    return out;
  });
  SamplerConfig cfg;
  cfg.scheme = Scheme::OdeRk4;
  cfg.steps = 100;
  const SampleRun run = run_sampler(drift, MatrixXd(x0.transpose()), cfg);
  CHECK((run.states.row(0).transpose() - x1).norm() <= 1e-6);
}

TEST_CASE("forward-backward flow round trip", "[samplers]") {
  const Drift fwd = rotation_drift(Vector3d(0.3, -0.2, 0.8));
  const Drift bwd = make_analytic_drift([&fwd](double s, const MatrixXd& x) {
    return (-fwd.eval(1.0 - s, x)).eval();
  });
  auto rng = make_stream(53, 0);
  MatrixXd x0(64, 3);
  for (int i = 0; i < 64; ++i) x0.row(i) = testutil::random_unit(rng, 3).transpose();

  SamplerConfig cfg;
  cfg.scheme = Scheme::OdeRk4;
  cfg.steps = 1000;
  const SampleRun there = run_sampler(fwd, x0, cfg, 2);
  const SampleRun back = run_sampler(bwd, there.states, cfg, 2);
  CHECK((back.states - x0).cwiseAbs().maxCoeff() <= 1e-4);
}

TEST_CASE("likelihood ode on the zero field", "[samplers][nll]") {
  const Eigen::MatrixXd pts = sample_uniform(ManifoldKind::Sphere, 3, 200, 59).points;
  const double log_u = log_density_uniform(ManifoldKind::Sphere, 3);
  const VectorXd nll = nll_ode(make_zero_drift(), pts,
                               [log_u](const VectorXd&) { return log_u; }, 50);
  const double expect = std::log(4.0 * kPi);
  CHECK(expect == Catch::Approx(2.5310242469692907).epsilon(1e-12));
  for (Eigen::Index i = 0; i < nll.size(); ++i)
    REQUIRE(std::abs(nll(i) - expect) <= 1e-6);
}

TEST_CASE("likelihood ode on a rotation field", "[samplers][nll]") {
  // Killing fields are divergence free, so the flow keeps the uniform law
  const Drift drift = rotation_drift(Vector3d(0.7, 0.1, -0.4));
  const Eigen::MatrixXd pts = sample_uniform(ManifoldKind::Sphere, 3, 200, 61).points;
  const double log_u = log_density_uniform(ManifoldKind::Sphere, 3);
  const VectorXd nll =
      nll_ode(drift, pts, [log_u](const VectorXd&) { return log_u; }, 100);
  const double expect = std::log(4.0 * kPi);
  for (Eigen::Index i = 0; i < nll.size(); ++i)
    REQUIRE(std::abs(nll(i) - expect) <= 1e-5);
}

TEST_CASE("sampler input validation", "[samplers]") {
  SamplerConfig cfg;
  cfg.scheme = Scheme::OdeRk4;
  cfg.epsilon = 0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.epsilon = 0.0;
  cfg.steps = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(make_perturbed_drift(make_field_net(3, 4, 1, 2, Activation::Tanh, 1), nullptr,
                                       0.5),
                  ConfigError);
}
