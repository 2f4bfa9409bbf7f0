#include <catch2/catch_amalgamated.hpp>

#include "geobridge/distributions.hpp"
#include "geobridge/losses.hpp"
#include "helpers.hpp"

using namespace geobridge;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

namespace {

InterpolantBatch random_batch(std::mt19937_64& rng, int n, int dim) {
  MatrixXd x0(n, dim), x1(n, dim);
  VectorXd t(n);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    x0.row(i) = testutil::random_unit(rng, dim).transpose();
    x1.row(i) = testutil::random_unit(rng, dim).transpose();
    t(i) = u01(rng);
  }
  return make_interpolant_batch(t, x0, x1);
}

/// Central finite-difference gradient check on a sample of coordinates.
template <class LossFn>
double max_grad_rel_error(FieldNet& net, const LossFn& loss_fn, int n_probe,
                          std::uint64_t seed, double h) {
  Gradients grads(net);
  loss_fn(net, &grads);
  const VectorXd g = grads.flat();
  VectorXd p = net.params_flat();
  auto rng = make_stream(seed, 0);
  std::uniform_int_distribution<Eigen::Index> pick(0, p.size() - 1);
  double worst = 0.0;
  for (int k = 0; k < n_probe; ++k) {
    const Eigen::Index i = pick(rng);
    VectorXd pp = p, pm = p;
    pp(i) += h;
    pm(i) -= h;
    net.set_params_flat(pp);
    const double up = loss_fn(net, nullptr);
    net.set_params_flat(pm);
    const double dn = loss_fn(net, nullptr);
    net.set_params_flat(p);
    const double fd = (up - dn) / (2.0 * h);
    const double scale = std::max({1e-8, std::abs(fd), std::abs(g(i))});
    worst = std::max(worst, std::abs(fd - g(i)) / scale);
  }
  return worst;
}

}  // namespace

TEST_CASE("zero nets give zero losses", "[losses]") {
  auto rng = make_stream(3, 0);
  const InterpolantBatch batch = random_batch(rng, 32, 3);
  FieldNet net = make_field_net(3, 8, 2, 4, Activation::Tanh, 5);
  for (auto& w : net.w) w.setZero();
  for (auto& b : net.b) b.setZero();
  CHECK(velocity_loss(net, batch) == 0.0);
  CHECK(score_loss_ism(net, batch) == 0.0);
}

TEST_CASE("velocity loss at the exact bridge velocity", "[losses]") {
  // single pair e1 -> e2 at t = 1/2; a constant-output net pinned to the
  // bridge velocity gives -|dI|^2/2 = -pi^2/8
  const Vector3d e1(1, 0, 0), e2(0, 1, 0);
  const VectorXd t = VectorXd::Constant(1, 0.5);
  const InterpolantBatch batch =
      make_interpolant_batch(t, MatrixXd(e1.transpose()), MatrixXd(e2.transpose()));

  FieldNet net = make_field_net(3, 4, 1, 4, Activation::Tanh, 7);
  for (auto& w : net.w) w.setZero();
  for (auto& b : net.b) b.setZero();
  net.b.back() = batch.dxt.row(0).transpose();

  const double expected = -sphere::kPi * sphere::kPi / 8.0;
  CHECK(velocity_loss(net, batch) == Catch::Approx(expected).epsilon(1e-12));
  CHECK(expected == Catch::Approx(-1.2337005501361697).epsilon(1e-12));
}

TEST_CASE("velocity gradient matches finite differences", "[losses][gradcheck]") {
  auto rng = make_stream(11, 0);
  const InterpolantBatch batch = random_batch(rng, 24, 3);
  FieldNet net = make_field_net(3, 12, 2, 3, Activation::Tanh, 13);
  auto loss_fn = [&batch](FieldNet& n, Gradients* g) { return velocity_loss(n, batch, g); };
  CHECK(max_grad_rel_error(net, loss_fn, 60, 17, 1e-5) <= 1e-4);
}

TEST_CASE("score gradient matches finite differences", "[losses][gradcheck]") {
  auto rng = make_stream(19, 0);
  const InterpolantBatch batch = random_batch(rng, 16, 3);
  FieldNet net = make_field_net(3, 10, 2, 3, Activation::Tanh, 23);
  auto loss_fn = [&batch](FieldNet& n, Gradients* g) { return score_loss_ism(n, batch, g); };
  CHECK(max_grad_rel_error(net, loss_fn, 60, 29, 1e-5) <= 1e-4);

  // the 6-d route exercises the five-direction divergence
  const InterpolantBatch batch6 = random_batch(rng, 8, 6);
  FieldNet net6 = make_field_net(6, 8, 2, 3, Activation::Tanh, 31);
  auto loss_fn6 = [&batch6](FieldNet& n, Gradients* g) { return score_loss_ism(n, batch6, g); };
  CHECK(max_grad_rel_error(net6, loss_fn6, 40, 37, 1e-5) <= 1e-4);
}

TEST_CASE("relu is rejected for score training", "[losses]") {
  auto rng = make_stream(41, 0);
  const InterpolantBatch batch = random_batch(rng, 8, 3);
  FieldNet net = make_field_net(3, 8, 2, 3, Activation::Relu, 43);
  Gradients g(net);
  CHECK_THROWS_AS(score_loss_ism(net, batch, &g), ConfigError);
  CHECK_NOTHROW(score_loss_ism(net, batch));  // evaluation alone is fine
}

TEST_CASE("divergence of a projected constant is -n<c,x>", "[losses][divergence]") {
  // symbolic oracle: with u(x) = c, div P_x c = -n <c,x> on S^n; a net
  // whose last-layer bias is c and all weights vanish realizes u = c.
  for (int dim : {3, 6}) {
    FieldNet net = make_field_net(dim, 8, 2, 4, Activation::Tanh, 47);
    for (auto& w : net.w) w.setZero();
    for (auto& b : net.b) b.setZero();
    auto rng = make_stream(53 + dim, 0);
    const VectorXd c = testutil::random_unit(rng, dim) * 1.7;
    net.b.back() = c;
    const int n = dim - 1;
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const VectorXd x = testutil::random_unit(rng, dim);
      const VectorXd tv = VectorXd::Constant(1, 0.5);
      const double div = field_divergence(net, tv, MatrixXd(x.transpose()))(0);
      worst = std::max(worst, std::abs(div - (-n * c.dot(x))));
    }
    CHECK(worst <= 1e-8);
  }
}

TEST_CASE("linear tangent field satisfies the divergence theorem", "[losses][divergence]") {
  // div P_x(Ax) = sum_j <A e_j, e_j> - n x'Ax via the tangent basis; its
  // uniform average over the closed surface vanishes.
  auto rng = make_stream(59, 0);
  Eigen::Matrix3d a;
  std::normal_distribution<double> n01;
  for (int i = 0; i < 9; ++i) a.data()[i] = n01(rng);

  const SampleSet u = sample_uniform(ManifoldKind::Sphere, 3, 100000, 61, 2);
  VectorXd divs(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const Vector3d x = u.points.row(i).transpose();
    const MatrixXd basis = sphere::tangent_basis(x);
    double div = -2.0 * x.dot(a * x);
    for (int j = 0; j < 2; ++j) div += basis.col(j).dot(a * basis.col(j));
    divs(i) = div;
  }
  const double mean = divs.mean();
  const double se = std::sqrt((divs.array() - mean).square().sum() / (u.size() - 1.0)) /
                    std::sqrt(static_cast<double>(u.size()));
  CHECK(std::abs(mean) <= 3.0 * se);
}
