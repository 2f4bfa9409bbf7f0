#pragma once

#include <Eigen/Core>
#include <vector>

#include "geobridge/errors.hpp"
#include "geobridge/fieldnet.hpp"
#include "geobridge/interpolant.hpp"

// The two training objectives, each returning the batch-mean loss and
// (optionally) its exact parameter gradient.
//
// Velocity regression:  mean of |vhat|^2/2 - <dI, vhat>  with vhat the
// projected net output at (t, x_t) and dI the exact bridge velocity; its
// population minimizer is the conditional expectation of dI given x_t.
//
// Implicit score matching:  mean of |shat|^2/2 + div shat  with the
// manifold divergence taken along an orthonormal tangent basis; no ground
// truth score enters. The divergence contributes through the forward-mode
// pass, so its gradient runs reverse-through-forward (see fieldnet.hpp).

namespace geobridge {

inline double velocity_loss(const FieldNet& net, const InterpolantBatch& batch,
                            Gradients* grads = nullptr) {
  if (batch.size() == 0) throw SizeError("velocity loss: empty batch");
  ForwardCache cache;
  const MatrixXd u = forward(net, batch.t, batch.xt, &cache);
  const MatrixXd vhat = sphere::project_tangent_rows(batch.xt, u);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const double loss =
      inv_b * (0.5 * vhat.squaredNorm() - (vhat.array() * batch.dxt.array()).sum());
  if (grads) {
    // d/du [u'Pu/2 - dxt'Pu] = vhat - dxt (dxt is already tangent).
    backward(net, cache, inv_b * (vhat - batch.dxt), *grads);
  }
  return loss;
}

inline double score_loss_ism(const FieldNet& net, const InterpolantBatch& batch,
                             Gradients* grads = nullptr) {
  if (batch.size() == 0) throw SizeError("score loss: empty batch");
  if (grads && net.act == Activation::Relu)
    throw ConfigError("score net training needs a twice-differentiable activation");
  const Eigen::Index bsz = batch.size();
  const int d = net.ambient_dim;
  const int n = d - 1;
  const double inv_b = 1.0 / static_cast<double>(bsz);

  ForwardCache cache;
  const MatrixXd u = forward(net, batch.t, batch.xt, &cache);
  const MatrixXd shat = sphere::project_tangent_rows(batch.xt, u);
  const VectorXd xu = (batch.xt.array() * u.array()).rowwise().sum();

  std::vector<MatrixXd> basis(n, MatrixXd(bsz, d));
  for (Eigen::Index i = 0; i < bsz; ++i) {
    const MatrixXd bs = sphere::tangent_basis(batch.xt.row(i).transpose());
    for (int j = 0; j < n; ++j) basis[j].row(i) = bs.col(j).transpose();
  }

  double div_sum = -static_cast<double>(n) * xu.sum();
  for (int j = 0; j < n; ++j) {
    MatrixXd in_dot = MatrixXd::Zero(bsz, net.input_dim());
    in_dot.leftCols(d) = basis[j];
    JvpCache jcache;
    const MatrixXd udot = jvp(net, cache, in_dot, grads ? &jcache : nullptr);
    div_sum += (basis[j].array() * udot.array()).sum();
    if (grads) {
      // Seed e_j on the jvp output; the primal seed shat - n x rides along
      // on the first sweep only.
      MatrixXd primal = MatrixXd::Zero(bsz, d);
      if (j == 0)
        primal = inv_b * (shat - static_cast<double>(n) * batch.xt);
      jvp_backward(net, cache, jcache, inv_b * basis[j], primal, *grads);
    }
  }
  return inv_b * (0.5 * shat.squaredNorm() + div_sum);
}

}  // namespace geobridge
