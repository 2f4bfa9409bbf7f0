#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "geobridge/distributions.hpp"
#include "geobridge/embedding.hpp"
#include "geobridge/errors.hpp"
#include "geobridge/fieldnet.hpp"
#include "geobridge/interpolant.hpp"
#include "geobridge/losses.hpp"
#include "geobridge/optimizer.hpp"

// Joint training of the velocity and score fields on the sphere route.
// Each iteration samples per-element times uniformly on [0,1], draws a
// prior batch and a data batch, re-pairs any endpoint pair that falls on
// the cut locus with a fresh prior draw, builds the bridge batch, and
// takes one optimizer step per net on its loss. The loop is strictly
// sequential and therefore bit-reproducible for a fixed seed.

namespace geobridge {

struct TrainConfig {
  long iterations = 5000;
  Eigen::Index batch_size = 512;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  int lr_step = 1000;
  double lr_gamma = 0.7;
  std::uint64_t seed = 0;
  long eval_every = 100;

  void validate() const {
    if (iterations < 0 || batch_size < 1 || learning_rate <= 0 || weight_decay < 0 ||
        lr_step < 1 || lr_gamma <= 0 || lr_gamma > 1 || eval_every < 1)
      throw ConfigError("bad training settings");
  }
};

/// Draws `count` prior points (unit rows) from the given engine.
using PriorSampler = std::function<Eigen::MatrixXd(std::mt19937_64&, Eigen::Index)>;

inline PriorSampler make_uniform_prior(int ambient_dim) {
  return [ambient_dim](std::mt19937_64& rng, Eigen::Index count) {
    std::normal_distribution<double> n01;
    Eigen::MatrixXd x(count, ambient_dim);
    for (Eigen::Index i = 0; i < count; ++i) {
      Eigen::VectorXd g(ambient_dim);
      do {
        for (int c = 0; c < ambient_dim; ++c) g(c) = n01(rng);
      } while (g.norm() < 1e-8);
      x.row(i) = (g / g.norm()).transpose();
    }
    return x;
  };
}

/// Haar rotations pushed through the 6-vector embedding onto the unit
/// sphere in R^6 (the prior of the embedded-Haar rotation route).
inline PriorSampler make_embedded_haar_prior() {
  return [](std::mt19937_64& rng, Eigen::Index count) {
    std::normal_distribution<double> n01;
    Eigen::MatrixXd x(count, 6);
    for (Eigen::Index i = 0; i < count; ++i) {
      Eigen::Vector4d q;
      do {
        for (int c = 0; c < 4; ++c) q(c) = n01(rng);
      } while (q.norm() < 1e-8);
      q.normalize();
      x.row(i) = embed::to_unit_sphere(detail::quaternion_to_rotation(q)).transpose();
    }
    return x;
  };
}

struct TrainTrace {
  std::vector<long> iteration;
  std::vector<double> velocity_loss;
  std::vector<double> score_loss;  // empty when no score net is trained
  long repaired_pairs = 0;
  long dropped_pairs = 0;
};

/// Algorithm: per-iteration coupled-triple construction and one step per
/// net. `score` may be null (deterministic-sampler-only training). The
/// trace records batch losses every eval_every iterations.
inline TrainTrace train(FieldNet& velocity, FieldNet* score, const PriorSampler& prior,
                        const Eigen::MatrixXd& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.rows() == 0) throw SizeError("training data is empty");
  if (velocity.ambient_dim != data.cols())
    throw ConfigError("velocity net ambient dim " + std::to_string(velocity.ambient_dim) +
                      " does not match data dim " + std::to_string(data.cols()));
  if (score && score->ambient_dim != data.cols())
    throw ConfigError("score net ambient dim does not match data dim");

  TrainTrace trace;
  if (cfg.iterations == 0) return trace;

  auto rng = make_stream(cfg.seed, 0x7261696e);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<Eigen::Index> pick(0, data.rows() - 1);

  AdamW opt_v(velocity.n_params(), cfg.learning_rate, cfg.weight_decay, cfg.lr_step,
              cfg.lr_gamma);
  AdamW opt_s(score ? score->n_params() : 1, cfg.learning_rate, cfg.weight_decay, cfg.lr_step,
              cfg.lr_gamma);

  const Eigen::Index bsz = cfg.batch_size;
  for (long it = 0; it < cfg.iterations; ++it) {
    Eigen::VectorXd t(bsz);
    Eigen::MatrixXd x0 = prior(rng, bsz);
    Eigen::MatrixXd x1(bsz, data.cols());
    for (Eigen::Index i = 0; i < bsz; ++i) {
      t(i) = u01(rng);
      x1.row(i) = data.row(pick(rng));
    }
    // Re-pair cut-locus violators with fresh prior draws; the couplings
    // are independent, so replacement preserves the law.
    std::vector<Eigen::Index> keep;
    keep.reserve(bsz);
    for (Eigen::Index i = 0; i < bsz; ++i) {
      bool ok = sphere_pair_admissible(x0.row(i), x1.row(i));
      for (int tries = 0; !ok && tries < 100; ++tries) {
        x0.row(i) = prior(rng, 1).row(0);
        ok = sphere_pair_admissible(x0.row(i), x1.row(i));
        ++trace.repaired_pairs;
      }
      if (ok)
        keep.push_back(i);
      else
        ++trace.dropped_pairs;
    }
    if (keep.empty()) continue;
    if (static_cast<Eigen::Index>(keep.size()) != bsz) {
      Eigen::VectorXd tk(keep.size());
      Eigen::MatrixXd x0k(keep.size(), data.cols()), x1k(keep.size(), data.cols());
      for (std::size_t j = 0; j < keep.size(); ++j) {
        tk(j) = t(keep[j]);
        x0k.row(j) = x0.row(keep[j]);
        x1k.row(j) = x1.row(keep[j]);
      }
      t = tk;
      x0 = x0k;
      x1 = x1k;
    }
    const InterpolantBatch batch = make_interpolant_batch(t, x0, x1);

    Gradients gv(velocity);
    const double lv = velocity_loss(velocity, batch, &gv);
    Eigen::VectorXd pv = velocity.params_flat();
    opt_v.step(pv, gv.flat());
    velocity.set_params_flat(pv);

    double ls = 0.0;
    if (score) {
      Gradients gs(*score);
      ls = score_loss_ism(*score, batch, &gs);
      Eigen::VectorXd ps = score->params_flat();
      opt_s.step(ps, gs.flat());
      score->set_params_flat(ps);
    }

    if (it % cfg.eval_every == 0 || it + 1 == cfg.iterations) {
      trace.iteration.push_back(it);
      trace.velocity_loss.push_back(lv);
      if (score) trace.score_loss.push_back(ls);
    }
  }
  return trace;
}

}  // namespace geobridge
