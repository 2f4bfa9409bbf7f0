#pragma once

#include <Eigen/Core>
#include <cmath>

#include "geobridge/errors.hpp"

namespace geobridge {

/// Gradient descent with first/second-moment estimates, decoupled weight
/// decay, and a step-decay learning-rate schedule (lr <- lr * gamma every
/// lr_step steps).
class AdamW {
 public:
  AdamW(Eigen::Index n_params, double lr, double weight_decay, int lr_step, double lr_gamma,
        double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr0_(lr),
        weight_decay_(weight_decay),
        lr_step_(lr_step),
        lr_gamma_(lr_gamma),
        beta1_(beta1),
        beta2_(beta2),
        eps_(eps),
        m_(Eigen::VectorXd::Zero(n_params)),
        v_(Eigen::VectorXd::Zero(n_params)) {
    if (lr <= 0 || lr_step <= 0 || lr_gamma <= 0 || lr_gamma > 1 || weight_decay < 0)
      throw ConfigError("bad optimizer settings");
  }

  double current_lr() const {
    return lr0_ * std::pow(lr_gamma_, static_cast<double>(step_ / lr_step_));
  }

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    const double lr = current_lr();
    ++step_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_.array().matrix() + (1.0 - beta2_) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, step_);
    const double c2 = 1.0 - std::pow(beta2_, step_);
    params.array() -=
        lr * ((m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_) + weight_decay_ * params.array());
  }

 private:
  double lr0_, weight_decay_;
  int lr_step_;
  double lr_gamma_, beta1_, beta2_, eps_;
  long step_ = 0;
  Eigen::VectorXd m_, v_;
};

}  // namespace geobridge
