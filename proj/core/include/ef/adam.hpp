/*!
 * Copyright (c) 2026 embedforest contributors.
 * Licensed under the Apache License, Version 2.0. See LICENSE in the project root.
 */
#ifndef EF_ADAM_HPP_
#define EF_ADAM_HPP_

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace ef {

/// Adam over an externally owned flat parameter list.
class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

  void step(const std::vector<double*>& params, const std::vector<const double*>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
      throw std::invalid_argument("AdamOptimizer: parameter count mismatch");
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      double g = *grads[i];
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
      double mhat = m_[i] / bc1;
      double vhat = v_[i] / bc2;
      *params[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace ef

#endif  // EF_ADAM_HPP_
