#pragma once

#include <cmath>
#include <vector>

#include "ganaug/error.hpp"
#include "ganaug/tensor.hpp"

namespace ganaug {

// Per-parameter-group Adam state; step() reads each parameter's grad buffer.
// Non-finite gradients are rejected before any parameter is touched.
class Adam {
 public:
  Adam(std::vector<Tensor> params, float lr, float beta1 = 0.9f, float beta2 = 0.999f,
       float eps = 1e-8f)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    require(lr_ >= 0.0f, ErrorKind::InvalidConfig, "adam learning rate must be >= 0");
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (auto& p : params_) {
      m_.emplace_back(p.numel(), 0.0f);
      v_.emplace_back(p.numel(), 0.0f);
    }
  }

  int step_count() const { return t_; }
  float lr() const { return lr_; }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  void step() {
    for (auto& p : params_) {
      const auto& g = p.grad();
      for (float gv : g)
        require(std::isfinite(gv), ErrorKind::NonFiniteGradient,
                "non-finite gradient in adam step " + std::to_string(t_ + 1));
    }
    ++t_;
    float bc1 = 1.0f - std::pow(beta1_, static_cast<float>(t_));
    float bc2 = 1.0f - std::pow(beta2_, static_cast<float>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i].values();
      const auto& g = params_[i].grad();
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t j = 0; j < p.size(); ++j) {
        float gv = g.empty() ? 0.0f : g[j];
        m[j] = beta1_ * m[j] + (1.0f - beta1_) * gv;
        v[j] = beta2_ * v[j] + (1.0f - beta2_) * gv * gv;
        float m_hat = m[j] / bc1;
        float v_hat = v[j] / bc2;
        p[j] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
      }
    }
  }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<float>> m_, v_;
  float lr_, beta1_, beta2_, eps_;
  int t_ = 0;
};

}  // namespace ganaug
