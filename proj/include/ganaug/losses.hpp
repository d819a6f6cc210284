#pragma once

#include <cmath>
#include <vector>

#include "ganaug/nn.hpp"
#include "ganaug/tensor.hpp"

namespace ganaug {

// Probabilities are pinned away from {0,1} before any log.
inline constexpr float kProbClamp = 1e-7f;

struct GanLossPair {
  float loss_d = 0.0f;
  float loss_g = 0.0f;
  float d_on_real = 0.0f;  // mean D(x)
  float d_on_fake = 0.0f;  // mean D(x~)
};

namespace detail {

inline void check_prob_batch(const Tensor& p, const char* who) {
  bool ok = p.rank() == 1 || (p.rank() == 2 && p.dim(1) == 1);
  require(ok, ErrorKind::ShapeMismatch,
          std::string(who) + " expects [N] or [N,1] probabilities, got " + shape_str(p.shape()));
}

}  // namespace detail

// L_D = -mean(log D(x)) - mean(log(1 - D(x~)))
inline Tensor disc_loss(const Tensor& d_real, const Tensor& d_fake) {
  detail::check_prob_batch(d_real, "disc_loss");
  detail::check_prob_batch(d_fake, "disc_loss");
  Tensor real_term = mean(log(clamp(d_real, kProbClamp, 1.0f - kProbClamp)));
  Tensor fake_term = mean(log(clamp(ones_like(d_fake) - d_fake, kProbClamp, 1.0f - kProbClamp)));
  return neg(real_term) + neg(fake_term);
}

// L_G = -mean(log D(x~)), the non-saturating generator objective.
inline Tensor gen_loss(const Tensor& d_fake) {
  detail::check_prob_batch(d_fake, "gen_loss");
  return neg(mean(log(clamp(d_fake, kProbClamp, 1.0f - kProbClamp))));
}

// V = mean(log D(x)) + mean(log(1 - D(x~))); diagnostic only, equals -L_D
// bit-for-bit because both sides share the same clamped terms.
inline Tensor minimax_value(const Tensor& d_real, const Tensor& d_fake) {
  detail::check_prob_batch(d_real, "minimax_value");
  detail::check_prob_batch(d_fake, "minimax_value");
  Tensor real_term = mean(log(clamp(d_real, kProbClamp, 1.0f - kProbClamp)));
  Tensor fake_term = mean(log(clamp(ones_like(d_fake) - d_fake, kProbClamp, 1.0f - kProbClamp)));
  return real_term + fake_term;
}

// Mean over the batch of -log softmax(logits)[label], fused log-sum-exp.
inline Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  require(logits.rank() == 2, ErrorKind::ShapeMismatch,
          "cross_entropy expects [N,K] logits, got " + detail::shape_str(logits.shape()));
  const int n = logits.dim(0), k = logits.dim(1);
  require(static_cast<int>(labels.size()) == n, ErrorKind::ShapeMismatch,
          "cross_entropy label count mismatch");
  for (int label : labels)
    require(label >= 0 && label < k, ErrorKind::LabelOutOfRange,
            "label " + std::to_string(label) + " outside [0," + std::to_string(k) + ")");

  // softmax rows are kept for the backward rule
  auto probs = std::make_shared<std::vector<float>>(logits.numel());
  float total = 0.0f;
  for (int row = 0; row < n; ++row) {
    const float* p = logits.raw() + static_cast<std::size_t>(row) * k;
    float* q = probs->data() + static_cast<std::size_t>(row) * k;
    float mx = p[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, p[j]);
    float sum_exp = 0.0f;
    for (int j = 0; j < k; ++j) {
      q[j] = std::exp(p[j] - mx);
      sum_exp += q[j];
    }
    float inv = 1.0f / sum_exp;
    for (int j = 0; j < k; ++j) q[j] *= inv;
    float lse = mx + std::log(sum_exp);
    total += lse - p[labels[static_cast<std::size_t>(row)]];
  }
  Tensor out({1}, std::vector<float>{total / static_cast<float>(n)});

  out.set_requires_grad(logits.requires_grad());
  Tape* tape = active_tape();
  if (tape && logits.requires_grad()) {
    int ix = tape->node_for(logits);
    auto labels_copy = labels;
    tape->record(out, [=](Tape& t, int self) {
      float g = t.adjoint(self)[0];
      auto& gx = t.adjoint(ix);
      float inv_n = 1.0f / static_cast<float>(n);
      for (int row = 0; row < n; ++row) {
        const float* q = probs->data() + static_cast<std::size_t>(row) * k;
        float* gp = gx.data() + static_cast<std::size_t>(row) * k;
        int label = labels_copy[static_cast<std::size_t>(row)];
        for (int j = 0; j < k; ++j) {
          float delta = j == label ? 1.0f : 0.0f;
          gp[j] += g * (q[j] - delta) * inv_n;
        }
      }
    });
  }
  return out;
}

inline float mean_value(const Tensor& t) {
  double acc = 0.0;
  for (float v : t.values()) acc += v;
  return static_cast<float>(acc / static_cast<double>(t.numel()));
}

}  // namespace ganaug
