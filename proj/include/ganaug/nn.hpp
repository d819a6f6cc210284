#pragma once

#include <cmath>
#include <cstring>
#include <vector>

#include "ganaug/detail/gemm.hpp"
#include "ganaug/parallel.hpp"
#include "ganaug/tensor.hpp"

namespace ganaug {

namespace detail {

// Unrolls src[C,H,W] into col[C*kh*kw, GH*GW] where (GH,GW) is the conv-style
// output grid; out-of-bounds taps read zero.
inline void im2col(const float* src, int c, int h, int w, int kh, int kw, int sh, int sw, int ph,
                   int pw, int gh, int gw, float* col) {
  const std::size_t grid = static_cast<std::size_t>(gh) * gw;
  for (int ch = 0; ch < c; ++ch) {
    const float* plane = src + static_cast<std::size_t>(ch) * h * w;
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        float* row = col + (static_cast<std::size_t>(ch) * kh * kw + static_cast<std::size_t>(i) * kw + j) * grid;
        for (int gy = 0; gy < gh; ++gy) {
          int y = gy * sh - ph + i;
          if (y < 0 || y >= h) {
            std::memset(row + static_cast<std::size_t>(gy) * gw, 0, sizeof(float) * gw);
            continue;
          }
          const float* srow = plane + static_cast<std::size_t>(y) * w;
          float* drow = row + static_cast<std::size_t>(gy) * gw;
          for (int gx = 0; gx < gw; ++gx) {
            int x = gx * sw - pw + j;
            drow[gx] = (x >= 0 && x < w) ? srow[x] : 0.0f;
          }
        }
      }
    }
  }
}

// Scatter-add inverse of im2col: dst[C,H,W] += unrolled col taps.
inline void col2im(const float* col, int c, int h, int w, int kh, int kw, int sh, int sw, int ph,
                   int pw, int gh, int gw, float* dst) {
  const std::size_t grid = static_cast<std::size_t>(gh) * gw;
  for (int ch = 0; ch < c; ++ch) {
    float* plane = dst + static_cast<std::size_t>(ch) * h * w;
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        const float* row = col + (static_cast<std::size_t>(ch) * kh * kw + static_cast<std::size_t>(i) * kw + j) * grid;
        for (int gy = 0; gy < gh; ++gy) {
          int y = gy * sh - ph + i;
          if (y < 0 || y >= h) continue;
          float* drow = plane + static_cast<std::size_t>(y) * w;
          const float* srow = row + static_cast<std::size_t>(gy) * gw;
          for (int gx = 0; gx < gw; ++gx) {
            int x = gx * sw - pw + j;
            if (x >= 0 && x < w) drow[x] += srow[gx];
          }
        }
      }
    }
  }
}

inline int conv_out_dim(int in, int k, int s, int p) { return (in + 2 * p - k) / s + 1; }
inline int conv_transpose_out_dim(int in, int k, int s, int p) { return (in - 1) * s - 2 * p + k; }

inline void check_image_input(const Tensor& x, int expected_ch, const char* who) {
  require(x.rank() == 4, ErrorKind::ShapeMismatch,
          std::string(who) + " expects NCHW input, got " + shape_str(x.shape()));
  require(x.dim(1) == expected_ch, ErrorKind::ChannelMismatch,
          std::string(who) + " expects " + std::to_string(expected_ch) + " channels, got " +
              std::to_string(x.dim(1)));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// layer parameter bundles

struct Conv2d {
  int in_ch = 0, out_ch = 0;
  int kh = 0, kw = 0, sh = 1, sw = 1, ph = 0, pw = 0;
  bool has_bias = true;
  Tensor weight;  // [out_ch, in_ch, kh, kw]
  Tensor bias;    // [out_ch]

  static Conv2d make(int in_ch, int out_ch, int k, int s, int p, bool bias) {
    Conv2d c;
    c.in_ch = in_ch;
    c.out_ch = out_ch;
    c.kh = c.kw = k;
    c.sh = c.sw = s;
    c.ph = c.pw = p;
    c.has_bias = bias;
    c.weight = Tensor({out_ch, in_ch, k, k}, true);
    if (bias) c.bias = Tensor({out_ch}, true);
    return c;
  }
};

struct ConvTranspose2d {
  int in_ch = 0, out_ch = 0;
  int kh = 0, kw = 0, sh = 1, sw = 1, ph = 0, pw = 0;
  bool has_bias = true;
  Tensor weight;  // [in_ch, out_ch, kh, kw]
  Tensor bias;    // [out_ch]

  static ConvTranspose2d make(int in_ch, int out_ch, int k, int s, int p, bool bias) {
    ConvTranspose2d c;
    c.in_ch = in_ch;
    c.out_ch = out_ch;
    c.kh = c.kw = k;
    c.sh = c.sw = s;
    c.ph = c.pw = p;
    c.has_bias = bias;
    c.weight = Tensor({in_ch, out_ch, k, k}, true);
    if (bias) c.bias = Tensor({out_ch}, true);
    return c;
  }
};

enum class BatchNormMode { Train, Eval };

struct BatchNorm2d {
  int channels = 0;
  float momentum = 0.1f;
  float eps = 1e-5f;
  Tensor gamma, beta;                  // learnable [C]
  Tensor running_mean, running_var;    // state [C]

  static BatchNorm2d make(int channels, float momentum = 0.1f, float eps = 1e-5f) {
    BatchNorm2d b;
    b.channels = channels;
    b.momentum = momentum;
    b.eps = eps;
    b.gamma = Tensor::ones({channels});
    b.gamma.set_requires_grad(true);
    b.beta = Tensor({channels}, true);
    b.running_mean = Tensor({channels});
    b.running_var = Tensor::ones({channels});
    return b;
  }
};

struct Dense {
  int in_features = 0, out_features = 0;
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]

  static Dense make(int in_features, int out_features) {
    Dense d;
    d.in_features = in_features;
    d.out_features = out_features;
    d.weight = Tensor({out_features, in_features}, true);
    d.bias = Tensor({out_features}, true);
    return d;
  }
};

// ---------------------------------------------------------------------------
// conv2d

inline Tensor conv2d_forward(const Conv2d& layer, const Tensor& x) {
  detail::check_image_input(x, layer.in_ch, "conv2d");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int oh = detail::conv_out_dim(h, layer.kh, layer.sh, layer.ph);
  const int ow = detail::conv_out_dim(w, layer.kw, layer.sw, layer.pw);
  require(oh >= 1 && ow >= 1, ErrorKind::OutputTooSmall,
          "conv2d output would be " + std::to_string(oh) + "x" + std::to_string(ow));
  const int ckk = c * layer.kh * layer.kw;
  const std::size_t grid = static_cast<std::size_t>(oh) * ow;

  Tensor out({n, layer.out_ch, oh, ow});
  const Conv2d cfg = layer;  // hyperparameters by value for the closure
  auto forward_one = [&, cfg](std::int64_t item) {
    std::vector<float> col(static_cast<std::size_t>(ckk) * grid);
    const float* xin = x.raw() + static_cast<std::size_t>(item) * c * h * w;
    float* yout = out.raw() + static_cast<std::size_t>(item) * cfg.out_ch * grid;
    detail::im2col(xin, c, h, w, cfg.kh, cfg.kw, cfg.sh, cfg.sw, cfg.ph, cfg.pw, oh, ow, col.data());
    detail::gemm_nn(cfg.out_ch, ckk, static_cast<int>(grid), cfg.weight.raw(), col.data(), yout);
    if (cfg.has_bias) {
      for (int oc = 0; oc < cfg.out_ch; ++oc) {
        float b = cfg.bias.raw()[oc];
        float* plane = yout + static_cast<std::size_t>(oc) * grid;
        for (std::size_t i = 0; i < grid; ++i) plane[i] += b;
      }
    }
  };
  parallel_for(0, n, forward_one);

  bool needs_grad = x.requires_grad() || layer.weight.requires_grad() ||
                    (layer.has_bias && layer.bias.requires_grad());
  out.set_requires_grad(needs_grad);
  Tape* tape = active_tape();
  if (tape && needs_grad) {
    int ix = tape->node_for(x);
    int iw = tape->node_for(layer.weight);
    int ib = layer.has_bias ? tape->node_for(layer.bias) : -1;
    auto x_data = x.storage();
    auto w_data = layer.weight.storage();
    tape->record(out, [=](Tape& t, int self) {
      const auto& g = t.adjoint(self);
      if (ix >= 0) {
        auto wt = detail::transposed(cfg.out_ch, ckk, w_data->value.data());
        auto& gx = t.adjoint(ix);
        parallel_for(0, n, [&](std::int64_t item) {
          std::vector<float> colg(static_cast<std::size_t>(ckk) * grid, 0.0f);
          const float* gy = g.data() + static_cast<std::size_t>(item) * cfg.out_ch * grid;
          detail::gemm_nn(ckk, cfg.out_ch, static_cast<int>(grid), wt.data(), gy, colg.data());
          detail::col2im(colg.data(), c, h, w, cfg.kh, cfg.kw, cfg.sh, cfg.sw, cfg.ph, cfg.pw, oh,
                         ow, gx.data() + static_cast<std::size_t>(item) * c * h * w);
        });
      }
      if (iw >= 0) {
        auto& gw = t.adjoint(iw);
        std::vector<float> col(static_cast<std::size_t>(ckk) * grid);
        std::vector<float> colt(static_cast<std::size_t>(ckk) * grid);
        for (int item = 0; item < n; ++item) {  // fixed accumulation order over the batch
          const float* xin = x_data->value.data() + static_cast<std::size_t>(item) * c * h * w;
          const float* gy = g.data() + static_cast<std::size_t>(item) * cfg.out_ch * grid;
          detail::im2col(xin, c, h, w, cfg.kh, cfg.kw, cfg.sh, cfg.sw, cfg.ph, cfg.pw, oh, ow,
                         col.data());
          detail::transpose(ckk, static_cast<int>(grid), col.data(), colt.data());
          detail::gemm_nn(cfg.out_ch, static_cast<int>(grid), ckk, gy, colt.data(), gw.data());
        }
      }
      if (ib >= 0) {
        auto& gb = t.adjoint(ib);
        for (int item = 0; item < n; ++item) {
          const float* gy = g.data() + static_cast<std::size_t>(item) * cfg.out_ch * grid;
          for (int oc = 0; oc < cfg.out_ch; ++oc) {
            const float* plane = gy + static_cast<std::size_t>(oc) * grid;
            float acc = 0.0f;
            for (std::size_t i = 0; i < grid; ++i) acc += plane[i];
            gb[oc] += acc;
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// transposed conv2d (adjoint of conv2d with the same hyperparameters)

inline Tensor conv_transpose2d_forward(const ConvTranspose2d& layer, const Tensor& x) {
  detail::check_image_input(x, layer.in_ch, "conv_transpose2d");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int oh = detail::conv_transpose_out_dim(h, layer.kh, layer.sh, layer.ph);
  const int ow = detail::conv_transpose_out_dim(w, layer.kw, layer.sw, layer.pw);
  require(oh >= 1 && ow >= 1, ErrorKind::OutputTooSmall,
          "conv_transpose2d output would be " + std::to_string(oh) + "x" + std::to_string(ow));
  const int ockk = layer.out_ch * layer.kh * layer.kw;
  const std::size_t grid = static_cast<std::size_t>(h) * w;  // input positions drive the scatter
  const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;

  Tensor out({n, layer.out_ch, oh, ow});
  const ConvTranspose2d cfg = layer;
  auto wt = detail::transposed(c, ockk, layer.weight.raw());  // [out_ch*kh*kw, in_ch]
  auto forward_one = [&, cfg](std::int64_t item) {
    std::vector<float> col(static_cast<std::size_t>(ockk) * grid, 0.0f);
    const float* xin = x.raw() + static_cast<std::size_t>(item) * c * grid;
    float* yout = out.raw() + static_cast<std::size_t>(item) * cfg.out_ch * out_plane;
    detail::gemm_nn(ockk, c, static_cast<int>(grid), wt.data(), xin, col.data());
    detail::col2im(col.data(), cfg.out_ch, oh, ow, cfg.kh, cfg.kw, cfg.sh, cfg.sw, cfg.ph, cfg.pw,
                   h, w, yout);
    if (cfg.has_bias) {
      for (int oc = 0; oc < cfg.out_ch; ++oc) {
        float b = cfg.bias.raw()[oc];
        float* plane = yout + static_cast<std::size_t>(oc) * out_plane;
        for (std::size_t i = 0; i < out_plane; ++i) plane[i] += b;
      }
    }
  };
  parallel_for(0, n, forward_one);

  bool needs_grad = x.requires_grad() || layer.weight.requires_grad() ||
                    (layer.has_bias && layer.bias.requires_grad());
  out.set_requires_grad(needs_grad);
  Tape* tape = active_tape();
  if (tape && needs_grad) {
    int ix = tape->node_for(x);
    int iw = tape->node_for(layer.weight);
    int ib = layer.has_bias ? tape->node_for(layer.bias) : -1;
    auto x_data = x.storage();
    auto w_data = layer.weight.storage();
    tape->record(out, [=](Tape& t, int self) {
      const auto& g = t.adjoint(self);
      if (ix >= 0) {  // dx = conv(g) with the shared weight
        auto& gx = t.adjoint(ix);
        parallel_for(0, n, [&](std::int64_t item) {
          std::vector<float> colg(static_cast<std::size_t>(ockk) * grid);
          const float* gy = g.data() + static_cast<std::size_t>(item) * cfg.out_ch * out_plane;
          detail::im2col(gy, cfg.out_ch, oh, ow, cfg.kh, cfg.kw, cfg.sh, cfg.sw, cfg.ph, cfg.pw, h,
                         w, colg.data());
          detail::gemm_nn(c, ockk, static_cast<int>(grid), w_data->value.data(), colg.data(),
                          gx.data() + static_cast<std::size_t>(item) * c * grid);
        });
      }
      if (iw >= 0) {
        auto& gw = t.adjoint(iw);
        std::vector<float> colg(static_cast<std::size_t>(ockk) * grid);
        std::vector<float> colgt(static_cast<std::size_t>(ockk) * grid);
        for (int item = 0; item < n; ++item) {
          const float* xin = x_data->value.data() + static_cast<std::size_t>(item) * c * grid;
          const float* gy = g.data() + static_cast<std::size_t>(item) * cfg.out_ch * out_plane;
          detail::im2col(gy, cfg.out_ch, oh, ow, cfg.kh, cfg.kw, cfg.sh, cfg.sw, cfg.ph, cfg.pw, h,
                         w, colg.data());
          detail::transpose(ockk, static_cast<int>(grid), colg.data(), colgt.data());
          detail::gemm_nn(c, static_cast<int>(grid), ockk, xin, colgt.data(), gw.data());
        }
      }
      if (ib >= 0) {
        auto& gb = t.adjoint(ib);
        for (int item = 0; item < n; ++item) {
          const float* gy = g.data() + static_cast<std::size_t>(item) * cfg.out_ch * out_plane;
          for (int oc = 0; oc < cfg.out_ch; ++oc) {
            const float* plane = gy + static_cast<std::size_t>(oc) * out_plane;
            float acc = 0.0f;
            for (std::size_t i = 0; i < out_plane; ++i) acc += plane[i];
            gb[oc] += acc;
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// batch normalization

inline Tensor batchnorm_forward(BatchNorm2d& layer, const Tensor& x, BatchNormMode mode) {
  detail::check_image_input(x, layer.channels, "batchnorm");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t per_channel = static_cast<std::size_t>(n) * plane;
  const bool train = mode == BatchNormMode::Train;
  require(!train || per_channel >= 2, ErrorKind::SingleElementBatch,
          "batchnorm train mode needs at least 2 values per channel");

  std::vector<float> mu(c), inv_std(c);
  if (train) {
    for (int ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      for (int item = 0; item < n; ++item) {
        const float* p = x.raw() + (static_cast<std::size_t>(item) * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      }
      float m = static_cast<float>(acc / static_cast<double>(per_channel));
      double var_acc = 0.0;
      for (int item = 0; item < n; ++item) {
        const float* p = x.raw() + (static_cast<std::size_t>(item) * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          double d = static_cast<double>(p[i]) - m;
          var_acc += d * d;
        }
      }
      float var = static_cast<float>(var_acc / static_cast<double>(per_channel));
      mu[ch] = m;
      inv_std[ch] = 1.0f / std::sqrt(var + layer.eps);
      // running stats: exponential average, unbiased variance
      float unbiased = per_channel > 1
                           ? var * static_cast<float>(per_channel) / static_cast<float>(per_channel - 1)
                           : var;
      layer.running_mean.values()[ch] =
          (1.0f - layer.momentum) * layer.running_mean.values()[ch] + layer.momentum * m;
      layer.running_var.values()[ch] =
          (1.0f - layer.momentum) * layer.running_var.values()[ch] + layer.momentum * unbiased;
    }
  } else {
    for (int ch = 0; ch < c; ++ch) {
      mu[ch] = layer.running_mean.values()[ch];
      inv_std[ch] = 1.0f / std::sqrt(layer.running_var.values()[ch] + layer.eps);
    }
  }

  Tensor out(x.shape());
  auto xhat = std::make_shared<std::vector<float>>(x.numel());
  const float* gv = layer.gamma.raw();
  const float* bv = layer.beta.raw();
  for (int item = 0; item < n; ++item) {
    for (int ch = 0; ch < c; ++ch) {
      const float* p = x.raw() + (static_cast<std::size_t>(item) * c + ch) * plane;
      float* q = out.raw() + (static_cast<std::size_t>(item) * c + ch) * plane;
      float* xh = xhat->data() + (static_cast<std::size_t>(item) * c + ch) * plane;
      float m = mu[ch], is = inv_std[ch], ga = gv[ch], be = bv[ch];
      for (std::size_t i = 0; i < plane; ++i) {
        float v = (p[i] - m) * is;
        xh[i] = v;
        q[i] = ga * v + be;
      }
    }
  }

  bool needs_grad = x.requires_grad() || layer.gamma.requires_grad() || layer.beta.requires_grad();
  out.set_requires_grad(needs_grad);
  Tape* tape = active_tape();
  if (tape && needs_grad) {
    int ix = tape->node_for(x);
    int ig = tape->node_for(layer.gamma);
    int ib = tape->node_for(layer.beta);
    auto gamma_data = layer.gamma.storage();
    tape->record(out, [=](Tape& t, int self) {
      const auto& g = t.adjoint(self);
      std::vector<float> dgamma(c, 0.0f), dbeta(c, 0.0f);
      for (int item = 0; item < n; ++item) {
        for (int ch = 0; ch < c; ++ch) {
          const float* gp = g.data() + (static_cast<std::size_t>(item) * c + ch) * plane;
          const float* xh = xhat->data() + (static_cast<std::size_t>(item) * c + ch) * plane;
          float dg = 0.0f, db = 0.0f;
          for (std::size_t i = 0; i < plane; ++i) {
            dg += gp[i] * xh[i];
            db += gp[i];
          }
          dgamma[ch] += dg;
          dbeta[ch] += db;
        }
      }
      if (ig >= 0) {
        auto& gg = t.adjoint(ig);
        for (int ch = 0; ch < c; ++ch) gg[ch] += dgamma[ch];
      }
      if (ib >= 0) {
        auto& gb = t.adjoint(ib);
        for (int ch = 0; ch < c; ++ch) gb[ch] += dbeta[ch];
      }
      if (ix >= 0) {
        auto& gx = t.adjoint(ix);
        float inv_m = 1.0f / static_cast<float>(per_channel);
        for (int item = 0; item < n; ++item) {
          for (int ch = 0; ch < c; ++ch) {
            const float* gp = g.data() + (static_cast<std::size_t>(item) * c + ch) * plane;
            const float* xh = xhat->data() + (static_cast<std::size_t>(item) * c + ch) * plane;
            float* gxp = gx.data() + (static_cast<std::size_t>(item) * c + ch) * plane;
            float scale = gamma_data->value[ch] * inv_std[ch];
            if (train) {
              float mean_db = dbeta[ch] * inv_m;
              float mean_dg = dgamma[ch] * inv_m;
              for (std::size_t i = 0; i < plane; ++i)
                gxp[i] += scale * (gp[i] - mean_db - xh[i] * mean_dg);
            } else {
              for (std::size_t i = 0; i < plane; ++i) gxp[i] += scale * gp[i];
            }
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// activations

enum class ActKind { Relu, LeakyRelu, Tanh, Sigmoid };

// Subgradient at 0 is the negative-side slope: 0 for relu, alpha for leaky.
inline Tensor activation(ActKind kind, const Tensor& x, float alpha = 0.2f) {
  Tensor out(x.shape());
  const float* xv = x.raw();
  float* ov = out.raw();
  const std::size_t count = x.numel();
  switch (kind) {
    case ActKind::Relu:
      for (std::size_t i = 0; i < count; ++i) ov[i] = xv[i] > 0.0f ? xv[i] : 0.0f;
      break;
    case ActKind::LeakyRelu:
      for (std::size_t i = 0; i < count; ++i) ov[i] = xv[i] > 0.0f ? xv[i] : alpha * xv[i];
      break;
    case ActKind::Tanh:
      for (std::size_t i = 0; i < count; ++i) ov[i] = std::tanh(xv[i]);
      break;
    case ActKind::Sigmoid:
      for (std::size_t i = 0; i < count; ++i) ov[i] = 1.0f / (1.0f + std::exp(-xv[i]));
      break;
  }

  out.set_requires_grad(x.requires_grad());
  Tape* tape = active_tape();
  if (tape && x.requires_grad()) {
    int ix = tape->node_for(x);
    auto x_data = x.storage();
    auto o_data = out.storage();
    tape->record(out, [=](Tape& t, int self) {
      const auto& g = t.adjoint(self);
      auto& gx = t.adjoint(ix);
      const auto& xin = x_data->value;
      const auto& y = o_data->value;
      switch (kind) {
        case ActKind::Relu:
          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += xin[i] > 0.0f ? g[i] : 0.0f;
          break;
        case ActKind::LeakyRelu:
          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += xin[i] > 0.0f ? g[i] : alpha * g[i];
          break;
        case ActKind::Tanh:
          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0f - y[i] * y[i]);
          break;
        case ActKind::Sigmoid:
          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0f - y[i]);
          break;
      }
    });
  }
  return out;
}

inline Tensor relu(const Tensor& x) { return activation(ActKind::Relu, x); }
inline Tensor leaky_relu(const Tensor& x, float alpha = 0.2f) {
  return activation(ActKind::LeakyRelu, x, alpha);
}
inline Tensor tanh_act(const Tensor& x) { return activation(ActKind::Tanh, x); }
inline Tensor sigmoid(const Tensor& x) { return activation(ActKind::Sigmoid, x); }

// ---------------------------------------------------------------------------
// max pooling

inline Tensor maxpool2d(const Tensor& x, int k, int s) {
  require(x.rank() == 4, ErrorKind::ShapeMismatch,
          "maxpool2d expects NCHW input, got " + detail::shape_str(x.shape()));
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int oh = detail::conv_out_dim(h, k, s, 0);
  const int ow = detail::conv_out_dim(w, k, s, 0);
  require(oh >= 1 && ow >= 1, ErrorKind::OutputTooSmall,
          "maxpool2d output would be " + std::to_string(oh) + "x" + std::to_string(ow));

  Tensor out({n, c, oh, ow});
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(out.numel());
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
  for (int item = 0; item < n; ++item) {
    for (int ch = 0; ch < c; ++ch) {
      const float* p = x.raw() + (static_cast<std::size_t>(item) * c + ch) * plane;
      float* q = out.raw() + (static_cast<std::size_t>(item) * c + ch) * out_plane;
      std::uint32_t* am = argmax->data() + (static_cast<std::size_t>(item) * c + ch) * out_plane;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          // strict > keeps the first maximal element per window
          float best = p[static_cast<std::size_t>(oy * s) * w + ox * s];
          std::uint32_t best_idx = static_cast<std::uint32_t>(oy * s * w + ox * s);
          for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) {
              std::uint32_t idx = static_cast<std::uint32_t>((oy * s + i) * w + ox * s + j);
              float v = p[idx];
              if (v > best) {
                best = v;
                best_idx = idx;
              }
            }
          }
          q[static_cast<std::size_t>(oy) * ow + ox] = best;
          am[static_cast<std::size_t>(oy) * ow + ox] = best_idx;
        }
      }
    }
  }

  out.set_requires_grad(x.requires_grad());
  Tape* tape = active_tape();
  if (tape && x.requires_grad()) {
    int ix = tape->node_for(x);
    tape->record(out, [=](Tape& t, int self) {
      const auto& g = t.adjoint(self);
      auto& gx = t.adjoint(ix);
      for (int item = 0; item < n; ++item) {
        for (int ch = 0; ch < c; ++ch) {
          std::size_t off = (static_cast<std::size_t>(item) * c + ch);
          const float* gp = g.data() + off * out_plane;
          const std::uint32_t* am = argmax->data() + off * out_plane;
          float* gxp = gx.data() + off * plane;
          for (std::size_t i = 0; i < out_plane; ++i) gxp[am[i]] += gp[i];
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// dense

inline Tensor dense_forward(const Dense& layer, const Tensor& x) {
  require(x.rank() == 2, ErrorKind::ShapeMismatch,
          "dense expects [N,in] input, got " + detail::shape_str(x.shape()));
  require(x.dim(1) == layer.in_features, ErrorKind::ShapeMismatch,
          "dense expects " + std::to_string(layer.in_features) + " input features, got " +
              std::to_string(x.dim(1)));
  const int n = x.dim(0), in = layer.in_features, out_f = layer.out_features;

  Tensor out({n, out_f});
  auto wt = detail::transposed(out_f, in, layer.weight.raw());  // [in, out]
  detail::gemm_nn(n, in, out_f, x.raw(), wt.data(), out.raw());
  for (int row = 0; row < n; ++row) {
    float* q = out.raw() + static_cast<std::size_t>(row) * out_f;
    for (int j = 0; j < out_f; ++j) q[j] += layer.bias.raw()[j];
  }

  bool needs_grad =
      x.requires_grad() || layer.weight.requires_grad() || layer.bias.requires_grad();
  out.set_requires_grad(needs_grad);
  Tape* tape = active_tape();
  if (tape && needs_grad) {
    int ix = tape->node_for(x);
    int iw = tape->node_for(layer.weight);
    int ib = tape->node_for(layer.bias);
    auto x_data = x.storage();
    auto w_data = layer.weight.storage();
    tape->record(out, [=](Tape& t, int self) {
      const auto& g = t.adjoint(self);
      if (ix >= 0) {  // dx = g . W
        detail::gemm_nn(n, out_f, in, g.data(), w_data->value.data(), t.adjoint(ix).data());
      }
      if (iw >= 0) {  // dW = g^T . x
        auto gt = detail::transposed(n, out_f, g.data());
        detail::gemm_nn(out_f, n, in, gt.data(), x_data->value.data(), t.adjoint(iw).data());
      }
      if (ib >= 0) {
        auto& gb = t.adjoint(ib);
        for (int row = 0; row < n; ++row) {
          const float* gp = g.data() + static_cast<std::size_t>(row) * out_f;
          for (int j = 0; j < out_f; ++j) gb[j] += gp[j];
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// softmax

inline Tensor softmax(const Tensor& x) {
  require(x.rank() == 2, ErrorKind::ShapeMismatch,
          "softmax expects [N,K] logits, got " + detail::shape_str(x.shape()));
  require(x.dim(1) >= 2, ErrorKind::InvalidShape, "softmax needs at least 2 classes");
  const int n = x.dim(0), k = x.dim(1);

  Tensor out({n, k});
  for (int row = 0; row < n; ++row) {
    const float* p = x.raw() + static_cast<std::size_t>(row) * k;
    float* q = out.raw() + static_cast<std::size_t>(row) * k;
    float mx = p[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, p[j]);
    float total = 0.0f;
    for (int j = 0; j < k; ++j) {
      q[j] = std::exp(p[j] - mx);
      total += q[j];
    }
    float inv = 1.0f / total;
    for (int j = 0; j < k; ++j) q[j] *= inv;
  }

  out.set_requires_grad(x.requires_grad());
  Tape* tape = active_tape();
  if (tape && x.requires_grad()) {
    int ix = tape->node_for(x);
    auto o_data = out.storage();
    tape->record(out, [=](Tape& t, int self) {
      const auto& g = t.adjoint(self);
      auto& gx = t.adjoint(ix);
      for (int row = 0; row < n; ++row) {
        const float* y = o_data->value.data() + static_cast<std::size_t>(row) * k;
        const float* gp = g.data() + static_cast<std::size_t>(row) * k;
        float dot = 0.0f;
        for (int j = 0; j < k; ++j) dot += gp[j] * y[j];
        float* gxp = gx.data() + static_cast<std::size_t>(row) * k;
        for (int j = 0; j < k; ++j) gxp[j] += (gp[j] - dot) * y[j];
      }
    });
  }
  return out;
}

}  // namespace ganaug
