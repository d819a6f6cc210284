#pragma once

#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ganaug/nn.hpp"

namespace ganaug {

enum class LayerKind {
  Conv2d,
  ConvTranspose2d,
  BatchNorm2d,
  Dense,
  Relu,
  LeakyRelu,
  Tanh,
  Sigmoid,
  MaxPool2d,
  Flatten,
};

// Declarative layer descriptor; in-channels / in-features are inferred from
// the preceding layer when the network is built.
struct LayerSpec {
  LayerKind kind = LayerKind::Flatten;
  int out = 0;  // conv/conv_transpose out channels, dense out features
  int kernel = 0;
  int stride = 1;
  int pad = 0;
  bool bias = true;
  float alpha = 0.2f;      // leaky relu slope
  float momentum = 0.1f;   // batchnorm
  float eps = 1e-5f;       // batchnorm

  static LayerSpec conv2d(int out, int k, int s, int p, bool bias = true) {
    LayerSpec l;
    l.kind = LayerKind::Conv2d;
    l.out = out;
    l.kernel = k;
    l.stride = s;
    l.pad = p;
    l.bias = bias;
    return l;
  }
  static LayerSpec conv_transpose2d(int out, int k, int s, int p, bool bias = true) {
    LayerSpec l = conv2d(out, k, s, p, bias);
    l.kind = LayerKind::ConvTranspose2d;
    return l;
  }
  static LayerSpec batchnorm2d(float momentum = 0.1f, float eps = 1e-5f) {
    LayerSpec l;
    l.kind = LayerKind::BatchNorm2d;
    l.momentum = momentum;
    l.eps = eps;
    return l;
  }
  static LayerSpec dense(int out) {
    LayerSpec l;
    l.kind = LayerKind::Dense;
    l.out = out;
    return l;
  }
  static LayerSpec relu() {
    LayerSpec l;
    l.kind = LayerKind::Relu;
    return l;
  }
  static LayerSpec leaky_relu(float alpha) {
    LayerSpec l;
    l.kind = LayerKind::LeakyRelu;
    l.alpha = alpha;
    return l;
  }
  static LayerSpec tanh() {
    LayerSpec l;
    l.kind = LayerKind::Tanh;
    return l;
  }
  static LayerSpec sigmoid() {
    LayerSpec l;
    l.kind = LayerKind::Sigmoid;
    return l;
  }
  static LayerSpec maxpool2d(int k, int s) {
    LayerSpec l;
    l.kind = LayerKind::MaxPool2d;
    l.kernel = k;
    l.stride = s;
    return l;
  }
  static LayerSpec flatten() {
    LayerSpec l;
    l.kind = LayerKind::Flatten;
    return l;
  }
};

// A layer stack plus its per-sample input shape ([C,H,W] or [features]).
struct NetworkSpec {
  std::vector<int> input_shape;
  std::vector<LayerSpec> layers;
};

namespace detail {

struct ActLayer {
  ActKind kind;
  float alpha;
};
struct PoolLayer {
  int k, s;
};
struct FlattenLayer {};

using LayerState =
    std::variant<Conv2d, ConvTranspose2d, BatchNorm2d, Dense, ActLayer, PoolLayer, FlattenLayer>;

// Per-sample output shape of one layer; throws on any incompatibility.
inline std::vector<int> layer_out_shape(const LayerSpec& l, const std::vector<int>& in) {
  auto need_image = [&](const char* who) {
    require(in.size() == 3, ErrorKind::ShapeMismatch,
            std::string(who) + " requires [C,H,W] input, got " + shape_str(in));
  };
  switch (l.kind) {
    case LayerKind::Conv2d: {
      need_image("conv2d");
      int oh = conv_out_dim(in[1], l.kernel, l.stride, l.pad);
      int ow = conv_out_dim(in[2], l.kernel, l.stride, l.pad);
      require(oh >= 1 && ow >= 1, ErrorKind::OutputTooSmall, "conv2d output collapses");
      return {l.out, oh, ow};
    }
    case LayerKind::ConvTranspose2d: {
      need_image("conv_transpose2d");
      int oh = conv_transpose_out_dim(in[1], l.kernel, l.stride, l.pad);
      int ow = conv_transpose_out_dim(in[2], l.kernel, l.stride, l.pad);
      require(oh >= 1 && ow >= 1, ErrorKind::OutputTooSmall, "conv_transpose2d output collapses");
      return {l.out, oh, ow};
    }
    case LayerKind::BatchNorm2d:
      need_image("batchnorm2d");
      return in;
    case LayerKind::Dense:
      require(in.size() == 1, ErrorKind::ShapeMismatch,
              "dense requires flattened input, got " + shape_str(in));
      return {l.out};
    case LayerKind::MaxPool2d: {
      need_image("maxpool2d");
      int oh = conv_out_dim(in[1], l.kernel, l.stride, 0);
      int ow = conv_out_dim(in[2], l.kernel, l.stride, 0);
      require(oh >= 1 && ow >= 1, ErrorKind::OutputTooSmall, "maxpool2d output collapses");
      return {in[0], oh, ow};
    }
    case LayerKind::Flatten: {
      int total = 1;
      for (int d : in) total *= d;
      return {total};
    }
    default:
      return in;  // activations
  }
}

}  // namespace detail

// Materialized network: the spec plus allocated parameter/state tensors.
class Network {
 public:
  Network() = default;

  const NetworkSpec& spec() const { return spec_; }
  std::size_t num_layers() const { return layers_.size(); }

  // Per-sample shape after layer i (shape(0) = input shape).
  const std::vector<int>& shape_at(std::size_t i) const { return shapes_.at(i); }
  const std::vector<int>& output_shape() const { return shapes_.back(); }

  Tensor forward(const Tensor& x, BatchNormMode mode = BatchNormMode::Eval) {
    require(x.rank() == spec_.input_shape.size() + 1, ErrorKind::ShapeMismatch,
            "input rank mismatch: expected batched " + detail::shape_str(spec_.input_shape));
    for (std::size_t i = 0; i < spec_.input_shape.size(); ++i)
      require(x.dim(i + 1) == spec_.input_shape[i], ErrorKind::ShapeMismatch,
              "input shape mismatch: expected " + detail::shape_str(spec_.input_shape));
    Tensor cur = x;
    for (auto& layer : layers_) {
      cur = std::visit(
          [&](auto& l) -> Tensor {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, Conv2d>) {
              return conv2d_forward(l, cur);
            } else if constexpr (std::is_same_v<T, ConvTranspose2d>) {
              return conv_transpose2d_forward(l, cur);
            } else if constexpr (std::is_same_v<T, BatchNorm2d>) {
              return batchnorm_forward(l, cur, mode);
            } else if constexpr (std::is_same_v<T, Dense>) {
              return dense_forward(l, cur);
            } else if constexpr (std::is_same_v<T, detail::ActLayer>) {
              return activation(l.kind, cur, l.alpha);
            } else if constexpr (std::is_same_v<T, detail::PoolLayer>) {
              return maxpool2d(cur, l.k, l.s);
            } else {
              std::size_t flat = cur.numel() / static_cast<std::size_t>(cur.dim(0));
              return cur.reshape({cur.dim(0), static_cast<int>(flat)});
            }
          },
          layer);
    }
    return cur;
  }

  // Learnable parameters in layer order.
  std::vector<Tensor> parameters() {
    std::vector<Tensor> params;
    for (auto& layer : layers_) {
      std::visit(
          [&](auto& l) {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, Conv2d> || std::is_same_v<T, ConvTranspose2d>) {
              params.push_back(l.weight);
              if (l.has_bias) params.push_back(l.bias);
            } else if constexpr (std::is_same_v<T, BatchNorm2d>) {
              params.push_back(l.gamma);
              params.push_back(l.beta);
            } else if constexpr (std::is_same_v<T, Dense>) {
              params.push_back(l.weight);
              params.push_back(l.bias);
            }
          },
          layer);
    }
    return params;
  }

  // Parameters plus batchnorm running statistics, stable names.
  std::vector<std::pair<std::string, Tensor>> named_tensors() {
    std::vector<std::pair<std::string, Tensor>> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      std::string prefix = "layer" + std::to_string(i) + ".";
      std::visit(
          [&](auto& l) {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, Conv2d> || std::is_same_v<T, ConvTranspose2d> ||
                          std::is_same_v<T, Dense>) {
              out.emplace_back(prefix + "weight", l.weight);
              if constexpr (std::is_same_v<T, Dense>) {
                out.emplace_back(prefix + "bias", l.bias);
              } else {
                if (l.has_bias) out.emplace_back(prefix + "bias", l.bias);
              }
            } else if constexpr (std::is_same_v<T, BatchNorm2d>) {
              out.emplace_back(prefix + "gamma", l.gamma);
              out.emplace_back(prefix + "beta", l.beta);
              out.emplace_back(prefix + "running_mean", l.running_mean);
              out.emplace_back(prefix + "running_var", l.running_var);
            }
          },
          layers_[i]);
    }
    return out;
  }

  std::size_t parameter_count() {
    std::size_t total = 0;
    for (auto& p : parameters()) total += p.numel();
    return total;
  }

  std::size_t count_kind(LayerKind kind) const {
    std::size_t total = 0;
    for (const auto& l : spec_.layers)
      if (l.kind == kind) ++total;
    return total;
  }

  // Layers carrying learnable parameters (convs and dense; batchnorm is
  // normalization, not counted in the classic "16 learnable layers").
  std::size_t learnable_layer_count() const {
    std::size_t total = 0;
    for (const auto& l : spec_.layers)
      if (l.kind == LayerKind::Conv2d || l.kind == LayerKind::ConvTranspose2d ||
          l.kind == LayerKind::Dense)
        ++total;
    return total;
  }

  void zero_grad() {
    for (auto& p : parameters()) p.zero_grad();
  }

  detail::LayerState& layer_state(std::size_t i) { return layers_.at(i); }

  friend Network build_network(const NetworkSpec& spec);

 private:
  NetworkSpec spec_;
  std::vector<detail::LayerState> layers_;
  std::vector<std::vector<int>> shapes_;  // shapes_[0] = input, shapes_[i+1] = after layer i
};

// Validates the whole shape chain first, then allocates parameters.
inline Network build_network(const NetworkSpec& spec) {
  require(!spec.input_shape.empty(), ErrorKind::InvalidConfig, "network needs an input shape");
  for (int d : spec.input_shape)
    require(d >= 1, ErrorKind::InvalidConfig, "input dimensions must be >= 1");

  std::vector<std::vector<int>> shapes;
  shapes.push_back(spec.input_shape);
  for (const auto& l : spec.layers) shapes.push_back(detail::layer_out_shape(l, shapes.back()));

  Network net;
  net.spec_ = spec;
  net.shapes_ = std::move(shapes);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const std::vector<int>& in = net.shapes_[i];
    switch (l.kind) {
      case LayerKind::Conv2d:
        net.layers_.push_back(Conv2d::make(in[0], l.out, l.kernel, l.stride, l.pad, l.bias));
        break;
      case LayerKind::ConvTranspose2d:
        net.layers_.push_back(
            ConvTranspose2d::make(in[0], l.out, l.kernel, l.stride, l.pad, l.bias));
        break;
      case LayerKind::BatchNorm2d:
        net.layers_.push_back(BatchNorm2d::make(in[0], l.momentum, l.eps));
        break;
      case LayerKind::Dense:
        net.layers_.push_back(Dense::make(in[0], l.out));
        break;
      case LayerKind::Relu:
        net.layers_.push_back(detail::ActLayer{ActKind::Relu, 0.0f});
        break;
      case LayerKind::LeakyRelu:
        net.layers_.push_back(detail::ActLayer{ActKind::LeakyRelu, l.alpha});
        break;
      case LayerKind::Tanh:
        net.layers_.push_back(detail::ActLayer{ActKind::Tanh, 0.0f});
        break;
      case LayerKind::Sigmoid:
        net.layers_.push_back(detail::ActLayer{ActKind::Sigmoid, 0.0f});
        break;
      case LayerKind::MaxPool2d:
        net.layers_.push_back(detail::PoolLayer{l.kernel, l.stride});
        break;
      case LayerKind::Flatten:
        net.layers_.push_back(detail::FlattenLayer{});
        break;
    }
  }
  return net;
}

// ---------------------------------------------------------------------------
// initialization

enum class InitScheme {
  GanNormal,  // N(0, 0.02) on conv/dense weights
  HeNormal,   // N(0, sqrt(2/fan_in))
};

inline void init_params(Network& net, Rng& rng, InitScheme scheme) {
  auto fill_normal = [&rng](Tensor& t, float mean, float stdev) {
    rng.fill_normal(t.raw(), t.numel());
    for (auto& v : t.values()) v = mean + stdev * v;
  };
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    std::visit(
        [&](auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, Conv2d> || std::is_same_v<T, ConvTranspose2d>) {
            int fan_in = l.in_ch * l.kh * l.kw;
            float stdev = scheme == InitScheme::GanNormal
                              ? 0.02f
                              : std::sqrt(2.0f / static_cast<float>(fan_in));
            fill_normal(l.weight, 0.0f, stdev);
            if (l.has_bias) std::fill(l.bias.values().begin(), l.bias.values().end(), 0.0f);
          } else if constexpr (std::is_same_v<T, Dense>) {
            float stdev = scheme == InitScheme::GanNormal
                              ? 0.02f
                              : std::sqrt(2.0f / static_cast<float>(l.in_features));
            fill_normal(l.weight, 0.0f, stdev);
            std::fill(l.bias.values().begin(), l.bias.values().end(), 0.0f);
          } else if constexpr (std::is_same_v<T, BatchNorm2d>) {
            fill_normal(l.gamma, 1.0f, 0.02f);
            std::fill(l.beta.values().begin(), l.beta.values().end(), 0.0f);
          }
        },
        net.layer_state(i));
  }
}

// ---------------------------------------------------------------------------
// spec <-> float table (embedded in checkpoints so a network can be rebuilt
// from the file alone)

inline std::vector<float> encode_spec(const NetworkSpec& spec) {
  std::vector<float> out;
  out.push_back(static_cast<float>(spec.input_shape.size()));
  for (int d : spec.input_shape) out.push_back(static_cast<float>(d));
  out.push_back(static_cast<float>(spec.layers.size()));
  for (const auto& l : spec.layers) {
    out.push_back(static_cast<float>(static_cast<int>(l.kind)));
    out.push_back(static_cast<float>(l.out));
    out.push_back(static_cast<float>(l.kernel));
    out.push_back(static_cast<float>(l.stride));
    out.push_back(static_cast<float>(l.pad));
    out.push_back(l.bias ? 1.0f : 0.0f);
    out.push_back(l.alpha);
    out.push_back(l.momentum);
    out.push_back(l.eps);
  }
  return out;
}

inline NetworkSpec decode_spec(const std::vector<float>& data) {
  std::size_t pos = 0;
  auto next = [&]() -> float {
    require(pos < data.size(), ErrorKind::CorruptFile, "network table truncated");
    return data[pos++];
  };
  NetworkSpec spec;
  int rank = static_cast<int>(next());
  require(rank >= 1 && rank <= 4, ErrorKind::CorruptFile, "bad input rank in network table");
  for (int i = 0; i < rank; ++i) spec.input_shape.push_back(static_cast<int>(next()));
  int layers = static_cast<int>(next());
  require(layers >= 0, ErrorKind::CorruptFile, "bad layer count in network table");
  for (int i = 0; i < layers; ++i) {
    LayerSpec l;
    int kind = static_cast<int>(next());
    require(kind >= 0 && kind <= static_cast<int>(LayerKind::Flatten), ErrorKind::CorruptFile,
            "bad layer kind in network table");
    l.kind = static_cast<LayerKind>(kind);
    l.out = static_cast<int>(next());
    l.kernel = static_cast<int>(next());
    l.stride = static_cast<int>(next());
    l.pad = static_cast<int>(next());
    l.bias = next() != 0.0f;
    l.alpha = next();
    l.momentum = next();
    l.eps = next();
    spec.layers.push_back(l);
  }
  return spec;
}

}  // namespace ganaug
