#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "ganaug/detail/gemm.hpp"
#include "ganaug/error.hpp"
#include "ganaug/rng.hpp"

namespace ganaug {

class Tape;

namespace detail {

inline std::size_t checked_numel(const std::vector<int>& shape) {
  require(!shape.empty(), ErrorKind::InvalidShape, "shape must be non-empty");
  std::size_t n = 1;
  for (int d : shape) {
    require(d >= 1, ErrorKind::InvalidShape, "dimension sizes must be >= 1");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

inline std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

struct TensorData {
  std::vector<float> value;
  std::vector<float> grad;  // sized lazily; empty means all-zero
  bool requires_grad = false;
  // registration on the most recent tape this tensor participated in
  std::uint64_t tape_uid = 0;
  int node_id = -1;
};

}  // namespace detail

// Dense row-major float32 n-d array. Handles share storage, so reshapes are
// views and parameter tensors keep their gradient buffer across iterations.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape, bool requires_grad = false)
      : shape_(std::move(shape)), data_(std::make_shared<detail::TensorData>()) {
    data_->value.assign(detail::checked_numel(shape_), 0.0f);
    data_->requires_grad = requires_grad;
  }

  Tensor(std::vector<int> shape, std::vector<float> values, bool requires_grad = false)
      : shape_(std::move(shape)), data_(std::make_shared<detail::TensorData>()) {
    std::size_t n = detail::checked_numel(shape_);
    require(values.size() == n, ErrorKind::InvalidShape,
            "value count " + std::to_string(values.size()) + " does not match shape " +

                detail::shape_str(shape_));
    data_->value = std::move(values);
    data_->requires_grad = requires_grad;
  }

  static Tensor full(const std::vector<int>& shape, float v) {
    Tensor t(shape);
    std::fill(t.values().begin(), t.values().end(), v);
    return t;
  }
  static Tensor zeros(const std::vector<int>& shape) { return Tensor(shape); }
  static Tensor ones(const std::vector<int>& shape) { return full(shape, 1.0f); }
  static Tensor scalar(float v) { return Tensor({1}, std::vector<float>{v}); }

  bool defined() const { return data_ != nullptr; }
  const std::vector<int>& shape() const { return shape_; }
  int dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return data_ ? data_->value.size() : 0; }

  std::vector<float>& values() { return data_->value; }
  const std::vector<float>& values() const { return data_->value; }
  float* raw() { return data_->value.data(); }
  const float* raw() const { return data_->value.data(); }

  bool requires_grad() const { return data_ && data_->requires_grad; }
  Tensor& set_requires_grad(bool v) {
    data_->requires_grad = v;
    return *this;
  }

  // Gradient buffer; empty until a backward pass has deposited into it.
  const std::vector<float>& grad() const { return data_->grad; }
  std::vector<float>& grad_buffer() {
    if (data_->grad.size() != data_->value.size()) data_->grad.assign(data_->value.size(), 0.0f);
    return data_->grad;
  }
  void zero_grad() {
    if (data_) data_->grad.assign(data_->value.size(), 0.0f);
  }

  float item() const {
    require(numel() == 1, ErrorKind::InvalidShape, "item() requires a single-element tensor");
    return data_->value[0];
  }

  // View with the same storage (and tape identity).
  Tensor reshape(std::vector<int> new_shape) const {
    std::size_t n = detail::checked_numel(new_shape);
    require(n == numel(), ErrorKind::InvalidShape,
            "cannot reshape " + detail::shape_str(shape_) + " to " + detail::shape_str(new_shape));
    Tensor t;
    t.shape_ = std::move(new_shape);
    t.data_ = data_;
    return t;
  }

  // Deep copy with no grad, no tape identity.
  Tensor clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = std::make_shared<detail::TensorData>();
    t.data_->value = data_->value;
    t.data_->requires_grad = data_->requires_grad;
    return t;
  }

  // Same values, cut loose from autodiff.
  Tensor detach() const {
    Tensor t = clone();
    t.data_->requires_grad = false;
    return t;
  }

  std::shared_ptr<detail::TensorData> storage() const { return data_; }

 private:
  friend class Tape;
  std::vector<int> shape_;
  std::shared_ptr<detail::TensorData> data_;
};

// Record of differentiable operations. Nodes are appended in execution order,
// so every node's inputs have smaller ids; backward walks ids in strictly
// decreasing order. Adjoint buffers are fresh per backward call and only leaf
// tensors receive (accumulated) gradients.
class Tape {
 public:
  Tape() : uid_(next_uid()) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::uint64_t uid() const { return uid_; }
  std::size_t size() const { return nodes_.size(); }

  // Node id representing t on this tape; registers a leaf if unseen.
  // Returns -1 for tensors that do not require grad.
  int node_for(const Tensor& t) {
    if (!t.requires_grad()) return -1;
    auto data = t.storage();
    if (data->tape_uid == uid_ && data->node_id >= 0) return data->node_id;
    int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{t.numel(), nullptr, data});
    data->tape_uid = uid_;
    data->node_id = id;
    return id;
  }

  // Appends an op node producing `out`; fn(tape, self_id) propagates the
  // node's adjoint into its inputs' adjoints.
  void record(Tensor& out, std::function<void(Tape&, int)> fn) {
    int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{out.numel(), std::move(fn), nullptr});
    auto data = out.storage();
    data->tape_uid = uid_;
    data->node_id = id;
  }

  // Adjoint buffer for a node, allocated zero on first touch.
  std::vector<float>& adjoint(int id) {
    auto& buf = adjoints_[static_cast<std::size_t>(id)];
    if (buf.empty()) buf.assign(nodes_[static_cast<std::size_t>(id)].numel, 0.0f);
    return buf;
  }

  bool adjoint_live(int id) const { return !adjoints_[static_cast<std::size_t>(id)].empty(); }

  void backward(const Tensor& loss) {
    bool scalar = loss.numel() == 1;
    require(scalar, ErrorKind::NonScalarLoss,
            "backward requires a scalar loss, got " + detail::shape_str(loss.shape()));
    auto data = loss.storage();
    require(data->tape_uid == uid_ && data->node_id >= 0, ErrorKind::DetachedTensor,
            "loss is not recorded on this tape");
    adjoints_.assign(nodes_.size(), {});
    adjoint(data->node_id)[0] = 1.0f;
    for (int id = data->node_id; id >= 0; --id) {
      if (!adjoint_live(id)) continue;
      Node& node = nodes_[static_cast<std::size_t>(id)];
      if (node.backward) {
        node.backward(*this, id);
      } else if (node.leaf && node.leaf->requires_grad) {
        auto& g = node.leaf->grad;
        if (g.size() != node.numel) g.assign(node.numel, 0.0f);
        const auto& adj = adjoints_[static_cast<std::size_t>(id)];
        for (std::size_t i = 0; i < node.numel; ++i) g[i] += adj[i];
      }
    }
    adjoints_.clear();
  }

 private:
  struct Node {
    std::size_t numel;
    std::function<void(Tape&, int)> backward;
    std::shared_ptr<detail::TensorData> leaf;
  };

  static std::uint64_t next_uid() {
    static std::uint64_t counter = 0;
    return ++counter;
  }

  std::vector<Node> nodes_;
  std::vector<std::vector<float>> adjoints_;
  std::uint64_t uid_;
};

inline void backward(Tape& tape, const Tensor& loss) { tape.backward(loss); }

namespace detail {

inline Tape*& active_tape_slot() {
  thread_local Tape* tape = nullptr;
  return tape;
}

}  // namespace detail

inline Tape* active_tape() { return detail::active_tape_slot(); }

// RAII activation; ops record onto the active tape while one is in scope.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape) : prev_(detail::active_tape_slot()) {
    detail::active_tape_slot() = &tape;
  }
  ~TapeScope() { detail::active_tape_slot() = prev_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

// ---------------------------------------------------------------------------
// factories

inline Tensor tensor_full(const std::vector<int>& shape, float v) { return Tensor::full(shape, v); }
inline Tensor zeros_like(const Tensor& t) { return Tensor::zeros(t.shape()); }
inline Tensor ones_like(const Tensor& t) { return Tensor::ones(t.shape()); }

inline Tensor randn(const std::vector<int>& shape, Rng& rng) {
  Tensor t(shape);
  rng.fill_normal(t.raw(), t.numel());
  return t;
}

// ---------------------------------------------------------------------------
// elementwise ops with trailing-axis broadcast of the second operand

enum class EwOp { Add, Sub, Mul, Div };

namespace detail {

// Strides of b right-aligned against out's rank, zero on stretched axes.
struct BroadcastMap {
  std::vector<std::size_t> out_stride;
  std::vector<std::size_t> b_stride;
  bool same_shape;
};

inline BroadcastMap make_broadcast(const std::vector<int>& out_shape,
                                   const std::vector<int>& b_shape) {
  require(b_shape.size() <= out_shape.size(), ErrorKind::IncompatibleShapes,
          "second operand rank exceeds first: " + shape_str(b_shape) + " vs " +
              shape_str(out_shape));
  std::size_t rank = out_shape.size();
  std::size_t offset = rank - b_shape.size();
  BroadcastMap map;
  map.out_stride.assign(rank, 1);
  map.b_stride.assign(rank, 0);
  map.same_shape = b_shape == out_shape;
  std::size_t bs = 1;
  for (std::size_t i = rank; i-- > 0;) {
    int bdim = i >= offset ? b_shape[i - offset] : 1;
    require(bdim == out_shape[i] || bdim == 1, ErrorKind::IncompatibleShapes,
            "cannot broadcast " + shape_str(b_shape) + " against " + shape_str(out_shape));
    map.b_stride[i] = bdim == 1 ? 0 : bs;
    bs *= static_cast<std::size_t>(bdim);
  }
  std::size_t os = 1;
  for (std::size_t i = rank; i-- > 0;) {
    map.out_stride[i] = os;
    os *= static_cast<std::size_t>(out_shape[i]);
  }
  return map;
}

inline std::size_t b_index(const BroadcastMap& map, std::size_t flat) {
  std::size_t idx = 0;
  for (std::size_t ax = 0; ax < map.out_stride.size(); ++ax) {
    std::size_t coord = flat / map.out_stride[ax];
    flat -= coord * map.out_stride[ax];
    idx += coord * map.b_stride[ax];
  }
  return idx;
}

}  // namespace detail

inline Tensor ew_binary(EwOp op, const Tensor& a, const Tensor& b) {
  auto map = detail::make_broadcast(a.shape(), b.shape());
  Tensor out(a.shape());
  const float* av = a.raw();
  const float* bv = b.raw();
  float* ov = out.raw();
  std::size_t n = a.numel();
  auto apply = [op](float x, float y) {
    switch (op) {
      case EwOp::Add: return x + y;
      case EwOp::Sub: return x - y;
      case EwOp::Mul: return x * y;
      case EwOp::Div: return x / y;  // IEEE semantics, no special-casing
    }
    return 0.0f;
  };
  if (map.same_shape) {
    for (std::size_t i = 0; i < n; ++i) ov[i] = apply(av[i], bv[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) ov[i] = apply(av[i], bv[detail::b_index(map, i)]);
  }

  bool needs_grad = a.requires_grad() || b.requires_grad();
  out.set_requires_grad(needs_grad);
  Tape* tape = active_tape();
  if (tape && needs_grad) {
    int ia = tape->node_for(a);
    int ib = tape->node_for(b);
    auto a_data = a.storage();
    auto b_data = b.storage();
    tape->record(out, [op, map, ia, ib, a_data, b_data](Tape& t, int self) {
      const auto& g = t.adjoint(self);
      std::size_t n = g.size();
      if (ia >= 0) {
        auto& ga = t.adjoint(ia);
        switch (op) {
          case EwOp::Add:
          case EwOp::Sub:
            for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
            break;
          case EwOp::Mul:
            for (std::size_t i = 0; i < n; ++i) {
              std::size_t bi = map.same_shape ? i : detail::b_index(map, i);
              ga[i] += g[i] * b_data->value[bi];
            }
            break;
          case EwOp::Div:
            for (std::size_t i = 0; i < n; ++i) {
              std::size_t bi = map.same_shape ? i : detail::b_index(map, i);
              ga[i] += g[i] / b_data->value[bi];
            }
            break;
        }
      }
      if (ib >= 0) {
        auto& gb = t.adjoint(ib);
        for (std::size_t i = 0; i < n; ++i) {
          std::size_t bi = map.same_shape ? i : detail::b_index(map, i);
          switch (op) {
            case EwOp::Add: gb[bi] += g[i]; break;
            case EwOp::Sub: gb[bi] -= g[i]; break;
            case EwOp::Mul: gb[bi] += g[i] * a_data->value[i]; break;
            case EwOp::Div: {
              float bvv = b_data->value[bi];
              gb[bi] -= g[i] * a_data->value[i] / (bvv * bvv);
              break;
            }
          }
        }
      }
    });
  }
  return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) { return ew_binary(EwOp::Add, a, b); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return ew_binary(EwOp::Sub, a, b); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return ew_binary(EwOp::Mul, a, b); }
inline Tensor divide(const Tensor& a, const Tensor& b) { return ew_binary(EwOp::Div, a, b); }

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return divide(a, b); }

// ---------------------------------------------------------------------------
// elementwise unaries

namespace detail {

// fwd computes the value; dfn(x, y) is dy/dx given input x and output y.
inline Tensor unary_op(const Tensor& x, const std::function<float(float)>& fwd,
                       const std::function<float(float, float)>& dfn) {
  Tensor out(x.shape());
  const float* xv = x.raw();
  float* ov = out.raw();
  std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) ov[i] = fwd(xv[i]);

  out.set_requires_grad(x.requires_grad());
  Tape* tape = active_tape();
  if (tape && x.requires_grad()) {
    int ix = tape->node_for(x);
    auto x_data = x.storage();
    auto o_data = out.storage();
    tape->record(out, [ix, dfn, x_data, o_data](Tape& t, int self) {
      const auto& g = t.adjoint(self);
      auto& gx = t.adjoint(ix);
      for (std::size_t i = 0; i < g.size(); ++i)
        gx[i] += g[i] * dfn(x_data->value[i], o_data->value[i]);
    });
  }
  return out;
}

}  // namespace detail

inline Tensor neg(const Tensor& x) {
  return detail::unary_op(
      x, [](float v) { return -v; }, [](float, float) { return -1.0f; });
}

inline Tensor log(const Tensor& x) {
  return detail::unary_op(
      x, [](float v) { return std::log(v); }, [](float v, float) { return 1.0f / v; });
}

// Gradient passes through strictly inside (lo, hi) and is zero at the rails.
inline Tensor clamp(const Tensor& x, float lo, float hi) {
  return detail::unary_op(
      x, [lo, hi](float v) { return v < lo ? lo : (v > hi ? hi : v); },
      [lo, hi](float v, float) { return (v > lo && v < hi) ? 1.0f : 0.0f; });
}

// ---------------------------------------------------------------------------
// matmul

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2, ErrorKind::IncompatibleShapes,
          "matmul expects rank-2 tensors");
  int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  require(k == k2, ErrorKind::IncompatibleShapes,
          "matmul inner dimensions disagree: " + detail::shape_str(a.shape()) + " x " +
              detail::shape_str(b.shape()));
  Tensor out({m, n});
  detail::gemm_nn(m, k, n, a.raw(), b.raw(), out.raw());

  bool needs_grad = a.requires_grad() || b.requires_grad();
  out.set_requires_grad(needs_grad);
  Tape* tape = active_tape();
  if (tape && needs_grad) {
    int ia = tape->node_for(a);
    int ib = tape->node_for(b);
    auto a_data = a.storage();
    auto b_data = b.storage();
    tape->record(out, [m, k, n, ia, ib, a_data, b_data](Tape& t, int self) {
      const auto& g = t.adjoint(self);
      if (ia >= 0) {  // dA = g . B^T
        auto bt = detail::transposed(k, n, b_data->value.data());
        detail::gemm_nn(m, n, k, g.data(), bt.data(), t.adjoint(ia).data());
      }
      if (ib >= 0) {  // dB = A^T . g
        auto at = detail::transposed(m, k, a_data->value.data());
        detail::gemm_nn(k, m, n, at.data(), g.data(), t.adjoint(ib).data());
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// reductions

enum class ReduceOp { Sum, Mean };

// Reduces over `axes` (all axes when empty); reduced axes are removed from
// the shape, collapsing to [1] when nothing remains.
inline Tensor reduce(ReduceOp op, const Tensor& x, std::vector<int> axes = {}) {
  std::size_t rank = x.rank();
  if (axes.empty()) {
    axes.resize(rank);
    std::iota(axes.begin(), axes.end(), 0);
  }
  std::sort(axes.begin(), axes.end());
  axes.erase(std::unique(axes.begin(), axes.end()), axes.end());
  std::vector<bool> reduced(rank, false);
  for (int ax : axes) {
    require(ax >= 0 && static_cast<std::size_t>(ax) < rank, ErrorKind::AxisOutOfRange,
            "axis " + std::to_string(ax) + " out of range for " + detail::shape_str(x.shape()));
    reduced[static_cast<std::size_t>(ax)] = true;
  }
  std::vector<int> out_shape;
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    if (reduced[i]) {
      count *= static_cast<std::size_t>(x.shape()[i]);
    } else {
      out_shape.push_back(x.shape()[i]);
    }
  }
  if (out_shape.empty()) out_shape.push_back(1);

  // out strides aligned to input axes (0 on reduced axes)
  std::vector<std::size_t> in_stride(rank, 1), out_map(rank, 0);
  for (std::size_t i = rank; i-- > 0;)
    in_stride[i] = (i + 1 < rank) ? in_stride[i + 1] * static_cast<std::size_t>(x.shape()[i + 1]) : 1;
  {
    std::size_t s = 1;
    for (std::size_t i = rank; i-- > 0;) {
      if (!reduced[i]) {
        out_map[i] = s;
        s *= static_cast<std::size_t>(x.shape()[i]);
      }
    }
  }
  auto out_index = [&](std::size_t flat) {
    std::size_t idx = 0;
    for (std::size_t ax = 0; ax < rank; ++ax) {
      std::size_t coord = flat / in_stride[ax];
      flat -= coord * in_stride[ax];
      idx += coord * out_map[ax];
    }
    return idx;
  };

  Tensor out(out_shape);
  const float* xv = x.raw();
  float* ov = out.raw();
  std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) ov[out_index(i)] += xv[i];
  if (op == ReduceOp::Mean) {
    float inv = 1.0f / static_cast<float>(count);
    for (std::size_t i = 0; i < out.numel(); ++i) ov[i] *= inv;
  }

  out.set_requires_grad(x.requires_grad());
  Tape* tape = active_tape();
  if (tape && x.requires_grad()) {
    int ix = tape->node_for(x);
    float scale = op == ReduceOp::Mean ? 1.0f / static_cast<float>(count) : 1.0f;
    tape->record(out, [ix, n, scale, in_stride, out_map, rank](Tape& t, int self) {
      const auto& g = t.adjoint(self);
      auto& gx = t.adjoint(ix);
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t idx = 0, flat = i;
        for (std::size_t ax = 0; ax < rank; ++ax) {
          std::size_t coord = flat / in_stride[ax];
          flat -= coord * in_stride[ax];
          idx += coord * out_map[ax];
        }
        gx[i] += g[idx] * scale;
      }
    });
  }
  return out;
}

inline Tensor sum(const Tensor& x, std::vector<int> axes = {}) {
  return reduce(ReduceOp::Sum, x, std::move(axes));
}
inline Tensor mean(const Tensor& x, std::vector<int> axes = {}) {
  return reduce(ReduceOp::Mean, x, std::move(axes));
}

// ---------------------------------------------------------------------------
// gradient checking

// Max relative error between reverse-mode and central-difference gradients of
// a scalar-valued f at x. f must be deterministic.
inline double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x0,
                         float eps = 1e-3f) {
  Tensor x = x0.clone();
  x.set_requires_grad(true);
  x.zero_grad();
  Tape tape;
  {
    TapeScope scope(tape);
    Tensor loss = f(x);
    tape.backward(loss);
  }
  std::vector<float> autograd = x.grad();
  if (autograd.empty()) autograd.assign(x.numel(), 0.0f);

  Tensor probe = x.detach();
  double max_err = 0.0;
  for (std::size_t i = 0; i < probe.numel(); ++i) {
    float saved = probe.values()[i];
    probe.values()[i] = saved + eps;
    double fp = f(probe).item();
    probe.values()[i] = saved - eps;
    double fm = f(probe).item();
    probe.values()[i] = saved;
    double numeric = (fp - fm) / (2.0 * static_cast<double>(eps));
    double analytic = autograd[i];
    double denom = std::max(1e-6, std::abs(analytic) + std::abs(numeric));
    max_err = std::max(max_err, std::abs(analytic - numeric) / denom);
  }
  return max_err;
}

}  // namespace ganaug
