#pragma once

// Reverse-mode automatic differentiation over dense tensors.
//
// Values are held by reference-counted nodes. When a Tape is active on the
// current thread (see Tape::Recording) every primitive whose inputs require a
// gradient appends its node, together with the local vector-Jacobian rule,
// to that tape. Without an active tape primitives only compute values.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lnln/tensor.hpp"

namespace lnln {

template <typename Scalar>
class Tape;

template <typename Scalar>
struct Node {
  Tensor<Scalar> value;
  Tensor<Scalar> grad;
  bool requires_grad = false;
  const char* op = "constant";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;
  const Tape<Scalar>* tape = nullptr;
  std::size_t tape_index = 0;

  bool has_grad() const noexcept { return !grad.storage().empty(); }

  void accumulate(Tensor<Scalar>&& g) {
    if (!has_grad()) {
      grad = std::move(g);
    } else {
      grad += g;
    }
  }
};

/// Handle to a node. Cheap to copy; copies share the node.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<Scalar>> node) : node_(std::move(node)) {}

  static Var constant(Tensor<Scalar> value) {
    auto node = std::make_shared<Node<Scalar>>();
    node->value = std::move(value);
    return Var(std::move(node));
  }

  /// A differentiable leaf (a parameter or a grad-check input).
  static Var leaf(Tensor<Scalar> value) {
    auto node = std::make_shared<Node<Scalar>>();
    node->value = std::move(value);
    node->requires_grad = true;
    node->op = "leaf";
    return Var(std::move(node));
  }

  bool valid() const noexcept { return static_cast<bool>(node_); }
  const Tensor<Scalar>& value() const { return node_->value; }
  Tensor<Scalar>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }
  Scalar item() const { return node_->value.item(); }
  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }

  /// Accumulated gradient; zeros when nothing flowed into this node.
  Tensor<Scalar> grad() const {
    if (node_->has_grad()) return node_->grad;
    return Tensor<Scalar>(node_->value.shape());
  }
  void zero_grad() { node_->grad = Tensor<Scalar>(); }

  Node<Scalar>* node() const noexcept { return node_.get(); }
  const std::shared_ptr<Node<Scalar>>& ptr() const noexcept { return node_; }

 private:
  std::shared_ptr<Node<Scalar>> node_;
};

template <typename Scalar>
class Tape {
 public:
  /// Makes a tape the recording target of the current thread for its lifetime.
  class Recording {
   public:
    explicit Recording(Tape& tape) : previous_(active_) { active_ = &tape; }
    ~Recording() { active_ = previous_; }
    Recording(const Recording&) = delete;
    Recording& operator=(const Recording&) = delete;

   private:
    Tape* previous_;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active() noexcept { return active_; }

  std::size_t size() const noexcept { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  bool contains(const Node<Scalar>* node) const noexcept {
    return node && node->tape == this && node->tape_index < nodes_.size() &&
           nodes_[node->tape_index].get() == node;
  }

  void record(const std::shared_ptr<Node<Scalar>>& node) {
    node->tape = this;
    node->tape_index = nodes_.size();
    nodes_.push_back(node);
  }

  const std::vector<std::shared_ptr<Node<Scalar>>>& nodes() const noexcept {
    return nodes_;
  }

 private:
  std::vector<std::shared_ptr<Node<Scalar>>> nodes_;
  static inline thread_local Tape* active_ = nullptr;
};

/// Propagates d(loss)/d(node) back through the tape. Leaf gradients
/// accumulate into their nodes; intermediate gradients are released once used.
template <typename Scalar>
void backward(Tape<Scalar>& tape, const Var<Scalar>& loss) {
  if (!loss.valid() || loss.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " +
                     (loss.valid() ? to_string(loss.shape()) : std::string("<null>")));
  }
  if (!tape.contains(loss.node())) {
    throw std::invalid_argument("backward: loss was not recorded on this tape");
  }
  const auto& nodes = tape.nodes();
  loss.node()->grad = Tensor<Scalar>(loss.shape(), Scalar{1});
  for (std::size_t i = loss.node()->tape_index + 1; i-- > 0;) {
    Node<Scalar>& node = *nodes[i];
    if (!node.has_grad()) continue;
    node.backward_fn(node);
    node.grad = Tensor<Scalar>();
  }
}

namespace detail {

template <typename Scalar>
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using MapC = Eigen::Map<const RowMat<Scalar>>;
template <typename Scalar>
using MapM = Eigen::Map<RowMat<Scalar>>;

template <typename Scalar>
void check_finite(const char* op, const Tensor<Scalar>& t) {
  if (!t.all_finite()) {
    throw NumericError(std::string(op) + ": non-finite output");
  }
}

template <typename Scalar, typename Rule>
Var<Scalar> make_result(const char* op, Tensor<Scalar> value,
                        std::initializer_list<Var<Scalar>> inputs, Rule&& rule) {
  check_finite(op, value);
  auto node = std::make_shared<Node<Scalar>>();
  node->value = std::move(value);
  node->op = op;
  Tape<Scalar>* tape = Tape<Scalar>::active();
  bool needs = false;
  for (const auto& in : inputs) needs = needs || in.requires_grad();
  if (tape && needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const auto& in : inputs) node->inputs.push_back(in.ptr());
    node->backward_fn = std::forward<Rule>(rule);
    tape->record(node);
  }
  return Var<Scalar>(std::move(node));
}

template <typename Scalar, typename Rule>
Var<Scalar> make_result_n(const char* op, Tensor<Scalar> value,
                          const std::vector<Var<Scalar>>& inputs, Rule&& rule) {
  check_finite(op, value);
  auto node = std::make_shared<Node<Scalar>>();
  node->value = std::move(value);
  node->op = op;
  Tape<Scalar>* tape = Tape<Scalar>::active();
  bool needs = false;
  for (const auto& in : inputs) needs = needs || in.requires_grad();
  if (tape && needs) {
    node->requires_grad = true;
    for (const auto& in : inputs) node->inputs.push_back(in.ptr());
    node->backward_fn = std::forward<Rule>(rule);
    tape->record(node);
  }
  return Var<Scalar>(std::move(node));
}

inline std::string shapes_msg(const char* op, const Shape& a, const Shape& b) {
  return std::string(op) + ": incompatible shapes " + to_string(a) + " and " +
         to_string(b);
}

// Flat-index maps from an output to each operand under numpy broadcasting.
struct Broadcast {
  Shape out;
  bool same = false;
  std::vector<std::size_t> ia;
  std::vector<std::size_t> ib;
};

inline Broadcast plan_broadcast(const char* op, const Shape& a, const Shape& b) {
  Broadcast plan;
  if (a == b) {
    plan.out = a;
    plan.same = true;
    return plan;
  }
  const std::size_t rank = std::max(a.size(), b.size());
  Shape pa(rank, 1), pb(rank, 1);
  std::copy(a.begin(), a.end(), pa.begin() + (rank - a.size()));
  std::copy(b.begin(), b.end(), pb.begin() + (rank - b.size()));
  plan.out.resize(rank);
  for (std::size_t k = 0; k < rank; ++k) {
    if (pa[k] == pb[k] || pb[k] == 1) {
      plan.out[k] = pa[k];
    } else if (pa[k] == 1) {
      plan.out[k] = pb[k];
    } else {
      throw ShapeError(shapes_msg(op, a, b));
    }
  }
  auto strides = [rank](const Shape& padded) {
    std::vector<std::size_t> s(rank, 0);
    std::size_t acc = 1;
    for (std::size_t k = rank; k-- > 0;) {
      s[k] = padded[k] == 1 ? 0 : acc;
      acc *= padded[k];
    }
    return s;
  };
  const auto sa = strides(pa);
  const auto sb = strides(pb);
  const std::size_t n = shape_size(plan.out);
  plan.ia.resize(n);
  plan.ib.resize(n);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t i = 0; i < n; ++i) {
    plan.ia[i] = oa;
    plan.ib[i] = ob;
    for (std::size_t k = rank; k-- > 0;) {
      ++idx[k];
      oa += sa[k];
      ob += sb[k];
      if (idx[k] < plan.out[k]) break;
      oa -= sa[k] * idx[k];
      ob -= sb[k] * idx[k];
      idx[k] = 0;
    }
  }
  return plan;
}

template <typename Scalar>
Tensor<Scalar> reduce_to(const Tensor<Scalar>& g, const std::vector<std::size_t>& map,
                         const Shape& shape) {
  Tensor<Scalar> out(shape);
  for (std::size_t i = 0; i < g.size(); ++i) out[map[i]] += g[i];
  return out;
}

inline std::size_t normalize_axis(const char* op, long axis, std::size_t rank) {
  const long r = static_cast<long>(rank);
  const long a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for rank " + std::to_string(rank));
  }
  return static_cast<std::size_t>(a);
}

template <typename Scalar, typename F, typename DF>
Var<Scalar> unary(const char* op, const Var<Scalar>& a, F f, DF df) {
  const auto& x = a.value();
  Tensor<Scalar> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return make_result(op, std::move(y), {a}, [df](Node<Scalar>& self) {
    const auto& in = self.inputs[0];
    const auto& xv = in->value;
    Tensor<Scalar> g(xv.shape());
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] = self.grad[i] * df(xv[i], self.value[i]);
    }
    in->accumulate(std::move(g));
  });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Primitives

/// [..., k] x [k, n] -> [..., n], or batched [B, m, k] x [B, k, n] -> [B, m, n].
template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  using detail::MapC;
  using detail::MapM;
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sb.size() == 2 && !sa.empty() && sa.back() == sb[0]) {
    const std::size_t k = sb[0], n = sb[1];
    const std::size_t rows = k == 0 ? 0 : a.size() / k;
    Shape out_shape(sa.begin(), sa.end() - 1);
    out_shape.push_back(n);
    Tensor<Scalar> out(out_shape);
    MapM<Scalar>(out.data().data(), rows, n).noalias() =
        MapC<Scalar>(a.value().data().data(), rows, k) *
        MapC<Scalar>(b.value().data().data(), k, n);
    return detail::make_result("matmul", std::move(out), {a, b},
                               [rows, k, n](Node<Scalar>& self) {
      auto& in_a = self.inputs[0];
      auto& in_b = self.inputs[1];
      MapC<Scalar> g(self.grad.data().data(), rows, n);
      if (in_a->requires_grad) {
        Tensor<Scalar> ga(in_a->value.shape());
        MapM<Scalar>(ga.data().data(), rows, k).noalias() =
            g * MapC<Scalar>(in_b->value.data().data(), k, n).transpose();
        in_a->accumulate(std::move(ga));
      }
      if (in_b->requires_grad) {
        Tensor<Scalar> gb(in_b->value.shape());
        MapM<Scalar>(gb.data().data(), k, n).noalias() =
            MapC<Scalar>(in_a->value.data().data(), rows, k).transpose() * g;
        in_b->accumulate(std::move(gb));
      }
    });
  }
  if (sa.size() == 3 && sb.size() == 3 && sa[0] == sb[0] && sa[2] == sb[1]) {
    const std::size_t batch = sa[0], m = sa[1], k = sa[2], n = sb[2];
    Tensor<Scalar> out(Shape{batch, m, n});
    for (std::size_t i = 0; i < batch; ++i) {
      MapM<Scalar>(out.data().data() + i * m * n, m, n).noalias() =
          MapC<Scalar>(a.value().data().data() + i * m * k, m, k) *
          MapC<Scalar>(b.value().data().data() + i * k * n, k, n);
    }
    return detail::make_result("matmul", std::move(out), {a, b},
                               [batch, m, k, n](Node<Scalar>& self) {
      auto& in_a = self.inputs[0];
      auto& in_b = self.inputs[1];
      const Scalar* g = self.grad.data().data();
      if (in_a->requires_grad) {
        Tensor<Scalar> ga(in_a->value.shape());
        for (std::size_t i = 0; i < batch; ++i) {
          MapM<Scalar>(ga.data().data() + i * m * k, m, k).noalias() =
              MapC<Scalar>(g + i * m * n, m, n) *
              MapC<Scalar>(in_b->value.data().data() + i * k * n, k, n).transpose();
        }
        in_a->accumulate(std::move(ga));
      }
      if (in_b->requires_grad) {
        Tensor<Scalar> gb(in_b->value.shape());
        for (std::size_t i = 0; i < batch; ++i) {
          MapM<Scalar>(gb.data().data() + i * k * n, k, n).noalias() =
              MapC<Scalar>(in_a->value.data().data() + i * m * k, m, k).transpose() *
              MapC<Scalar>(g + i * m * n, m, n);
        }
        in_b->accumulate(std::move(gb));
      }
    });
  }
  throw ShapeError(detail::shapes_msg("matmul", sa, sb));
}

/// Swaps the last two axes of a rank-2 or rank-3 tensor.
template <typename Scalar>
Var<Scalar> transpose(const Var<Scalar>& a) {
  const Shape& s = a.shape();
  if (s.size() != 2 && s.size() != 3) {
    throw ShapeError("transpose: expected rank 2 or 3, got " + to_string(s));
  }
  const std::size_t batch = s.size() == 3 ? s[0] : 1;
  const std::size_t m = s[s.size() - 2], n = s.back();
  auto swap = [batch, m, n](const Tensor<Scalar>& x, Shape shape) {
    Tensor<Scalar> y(std::move(shape));
    for (std::size_t b = 0; b < batch; ++b) {
      const Scalar* src = x.data().data() + b * m * n;
      Scalar* dst = y.data().data() + b * m * n;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) dst[j * m + i] = src[i * n + j];
    }
    return y;
  };
  Shape out_shape = s;
  std::swap(out_shape[out_shape.size() - 1], out_shape[out_shape.size() - 2]);
  return detail::make_result("transpose", swap(a.value(), out_shape), {a},
                             [batch, m, n](Node<Scalar>& self) {
    auto& in = self.inputs[0];
    Tensor<Scalar> g(in->value.shape());
    const Scalar* src = self.grad.data().data();
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
          g[b * m * n + i * n + j] = src[b * m * n + j * m + i];
    in->accumulate(std::move(g));
  });
}

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  auto plan = std::make_shared<detail::Broadcast>(
      detail::plan_broadcast("add", a.shape(), b.shape()));
  Tensor<Scalar> out(plan->out);
  const auto& x = a.value();
  const auto& y = b.value();
  if (plan->same) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[plan->ia[i]] + y[plan->ib[i]];
  }
  return detail::make_result("add", std::move(out), {a, b}, [plan](Node<Scalar>& self) {
    for (int k = 0; k < 2; ++k) {
      auto& in = self.inputs[k];
      if (!in->requires_grad) continue;
      if (plan->same) {
        in->accumulate(Tensor<Scalar>(self.grad));
      } else {
        in->accumulate(detail::reduce_to(self.grad, k == 0 ? plan->ia : plan->ib,
                                         in->value.shape()));
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b) {
  auto plan = std::make_shared<detail::Broadcast>(
      detail::plan_broadcast("sub", a.shape(), b.shape()));
  Tensor<Scalar> out(plan->out);
  const auto& x = a.value();
  const auto& y = b.value();
  if (plan->same) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[plan->ia[i]] - y[plan->ib[i]];
  }
  return detail::make_result("sub", std::move(out), {a, b}, [plan](Node<Scalar>& self) {
    for (int k = 0; k < 2; ++k) {
      auto& in = self.inputs[k];
      if (!in->requires_grad) continue;
      Tensor<Scalar> g = plan->same ? self.grad
                                    : detail::reduce_to(self.grad, k == 0 ? plan->ia : plan->ib,
                                                        in->value.shape());
      if (k == 1) {
        for (auto& v : g.data()) v = -v;
      }
      in->accumulate(std::move(g));
    }
  });
}

/// Elementwise product with numpy broadcasting.
template <typename Scalar>
Var<Scalar> mul(const Var<Scalar>& a, const Var<Scalar>& b) {
  auto plan = std::make_shared<detail::Broadcast>(
      detail::plan_broadcast("mul", a.shape(), b.shape()));
  Tensor<Scalar> out(plan->out);
  const auto& x = a.value();
  const auto& y = b.value();
  if (plan->same) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[plan->ia[i]] * y[plan->ib[i]];
  }
  return detail::make_result("mul", std::move(out), {a, b}, [plan](Node<Scalar>& self) {
    const auto& xa = self.inputs[0]->value;
    const auto& xb = self.inputs[1]->value;
    const std::size_t n = self.grad.size();
    for (int k = 0; k < 2; ++k) {
      auto& in = self.inputs[k];
      if (!in->requires_grad) continue;
      const auto& other = k == 0 ? xb : xa;
      if (plan->same) {
        Tensor<Scalar> g(in->value.shape());
        for (std::size_t i = 0; i < n; ++i) g[i] = self.grad[i] * other[i];
        in->accumulate(std::move(g));
      } else {
        const auto& own_map = k == 0 ? plan->ia : plan->ib;
        const auto& other_map = k == 0 ? plan->ib : plan->ia;
        Tensor<Scalar> g(in->value.shape());
        for (std::size_t i = 0; i < n; ++i) g[own_map[i]] += self.grad[i] * other[other_map[i]];
        in->accumulate(std::move(g));
      }
    }
  });
}

/// Materializes a broadcast of `a` to `shape`.
template <typename Scalar>
Var<Scalar> broadcast_to(const Var<Scalar>& a, const Shape& shape) {
  auto plan = std::make_shared<detail::Broadcast>(
      detail::plan_broadcast("broadcast_to", shape, a.shape()));
  if (plan->out != shape) {
    throw ShapeError(detail::shapes_msg("broadcast_to", a.shape(), shape));
  }
  if (plan->same) {
    return detail::make_result("broadcast_to", Tensor<Scalar>(a.value()), {a},
                               [](Node<Scalar>& self) {
      self.inputs[0]->accumulate(Tensor<Scalar>(self.grad));
    });
  }
  Tensor<Scalar> out(shape);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[plan->ib[i]];
  return detail::make_result("broadcast_to", std::move(out), {a}, [plan](Node<Scalar>& self) {
    auto& in = self.inputs[0];
    in->accumulate(detail::reduce_to(self.grad, plan->ib, in->value.shape()));
  });
}

template <typename Scalar>
Var<Scalar> concat(const std::vector<Var<Scalar>>& parts, long axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  const std::size_t ax = detail::normalize_axis("concat", axis, first.size());
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t k = 0; ok && k < s.size(); ++k) ok = k == ax || s[k] == first[k];
    if (!ok) throw ShapeError(detail::shapes_msg("concat", first, s));
    total += s[ax];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t k = 0; k < ax; ++k) outer *= first[k];
  for (std::size_t k = ax + 1; k < first.size(); ++k) inner *= first[k];
  Shape out_shape = first;
  out_shape[ax] = total;
  Tensor<Scalar> out(out_shape);
  std::vector<std::size_t> extents;
  extents.reserve(parts.size());
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t len = p.shape()[ax];
    extents.push_back(len);
    const Scalar* src = p.value().data().data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy(src + o * len * inner, src + (o + 1) * len * inner,
                out.data().data() + (o * total + offset) * inner);
    }
    offset += len;
  }
  return detail::make_result_n("concat", std::move(out), parts,
                               [extents, outer, inner, total](Node<Scalar>& self) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < self.inputs.size(); ++p) {
      auto& in = self.inputs[p];
      const std::size_t len = extents[p];
      if (in->requires_grad) {
        Tensor<Scalar> g(in->value.shape());
        for (std::size_t o = 0; o < outer; ++o) {
          const Scalar* src = self.grad.data().data() + (o * total + offset) * inner;
          std::copy(src, src + len * inner, g.data().data() + o * len * inner);
        }
        in->accumulate(std::move(g));
      }
      offset += len;
    }
  });
}

/// Half-open range [begin, end) along `axis`.
template <typename Scalar>
Var<Scalar> slice(const Var<Scalar>& a, long axis, std::size_t begin, std::size_t end) {
  const Shape& s = a.shape();
  const std::size_t ax = detail::normalize_axis("slice", axis, s.size());
  if (begin > end || end > s[ax]) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for axis extent " + std::to_string(s[ax]));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t k = 0; k < ax; ++k) outer *= s[k];
  for (std::size_t k = ax + 1; k < s.size(); ++k) inner *= s[k];
  const std::size_t len = end - begin, full = s[ax];
  Shape out_shape = s;
  out_shape[ax] = len;
  Tensor<Scalar> out(out_shape);
  for (std::size_t o = 0; o < outer; ++o) {
    const Scalar* src = a.value().data().data() + (o * full + begin) * inner;
    std::copy(src, src + len * inner, out.data().data() + o * len * inner);
  }
  return detail::make_result("slice", std::move(out), {a},
                             [outer, inner, len, full, begin](Node<Scalar>& self) {
    auto& in = self.inputs[0];
    Tensor<Scalar> g(in->value.shape());
    for (std::size_t o = 0; o < outer; ++o) {
      const Scalar* src = self.grad.data().data() + o * len * inner;
      std::copy(src, src + len * inner, g.data().data() + (o * full + begin) * inner);
    }
    in->accumulate(std::move(g));
  });
}

/// Mean over one axis; the axis is removed from the result.
template <typename Scalar>
Var<Scalar> mean(const Var<Scalar>& a, long axis) {
  const Shape& s = a.shape();
  const std::size_t ax = detail::normalize_axis("mean", axis, s.size());
  std::size_t outer = 1, inner = 1;
  for (std::size_t k = 0; k < ax; ++k) outer *= s[k];
  for (std::size_t k = ax + 1; k < s.size(); ++k) inner *= s[k];
  const std::size_t len = s[ax];
  if (len == 0) throw ShapeError("mean: empty axis");
  Shape out_shape;
  for (std::size_t k = 0; k < s.size(); ++k)
    if (k != ax) out_shape.push_back(s[k]);
  Tensor<Scalar> out(out_shape);
  const Scalar inv = Scalar{1} / static_cast<Scalar>(len);
  const Scalar* x = a.value().data().data();
  for (std::size_t o = 0; o < outer; ++o) {
    Scalar* dst = out.data().data() + o * inner;
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t i = 0; i < inner; ++i) dst[i] += x[(o * len + t) * inner + i];
    for (std::size_t i = 0; i < inner; ++i) dst[i] *= inv;
  }
  return detail::make_result("mean", std::move(out), {a},
                             [outer, inner, len, inv](Node<Scalar>& self) {
    auto& in = self.inputs[0];
    Tensor<Scalar> g(in->value.shape());
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t t = 0; t < len; ++t)
        for (std::size_t i = 0; i < inner; ++i)
          g[(o * len + t) * inner + i] = self.grad[o * inner + i] * inv;
    in->accumulate(std::move(g));
  });
}

/// Sum of all entries, as a rank-0 tensor.
template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& a) {
  Scalar total{0};
  for (Scalar v : a.value().data()) total += v;
  return detail::make_result("sum", Tensor<Scalar>::scalar(total), {a},
                             [](Node<Scalar>& self) {
    auto& in = self.inputs[0];
    in->accumulate(Tensor<Scalar>(in->value.shape(), self.grad[0]));
  });
}

template <typename Scalar>
Var<Scalar> reshape(const Var<Scalar>& a, Shape shape) {
  return detail::make_result("reshape", a.value().reshaped(std::move(shape)), {a},
                             [](Node<Scalar>& self) {
    auto& in = self.inputs[0];
    in->accumulate(self.grad.reshaped(in->value.shape()));
  });
}

template <typename Scalar>
Var<Scalar> softmax(const Var<Scalar>& a) {
  const Shape& s = a.shape();
  if (s.empty() || s.back() == 0) throw ShapeError("softmax: needs a non-empty last axis");
  const std::size_t n = s.back(), rows = a.size() / n;
  Tensor<Scalar> out(s);
  const Scalar* x = a.value().data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const Scalar* xr = x + r * n;
    Scalar* yr = out.data().data() + r * n;
    const Scalar peak = *std::max_element(xr, xr + n);
    Scalar z{0};
    for (std::size_t j = 0; j < n; ++j) {
      yr[j] = std::exp(xr[j] - peak);
      z += yr[j];
    }
    for (std::size_t j = 0; j < n; ++j) yr[j] /= z;
  }
  return detail::make_result("softmax", std::move(out), {a}, [rows, n](Node<Scalar>& self) {
    auto& in = self.inputs[0];
    Tensor<Scalar> g(in->value.shape());
    for (std::size_t r = 0; r < rows; ++r) {
      const Scalar* y = self.value.data().data() + r * n;
      const Scalar* gy = self.grad.data().data() + r * n;
      Scalar dot{0};
      for (std::size_t j = 0; j < n; ++j) dot += gy[j] * y[j];
      for (std::size_t j = 0; j < n; ++j) g[r * n + j] = y[j] * (gy[j] - dot);
    }
    in->accumulate(std::move(g));
  });
}

inline constexpr double kLayerNormEpsilon = 1e-5;

/// Normalizes the last axis to zero mean and unit variance (no affine part).
template <typename Scalar>
Var<Scalar> layer_norm(const Var<Scalar>& a) {
  const Shape& s = a.shape();
  if (s.empty() || s.back() == 0) throw ShapeError("layer_norm: needs a non-empty last axis");
  const std::size_t n = s.back(), rows = a.size() / n;
  Tensor<Scalar> out(s);
  auto inv_std = std::make_shared<std::vector<Scalar>>(rows);
  const Scalar* x = a.value().data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const Scalar* xr = x + r * n;
    Scalar mu{0};
    for (std::size_t j = 0; j < n; ++j) mu += xr[j];
    mu /= static_cast<Scalar>(n);
    Scalar var{0};
    for (std::size_t j = 0; j < n; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<Scalar>(n);
    const Scalar is = Scalar{1} / std::sqrt(var + static_cast<Scalar>(kLayerNormEpsilon));
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = (xr[j] - mu) * is;
  }
  return detail::make_result("layer_norm", std::move(out), {a},
                             [rows, n, inv_std](Node<Scalar>& self) {
    auto& in = self.inputs[0];
    Tensor<Scalar> g(in->value.shape());
    const Scalar inv_n = Scalar{1} / static_cast<Scalar>(n);
    for (std::size_t r = 0; r < rows; ++r) {
      const Scalar* y = self.value.data().data() + r * n;
      const Scalar* gy = self.grad.data().data() + r * n;
      Scalar mean_g{0}, mean_gy{0};
      for (std::size_t j = 0; j < n; ++j) {
        mean_g += gy[j];
        mean_gy += gy[j] * y[j];
      }
      mean_g *= inv_n;
      mean_gy *= inv_n;
      const Scalar is = (*inv_std)[r];
      for (std::size_t j = 0; j < n; ++j) g[r * n + j] = is * (gy[j] - mean_g - y[j] * mean_gy);
    }
    in->accumulate(std::move(g));
  });
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& a) {
  return detail::unary(
      "relu", a, [](Scalar x) { return x > Scalar{0} ? x : Scalar{0}; },
      [](Scalar x, Scalar) { return x > Scalar{0} ? Scalar{1} : Scalar{0}; });
}

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& a) {
  return detail::unary(
      "sigmoid", a,
      [](Scalar x) {
        if (x >= Scalar{0}) return Scalar{1} / (Scalar{1} + std::exp(-x));
        const Scalar e = std::exp(x);
        return e / (Scalar{1} + e);
      },
      [](Scalar, Scalar y) { return y * (Scalar{1} - y); });
}

/// log(1 + exp(x)), evaluated without overflow.
template <typename Scalar>
Var<Scalar> softplus(const Var<Scalar>& a) {
  return detail::unary(
      "softplus", a,
      [](Scalar x) { return std::max(x, Scalar{0}) + std::log1p(std::exp(-std::abs(x))); },
      [](Scalar x, Scalar) {
        if (x >= Scalar{0}) return Scalar{1} / (Scalar{1} + std::exp(-x));
        const Scalar e = std::exp(x);
        return e / (Scalar{1} + e);
      });
}

template <typename Scalar>
Var<Scalar> square(const Var<Scalar>& a) {
  return detail::unary(
      "square", a, [](Scalar x) { return x * x; },
      [](Scalar x, Scalar) { return Scalar{2} * x; });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar factor) {
  return detail::unary(
      "scale", a, [factor](Scalar x) { return x * factor; },
      [factor](Scalar, Scalar) { return factor; });
}

/// Identity forward; multiplies the incoming gradient by -lambda on the way back.
template <typename Scalar>
Var<Scalar> gradient_reverse(const Var<Scalar>& a, Scalar lambda) {
  if (!(lambda > Scalar{0})) {
    throw std::invalid_argument("gradient_reverse: lambda must be positive, got " +
                                std::to_string(static_cast<double>(lambda)));
  }
  return detail::make_result("gradient_reverse", Tensor<Scalar>(a.value()), {a},
                             [lambda](Node<Scalar>& self) {
    Tensor<Scalar> g(self.grad.shape());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = -lambda * self.grad[i];
    self.inputs[0]->accumulate(std::move(g));
  });
}

/// Same value, cut off from the graph.
template <typename Scalar>
Var<Scalar> detach(const Var<Scalar>& a) {
  return Var<Scalar>::constant(a.value());
}

// ---------------------------------------------------------------------------
// Finite-difference checking

struct GradCheckOptions {
  double epsilon = 1e-5;
  /// Coordinates probed per leaf; 0 probes every coordinate.
  std::size_t max_coords_per_leaf = 0;
  std::uint64_t seed = 0;
};

/// Max over probed coordinates of |analytic - central| / max(1, |central|).
/// `fn` must rebuild the scalar output from the current leaf values on each call.
template <typename Fn>
double grad_check(std::vector<Var<double>> leaves, Fn&& fn, GradCheckOptions opts = {}) {
  for (auto& leaf : leaves) leaf.zero_grad();
  Tape<double> tape;
  Var<double> out;
  {
    typename Tape<double>::Recording rec(tape);
    out = fn();
  }
  if (out.size() != 1) {
    throw ShapeError("grad_check: function output must be scalar, got " +
                     to_string(out.shape()));
  }
  if (tape.contains(out.node())) backward(tape, out);
  tape.clear();

  std::uint64_t state = opts.seed * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL;
  auto next = [&state]() {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };

  double worst = 0.0;
  for (auto& leaf : leaves) {
    const Tensor<double> analytic = leaf.grad();
    auto& value = leaf.mutable_value();
    std::vector<std::size_t> coords;
    if (opts.max_coords_per_leaf == 0 || opts.max_coords_per_leaf >= value.size()) {
      coords.resize(value.size());
      std::iota(coords.begin(), coords.end(), std::size_t{0});
    } else {
      for (std::size_t c = 0; c < opts.max_coords_per_leaf; ++c)
        coords.push_back(static_cast<std::size_t>(next() % value.size()));
    }
    for (std::size_t i : coords) {
      const double original = value[i];
      value[i] = original + opts.epsilon;
      const double up = fn().item();
      value[i] = original - opts.epsilon;
      const double down = fn().item();
      value[i] = original;
      const double numeric = (up - down) / (2.0 * opts.epsilon);
      const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

/// Point form: `fn` maps leaf variables built from `point` to a scalar.
template <typename Fn>
double grad_check_at(Fn&& fn, const std::vector<Tensor<double>>& point,
                     double epsilon = 1e-5) {
  std::vector<Var<double>> leaves;
  leaves.reserve(point.size());
  for (const auto& p : point) leaves.push_back(Var<double>::leaf(p));
  return grad_check(leaves, [&]() { return fn(leaves); }, GradCheckOptions{epsilon, 0, 0});
}

}  // namespace lnln
