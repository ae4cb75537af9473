// Copyright 2026 The HCCM Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Dense tensor engine with define-by-run reverse-mode autodiff.
//
// Tensors are shared handles to flat Eigen arrays plus a shape. Operations
// are free functions; when a Tape is active on the current thread and an
// input participates in differentiation, the op registers a backward rule.
// A fresh tape is built per forward pass, so variable-length behavior
// sequences are free to change the graph shape between samples.

#ifndef HCCM_TENSOR_HPP_
#define HCCM_TENSOR_HPP_

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hccm/counters.hpp"
#include "hccm/errors.hpp"

namespace hccm {

using Shape = std::vector<int>;

template <typename S>
using ArrayX = Eigen::Array<S, Eigen::Dynamic, 1>;

template <typename S>
using MatrixRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename S>
using MapMat = Eigen::Map<MatrixRM<S>>;

template <typename S>
using MapConstMat = Eigen::Map<const MatrixRM<S>>;

inline int64_t numel(const Shape& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << "]";
  return os.str();
}

template <typename S>
struct TensorImpl {
  Shape shape;
  ArrayX<S> value;
  ArrayX<S> grad;              // empty until backward first reaches this tensor
  bool requires_grad = false;  // leaves: user flag; op outputs: set when recorded

  template <typename Derived>
  void accumulate(const Eigen::ArrayBase<Derived>& g) {
    if (!requires_grad) return;
    if (grad.size() == 0) grad = ArrayX<S>::Zero(value.size());
    grad += g;
  }
};

template <typename S>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape) {
    return Tensor(std::move(shape), [](int64_t n) { return ArrayX<S>::Zero(n); });
  }
  static Tensor full(Shape shape, S v) {
    return Tensor(std::move(shape), [v](int64_t n) { return ArrayX<S>::Constant(n, v); });
  }
  static Tensor scalar(S v) { return full({1}, v); }
  static Tensor from(Shape shape, ArrayX<S> data) {
    if (numel(shape) != data.size())
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
    Tensor t;
    t.impl_ = std::make_shared<TensorImpl<S>>();
    t.impl_->shape = std::move(shape);
    t.impl_->value = std::move(data);
    return t;
  }
  static Tensor from(Shape shape, const std::vector<S>& data) {
    ArrayX<S> a(static_cast<int64_t>(data.size()));
    for (int64_t i = 0; i < a.size(); ++i) a[i] = data[static_cast<size_t>(i)];
    return from(std::move(shape), std::move(a));
  }
  // Widening constructor for 32-bit artifacts (images, cached maps).
  static Tensor from_floats(Shape shape, const float* src) {
    int64_t n = numel(shape);
    ArrayX<S> a(n);
    for (int64_t i = 0; i < n; ++i) a[i] = static_cast<S>(src[i]);
    return from(std::move(shape), std::move(a));
  }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  int dim(int i) const { return impl_->shape[static_cast<size_t>(i)]; }
  int64_t size() const { return impl_->value.size(); }

  // Tensors are shared handles: like shared_ptr, a const handle still
  // exposes mutable storage. Optimizers update parameters through the
  // handles the model handed out.
  ArrayX<S>& values() const { return impl_->value; }
  S value_at(int64_t i) const { return impl_->value[i]; }
  S scalar_value() const {
    if (size() != 1) throw ContractError("scalar_value on tensor of shape " + shape_str(shape()));
    return impl_->value[0];
  }

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool on) {
    impl_->requires_grad = on;
    return *this;
  }
  bool has_grad() const { return impl_->grad.size() > 0; }
  // Gradient buffer; a leaf the loss never touched reads as exact zeros.
  ArrayX<S> grad() const {
    if (impl_->grad.size() == 0) return ArrayX<S>::Zero(size());
    return impl_->grad;
  }
  void zero_grad() const { impl_->grad.resize(0); }

  const std::shared_ptr<TensorImpl<S>>& impl() const { return impl_; }

 private:
  template <typename Fill>
  Tensor(Shape shape, Fill fill) {
    impl_ = std::make_shared<TensorImpl<S>>();
    impl_->value = fill(numel(shape));
    impl_->shape = std::move(shape);
  }
  std::shared_ptr<TensorImpl<S>> impl_;
};

// Records the backward rules of one forward pass, in creation order. One
// backward traversal per tape; cleared and rebuilt for the next pass.
template <typename S>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* current() { return current_; }

  void record(std::shared_ptr<TensorImpl<S>> out, std::function<void(const ArrayX<S>&)> backward) {
    nodes_.push_back(Node{std::move(out), std::move(backward)});
  }

  // Seeds d(root)/d(root) = 1 and propagates through the tape in reverse.
  // Nodes whose output never received a gradient are off the path to the
  // root and are skipped, which leaves unused leaves with exact zeros.
  void backward(const Tensor<S>& root) {
    if (root.size() != 1) {
      throw ContractError("backward root must be scalar, got shape " + shape_str(root.shape()));
    }
    if (consumed_) throw ContractError("tape already consumed by a previous backward");
    consumed_ = true;
    auto& ri = *root.impl();
    if (!ri.requires_grad) return;  // constant root: every gradient is zero
    ri.grad = ArrayX<S>::Ones(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (it->out->grad.size() == 0) continue;
      it->backward(it->out->grad);
    }
  }

  void clear() {
    nodes_.clear();
    consumed_ = false;
  }
  size_t node_count() const { return nodes_.size(); }

  class Scope {
   public:
    explicit Scope(Tape& tape) : prev_(current_) { current_ = &tape; }
    ~Scope() { current_ = prev_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* prev_;
  };

 private:
  struct Node {
    std::shared_ptr<TensorImpl<S>> out;
    std::function<void(const ArrayX<S>&)> backward;
  };
  std::vector<Node> nodes_;
  bool consumed_ = false;
  inline static thread_local Tape* current_ = nullptr;
};

namespace detail {

template <typename S>
bool tracked(const Tensor<S>& t) {
  return t.impl()->requires_grad;
}

template <typename S, typename Backward>
void maybe_record(Tensor<S>& out, bool any_input_tracked, Backward&& bw) {
  Tape<S>* tape = Tape<S>::current();
  if (tape == nullptr || !any_input_tracked) return;
  out.set_requires_grad(true);
  tape->record(out.impl(), std::forward<Backward>(bw));
}

template <typename S>
void check_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " differ");
  }
}

template <typename S>
void check_finite(const Tensor<S>& x, const char* op) {
  if (!x.values().allFinite()) {
    throw NumericError(std::string(op) + ": non-finite input value");
  }
}

template <typename S>
S stable_sigmoid(S x) {
  if (x >= S(0)) {
    return S(1) / (S(1) + std::exp(-x));
  }
  S e = std::exp(x);
  return e / (S(1) + e);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops

template <typename S>
Tensor<S> relu(const Tensor<S>& x) {
  detail::check_finite(x, "relu");
  Tensor<S> out = Tensor<S>::from(x.shape(), ArrayX<S>(x.values().max(S(0))));
  detail::maybe_record(out, detail::tracked(x), [xi = x.impl()](const ArrayX<S>& g) {
    xi->accumulate((xi->value > S(0)).template cast<S>() * g);
  });
  return out;
}

template <typename S>
Tensor<S> sigmoid(const Tensor<S>& x) {
  detail::check_finite(x, "sigmoid");
  ArrayX<S> v = x.values().unaryExpr([](S a) { return detail::stable_sigmoid(a); });
  Tensor<S> out = Tensor<S>::from(x.shape(), std::move(v));
  detail::maybe_record(out, detail::tracked(x),
                       [xi = x.impl(), oi = out.impl()](const ArrayX<S>& g) {
                         xi->accumulate(oi->value * (S(1) - oi->value) * g);
                       });
  return out;
}

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check_same_shape(a, b, "add");
  Tensor<S> out = Tensor<S>::from(a.shape(), ArrayX<S>(a.values() + b.values()));
  detail::maybe_record(out, detail::tracked(a) || detail::tracked(b),
                       [ai = a.impl(), bi = b.impl()](const ArrayX<S>& g) {
                         ai->accumulate(g);
                         bi->accumulate(g);
                       });
  return out;
}

// Hadamard product.
template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check_same_shape(a, b, "mul");
  Tensor<S> out = Tensor<S>::from(a.shape(), ArrayX<S>(a.values() * b.values()));
  detail::maybe_record(out, detail::tracked(a) || detail::tracked(b),
                       [ai = a.impl(), bi = b.impl()](const ArrayX<S>& g) {
                         ai->accumulate(bi->value * g);
                         bi->accumulate(ai->value * g);
                       });
  return out;
}

template <typename S>
Tensor<S> scale(const Tensor<S>& x, S k) {
  Tensor<S> out = Tensor<S>::from(x.shape(), ArrayX<S>(x.values() * k));
  detail::maybe_record(out, detail::tracked(x), [xi = x.impl(), k](const ArrayX<S>& g) {
    xi->accumulate(g * k);
  });
  return out;
}

template <typename S>
Tensor<S> sum(const Tensor<S>& x) {
  Tensor<S> out = Tensor<S>::scalar(x.values().sum());
  detail::maybe_record(out, detail::tracked(x), [xi = x.impl()](const ArrayX<S>& g) {
    xi->accumulate(ArrayX<S>::Constant(xi->value.size(), g[0]));
  });
  return out;
}

template <typename S>
Tensor<S> mean(const Tensor<S>& x) {
  S inv = S(1) / static_cast<S>(x.size());
  Tensor<S> out = Tensor<S>::scalar(x.values().sum() * inv);
  detail::maybe_record(out, detail::tracked(x), [xi = x.impl(), inv](const ArrayX<S>& g) {
    xi->accumulate(ArrayX<S>::Constant(xi->value.size(), g[0] * inv));
  });
  return out;
}

// ---------------------------------------------------------------------------
// Shape ops

// Same data, new extents. Copies; gradients pass through unchanged.
template <typename S>
Tensor<S> reshape(const Tensor<S>& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw ShapeError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape) +
                     " changes element count");
  }
  Tensor<S> out = Tensor<S>::from(std::move(shape), ArrayX<S>(x.values()));
  detail::maybe_record(out, detail::tracked(x),
                       [xi = x.impl()](const ArrayX<S>& g) { xi->accumulate(g); });
  return out;
}

template <typename S>
Tensor<S> concat(std::span<const Tensor<S>> parts, int axis) {
  if (parts.empty()) throw ContractError("concat: empty operand list");
  const Shape& s0 = parts[0].shape();
  int rank = static_cast<int>(s0.size());
  if (axis < 0 || axis >= rank) throw ShapeError("concat: axis out of range");
  int axis_total = 0;
  for (const auto& p : parts) {
    if (p.rank() != rank) throw ShapeError("concat: rank mismatch");
    for (int d = 0; d < rank; ++d) {
      if (d != axis && p.dim(d) != s0[static_cast<size_t>(d)]) {
        throw ShapeError("concat: extent mismatch on non-concat axis " + std::to_string(d) +
                         ": " + shape_str(p.shape()) + " vs " + shape_str(s0));
      }
    }
    axis_total += p.dim(axis);
  }
  Shape out_shape = s0;
  out_shape[static_cast<size_t>(axis)] = axis_total;

  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= s0[static_cast<size_t>(d)];
  for (int d = axis + 1; d < rank; ++d) inner *= s0[static_cast<size_t>(d)];

  ArrayX<S> v(numel(out_shape));
  int64_t out_row = static_cast<int64_t>(axis_total) * inner;
  int64_t offset = 0;
  for (const auto& p : parts) {
    int64_t block = static_cast<int64_t>(p.dim(axis)) * inner;
    for (int64_t o = 0; o < outer; ++o) {
      v.segment(o * out_row + offset, block) = p.values().segment(o * block, block);
    }
    offset += block;
  }
  Tensor<S> out = Tensor<S>::from(std::move(out_shape), std::move(v));

  bool any = false;
  std::vector<std::shared_ptr<TensorImpl<S>>> impls;
  impls.reserve(parts.size());
  for (const auto& p : parts) {
    any = any || detail::tracked(p);
    impls.push_back(p.impl());
  }
  detail::maybe_record(out, any,
                       [impls = std::move(impls), outer, inner, out_row](const ArrayX<S>& g) {
                         int64_t offset = 0;
                         for (const auto& pi : impls) {
                           int64_t block = pi->value.size() / outer;
                           if (pi->requires_grad) {
                             if (pi->grad.size() == 0) pi->grad = ArrayX<S>::Zero(pi->value.size());
                             for (int64_t o = 0; o < outer; ++o) {
                               pi->grad.segment(o * block, block) +=
                                   g.segment(o * out_row + offset, block);
                             }
                           }
                           offset += block;
                         }
                       });
  return out;
}

template <typename S>
Tensor<S> concat(std::initializer_list<Tensor<S>> parts, int axis) {
  std::vector<Tensor<S>> v(parts);
  return concat(std::span<const Tensor<S>>(v), axis);
}

// Stacks rank-1 tensors of equal length into an [n x d] matrix.
template <typename S>
Tensor<S> stack_rows(std::span<const Tensor<S>> rows) {
  if (rows.empty()) throw ContractError("stack_rows: empty operand list");
  int d = rows[0].dim(0);
  for (const auto& r : rows) {
    if (r.rank() != 1 || r.dim(0) != d) {
      throw ShapeError("stack_rows: expected rank-1 tensors of length " + std::to_string(d));
    }
  }
  int n = static_cast<int>(rows.size());
  ArrayX<S> v(static_cast<int64_t>(n) * d);
  for (int i = 0; i < n; ++i) v.segment(static_cast<int64_t>(i) * d, d) = rows[static_cast<size_t>(i)].values();
  Tensor<S> out = Tensor<S>::from({n, d}, std::move(v));

  bool any = false;
  std::vector<std::shared_ptr<TensorImpl<S>>> impls;
  impls.reserve(rows.size());
  for (const auto& r : rows) {
    any = any || detail::tracked(r);
    impls.push_back(r.impl());
  }
  detail::maybe_record(out, any, [impls = std::move(impls), d](const ArrayX<S>& g) {
    for (size_t i = 0; i < impls.size(); ++i) {
      impls[i]->accumulate(g.segment(static_cast<int64_t>(i) * d, d));
    }
  });
  return out;
}

// Selects row i of an [r x d] matrix; backward scatter-adds into that row.
// This is the embedding-lookup primitive.
template <typename S>
Tensor<S> row(const Tensor<S>& m, int i) {
  if (m.rank() != 2) throw ShapeError("row: expected rank-2 tensor");
  int rows_n = m.dim(0), d = m.dim(1);
  if (i < 0 || i >= rows_n) throw ContractError("row: index out of range");
  Tensor<S> out = Tensor<S>::from({d}, ArrayX<S>(m.values().segment(static_cast<int64_t>(i) * d, d)));
  detail::maybe_record(out, detail::tracked(m), [mi = m.impl(), i, d](const ArrayX<S>& g) {
    if (!mi->requires_grad) return;
    if (mi->grad.size() == 0) mi->grad = ArrayX<S>::Zero(mi->value.size());
    mi->grad.segment(static_cast<int64_t>(i) * d, d) += g;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Linear algebra

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rank() != 2 || b.rank() != 2) throw ShapeError("matmul: expected rank-2 operands");
  int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2) {
    throw ShapeError("matmul: inner dimensions disagree: " + shape_str(a.shape()) + " * " +
                     shape_str(b.shape()));
  }
  MapConstMat<S> A(a.values().data(), m, k);
  MapConstMat<S> B(b.values().data(), k, n);
  ArrayX<S> v(static_cast<int64_t>(m) * n);
  MapMat<S>(v.data(), m, n).noalias() = A * B;
  Tensor<S> out = Tensor<S>::from({m, n}, std::move(v));
  detail::maybe_record(out, detail::tracked(a) || detail::tracked(b),
                       [ai = a.impl(), bi = b.impl(), m, k, n](const ArrayX<S>& g) {
                         MapConstMat<S> G(g.data(), m, n);
                         MapConstMat<S> A(ai->value.data(), m, k);
                         MapConstMat<S> B(bi->value.data(), k, n);
                         if (ai->requires_grad) {
                           if (ai->grad.size() == 0) ai->grad = ArrayX<S>::Zero(ai->value.size());
                           MapMat<S>(ai->grad.data(), m, k).noalias() += G * B.transpose();
                         }
                         if (bi->requires_grad) {
                           if (bi->grad.size() == 0) bi->grad = ArrayX<S>::Zero(bi->value.size());
                           MapMat<S>(bi->grad.data(), k, n).noalias() += A.transpose() * G;
                         }
                       });
  return out;
}

// y = W x for rank-2 W and rank-1 x.
template <typename S>
Tensor<S> matvec(const Tensor<S>& w, const Tensor<S>& x) {
  if (w.rank() != 2 || x.rank() != 1) throw ShapeError("matvec: expected [m x k] and [k]");
  int m = w.dim(0), k = w.dim(1);
  if (x.dim(0) != k) {
    throw ShapeError("matvec: dimensions disagree: " + shape_str(w.shape()) + " * " +
                     shape_str(x.shape()));
  }
  MapConstMat<S> W(w.values().data(), m, k);
  ArrayX<S> v(m);
  Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>>(v.data(), m).noalias() =
      W * x.values().matrix();
  Tensor<S> out = Tensor<S>::from({m}, std::move(v));
  detail::maybe_record(
      out, detail::tracked(w) || detail::tracked(x),
      [wi = w.impl(), xi = x.impl(), m, k](const ArrayX<S>& g) {
        MapConstMat<S> W(wi->value.data(), m, k);
        if (wi->requires_grad) {
          if (wi->grad.size() == 0) wi->grad = ArrayX<S>::Zero(wi->value.size());
          MapMat<S>(wi->grad.data(), m, k).noalias() += g.matrix() * xi->value.matrix().transpose();
        }
        if (xi->requires_grad) {
          if (xi->grad.size() == 0) xi->grad = ArrayX<S>::Zero(xi->value.size());
          xi->grad.matrix().noalias() += W.transpose() * g.matrix();
        }
      });
  return out;
}

// y = w^T V for rank-1 w over the rows of rank-2 V (attention-weighted sum).
template <typename S>
Tensor<S> vecmat(const Tensor<S>& w, const Tensor<S>& v) {
  if (w.rank() != 1 || v.rank() != 2) throw ShapeError("vecmat: expected [n] and [n x d]");
  int n = v.dim(0), d = v.dim(1);
  if (w.dim(0) != n) {
    throw ShapeError("vecmat: dimensions disagree: " + shape_str(w.shape()) + " * " +
                     shape_str(v.shape()));
  }
  MapConstMat<S> V(v.values().data(), n, d);
  ArrayX<S> out_v(d);
  Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>>(out_v.data(), d).noalias() =
      V.transpose() * w.values().matrix();
  Tensor<S> out = Tensor<S>::from({d}, std::move(out_v));
  detail::maybe_record(
      out, detail::tracked(w) || detail::tracked(v),
      [wi = w.impl(), vi = v.impl(), n, d](const ArrayX<S>& g) {
        MapConstMat<S> V(vi->value.data(), n, d);
        if (wi->requires_grad) {
          if (wi->grad.size() == 0) wi->grad = ArrayX<S>::Zero(wi->value.size());
          wi->grad.matrix().noalias() += V * g.matrix();
        }
        if (vi->requires_grad) {
          if (vi->grad.size() == 0) vi->grad = ArrayX<S>::Zero(vi->value.size());
          MapMat<S>(vi->grad.data(), n, d).noalias() += wi->value.matrix() * g.matrix().transpose();
        }
      });
  return out;
}

// ---------------------------------------------------------------------------
// Convolution

enum class Padding { Valid, Same };

namespace detail {

struct ConvPlan {
  int out_w = 0, out_h = 0;
  int pad_x = 0, pad_y = 0;
};

inline ConvPlan conv_plan(int w, int h, int k, int stride, Padding padding) {
  if (stride < 1) throw ContractError("conv2d: stride must be >= 1");
  ConvPlan p;
  if (padding == Padding::Valid) {
    if (k > w || k > h) {
      throw ShapeError("conv2d: kernel " + std::to_string(k) + " larger than input " +
                       std::to_string(w) + "x" + std::to_string(h));
    }
    p.out_w = (w - k) / stride + 1;
    p.out_h = (h - k) / stride + 1;
  } else {
    p.out_w = (w + stride - 1) / stride;
    p.out_h = (h + stride - 1) / stride;
    p.pad_x = std::max((p.out_w - 1) * stride + k - w, 0) / 2;
    p.pad_y = std::max((p.out_h - 1) * stride + k - h, 0) / 2;
  }
  return p;
}

// Feature maps are [w, h, c] row-major with channels fastest, so an im2col
// row is a sequence of cin-contiguous runs and GEMM output lands directly
// in [out_w, out_h, cout] layout.
template <typename S>
MatrixRM<S> im2col(const ArrayX<S>& x, int w, int h, int cin, int k, int stride,
                   const ConvPlan& p) {
  MatrixRM<S> cols = MatrixRM<S>::Zero(static_cast<int64_t>(p.out_w) * p.out_h,
                                       static_cast<int64_t>(k) * k * cin);
  for (int ox = 0; ox < p.out_w; ++ox) {
    int ix0 = ox * stride - p.pad_x;
    for (int oy = 0; oy < p.out_h; ++oy) {
      int iy0 = oy * stride - p.pad_y;
      int64_t r = static_cast<int64_t>(ox) * p.out_h + oy;
      for (int kx = 0; kx < k; ++kx) {
        int ix = ix0 + kx;
        if (ix < 0 || ix >= w) continue;
        for (int ky = 0; ky < k; ++ky) {
          int iy = iy0 + ky;
          if (iy < 0 || iy >= h) continue;
          cols.row(r).segment(static_cast<int64_t>(kx * k + ky) * cin, cin) =
              x.segment((static_cast<int64_t>(ix) * h + iy) * cin, cin).transpose();
        }
      }
    }
  }
  return cols;
}

template <typename S>
void col2im_add(ArrayX<S>& dx, const MatrixRM<S>& dcols, int w, int h, int cin, int k, int stride,
                const ConvPlan& p) {
  for (int ox = 0; ox < p.out_w; ++ox) {
    int ix0 = ox * stride - p.pad_x;
    for (int oy = 0; oy < p.out_h; ++oy) {
      int iy0 = oy * stride - p.pad_y;
      int64_t r = static_cast<int64_t>(ox) * p.out_h + oy;
      for (int kx = 0; kx < k; ++kx) {
        int ix = ix0 + kx;
        if (ix < 0 || ix >= w) continue;
        for (int ky = 0; ky < k; ++ky) {
          int iy = iy0 + ky;
          if (iy < 0 || iy >= h) continue;
          dx.segment((static_cast<int64_t>(ix) * h + iy) * cin, cin) +=
              dcols.row(r).segment(static_cast<int64_t>(kx * k + ky) * cin, cin).transpose().array();
        }
      }
    }
  }
}

}  // namespace detail

// 2-D cross-correlation of x[w,h,cin] with kernels[k,k,cin,cout].
template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& kernels, int stride, Padding padding) {
  if (x.rank() != 3) throw ShapeError("conv2d: input must be [w x h x cin]");
  if (kernels.rank() != 4 || kernels.dim(0) != kernels.dim(1)) {
    throw ShapeError("conv2d: kernels must be [k x k x cin x cout]");
  }
  int w = x.dim(0), h = x.dim(1), cin = x.dim(2);
  int k = kernels.dim(0), kcin = kernels.dim(2), cout = kernels.dim(3);
  if (kcin != cin) {
    throw ShapeError("conv2d: input channels " + std::to_string(cin) +
                     " do not match kernel channels " + std::to_string(kcin));
  }
  OpCounters::bump_conv2d();
  detail::ConvPlan plan = detail::conv_plan(w, h, k, stride, padding);

  MatrixRM<S> cols = detail::im2col(x.values(), w, h, cin, k, stride, plan);
  MapConstMat<S> km(kernels.values().data(), static_cast<int64_t>(k) * k * cin, cout);
  ArrayX<S> v(static_cast<int64_t>(plan.out_w) * plan.out_h * cout);
  MapMat<S>(v.data(), cols.rows(), cout).noalias() = cols * km;
  Tensor<S> out = Tensor<S>::from({plan.out_w, plan.out_h, cout}, std::move(v));

  detail::maybe_record(
      out, detail::tracked(x) || detail::tracked(kernels),
      [xi = x.impl(), ki = kernels.impl(), cols = std::move(cols), w, h, cin, k, cout, stride,
       plan](const ArrayX<S>& g) {
        MapConstMat<S> G(g.data(), cols.rows(), cout);
        if (ki->requires_grad) {
          if (ki->grad.size() == 0) ki->grad = ArrayX<S>::Zero(ki->value.size());
          MapMat<S>(ki->grad.data(), cols.cols(), cout).noalias() += cols.transpose() * G;
        }
        if (xi->requires_grad) {
          if (xi->grad.size() == 0) xi->grad = ArrayX<S>::Zero(xi->value.size());
          MapConstMat<S> km(ki->value.data(), cols.cols(), cout);
          MatrixRM<S> dcols = G * km.transpose();
          detail::col2im_add(xi->grad, dcols, w, h, cin, k, stride, plan);
        }
      });
  return out;
}

// Adds a per-channel bias to a [w, h, c] map.
template <typename S>
Tensor<S> channel_bias(const Tensor<S>& f, const Tensor<S>& b) {
  if (f.rank() != 3 || b.rank() != 1 || b.dim(0) != f.dim(2)) {
    throw ShapeError("channel_bias: map " + shape_str(f.shape()) + " vs bias " +
                     shape_str(b.shape()));
  }
  int64_t wh = static_cast<int64_t>(f.dim(0)) * f.dim(1);
  int c = f.dim(2);
  ArrayX<S> v = f.values();
  MapMat<S> m(v.data(), wh, c);
  m.rowwise() += b.values().matrix().transpose();
  Tensor<S> out = Tensor<S>::from(f.shape(), std::move(v));
  detail::maybe_record(out, detail::tracked(f) || detail::tracked(b),
                       [fi = f.impl(), bi = b.impl(), wh, c](const ArrayX<S>& g) {
                         fi->accumulate(g);
                         if (bi->requires_grad) {
                           if (bi->grad.size() == 0) bi->grad = ArrayX<S>::Zero(c);
                           MapConstMat<S> G(g.data(), wh, c);
                           bi->grad.matrix() += G.colwise().sum().transpose();
                         }
                       });
  return out;
}

// out[x,y,k] = F[x,y,k] * M[k]  (channel-level gating).
template <typename S>
Tensor<S> channel_scale(const Tensor<S>& f, const Tensor<S>& m) {
  if (f.rank() != 3 || m.rank() != 1 || m.dim(0) != f.dim(2)) {
    throw ShapeError("channel_scale: map " + shape_str(f.shape()) + " vs gate " +
                     shape_str(m.shape()));
  }
  int64_t wh = static_cast<int64_t>(f.dim(0)) * f.dim(1);
  int c = f.dim(2);
  ArrayX<S> v(f.size());
  {
    MapConstMat<S> F(f.values().data(), wh, c);
    MapMat<S> O(v.data(), wh, c);
    O = F.array().rowwise() * m.values().matrix().transpose().array();
  }
  Tensor<S> out = Tensor<S>::from(f.shape(), std::move(v));
  detail::maybe_record(
      out, detail::tracked(f) || detail::tracked(m),
      [fi = f.impl(), mi = m.impl(), wh, c](const ArrayX<S>& g) {
        MapConstMat<S> G(g.data(), wh, c);
        if (fi->requires_grad) {
          if (fi->grad.size() == 0) fi->grad = ArrayX<S>::Zero(fi->value.size());
          MapMat<S>(fi->grad.data(), wh, c).array() +=
              G.array().rowwise() * mi->value.matrix().transpose().array();
        }
        if (mi->requires_grad) {
          if (mi->grad.size() == 0) mi->grad = ArrayX<S>::Zero(c);
          MapConstMat<S> F(fi->value.data(), wh, c);
          mi->grad.matrix() += (G.array() * F.array()).matrix().colwise().sum().transpose();
        }
      });
  return out;
}

// ---------------------------------------------------------------------------
// Pooling

enum class Pool { Avg, Max };

// Squeezes the spatial extents of a [w, h, c] map to one value per channel.
// Max routes its gradient to the first argmax position in row-major order.
template <typename S>
Tensor<S> global_pool(Pool op, const Tensor<S>& f) {
  if (f.rank() != 3) throw ShapeError("global_pool: expected [w x h x c]");
  int64_t wh = static_cast<int64_t>(f.dim(0)) * f.dim(1);
  int c = f.dim(2);
  if (wh < 1) throw ShapeError("global_pool: empty spatial extent");
  MapConstMat<S> F(f.values().data(), wh, c);
  ArrayX<S> v(c);
  std::vector<int64_t> argmax;
  if (op == Pool::Avg) {
    v = F.colwise().mean().transpose().array();
  } else {
    argmax.assign(static_cast<size_t>(c), 0);
    for (int ch = 0; ch < c; ++ch) {
      S best = F(0, ch);
      int64_t best_i = 0;
      for (int64_t p = 1; p < wh; ++p) {
        if (F(p, ch) > best) {
          best = F(p, ch);
          best_i = p;
        }
      }
      v[ch] = best;
      argmax[static_cast<size_t>(ch)] = best_i;
    }
  }
  Tensor<S> out = Tensor<S>::from({c}, std::move(v));
  detail::maybe_record(
      out, detail::tracked(f),
      [fi = f.impl(), op, wh, c, argmax = std::move(argmax)](const ArrayX<S>& g) {
        if (!fi->requires_grad) return;
        if (fi->grad.size() == 0) fi->grad = ArrayX<S>::Zero(fi->value.size());
        MapMat<S> dF(fi->grad.data(), wh, c);
        if (op == Pool::Avg) {
          S inv = S(1) / static_cast<S>(wh);
          dF.array().rowwise() += g.matrix().transpose().array() * inv;
        } else {
          for (int ch = 0; ch < c; ++ch) dF(argmax[static_cast<size_t>(ch)], ch) += g[ch];
        }
      });
  return out;
}

// ---------------------------------------------------------------------------
// Softmax

// Masked, max-subtracted softmax over a rank-1 score vector. Masked
// positions are exactly zero in the output; mask may be empty (= all kept).
template <typename S>
Tensor<S> softmax(const Tensor<S>& scores, const std::vector<uint8_t>& mask = {}) {
  if (scores.rank() != 1) throw ShapeError("softmax: expected rank-1 scores");
  int n = scores.dim(0);
  if (!mask.empty() && static_cast<int>(mask.size()) != n) {
    throw ShapeError("softmax: mask length does not match scores");
  }
  auto kept = [&mask](int i) { return mask.empty() || mask[static_cast<size_t>(i)] != 0; };

  S hi = std::numeric_limits<S>::lowest();
  bool any = false;
  for (int i = 0; i < n; ++i) {
    if (kept(i)) {
      any = true;
      hi = std::max(hi, scores.value_at(i));
    }
  }
  if (!any) throw EmptyAttentionError("softmax: every position is masked");

  ArrayX<S> v = ArrayX<S>::Zero(n);
  S z = S(0);
  for (int i = 0; i < n; ++i) {
    if (kept(i)) {
      v[i] = std::exp(scores.value_at(i) - hi);
      z += v[i];
    }
  }
  v /= z;
  Tensor<S> out = Tensor<S>::from({n}, std::move(v));
  detail::maybe_record(out, detail::tracked(scores),
                       [si = scores.impl(), oi = out.impl()](const ArrayX<S>& g) {
                         // dx = y * (g - <g, y>); masked entries have y = 0.
                         S dot = (g * oi->value).sum();
                         si->accumulate(oi->value * (g - dot));
                       });
  return out;
}

}  // namespace hccm

#endif  // HCCM_TENSOR_HPP_
