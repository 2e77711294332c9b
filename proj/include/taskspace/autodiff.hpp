// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "taskspace/tensor.hpp"

namespace taskspace::ad {

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  const Tensor& value() const;
  double item() const;
  const Shape& shape() const { return value().shape(); }
};

/// Single-use gradient tape. Nodes are appended in evaluation order, so the
/// reverse sweep is a plain backwards walk.
class Tape {
 public:
  /// Receives the gradient flowing into the node and accumulates into inputs.
  using Backward = std::function<void(Tape&, const Tensor& grad_out)>;

  Tape() { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var param(Tensor value) { return leaf(std::move(value), nullptr, true); }
  Var constant(Tensor value) { return leaf(std::move(value), nullptr, false); }
  /// Leaf that refers to caller-owned storage; `value` must outlive the tape.
  Var borrow(const Tensor& value, bool requires_grad) { return leaf({}, &value, requires_grad); }

  const Tensor& value(std::uint32_t id) const {
    const Node& n = nodes_[id];
    return n.ref ? *n.ref : n.own;
  }
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
  /// Gradient accumulator for a node, allocated on first use.
  Tensor& grad_slot(std::uint32_t id);
  /// Gradient of the last backward root with respect to `v`; zeros if unreached.
  Tensor grad(Var v) const;

  /// Reverse sweep from a scalar root.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

  /// Append an op result. Throws NumericError naming `op` when the value is not finite.
  Var push(const char* op, Tensor value, std::initializer_list<Var> inputs, Backward fn);
  Var push(const char* op, Tensor value, std::span<const Var> inputs, Backward fn);

 private:
  struct Node {
    Tensor own;
    const Tensor* ref = nullptr;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    const char* op = "leaf";
    Backward backward;
  };

  Var leaf(Tensor value, const Tensor* ref, bool requires_grad);

  std::vector<Node> nodes_;
};

// Differentiable primitives. Shapes are checked; mismatches raise ContractError.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var square(Var a);
/// a (r x c) + bias broadcast over rows; bias has c elements.
Var add_bias(Var a, Var bias);
/// a (m x k) * b (k x n).
Var matmul(Var a, Var b);
/// a (m x k) * b^T where b is (n x k).
Var matmul_nt(Var a, Var b);
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
Var log(Var a);
Var tanh(Var a);
Var gelu(Var a);
Var layer_norm_rows(Var x, Var gamma, Var beta, double eps = 1e-5);
/// Rows of `table` selected by `ids`.
Var embedding(Var table, std::span<const std::uint32_t> ids);
Var concat_rows(Var a, Var b);
Var concat_cols(std::span<const Var> parts);
Var slice_rows(Var a, std::size_t start, std::size_t count);
Var slice_cols(Var a, std::size_t start, std::size_t count);
/// a + mask, where mask is a constant of the same shape (use large negatives to mask).
Var mask_add(Var a, const Tensor& mask);
Var sum(Var a);
Var mean(Var a);
/// Element `index` of a (flat, row-major) as a 1-element tensor.
Var pick(Var a, std::size_t index);
/// Sum of a * w for a constant weight tensor of the same size.
Var dot_const(Var a, const Tensor& w);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }

/// A scalar function of a parameter list, expressed on a tape. The span holds
/// one leaf per parameter tensor, in canonical order.
using Objective = std::function<Var(Tape&, std::span<const Var>)>;

struct ValueAndGrad {
  double value = 0.0;
  ParamVector grad;
};

ValueAndGrad value_and_grad(const Objective& fn, const ParamVector& params);
double evaluate(const Objective& fn, const ParamVector& params);
/// Central differences, one coordinate at a time. h must be positive.
ParamVector finite_diff_grad(const Objective& fn, const ParamVector& params, double h);

/// max_i |a_i - b_i| / max(max_i |b_i|, floor): normwise relative error.
double max_relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-12);

}  // namespace taskspace::ad
