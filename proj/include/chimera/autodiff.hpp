// SPDX-License-Identifier: Apache-2.0
#pragma once

// Reverse-mode automatic differentiation over dense Tensors.
//
// A Tape records every primitive executed during one forward pass. Nodes are
// appended in execution order, so parents always precede children and a
// single reverse sweep visits each node once. Tapes are not shared between
// threads; separate tapes are independent.

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "chimera/tensor.hpp"

namespace chimera::ad {

class Tape;
class GradSink;

// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape& tape() const { return *tape_; }
  std::uint32_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

// Result of a backward sweep: one gradient per tape node.
class GradientMap {
 public:
  // dRoot/dVar; zeros of the node's shape when no gradient reached it.
  Tensor grad(Var v) const;
  bool reached(Var v) const;

 private:
  friend class Tape;
  std::vector<Tensor> grads_;
  std::vector<Shape> shapes_;
};

class Tape {
 public:
  using BackwardFn = std::function<void(const Tensor& out_grad, GradSink& sink)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf whose requires_grad flag is taken from the tensor.
  Var leaf(Tensor value);
  Var parameter(Tensor value);
  Var constant(Tensor value);

  // Appends an op result. `fn` is dropped when no parent requires grad.
  Var record(Tensor value, std::span<const Var> parents, BackwardFn fn);
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn) {
    return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                  std::move(fn));
  }

  // Sweeps from a scalar root. Does not mutate the tape, so repeated calls
  // yield identical maps.
  GradientMap backward(Var root) const;

  const Tensor& value(Var v) const { return nodes_[v.id()].value; }
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::deque<Node> nodes_;
};

// Gradient accumulator handed to backward closures.
class GradSink {
 public:
  bool wants(Var parent) const;
  // Zero-initialized on first access.
  Tensor& grad(Var parent);

 private:
  friend class Tape;
  GradSink(const Tape& tape, std::vector<Tensor>& grads) : tape_(tape), grads_(grads) {}
  const Tape& tape_;
  std::vector<Tensor>& grads_;
};

// ---------------------------------------------------------------------------
// Primitives. All check shapes and throw ShapeError on mismatch; results with
// NaN/Inf throw NonFiniteError.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
// a[m,n] + row[n] broadcast over rows (row may be [n] or [1,n]).
Var add_row(Var a, Var row);
// a[m,n] * col[m,1] broadcast over columns.
Var mul_col(Var a, Var col);

// [m,k] x [k,n]
Var matmul(Var a, Var b);
// [m,k] x [n,k]^T
Var matmul_nt(Var a, Var b);
// Batched [B,n,k] x [B,m,k]^T -> [B,n,m]
Var bmm_nt(Var a, Var b);

// Column-wise concatenation of rank-2 tensors with equal row counts.
Var concat_cols(std::span<const Var> parts);
Var gather_rows(Var table, std::span<const std::size_t> rows);
Var reshape(Var a, Shape shape);

Var sigmoid(Var a);
Var tanh(Var a);
Var exp(Var a);
// Throws DomainError on any entry <= 0.
Var log(Var a);
Var relu(Var a);
Var clamp_min(Var a, double floor);

// Row-wise maximum [m,n] -> [m,1]; gradient goes to the first maximal entry.
Var max_rows(Var a);
Var sum_rows(Var a);
Var sum_all(Var a);
Var mean_all(Var a);
// Numerically stable row-wise softmax.
Var softmax_rows(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double c, Var a) { return scale(a, c); }
inline Var operator+(double c, Var a) { return add_scalar(a, c); }

// ---------------------------------------------------------------------------
// Finite-difference gradient check.

using MultiFn = std::function<Var(Tape&, std::span<const Var>)>;
using UnaryFn = std::function<Var(Tape&, Var)>;

struct GradCheckResult {
  // max |analytic - numeric| / max(|analytic|_inf, |numeric|_inf)
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
};

// Central differences (f(x+eps) - f(x-eps)) / (2 eps) per coordinate of every
// point tensor, compared against the tape gradient.
GradCheckResult grad_check(const MultiFn& f, const std::vector<Tensor>& points, double eps = 1e-5);
GradCheckResult grad_check(const UnaryFn& f, const Tensor& point, double eps = 1e-5);

}  // namespace chimera::ad
