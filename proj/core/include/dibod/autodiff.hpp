// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

// Reverse-mode automatic differentiation over dense matrices.
//
// A Tape records every operation applied to its Vars in execution order.
// Calling Tape::backward(loss) walks the record once in reverse and
// accumulates d(loss)/d(leaf) into every trainable Parameter that was bound
// with Tape::leaf. A tape is single-use per forward pass: build a new one for
// each step. Distinct tapes share no state.

#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "dibod/tensor.hpp"

namespace dibod {

/// A named, persistent model weight. `grad` stays empty until a backward pass
/// or zero_grad() populates it; optimizers treat an empty grad as missing.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  void zero_grad();
};

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
/// References returned by value() stay valid for the tape's lifetime.
class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return tape_ != nullptr; }
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double item() const { return value().item(); }
  Tape& tape() const;
  std::size_t id() const noexcept { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  /// Receives the node's value and the gradient flowing into it; routes it to the inputs.
  using BackwardFn = std::function<void(Tape&, const Tensor& out_value, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// A value that never receives gradient.
  Var constant(Tensor value);
  /// Binds a parameter. Gradient reaches `p.grad` only when `p.trainable`.
  Var leaf(Parameter& p);
  /// Binds a parameter's value without tracking gradient, whatever `trainable` says.
  Var frozen(const Parameter& p) { return constant(p.value); }
  /// A differentiable leaf not tied to a parameter; read its gradient with grad().
  Var input(Tensor value);

  /// Seeds d(loss)/d(loss) = 1 and propagates. Parameter gradients accumulate
  /// across calls; node gradients are recomputed each call.
  void backward(const Var& loss);

  /// Gradient of the last backward pass at `v` (zeros when none reached it).
  Tensor grad(const Var& v) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  const Tensor& value(const Var& v) const { return nodes_[v.id()].value; }
  bool tracks(const Var& v) const noexcept { return nodes_[v.id()].tracked; }

  /// Appends an operation node. `fn` runs during backward only if some input is tracked.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  /// Gradient accumulator for `v`, zero-initialised on first use within a backward pass.
  Tensor& grad_of(const Var& v);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool tracked = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  Var push(Node node);
  void check_owned(const Var& v) const;

  std::deque<Node> nodes_;  // stable addresses: values stay referenceable while recording
};

// --- Differentiable operations -------------------------------------------
//
// Binary elementwise operations accept `b` either with the shape of `a`, as a
// 1 x cols row (broadcast down rows), as a rows x 1 column (broadcast across
// columns), or as a 1 x 1 scalar.

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double offset);
Var neg(const Var& a);

Var relu(const Var& a);
Var exp(const Var& a);
/// Throws DomainError if any entry is <= 0.
Var log(const Var& a);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var square(const Var& a);
/// max(a, floor) elementwise; gradient is zero where the floor is active.
Var clamp_min(const Var& a, double floor);

/// Row-wise softmax with max-subtraction.
Var softmax_rows(const Var& a);
/// Row-wise log-softmax via log-sum-exp.
Var log_softmax_rows(const Var& a);
/// Each row scaled to unit Euclidean norm (rows of norm < 1e-12 are left unscaled).
Var l2_normalize_rows(const Var& a);

Var sum(const Var& a);
Var mean(const Var& a);
/// rows x 1 vector of row sums.
Var sum_rows(const Var& a);
/// 1 x cols vector of column sums.
Var sum_cols(const Var& a);
Var mean_cols(const Var& a);

/// Mean squared difference over all entries (scalar).
Var mse(const Var& a, const Var& b);
/// -(1/n) sum_i sum_c target_ic * log(p_ic) for probability rows `p`.
/// Throws DomainError when a probability paired with a nonzero target is <= 0.
Var cross_entropy_rows(const Var& probabilities, const Tensor& target);
/// Mean cross-entropy of integer labels against row logits (log-sum-exp stabilised).
Var cross_entropy_logits(const Var& logits, std::span<const int> labels);

/// 1 x 1 view of entry (r, c).
Var pick(const Var& a, std::size_t r, std::size_t c);
/// rows x 1 vector whose i-th entry is a(i, index[i]).
Var pick_per_row(const Var& a, std::span<const int> index);
Var slice_cols(const Var& a, std::size_t begin, std::size_t end);
/// Selected rows, in the given order (indices may repeat).
Var gather_rows(const Var& a, std::span<const std::size_t> index);
/// Output of `out_rows` rows where row index[i] accumulates row i of `a`.
Var scatter_add_rows(const Var& a, std::span<const std::size_t> index, std::size_t out_rows);

// --- Non-differentiable helpers used by oracles and reporting --------------

/// Row-wise argmax.
std::vector<int> argmax_rows(const Tensor& t);
Tensor softmax_rows(const Tensor& logits);
/// 64-bit FNV-1a over the exact bytes of the values of `params`.
std::uint64_t checksum(std::span<const Parameter* const> params);

}  // namespace dibod
