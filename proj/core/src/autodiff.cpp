// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#include "dibod/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "dibod/error.hpp"

namespace dibod {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
MutMap as_matrix(Tensor& t) {
  return MutMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

Tensor::Shape matrix_shape(std::size_t r, std::size_t c) { return {r, c}; }

enum class Broadcast { kSame, kRow, kColumn, kScalar };

Broadcast classify(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::kSame;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::kRow;
  if (b.cols() == 1 && b.rows() == a.rows()) return Broadcast::kColumn;
  if (b.size() == 1) return Broadcast::kScalar;
  throw DimensionError(std::string(op) + ": cannot broadcast " + shape_string(b) + " onto " + shape_string(a));
}

inline std::size_t b_index(Broadcast mode, std::size_t r, std::size_t c, std::size_t cols) {
  switch (mode) {
    case Broadcast::kSame: return r * cols + c;
    case Broadcast::kRow: return c;
    case Broadcast::kColumn: return r;
    case Broadcast::kScalar: return 0;
  }
  return 0;
}

// f(x, y) plus partials df/dx and df/dy, evaluated elementwise with broadcasting of `b`.
template <class F, class Dx, class Dy>
Var binary(const Var& a, const Var& b, const char* name, F f, Dx dfdx, Dy dfdy) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast mode = classify(av, bv, name);
  const std::size_t rows = av.rows();
  const std::size_t cols = av.cols();
  Tensor out(matrix_shape(rows, cols));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      out[r * cols + c] = f(av[r * cols + c], bv[b_index(mode, r, c, cols)]);
    }
  }
  return a.tape().record(std::move(out), {a, b}, [a, b, mode, rows, cols, dfdx, dfdy](Tape& tape, const Tensor&, const Tensor& g) {
    const Tensor& x = tape.value(a);
    const Tensor& y = tape.value(b);
    if (tape.tracks(a)) {
      Tensor& ga = tape.grad_of(a);
      for (std::size_t i = 0; i < rows * cols; ++i) {
        ga[i] += g[i] * dfdx(x[i], y[b_index(mode, i / cols, i % cols, cols)]);
      }
    }
    if (tape.tracks(b)) {
      Tensor& gb = tape.grad_of(b);
      for (std::size_t i = 0; i < rows * cols; ++i) {
        const std::size_t j = b_index(mode, i / cols, i % cols, cols);
        gb[j] += g[i] * dfdy(x[i], y[j]);
      }
    }
  });
}

// f(x) with derivative expressed through input x and output y.
template <class F, class D>
Var unary(const Var& a, F f, D dfdx) {
  const Tensor& av = a.value();
  Tensor out(matrix_shape(av.rows(), av.cols()));
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  return a.tape().record(std::move(out), {a}, [a, dfdx](Tape& tape, const Tensor& y, const Tensor& g) {
    const Tensor& x = tape.value(a);
    Tensor& ga = tape.grad_of(a);
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g[i] * dfdx(x[i], y[i]);
  });
}

void require_same_tape(const Var& a, const Var& b, const char* op) {
  if (&a.tape() != &b.tape()) throw ContractError(std::string(op) + ": operands live on different tapes");
}

}  // namespace

void Parameter::zero_grad() {
  if (grad.shape() != value.shape()) {
    grad = Tensor(value.shape());
  } else {
    grad.fill(0.0);
  }
}

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("use of an unbound Var");
  return tape_->value(*this);
}

Tape& Var::tape() const {
  if (!tape_) throw ContractError("use of an unbound Var");
  return *tape_;
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::check_owned(const Var& v) const {
  if (!v.valid() || &v.tape() != this || v.id() >= nodes_.size()) {
    throw ContractError("Var does not belong to this tape");
  }
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::leaf(Parameter& p) {
  Node n;
  n.value = p.value;
  n.tracked = p.trainable;
  n.param = &p;
  return push(std::move(n));
}

Var Tape::input(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.tracked = true;
  return push(std::move(n));
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  for (const Var& in : inputs) {
    check_owned(in);
    n.tracked = n.tracked || nodes_[in.id()].tracked;
  }
  if (n.tracked) n.backward = std::move(fn);
  return push(std::move(n));
}

Tensor& Tape::grad_of(const Var& v) {
  Node& n = nodes_[v.id()];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

Tensor Tape::grad(const Var& v) const {
  check_owned(v);
  const Node& n = nodes_[v.id()];
  return n.grad.empty() ? Tensor(n.value.shape()) : n.grad;
}

void Tape::backward(const Var& loss) {
  check_owned(loss);
  if (loss.value().size() != 1) {
    throw ContractError("backward needs a scalar loss, got " + shape_string(loss.value()));
  }
  for (Node& n : nodes_) n.grad = Tensor();
  Node& root = nodes_[loss.id()];
  if (root.tracked) root.grad = Tensor(root.value.shape(), 1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.tracked || n.grad.empty() || !n.backward) continue;
    n.backward(*this, n.value, n.grad);
  }
  for (Node& n : nodes_) {
    if (!n.param || !n.tracked) continue;
    Parameter& p = *n.param;
    if (p.grad.shape() != p.value.shape()) p.grad = Tensor(p.value.shape());
    if (n.grad.empty()) continue;
    for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += n.grad[i];
  }
}

// --- linear algebra ---------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  require_same_tape(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_string(av) + " x " + shape_string(bv));
  }
  Tensor out(matrix_shape(av.rows(), bv.cols()));
  as_matrix(out).noalias() = as_matrix(av) * as_matrix(bv);
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor&, const Tensor& g) {
    if (tape.tracks(a)) as_matrix(tape.grad_of(a)).noalias() += as_matrix(g) * as_matrix(tape.value(b)).transpose();
    if (tape.tracks(b)) as_matrix(tape.grad_of(b)).noalias() += as_matrix(tape.value(a)).transpose() * as_matrix(g);
  });
}

Var transpose(const Var& a) {
  const Tensor& av = a.value();
  Tensor out(matrix_shape(av.cols(), av.rows()));
  as_matrix(out) = as_matrix(av).transpose();
  return a.tape().record(std::move(out), {a}, [a](Tape& tape, const Tensor&, const Tensor& g) {
    as_matrix(tape.grad_of(a)) += as_matrix(g).transpose();
  });
}

// --- elementwise --------------------------------------------------------------

Var add(const Var& a, const Var& b) {
  require_same_tape(a, b, "add");
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
  require_same_tape(a, b, "sub");
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
  require_same_tape(a, b, "mul");
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var div(const Var& a, const Var& b) {
  require_same_tape(a, b, "div");
  for (double y : b.value().values()) {
    if (y == 0.0) throw DomainError("div: division by zero");
  }
  return binary(
      a, b, "div", [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Var scale(const Var& a, double factor) {
  const Tensor& av = a.value();
  Tensor out(matrix_shape(av.rows(), av.cols()));
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * factor;
  return a.tape().record(std::move(out), {a}, [a, factor](Tape& tape, const Tensor&, const Tensor& g) {
    Tensor& ga = tape.grad_of(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

Var add_scalar(const Var& a, double offset) {
  const Tensor& av = a.value();
  Tensor out(matrix_shape(av.rows(), av.cols()));
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + offset;
  return a.tape().record(std::move(out), {a}, [a](Tape& tape, const Tensor&, const Tensor& g) {
    Tensor& ga = tape.grad_of(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var relu(const Var& a) {
  const Tensor& av = a.value();
  Tensor out(matrix_shape(av.rows(), av.cols()));
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
  return a.tape().record(std::move(out), {a}, [a](Tape& tape, const Tensor&, const Tensor& g) {
    const Tensor& x = tape.value(a);
    Tensor& ga = tape.grad_of(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > 0.0) ga[i] += g[i];
    }
  });
}

Var exp(const Var& a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
  for (double x : a.value().values()) {
    if (!(x > 0.0)) throw DomainError("log of non-positive value " + std::to_string(x));
  }
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var sigmoid(const Var& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(const Var& a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var square(const Var& a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var clamp_min(const Var& a, double floor) {
  return unary(
      a, [floor](double x) { return x > floor ? x : floor; },
      [floor](double x, double) { return x > floor ? 1.0 : 0.0; });
}

// --- row-wise normalisations --------------------------------------------------

Var softmax_rows(const Var& a) {
  return a.tape().record(softmax_rows(a.value()), {a}, [a](Tape& tape, const Tensor& y, const Tensor& g) {
    Tensor& ga = tape.grad_of(a);
    const std::size_t cols = y.cols();
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < cols; ++c) ga(r, c) += y(r, c) * (g(r, c) - dot);
    }
  });
}

Var log_softmax_rows(const Var& a) {
  const Tensor& av = a.value();
  const std::size_t cols = av.cols();
  Tensor out(matrix_shape(av.rows(), cols));
  for (std::size_t r = 0; r < av.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) mx = std::max(mx, av(r, c));
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += std::exp(av(r, c) - mx);
    const double lse = mx + std::log(s);
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = av(r, c) - lse;
  }
  return a.tape().record(std::move(out), {a}, [a](Tape& tape, const Tensor& y, const Tensor& g) {
    Tensor& ga = tape.grad_of(a);
    const std::size_t cols = y.cols();
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double gs = 0.0;
      for (std::size_t c = 0; c < cols; ++c) gs += g(r, c);
      for (std::size_t c = 0; c < cols; ++c) ga(r, c) += g(r, c) - std::exp(y(r, c)) * gs;
    }
  });
}

Var l2_normalize_rows(const Var& a) {
  const Tensor& av = a.value();
  const std::size_t cols = av.cols();
  Tensor out(matrix_shape(av.rows(), cols));
  std::vector<double> norms(av.rows());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += av(r, c) * av(r, c);
    norms[r] = std::sqrt(s);
    const double inv = norms[r] < 1e-12 ? 1.0 : 1.0 / norms[r];
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = av(r, c) * inv;
  }
  return a.tape().record(std::move(out), {a}, [a, norms = std::move(norms)](Tape& tape, const Tensor& y, const Tensor& g) {
    Tensor& ga = tape.grad_of(a);
    const std::size_t cols = y.cols();
    for (std::size_t r = 0; r < y.rows(); ++r) {
      if (norms[r] < 1e-12) {
        for (std::size_t c = 0; c < cols; ++c) ga(r, c) += g(r, c);
        continue;
      }
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += y(r, c) * g(r, c);
      for (std::size_t c = 0; c < cols; ++c) ga(r, c) += (g(r, c) - y(r, c) * dot) / norms[r];
    }
  });
}

// --- reductions -----------------------------------------------------------------

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape().record(Tensor::scalar(s), {a}, [a](Tape& tape, const Tensor&, const Tensor& g) {
    Tensor& ga = tape.grad_of(a);
    for (double& v : ga.values()) v += g[0];
  });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var sum_rows(const Var& a) {
  const Tensor& av = a.value();
  Tensor out(matrix_shape(av.rows(), 1));
  for (std::size_t r = 0; r < av.rows(); ++r) {
    double s = 0.0;
    for (double v : av.row_span(r)) s += v;
    out[r] = s;
  }
  return a.tape().record(std::move(out), {a}, [a](Tape& tape, const Tensor&, const Tensor& g) {
    Tensor& ga = tape.grad_of(a);
    const std::size_t cols = ga.cols();
    for (std::size_t r = 0; r < ga.rows(); ++r) {
      for (std::size_t c = 0; c < cols; ++c) ga(r, c) += g[r];
    }
  });
}

Var sum_cols(const Var& a) {
  const Tensor& av = a.value();
  const std::size_t cols = av.cols();
  Tensor out(matrix_shape(1, cols));
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c] += av(r, c);
  }
  return a.tape().record(std::move(out), {a}, [a](Tape& tape, const Tensor&, const Tensor& g) {
    Tensor& ga = tape.grad_of(a);
    const std::size_t cols = ga.cols();
    for (std::size_t r = 0; r < ga.rows(); ++r) {
      for (std::size_t c = 0; c < cols; ++c) ga(r, c) += g[c];
    }
  });
}

Var mean_cols(const Var& a) { return scale(sum_cols(a), 1.0 / static_cast<double>(a.value().rows())); }

// --- losses -------------------------------------------------------------------

Var mse(const Var& a, const Var& b) {
  require_same_tape(a, b, "mse");
  if (!a.value().same_shape(b.value())) {
    throw DimensionError("mse: shapes " + shape_string(a.value()) + " and " + shape_string(b.value()));
  }
  return mean(square(sub(a, b)));
}

Var cross_entropy_rows(const Var& probabilities, const Tensor& target) {
  const Tensor& p = probabilities.value();
  if (!p.same_shape(target)) {
    throw DimensionError("cross_entropy_rows: shapes " + shape_string(p) + " and " + shape_string(target));
  }
  const double n = static_cast<double>(p.rows());
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (target[i] == 0.0) continue;
    if (!(p[i] > 0.0)) throw DomainError("cross_entropy_rows: non-positive probability with nonzero target");
    loss -= target[i] * std::log(p[i]);
  }
  return probabilities.tape().record(Tensor::scalar(loss / n), {probabilities},
                                     [probabilities, target, n](Tape& tape, const Tensor&, const Tensor& g) {
                                       const Tensor& pv = tape.value(probabilities);
                                       Tensor& gp = tape.grad_of(probabilities);
                                       for (std::size_t i = 0; i < pv.size(); ++i) {
                                         if (target[i] != 0.0) gp[i] -= g[0] * target[i] / (pv[i] * n);
                                       }
                                     });
}

Var cross_entropy_logits(const Var& logits, std::span<const int> labels) {
  const Tensor& lv = logits.value();
  if (labels.size() != lv.rows()) throw DimensionError("cross_entropy_logits: label count differs from rows");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= lv.cols()) throw DimensionError("cross_entropy_logits: label out of range");
  }
  Var ls = log_softmax_rows(logits);
  return scale(sum(pick_per_row(ls, labels)), -1.0 / static_cast<double>(lv.rows()));
}

// --- indexing -----------------------------------------------------------------

Var pick(const Var& a, std::size_t r, std::size_t c) {
  const double v = a.value().at(r, c);
  return a.tape().record(Tensor::scalar(v), {a}, [a, r, c](Tape& tape, const Tensor&, const Tensor& g) {
    Tensor& ga = tape.grad_of(a);
    ga(r, c) += g[0];
  });
}

Var pick_per_row(const Var& a, std::span<const int> index) {
  const Tensor& av = a.value();
  if (index.size() != av.rows()) throw DimensionError("pick_per_row: index count differs from rows");
  Tensor out(matrix_shape(av.rows(), 1));
  std::vector<int> idx(index.begin(), index.end());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    if (idx[r] < 0 || static_cast<std::size_t>(idx[r]) >= av.cols()) throw DimensionError("pick_per_row: index out of range");
    out[r] = av(r, static_cast<std::size_t>(idx[r]));
  }
  return a.tape().record(std::move(out), {a}, [a, idx = std::move(idx)](Tape& tape, const Tensor&, const Tensor& g) {
    Tensor& ga = tape.grad_of(a);
    for (std::size_t r = 0; r < idx.size(); ++r) ga(r, static_cast<std::size_t>(idx[r])) += g[r];
  });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  if (begin >= end || end > av.cols()) throw DimensionError("slice_cols: bad range");
  const std::size_t w = end - begin;
  Tensor out(matrix_shape(av.rows(), w));
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < w; ++c) out(r, c) = av(r, begin + c);
  }
  return a.tape().record(std::move(out), {a}, [a, begin, w](Tape& tape, const Tensor&, const Tensor& g) {
    Tensor& ga = tape.grad_of(a);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < w; ++c) ga(r, begin + c) += g(r, c);
    }
  });
}

Var gather_rows(const Var& a, std::span<const std::size_t> index) {
  const Tensor& av = a.value();
  const std::size_t cols = av.cols();
  if (index.empty()) throw DimensionError("gather_rows: empty index");
  Tensor out(matrix_shape(index.size(), cols));
  std::vector<std::size_t> idx(index.begin(), index.end());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= av.rows()) throw DimensionError("gather_rows: index out of range");
    std::copy_n(av.data() + idx[i] * cols, cols, out.data() + i * cols);
  }
  return a.tape().record(std::move(out), {a}, [a, idx = std::move(idx), cols](Tape& tape, const Tensor&, const Tensor& g) {
    Tensor& ga = tape.grad_of(a);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      double* dst = ga.data() + idx[i] * cols;
      const double* src = g.data() + i * cols;
      for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
    }
  });
}

Var scatter_add_rows(const Var& a, std::span<const std::size_t> index, std::size_t out_rows) {
  const Tensor& av = a.value();
  const std::size_t cols = av.cols();
  if (index.size() != av.rows()) throw DimensionError("scatter_add_rows: index count differs from rows");
  Tensor out(matrix_shape(out_rows, cols));
  std::vector<std::size_t> idx(index.begin(), index.end());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= out_rows) throw DimensionError("scatter_add_rows: index out of range");
    double* dst = out.data() + idx[i] * cols;
    const double* src = av.data() + i * cols;
    for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
  }
  return a.tape().record(std::move(out), {a}, [a, idx = std::move(idx), cols](Tape& tape, const Tensor&, const Tensor& g) {
    Tensor& ga = tape.grad_of(a);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      double* dst = ga.data() + i * cols;
      const double* src = g.data() + idx[i] * cols;
      for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
    }
  });
}

// --- plain tensor helpers -------------------------------------------------------

std::vector<int> argmax_rows(const Tensor& t) {
  std::vector<int> out(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const auto row = t.row_span(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

Tensor softmax_rows(const Tensor& logits) {
  Tensor out(matrix_shape(logits.rows(), logits.cols()));
  const std::size_t cols = logits.cols();
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) mx = std::max(mx, logits(r, c));
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      out(r, c) = std::exp(logits(r, c) - mx);
      s += out(r, c);
    }
    for (std::size_t c = 0; c < cols; ++c) out(r, c) /= s;
  }
  return out;
}

std::uint64_t checksum(std::span<const Parameter* const> params) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const Parameter* p : params) {
    for (double v : p->value.values()) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof(double));
      for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ULL;
      }
    }
  }
  return h;
}

}  // namespace dibod
