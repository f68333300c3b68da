// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dibod/autodiff.hpp"
#include "dibod/rng.hpp"

namespace dibod {

/// Binds `p` to the tape: tracked when `track` is set and the parameter is trainable.
inline Var bind(Tape& tape, Parameter& p, bool track) { return track ? tape.leaf(p) : tape.frozen(p); }

/// Glorot-uniform weight matrix of shape in x out.
Tensor glorot_uniform(std::size_t in, std::size_t out, Rng& rng);

/// x * W + b.
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng, bool with_bias = true);

  Var operator()(Tape& tape, const Var& x, bool track = true);
  void collect(std::vector<Parameter*>& out);

  std::size_t in_features() const noexcept { return weight_.value.rows(); }
  std::size_t out_features() const noexcept { return weight_.value.cols(); }
  Parameter& weight() noexcept { return weight_; }
  Parameter& bias() noexcept { return bias_; }
  bool has_bias() const noexcept { return has_bias_; }

 private:
  Parameter weight_;
  Parameter bias_;
  bool has_bias_ = true;
};

/// Two-layer perceptron: Linear -> ReLU -> Linear.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out, Rng& rng);

  Var operator()(Tape& tape, const Var& x, bool track = true);
  void collect(std::vector<Parameter*>& out);

  std::size_t in_features() const noexcept { return first_.in_features(); }
  std::size_t out_features() const noexcept { return second_.out_features(); }

 private:
  Linear first_;
  Linear second_;
};

}  // namespace dibod
