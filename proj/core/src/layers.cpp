// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#include "dibod/layers.hpp"

#include <cmath>

namespace dibod {

Tensor glorot_uniform(std::size_t in, std::size_t out, Rng& rng) {
  Tensor w({in, out});
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  for (double& v : w.values()) v = (2.0 * uniform01(rng) - 1.0) * limit;
  return w;
}

Linear::Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng, bool with_bias)
    : has_bias_(with_bias) {
  weight_.name = name + ".weight";
  weight_.value = glorot_uniform(in, out, rng);
  if (has_bias_) {
    bias_.name = name + ".bias";
    bias_.value = Tensor::zeros(1, out);
  }
}

Var Linear::operator()(Tape& tape, const Var& x, bool track) {
  Var y = matmul(x, bind(tape, weight_, track));
  return has_bias_ ? add(y, bind(tape, bias_, track)) : y;
}

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight_);
  if (has_bias_) out.push_back(&bias_);
}

Mlp::Mlp(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out, Rng& rng)
    : first_(name + ".0", in, hidden, rng), second_(name + ".1", hidden, out, rng) {}

Var Mlp::operator()(Tape& tape, const Var& x, bool track) {
  return second_(tape, relu(first_(tape, x, track)), track);
}

void Mlp::collect(std::vector<Parameter*>& out) {
  first_.collect(out);
  second_.collect(out);
}

}  // namespace dibod
