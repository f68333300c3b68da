// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dibod/autodiff.hpp"

namespace dibod {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment estimates persist across step() calls and
/// are keyed by position in the parameter list given at construction.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Parameter*> params, AdamOptions options);

  /// Applies one update. Throws ContractError if a parameter has no gradient.
  void step();
  void zero_grad();

  const AdamOptions& options() const noexcept { return options_; }
  std::int64_t steps_taken() const noexcept { return t_; }
  std::span<Parameter* const> parameters() const noexcept { return params_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  AdamOptions options_;
  std::int64_t t_ = 0;
};

}  // namespace dibod
