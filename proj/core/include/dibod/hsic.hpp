// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>

#include "dibod/autodiff.hpp"

namespace dibod {

enum class KernelKind { linear, rbf };

/// Kernel choice. An rbf kernel without a bandwidth uses the median pairwise distance.
struct KernelSpec {
  KernelKind kind = KernelKind::rbf;
  std::optional<double> bandwidth;

  static KernelSpec linear() { return {KernelKind::linear, std::nullopt}; }
  static KernelSpec rbf_median() { return {KernelKind::rbf, std::nullopt}; }
  static KernelSpec rbf(double sigma) { return {KernelKind::rbf, sigma}; }

  void validate() const;
};

/// "linear", "rbf" (median bandwidth) or "rbf:<sigma>". Throws ConfigError otherwise.
KernelSpec parse_kernel(const std::string& text);

/// Median of the pairwise Euclidean distances between rows (i < j).
double median_pairwise_distance(const Tensor& x);

/// n x n kernel matrix. Throws ContractError for n < 2 and DomainError when
/// the median bandwidth is requested on identical samples.
Var gram(const Var& x, const KernelSpec& spec);

/// Biased HSIC, tr(K H L H) / (n - 1)^2. The bandwidth, when chosen by the
/// median heuristic, is treated as a constant; a constant input falls back to
/// sigma = 1, which yields exactly zero.
Var hsic(const Var& a, const Var& b, const KernelSpec& spec);

}  // namespace dibod
