// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#include "dibod/hsic.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <vector>

#include "dibod/error.hpp"

namespace dibod {
namespace {

// Row-and-column centring, H K H, via broadcasting rather than two n^3 products.
Var center(const Var& k) {
  const double n = static_cast<double>(k.rows());
  Var row_means = scale(sum_rows(k), 1.0 / n);
  Var col_means = mean_cols(k);
  return add(sub(sub(k, row_means), col_means), mean(k));
}

Var rbf_gram(const Var& x, double sigma) {
  Var sq = sum_rows(square(x));
  Var dist2 = add(add(scale(matmul(x, transpose(x)), -2.0), sq), transpose(sq));
  return exp(scale(dist2, -1.0 / (2.0 * sigma * sigma)));
}

}  // namespace

void KernelSpec::validate() const {
  if (bandwidth && !(*bandwidth > 0.0 && std::isfinite(*bandwidth))) {
    throw ConfigError("kernel", "rbf bandwidth must be a positive finite number");
  }
}

KernelSpec parse_kernel(const std::string& text) {
  if (text == "linear") return KernelSpec::linear();
  if (text == "rbf") return KernelSpec::rbf_median();
  if (text.rfind("rbf:", 0) == 0) {
    double sigma = 0.0;
    const char* first = text.data() + 4;
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, sigma);
    if (ec != std::errc() || ptr != last) throw ConfigError("kernel", "cannot parse bandwidth in '" + text + "'");
    KernelSpec spec = KernelSpec::rbf(sigma);
    spec.validate();
    return spec;
  }
  throw ConfigError("kernel", "unknown kernel '" + text + "'");
}

double median_pairwise_distance(const Tensor& x) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  std::vector<double> dist;
  dist.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = x(i, c) - x(j, c);
        s += diff * diff;
      }
      dist.push_back(std::sqrt(s));
    }
  }
  if (dist.empty()) return 0.0;
  const auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  if (dist.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(dist.begin(), mid);
  return 0.5 * (lower + upper);
}

Var gram(const Var& x, const KernelSpec& spec) {
  spec.validate();
  if (x.rows() < 2) throw ContractError("gram needs at least two samples");
  if (spec.kind == KernelKind::linear) return matmul(x, transpose(x));
  double sigma = spec.bandwidth.value_or(0.0);
  if (!spec.bandwidth) {
    sigma = median_pairwise_distance(x.value());
    if (!(sigma > 0.0)) throw DomainError("median bandwidth is zero: all samples are identical");
  }
  return rbf_gram(x, sigma);
}

Var hsic(const Var& a, const Var& b, const KernelSpec& spec) {
  if (a.rows() < 2 || a.rows() != b.rows()) throw ContractError("hsic needs two equal-sized samples of size >= 2");
  auto kernel_for = [&](const Var& x) {
    if (spec.kind == KernelKind::rbf && !spec.bandwidth) {
      const double sigma = median_pairwise_distance(x.value());
      return gram(x, KernelSpec::rbf(sigma > 0.0 ? sigma : 1.0));
    }
    return gram(x, spec);
  };
  const double n1 = static_cast<double>(a.rows() - 1);
  return scale(sum(mul(center(kernel_for(a)), kernel_for(b))), 1.0 / (n1 * n1));
}

}  // namespace dibod
