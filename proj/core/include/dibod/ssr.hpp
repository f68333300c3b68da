// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

// Self-adaptive semantic regulariser: per-class confidence thresholds, the
// observation and estimation matrices built from them, and the per-sample
// weights read off the estimation diagonal.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dibod/tensor.hpp"

namespace dibod {

struct SsrState {
  std::vector<double> thresholds;            // t_b, length m
  Tensor observation;                        // O, m x m counts
  Tensor estimation;                         // E, m x m
  std::vector<std::size_t> prediction_counts;  // |X_{pred = a}|
  std::vector<double> kappa;                 // one per sample
};

/// t_b = mean confidence p(pred = b; x) over samples predicted as b; 1 for a class never predicted.
std::vector<double> compute_thresholds(const Tensor& confidences, std::span<const int> predictions);

/// O(a, b) = #{x : pred(x) = a, y*(x) = b, p(b; x) >= t_b}.
Tensor compute_observation(const Tensor& confidences, std::span<const int> predictions, std::span<const int> truth,
                           std::span<const double> thresholds);

/// Row-normalised O rescaled by the prediction counts, then column-normalised.
/// Zero rows contribute nothing; a column with zero mass becomes uniform 1/m.
Tensor compute_estimation(const Tensor& observation, std::span<const std::size_t> prediction_counts);

/// kappa_i = E(y_i, y_i).
std::vector<double> kappa_for(std::span<const int> labels, const Tensor& estimation);

std::vector<std::size_t> count_predictions(std::span<const int> predictions, std::size_t num_classes);

/// The whole chain, with predictions taken as the row argmax of `confidences`.
SsrState compute_ssr(const Tensor& confidences, std::span<const int> truth);

/// {"thresholds": [...], "observation": [[...]], "estimation": [[...]], "prediction_counts": [...]}.
std::string ssr_to_json(const SsrState& state);

}  // namespace dibod
