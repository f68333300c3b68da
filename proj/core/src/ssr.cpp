// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#include "dibod/ssr.hpp"

#include <nlohmann/json.hpp>

#include "dibod/autodiff.hpp"
#include "dibod/error.hpp"

namespace dibod {
namespace {

void check_classes(std::span<const int> labels, std::size_t m, const char* what) {
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= m) throw ContractError(std::string(what) + " outside [0, m)");
  }
}

nlohmann::json matrix_json(const Tensor& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto row = t.row_span(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

}  // namespace

std::vector<double> compute_thresholds(const Tensor& confidences, std::span<const int> predictions) {
  const std::size_t m = confidences.cols();
  if (predictions.size() != confidences.rows()) throw DimensionError("compute_thresholds: prediction count mismatch");
  check_classes(predictions, m, "prediction");
  std::vector<double> sum(m, 0.0);
  std::vector<std::size_t> count(m, 0);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto b = static_cast<std::size_t>(predictions[i]);
    sum[b] += confidences(i, b);
    ++count[b];
  }
  std::vector<double> t(m, 1.0);
  for (std::size_t b = 0; b < m; ++b) {
    if (count[b]) t[b] = sum[b] / static_cast<double>(count[b]);
  }
  return t;
}

Tensor compute_observation(const Tensor& confidences, std::span<const int> predictions, std::span<const int> truth,
                           std::span<const double> thresholds) {
  const std::size_t m = confidences.cols();
  if (predictions.size() != confidences.rows() || truth.size() != confidences.rows() || thresholds.size() != m) {
    throw DimensionError("compute_observation: length mismatch");
  }
  check_classes(predictions, m, "prediction");
  check_classes(truth, m, "label");
  Tensor o({m, m});
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto a = static_cast<std::size_t>(predictions[i]);
    const auto b = static_cast<std::size_t>(truth[i]);
    if (confidences(i, b) >= thresholds[b]) o(a, b) += 1.0;
  }
  return o;
}

Tensor compute_estimation(const Tensor& observation, std::span<const std::size_t> prediction_counts) {
  const std::size_t m = observation.rows();
  if (observation.cols() != m || prediction_counts.size() != m) throw DimensionError("compute_estimation: shape mismatch");
  Tensor scaled({m, m});
  for (std::size_t a = 0; a < m; ++a) {
    double row = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      if (observation(a, k) < 0.0) throw ContractError("compute_estimation: negative observation count");
      row += observation(a, k);
    }
    if (row <= 0.0) continue;
    for (std::size_t b = 0; b < m; ++b) {
      scaled(a, b) = observation(a, b) / row * static_cast<double>(prediction_counts[a]);
    }
  }
  Tensor e({m, m});
  for (std::size_t b = 0; b < m; ++b) {
    double column = 0.0;
    for (std::size_t j = 0; j < m; ++j) column += scaled(j, b);
    for (std::size_t a = 0; a < m; ++a) {
      e(a, b) = column > 0.0 ? scaled(a, b) / column : 1.0 / static_cast<double>(m);
    }
  }
  return e;
}

std::vector<double> kappa_for(std::span<const int> labels, const Tensor& estimation) {
  check_classes(labels, estimation.rows(), "label");
  std::vector<double> kappa;
  kappa.reserve(labels.size());
  for (int y : labels) kappa.push_back(estimation(static_cast<std::size_t>(y), static_cast<std::size_t>(y)));
  return kappa;
}

std::vector<std::size_t> count_predictions(std::span<const int> predictions, std::size_t num_classes) {
  check_classes(predictions, num_classes, "prediction");
  std::vector<std::size_t> counts(num_classes, 0);
  for (int p : predictions) ++counts[static_cast<std::size_t>(p)];
  return counts;
}

SsrState compute_ssr(const Tensor& confidences, std::span<const int> truth) {
  SsrState s;
  const auto predictions = argmax_rows(confidences);
  s.thresholds = compute_thresholds(confidences, predictions);
  s.observation = compute_observation(confidences, predictions, truth, s.thresholds);
  s.prediction_counts = count_predictions(predictions, confidences.cols());
  s.estimation = compute_estimation(s.observation, s.prediction_counts);
  s.kappa = kappa_for(truth, s.estimation);
  return s;
}

std::string ssr_to_json(const SsrState& state) {
  nlohmann::json j;
  j["thresholds"] = state.thresholds;
  j["observation"] = matrix_json(state.observation);
  j["estimation"] = matrix_json(state.estimation);
  j["prediction_counts"] = state.prediction_counts;
  return j.dump(2);
}

}  // namespace dibod
