// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dibod/graph_batch.hpp"
#include "dibod/rng.hpp"

namespace dibod {

enum class AugmentKind { node_drop, edge_perturb, feature_mask };

std::string to_string(AugmentKind kind);
/// Accepts "node-drop", "edge-perturb", "feature-mask"; throws ConfigError otherwise.
AugmentKind parse_augment_kind(const std::string& text);

struct ViewSpec {
  AugmentKind kind = AugmentKind::node_drop;
  double rate = 0.1;
  std::uint64_t seed_stream = 0;

  void validate() const;
};

/// node-drop 0.1 and edge-perturb 0.1.
std::vector<ViewSpec> default_view_specs();

/// One stochastic view of `batch`.
///
/// node-drop removes floor(rate * N) nodes from each graph, never all of them,
/// preferring nodes whose removal does not disconnect the remaining graph.
/// edge-perturb deletes each edge with probability `rate` and inserts a
/// Binomial(E, rate) number of random non-edges per graph. feature-mask zeroes
/// each feature entry with probability `rate`. Labels are never touched.
GraphBatch augment(const GraphBatch& batch, const ViewSpec& spec, Rng& rng);

/// V augmented copies of one batch. `base` must outlive the set.
struct ViewSet {
  std::vector<GraphBatch> views;
  std::vector<int> view_ids;
  const GraphBatch* base = nullptr;

  std::size_t size() const noexcept { return views.size(); }
};

/// View i is drawn from an rng seeded by (epoch_seed, i, specs[i].seed_stream).
/// Throws ContractError for fewer than two specs.
ViewSet make_view_set(const GraphBatch& batch, std::span<const ViewSpec> specs, std::uint64_t epoch_seed);

/// V unaugmented copies of `batch`, used for evaluation.
ViewSet identity_view_set(const GraphBatch& batch, std::size_t num_views);

}  // namespace dibod
