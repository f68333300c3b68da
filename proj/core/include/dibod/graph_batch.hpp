// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dibod/graph_data.hpp"
#include "dibod/tensor.hpp"

namespace dibod {

/// Several graphs stacked into one block-diagonal system.
///
/// Node i of the batch belongs to graph g iff offsets[g] <= i < offsets[g + 1].
/// `base_node` maps every node to its index in the unaugmented batch it was
/// derived from; for an unaugmented batch it is the identity.
struct GraphBatch {
  std::vector<std::size_t> offsets;  // num_graphs + 1 entries, offsets[0] = 0
  std::vector<Edge> edges;           // batch-global endpoints, first < second
  Tensor features;                   // num_nodes x feature_dim
  std::vector<int> labels;           // one per graph
  std::vector<std::size_t> base_node;
  std::size_t base_num_nodes = 0;

  std::size_t num_graphs() const noexcept { return labels.size(); }
  std::size_t num_nodes() const noexcept { return offsets.empty() ? 0 : offsets.back(); }
  std::size_t feature_dim() const noexcept { return features.cols(); }
  std::size_t graph_size(std::size_t g) const { return offsets[g + 1] - offsets[g]; }
  /// Graph index of every node.
  std::vector<std::size_t> graph_of_node() const;
  /// Throws ContractError if offsets, edges, features or base mapping disagree.
  void validate() const;
};

GraphBatch make_batch(const Dataset& ds, std::span<const std::size_t> indices);

/// Symmetric-normalised adjacency with self-loops, D^-1/2 (A + I) D^-1/2, in CSR form.
class Propagation {
 public:
  explicit Propagation(const GraphBatch& batch);

  std::size_t size() const noexcept { return row_ptr_.size() - 1; }
  /// P * h for an n x d matrix h.
  Tensor apply(const Tensor& h) const;
  /// Dense copy, for tests.
  Tensor dense() const;

 private:
  std::vector<std::size_t> row_ptr_;
  std::vector<std::uint32_t> col_;
  std::vector<double> val_;
};

}  // namespace dibod
