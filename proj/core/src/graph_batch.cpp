// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#include "dibod/graph_batch.hpp"

#include <algorithm>
#include <cmath>

#include "dibod/error.hpp"

namespace dibod {

std::vector<std::size_t> GraphBatch::graph_of_node() const {
  std::vector<std::size_t> out(num_nodes());
  for (std::size_t g = 0; g + 1 < offsets.size(); ++g) {
    std::fill(out.begin() + static_cast<std::ptrdiff_t>(offsets[g]), out.begin() + static_cast<std::ptrdiff_t>(offsets[g + 1]), g);
  }
  return out;
}

void GraphBatch::validate() const {
  if (offsets.size() != labels.size() + 1 || offsets.front() != 0) throw ContractError("batch offsets do not match graph count");
  for (std::size_t g = 0; g < labels.size(); ++g) {
    if (offsets[g + 1] <= offsets[g]) throw ContractError("batch contains an empty graph");
  }
  if (features.rows() != num_nodes()) throw ContractError("batch feature rows do not match node count");
  if (base_node.size() != num_nodes()) throw ContractError("batch base mapping does not match node count");
  for (std::size_t b : base_node) {
    if (b >= base_num_nodes) throw ContractError("batch base mapping out of range");
  }
  const auto graph_of = graph_of_node();
  for (const Edge& e : edges) {
    if (e.first >= e.second || e.second >= num_nodes()) throw ContractError("batch edge out of range or unnormalised");
    if (graph_of[e.first] != graph_of[e.second]) throw ContractError("batch edge crosses graphs");
  }
}

GraphBatch make_batch(const Dataset& ds, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ContractError("make_batch: no graphs selected");
  GraphBatch batch;
  batch.offsets.push_back(0);
  std::size_t total = 0;
  for (std::size_t idx : indices) {
    if (idx >= ds.graphs.size()) throw ContractError("make_batch: graph index out of range");
    total += ds.graphs[idx].num_nodes;
  }
  batch.features = Tensor({total, ds.feature_dim});
  std::size_t offset = 0;
  for (std::size_t idx : indices) {
    const Graph& g = ds.graphs[idx];
    for (const Edge& e : g.edges) {
      batch.edges.emplace_back(static_cast<std::uint32_t>(offset + e.first), static_cast<std::uint32_t>(offset + e.second));
    }
    std::copy(g.node_features.values().begin(), g.node_features.values().end(),
              batch.features.data() + offset * ds.feature_dim);
    offset += g.num_nodes;
    batch.offsets.push_back(offset);
    batch.labels.push_back(g.label);
  }
  batch.base_node.resize(total);
  for (std::size_t i = 0; i < total; ++i) batch.base_node[i] = i;
  batch.base_num_nodes = total;
  return batch;
}

Propagation::Propagation(const GraphBatch& batch) {
  const std::size_t n = batch.num_nodes();
  std::vector<std::vector<std::uint32_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i) adj[i].push_back(static_cast<std::uint32_t>(i));
  for (const Edge& e : batch.edges) {
    adj[e.first].push_back(e.second);
    adj[e.second].push_back(e.first);
  }
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::sort(adj[i].begin(), adj[i].end());
    inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(adj[i].size()));
  }
  row_ptr_.assign(1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::uint32_t j : adj[i]) {
      col_.push_back(j);
      val_.push_back(inv_sqrt_deg[i] * inv_sqrt_deg[j]);
    }
    row_ptr_.push_back(col_.size());
  }
}

Tensor Propagation::apply(const Tensor& h) const {
  if (h.rows() != size()) throw DimensionError("propagation expects " + std::to_string(size()) + " rows, got " + shape_string(h));
  const std::size_t d = h.cols();
  Tensor out({size(), d});
  for (std::size_t i = 0; i < size(); ++i) {
    double* dst = out.data() + i * d;
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      const double w = val_[k];
      const double* src = h.data() + static_cast<std::size_t>(col_[k]) * d;
      for (std::size_t c = 0; c < d; ++c) dst[c] += w * src[c];
    }
  }
  return out;
}

Tensor Propagation::dense() const {
  Tensor out({size(), size()});
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) out(i, col_[k]) = val_[k];
  }
  return out;
}

}  // namespace dibod
