// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#include "dibod/views.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dibod/error.hpp"

namespace dibod {
namespace {

// Articulation points of the subgraph induced by `alive`, by iterative Tarjan low-link.
std::vector<bool> articulation_points(const std::vector<std::vector<std::uint32_t>>& adj, const std::vector<bool>& alive) {
  const std::size_t n = adj.size();
  std::vector<bool> cut(n, false);
  std::vector<int> disc(n, -1), low(n, 0);
  std::vector<int> parent(n, -1);
  int timer = 0;
  for (std::size_t root = 0; root < n; ++root) {
    if (!alive[root] || disc[root] >= 0) continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
    disc[root] = low[root] = timer++;
    int root_children = 0;
    while (!stack.empty()) {
      auto& [u, next] = stack.back();
      if (next < adj[u].size()) {
        const std::size_t v = adj[u][next++];
        if (!alive[v]) continue;
        if (disc[v] < 0) {
          parent[v] = static_cast<int>(u);
          disc[v] = low[v] = timer++;
          if (u == root) ++root_children;
          stack.emplace_back(v, 0);
        } else if (static_cast<int>(v) != parent[u]) {
          low[u] = std::min(low[u], disc[v]);
        }
      } else {
        const std::size_t done = u;
        stack.pop_back();
        if (!stack.empty()) {
          const std::size_t p = stack.back().first;
          low[p] = std::min(low[p], low[done]);
          if (p != root && low[done] >= disc[p]) cut[p] = true;
        }
      }
    }
    if (root_children > 1) cut[root] = true;
  }
  return cut;
}

GraphBatch drop_nodes(const GraphBatch& batch, double rate, Rng& rng) {
  const std::size_t n = batch.num_nodes();
  std::vector<std::vector<std::uint32_t>> adj(n);
  for (const Edge& e : batch.edges) {
    adj[e.first].push_back(e.second);
    adj[e.second].push_back(e.first);
  }
  std::vector<bool> alive(n, true);
  for (std::size_t g = 0; g < batch.num_graphs(); ++g) {
    const std::size_t size = batch.graph_size(g);
    const std::size_t drop = std::min(static_cast<std::size_t>(std::floor(rate * static_cast<double>(size))), size - 1);
    for (std::size_t k = 0; k < drop; ++k) {
      const auto cut = articulation_points(adj, alive);
      std::vector<std::size_t> safe, any;
      for (std::size_t i = batch.offsets[g]; i < batch.offsets[g + 1]; ++i) {
        if (!alive[i]) continue;
        any.push_back(i);
        if (!cut[i]) safe.push_back(i);
      }
      const auto& pool = safe.empty() ? any : safe;
      alive[pool[uniform_index(rng, pool.size())]] = false;
    }
  }

  GraphBatch out;
  std::vector<std::size_t> new_index(n, 0);
  std::vector<std::size_t> kept;
  out.offsets.push_back(0);
  for (std::size_t g = 0; g < batch.num_graphs(); ++g) {
    for (std::size_t i = batch.offsets[g]; i < batch.offsets[g + 1]; ++i) {
      if (!alive[i]) continue;
      new_index[i] = kept.size();
      kept.push_back(i);
    }
    out.offsets.push_back(kept.size());
  }
  const std::size_t d = batch.feature_dim();
  out.features = Tensor({kept.size(), d});
  out.base_node.resize(kept.size());
  for (std::size_t r = 0; r < kept.size(); ++r) {
    std::copy_n(batch.features.data() + kept[r] * d, d, out.features.data() + r * d);
    out.base_node[r] = batch.base_node[kept[r]];
  }
  for (const Edge& e : batch.edges) {
    if (alive[e.first] && alive[e.second]) {
      out.edges.emplace_back(static_cast<std::uint32_t>(new_index[e.first]), static_cast<std::uint32_t>(new_index[e.second]));
    }
  }
  out.labels = batch.labels;
  out.base_num_nodes = batch.base_num_nodes;
  return out;
}

GraphBatch perturb_edges(const GraphBatch& batch, double rate, Rng& rng) {
  GraphBatch out = batch;
  out.edges.clear();
  const auto graph_of = batch.graph_of_node();
  std::vector<std::size_t> edge_count(batch.num_graphs(), 0);
  std::set<Edge> present(batch.edges.begin(), batch.edges.end());
  for (const Edge& e : batch.edges) {
    ++edge_count[graph_of[e.first]];
    if (uniform01(rng) >= rate) out.edges.push_back(e);
  }
  std::set<Edge> result(out.edges.begin(), out.edges.end());
  for (std::size_t g = 0; g < batch.num_graphs(); ++g) {
    std::size_t additions = 0;
    for (std::size_t k = 0; k < edge_count[g]; ++k) {
      if (uniform01(rng) < rate) ++additions;
    }
    const std::size_t size = batch.graph_size(g);
    if (size < 2) continue;
    for (std::size_t added = 0, tries = 0; added < additions && tries < 50 * (additions + 1); ++tries) {
      auto u = static_cast<std::uint32_t>(batch.offsets[g] + uniform_index(rng, size));
      auto v = static_cast<std::uint32_t>(batch.offsets[g] + uniform_index(rng, size));
      if (u == v) continue;
      const Edge e{std::min(u, v), std::max(u, v)};
      if (present.count(e) || !result.insert(e).second) continue;
      out.edges.push_back(e);
      ++added;
    }
  }
  return out;
}

GraphBatch mask_features(const GraphBatch& batch, double rate, Rng& rng) {
  GraphBatch out = batch;
  for (double& v : out.features.values()) {
    if (uniform01(rng) < rate) v = 0.0;
  }
  return out;
}

}  // namespace

std::string to_string(AugmentKind kind) {
  switch (kind) {
    case AugmentKind::node_drop: return "node-drop";
    case AugmentKind::edge_perturb: return "edge-perturb";
    case AugmentKind::feature_mask: return "feature-mask";
  }
  return "unknown";
}

AugmentKind parse_augment_kind(const std::string& text) {
  if (text == "node-drop") return AugmentKind::node_drop;
  if (text == "edge-perturb") return AugmentKind::edge_perturb;
  if (text == "feature-mask") return AugmentKind::feature_mask;
  throw ConfigError("views", "unknown augmentation '" + text + "'");
}

void ViewSpec::validate() const {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("views", "augmentation rate must lie in [0, 1]");
}

std::vector<ViewSpec> default_view_specs() {
  return {{AugmentKind::node_drop, 0.1, 0}, {AugmentKind::edge_perturb, 0.1, 1}};
}

GraphBatch augment(const GraphBatch& batch, const ViewSpec& spec, Rng& rng) {
  spec.validate();
  switch (spec.kind) {
    case AugmentKind::node_drop: return drop_nodes(batch, spec.rate, rng);
    case AugmentKind::edge_perturb: return perturb_edges(batch, spec.rate, rng);
    case AugmentKind::feature_mask: return mask_features(batch, spec.rate, rng);
  }
  return batch;
}

ViewSet make_view_set(const GraphBatch& batch, std::span<const ViewSpec> specs, std::uint64_t epoch_seed) {
  if (specs.size() < 2) throw ContractError("a view set needs at least two views");
  ViewSet set;
  set.base = &batch;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    Rng rng = make_rng(epoch_seed, {i, specs[i].seed_stream});
    set.views.push_back(augment(batch, specs[i], rng));
    set.view_ids.push_back(static_cast<int>(i));
  }
  return set;
}

ViewSet identity_view_set(const GraphBatch& batch, std::size_t num_views) {
  ViewSet set;
  set.base = &batch;
  for (std::size_t i = 0; i < num_views; ++i) {
    set.views.push_back(batch);
    set.view_ids.push_back(static_cast<int>(i));
  }
  return set;
}

}  // namespace dibod
