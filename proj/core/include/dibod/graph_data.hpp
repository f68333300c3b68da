// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dibod/tensor.hpp"

namespace dibod {

using Edge = std::pair<std::uint32_t, std::uint32_t>;

/// One labelled graph. Edges are undirected, stored once with first < second,
/// sorted, without self-loops.
struct Graph {
  std::size_t num_nodes = 0;
  std::vector<Edge> edges;
  Tensor node_features;  // num_nodes x feature_dim
  int label = 0;
};

/// An immutable collection of graphs sharing one feature width and label space.
struct Dataset {
  std::string name;
  std::vector<Graph> graphs;
  int num_classes = 0;
  std::size_t feature_dim = 0;

  // Provenance kept so the collection can be written back in TUDataset form.
  std::vector<long long> graph_label_values;  // class index -> label as written in the file
  std::vector<long long> node_label_values;   // one-hot column -> node label as written
  std::size_t node_attribute_dim = 0;         // trailing real-valued feature columns

  std::size_t size() const noexcept { return graphs.size(); }
  std::vector<int> labels() const;
  /// Throws ContractError when an invariant is broken.
  void validate() const;
};

/// Reads `<root>/<name>_{A,graph_indicator,graph_labels}.txt` plus the optional
/// `_node_labels.txt` and `_node_attributes.txt`.
///
/// Node features are the one-hot node labels (columns in ascending label order)
/// followed by the node attributes; a graph collection with neither gets a
/// single constant feature. Graph labels are remapped to [0, m) in order of
/// first appearance.
///
/// Throws IoError for a missing mandatory file and FormatError for malformed content.
Dataset parse_tudataset(const std::filesystem::path& root, const std::string& name);

/// Writes the canonical TUDataset text form: both directions of every edge,
/// grouped by graph then source node, targets ascending.
void write_tudataset(const Dataset& ds, const std::filesystem::path& root, const std::string& name);

/// The first `count` graphs (or all, if fewer), labels re-indexed to stay contiguous.
Dataset head(const Dataset& ds, std::size_t count);

/// Parameters of the synthetic cycle-versus-star corpus.
struct MotifSpec {
  std::string name = "motif";
  std::size_t min_nodes = 8;
  std::size_t max_nodes = 16;
  double chord_fraction = 0.25;  // extra ring chords per node for class 0
  double edge_noise = 0.05;      // edge deletion probability and per-node extra-edge probability

  /// Small graphs with light noise.
  static MotifSpec clean();
  /// Larger, noisier graphs with fewer chords: the "target domain" of a transfer pair.
  static MotifSpec shifted();
};

/// Balanced binary corpus: class 0 graphs are rings with chords, class 1 graphs
/// are stars; both receive random edge deletions/insertions. Node features are
/// 8-d one-hot degree buckets {0, ..., 6, >=7}. Requires an even n_graphs >= 20.
Dataset synth_motif_corpus(std::size_t n_graphs, std::uint64_t seed, const MotifSpec& spec = MotifSpec::clean());

/// 8-d one-hot degree bucket features for the given topology.
Tensor degree_features(std::size_t num_nodes, std::span<const Edge> edges);

/// Stratified assignment of graphs to k folds.
struct FoldPlan {
  std::vector<int> fold_of;
  int k = 0;
  std::uint64_t seed = 0;

  std::vector<std::size_t> train_indices(int fold) const;
  std::vector<std::size_t> test_indices(int fold) const;
};

/// Per-class shuffles dealt round-robin across folds, so per-class fold counts
/// differ by at most one. Throws ContractError if any class has fewer than k members.
FoldPlan make_folds(const Dataset& ds, int k, std::uint64_t seed);

}  // namespace dibod
