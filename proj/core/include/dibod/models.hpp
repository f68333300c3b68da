// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dibod/autodiff.hpp"
#include "dibod/graph_batch.hpp"
#include "dibod/layers.hpp"
#include "dibod/rng.hpp"
#include "dibod/views.hpp"

namespace dibod {

enum class Pooling { mean, sum, max };

std::string to_string(Pooling p);
Pooling parse_pooling(const std::string& text);

struct ModelConfig {
  std::size_t num_views = 2;
  std::size_t input_width = 32;  // shared width every dataset is adapted to
  std::size_t hidden = 64;
  std::size_t gcn_layers = 3;
  std::size_t projection = 32;
  int num_classes = 2;
  Pooling pooling = Pooling::mean;

  void validate() const;
  /// Canonical text of every architecture-defining field.
  std::string describe() const;
};

/// P * h, differentiable in h. `p` must stay alive until backward has run; the
/// tape keeps a shared reference.
Var propagate(std::shared_ptr<const Propagation> p, const Var& h);

/// ReLU(P h w) with P the normalised adjacency of `p`.
Var gcn_layer(std::shared_ptr<const Propagation> p, const Var& h, const Var& w);

/// Per-graph readout of node rows; graph_of[r] is the graph of row r.
/// Every graph must own at least one row.
Var pool(const Var& h, std::span<const std::size_t> graph_of, std::size_t num_graphs, Pooling kind);

/// Multi-view GCN teacher with softmax-weighted view fusion, a Gaussian
/// stochastic head, per-view feature decoders, a classifier and a projection
/// head for contrastive distillation.
///
/// Everything that depends on the raw feature width (the input adapter and the
/// decoders) lives in a codec keyed by that width. The first codec added is the
/// primary one and belongs to the checksummed core.
class TeacherModel {
 public:
  struct Codec {
    Linear adapter;
    std::vector<Mlp> decoders;
  };

  TeacherModel(const ModelConfig& config, std::uint64_t seed);
  TeacherModel(const TeacherModel&) = delete;
  TeacherModel& operator=(const TeacherModel&) = delete;

  const ModelConfig& config() const noexcept { return config_; }

  /// Creates the codec for `feature_dim` if absent; it is trainable even when the core is frozen.
  Codec& add_codec(std::size_t feature_dim);
  bool has_codec(std::size_t feature_dim) const { return codecs_.count(feature_dim) != 0; }
  Codec& codec(std::size_t feature_dim);
  std::size_t primary_feature_dim() const noexcept { return primary_dim_; }

  /// Encoders, fusion weights, stochastic head, classifier, projection and the primary codec.
  std::vector<Parameter*> core_parameters();
  std::vector<Parameter*> parameters();

  Parameter& encoder_weight(std::size_t view, std::size_t layer) { return encoders_.at(view).at(layer); }
  Parameter& fusion_logits() noexcept { return fusion_; }
  std::vector<double> fusion_weights() const;
  Linear& mu_head() noexcept { return mu_; }
  Linear& logvar_head() noexcept { return logvar_; }
  Linear& classifier() noexcept { return classifier_; }
  Linear& projection() noexcept { return projection_; }

  /// Marks the core non-trainable (or trainable again).
  void freeze(bool frozen = true);
  bool frozen() const noexcept { return frozen_; }
  /// FNV-1a over the core parameters.
  std::uint64_t checksum();

 private:
  ModelConfig config_;
  std::uint64_t seed_;
  std::vector<std::vector<Parameter>> encoders_;  // [view][layer]
  Parameter fusion_;
  Linear mu_;
  Linear logvar_;
  Linear classifier_;
  Linear projection_;
  std::map<std::size_t, std::unique_ptr<Codec>> codecs_;
  std::size_t primary_dim_ = 0;
  bool frozen_ = false;
};

enum class Mode { train, eval };

struct TeacherOutput {
  Var node_embedding;   // Z: covered nodes x hidden (sampled in train mode, the mean in eval mode)
  Var mu;
  Var logvar;
  Var kl;               // scalar
  Var graph_embedding;  // Z_g: graphs x hidden
  Var logits;           // graphs x m
  Var projection;       // graphs x projection
  std::vector<Var> view_graph_embeddings;  // per view, pooled encoder output (when requested)

  std::vector<std::size_t> covered;           // base node of each embedding row
  std::vector<std::ptrdiff_t> row_of_base;    // embedding row of each base node, -1 if no view kept it
};

/// Fuses the per-view encodings node by node: view i contributes with weight
/// softmax(theta)_i renormalised over the views in which the node survived.
/// Nodes dropped from every view get no embedding and are left out of pooling.
/// `rng` drives the reparameterised sample in train mode and may be null in eval mode.
TeacherOutput teacher_forward(Tape& tape, const ViewSet& views, TeacherModel& model, Mode mode, Rng* rng,
                              bool per_view_embeddings = false);

/// (1/N) sum_j sum_{i kept in view j} || x_{j,i} - decoder_j(Z_i) ||^2 with N the
/// number of (node, view) pairs summed over.
Var teacher_reconstruct(Tape& tape, const TeacherOutput& out, TeacherModel& model, const ViewSet& views);

/// Invariant and redundant student heads on the pooled teacher embedding.
class StudentModel {
 public:
  StudentModel(const ModelConfig& config, std::uint64_t seed);
  StudentModel(const StudentModel&) = delete;
  StudentModel& operator=(const StudentModel&) = delete;

  std::vector<Parameter*> parameters();

  Mlp& vs_head() noexcept { return vs_head_; }
  Mlp& vr_head() noexcept { return vr_head_; }
  Linear& vs_classifier() noexcept { return vs_classifier_; }
  Linear& vr_classifier() noexcept { return vr_classifier_; }
  Linear& vs_projection() noexcept { return vs_projection_; }
  Linear& vr_projection() noexcept { return vr_projection_; }

 private:
  Mlp vs_head_;
  Mlp vr_head_;
  Linear vs_classifier_;
  Linear vr_classifier_;
  Linear vs_projection_;
  Linear vr_projection_;
};

struct StudentOutput {
  Var z_vs;
  Var z_vr;
  Var logits_vs;
  Var logits_vr;
  Var proj_vs;
  Var proj_vr;
};

StudentOutput student_forward(Tape& tape, const Var& graph_embedding, StudentModel& model);

}  // namespace dibod
