// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

// Run configuration: a `key = value` text file with `[section]` headers.
//
//   [data]      source, target, folds
//   [train]     seed, epochs, adapt_epochs, batch_size, lr, critic_lr, critic_hidden, ssr_each_epoch
//   [weights]   beta_t, beta_y, beta_vs, lambda_orth, lambda_ib, lambda_r, lambda_kd, tau, lambda_view,
//               compress_vs_teacher
//   [model]     input_width, hidden, layers, projection, pooling
//   [views]     specs = node-drop:0.1, edge-perturb:0.1
//   [hsic]      kernel = rbf | linear | rbf:<sigma>
//   [run]       ablation, output
//
// `#` starts a comment. Unknown keys are rejected.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dibod/graph_data.hpp"
#include "dibod/hsic.hpp"
#include "dibod/models.hpp"
#include "dibod/objectives.hpp"
#include "dibod/training.hpp"
#include "dibod/views.hpp"

namespace dibod {

struct RunConfig {
  std::string source = "synthetic:clean:200";
  std::string target = "synthetic:shifted:200";
  int folds = 10;

  std::uint64_t seed = 1;
  int epochs = 100;
  int adapt_epochs = 100;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  double critic_lr = 1e-3;
  std::size_t critic_hidden = 64;
  bool ssr_each_epoch = false;

  LossWeights weights;
  ModelConfig model;
  std::vector<ViewSpec> views = default_view_specs();
  KernelSpec kernel = KernelSpec::rbf_median();

  Ablation ablation = Ablation::none;
  std::filesystem::path output = "dibod-out";

  /// Sets one `section.key` from its text form. Throws ConfigError naming the key.
  void set(const std::string& key, const std::string& value);
  /// Range checks and dataset existence. Throws ConfigError or IoError.
  void validate() const;
  /// Canonical `key = value` text of every field; parsing it reproduces this config.
  std::string to_text() const;
  /// 16 hex digits of FNV-1a over to_text().
  std::string fingerprint() const;

  TrainOptions train_options(Phase phase) const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// `synthetic:clean:<n>[:<seed>]`, `synthetic:shifted:<n>[:<seed>]` or
/// `tudataset:<root>:<name>[:<count>]` (count keeps only the first graphs).
Dataset load_dataset(const std::string& ref);
/// Throws IoError naming the path when a TUDataset reference points nowhere, ConfigError when malformed.
void check_dataset_ref(const std::string& ref, const std::string& field);

std::string fnv1a_hex(const std::string& text);

}  // namespace dibod
