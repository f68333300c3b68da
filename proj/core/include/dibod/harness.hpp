// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

// Experiment orchestration behind the command-line subcommands. Every routine
// writes under `config.output` and returns a report that can be serialised to JSON.
//
// Output layout:
//   <out>/pretrain/fold_<f>.csv, report.json, model.ckpt
//   <out>/adapt/fold_<f>.csv, fold_<f>_ssr.json, report.json
//   <out>/ablate/<ablation>/..., table.csv, table.json

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dibod/config.hpp"
#include "dibod/theory.hpp"

namespace dibod {

struct FoldOutcome {
  int fold = 0;
  double accuracy = 0;        // held-out split
  double train_accuracy = 0;
  std::string metrics_path;
  std::string ssr_path;       // adaptation only
  std::uint64_t teacher_checksum_before = 0;
  std::uint64_t teacher_checksum_after = 0;
};

struct RunReport {
  std::string command;
  std::string config_fingerprint;
  std::string config_text;
  std::string checkpoint;
  std::vector<FoldOutcome> folds;
  double mean = 0;
  double std = 0;  // sample standard deviation

  std::vector<double> accuracies() const;
  /// True when no fold changed the teacher core.
  bool teacher_unchanged() const;
  /// FNV-1a over the fold accuracies and checksums in shortest round-trip form.
  std::string result_fingerprint() const;
  std::string to_json() const;
};

double mean_of(std::span<const double> values);
/// Sample standard deviation; 0 for fewer than two values.
double sample_std(std::span<const double> values);

/// Fingerprint recorded in checkpoints: architecture plus class count.
std::string backbone_fingerprint(const ModelConfig& model);

struct PretrainOptions {
  bool cross_validate = true;
  /// Also trains on the whole source and saves `<out>/pretrain/model.ckpt`.
  bool final_model = true;
};

/// k-fold cross-validated pretraining on the source dataset.
RunReport cmd_pretrain(const RunConfig& config, const PretrainOptions& options = {});

/// Frozen-teacher adaptation on every target fold, starting each from `checkpoint`.
/// Throws ContractError naming both fingerprints when the checkpoint was made for another backbone.
RunReport cmd_adapt(const RunConfig& config, const std::filesystem::path& checkpoint);

struct AblationRow {
  Ablation ablation = Ablation::none;
  RunReport report;
};

struct AblationTable {
  std::vector<AblationRow> rows;
  const AblationRow& row(Ablation a) const;
  std::string to_csv() const;
  std::string to_json() const;
};

/// Every ablation with shared seeds and folds. Variants that change the
/// pretraining objective get their own source model; the rest share one.
AblationTable cmd_ablate(const RunConfig& config);

/// epoch, split, I_zvs_x_proxy, I_zvs_y, I_zvr_y rows of every log, in order.
std::string mi_curve_csv(std::span<const std::filesystem::path> logs);

// --- Oracle suite -----------------------------------------------------------

/// Z = Y xor N with N independent noise and Phi independent of both.
JointTable lemma1_noisy_channel_table();
/// Z = Y, Phi independent.
JointTable lemma1_deterministic_table();
/// P(Y = Phi) = 0.8, so Y depends on the view.
JointTable lemma1_view_dependent_label_table();
/// Z copies Y in view 0 and is uniform noise in view 1.
JointTable lemma1_view_dependent_code_table();
/// Three equiprobable views with noise levels 0.1, 0.2, 0.3 on Z = Y xor N.
JointTable lemma2_symmetric_table();

struct OracleEntry {
  std::string name;
  std::string expect;
  bool pass = false;
  std::string report;  // JSON object
};

struct OracleReport {
  std::vector<OracleEntry> entries;
  bool all_pass() const;
  std::string to_json() const;
};

/// Runs the constructed lemma and theorem checks. A `fixture` table, when
/// given, is loaded first (propagating its validation error) and checked
/// against the first lemma's implication.
OracleReport cmd_oracle_check(const std::optional<std::filesystem::path>& fixture = std::nullopt);

}  // namespace dibod
