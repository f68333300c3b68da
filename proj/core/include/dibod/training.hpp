// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dibod/graph_data.hpp"
#include "dibod/hsic.hpp"
#include "dibod/models.hpp"
#include "dibod/objectives.hpp"
#include "dibod/ssr.hpp"
#include "dibod/views.hpp"

namespace dibod {

enum class Phase { pretrain, adapt };

std::string to_string(Phase p);

struct TrainPhase {
  Phase phase = Phase::pretrain;
  bool teacher_frozen = false;
  int epochs = 100;
  bool kappa_from_ssr = false;

  /// Pretraining: everything trainable, kappa = 1.
  static TrainPhase pretrain(int epochs = 100);
  /// Adaptation with the ablation's effect on the schedule: full-finetune
  /// unfreezes the teacher, no-ssr uses kappa = 1.
  static TrainPhase adapt(int epochs = 100, Ablation ablation = Ablation::none);
  void validate() const;
};

/// One row of the per-epoch metrics CSV.
struct MetricsRow {
  int epoch = 0;
  std::string split;
  double loss_total = 0, loss_task = 0, loss_ibt = 0, loss_ibs = 0, loss_r = 0, loss_ckd = 0, loss_orth = 0;
  double accuracy = 0;
  double i_zvs_x_proxy = 0;  // teacher KL compression term
  double i_zvs_y = 0;        // BA bound with the z_vs critic
  double i_zvr_y = 0;        // CLUB bound with the z_vr critic
};

class MetricsLog {
 public:
  static const char* header();

  void add(MetricsRow row) { rows_.push_back(std::move(row)); }
  const std::vector<MetricsRow>& rows() const noexcept { return rows_; }
  std::vector<MetricsRow> split(const std::string& name) const;

  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
  /// Throws FormatError when the header lacks a required column or a row is malformed.
  static MetricsLog read_csv(const std::filesystem::path& path);

 private:
  std::vector<MetricsRow> rows_;
};

/// Teacher plus student, owned together so optimizers can hold stable pointers.
struct DibodModel {
  DibodModel(const ModelConfig& config, std::uint64_t seed);

  ModelConfig config;
  std::unique_ptr<TeacherModel> teacher;
  std::unique_ptr<StudentModel> student;

  std::vector<Parameter*> parameters();
};

/// Values of every loss term for one batch.
struct BatchRecord {
  int epoch = 0;
  std::size_t batch = 0;
  double total = 0, task = 0, ibt = 0, ibs = 0, recon = 0, ckd = 0, orth = 0;
  LossWeights weights;
};

struct TrainOptions {
  TrainPhase phase;
  Ablation ablation = Ablation::none;
  LossWeights weights;  // before the ablation is applied
  std::vector<ViewSpec> views = default_view_specs();
  std::size_t batch_size = 32;
  double lr = 1e-3;
  double critic_lr = 1e-3;
  std::size_t critic_hidden = 64;
  KernelSpec kernel = KernelSpec::rbf_median();
  bool ssr_each_epoch = false;
  std::uint64_t seed = 0;
  /// Called after every optimisation step.
  std::function<void(const BatchRecord&)> on_batch;
};

struct PhaseResult {
  MetricsLog log;
  double train_accuracy = 0;
  double test_accuracy = 0;
  std::uint64_t teacher_checksum_before = 0;
  std::uint64_t teacher_checksum_after = 0;
  std::optional<SsrState> ssr;
};

/// Trains `model` on `train` and evaluates on `test` after every epoch.
///
/// Pretraining updates teacher, student and critics jointly and scores the
/// teacher classifier. Adaptation computes the SSR state from the teacher's
/// predictions on `train`, then trains the student (and the teacher too under
/// full-finetune) on cross-entropy of the invariant head, which is also what
/// it scores. Throws NumericError naming the first non-finite loss term.
PhaseResult run_phase(DibodModel& model, const Dataset& ds, std::span<const std::size_t> train,
                      std::span<const std::size_t> test, const TrainOptions& options);

/// Accuracy of the phase's scoring head on unaugmented views.
double evaluate(DibodModel& model, const Dataset& ds, std::span<const std::size_t> indices, Phase phase,
                std::size_t batch_size = 32);

/// Row-softmax of the teacher's logits on unaugmented views, one row per index.
Tensor teacher_confidences(DibodModel& model, const Dataset& ds, std::span<const std::size_t> indices,
                           std::size_t batch_size = 32);

/// Consecutive chunks of `order` of size `batch_size`; a final chunk smaller than two is merged into its predecessor.
std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> order, std::size_t batch_size);

}  // namespace dibod
