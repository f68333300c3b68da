// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "dibod/autodiff.hpp"
#include "dibod/hsic.hpp"
#include "dibod/mi.hpp"

namespace dibod {

struct LossWeights {
  double beta_t = 0.1;
  double beta_y = 0.05;
  double beta_vs = 0.05;
  double lambda_orth = 0.05;
  double lambda_ib = 0.01;
  double lambda_r = 0.001;
  double lambda_kd = 0.01;
  double tau = 0.5;
  double lambda_view = 0.0;          // conditional view-redundancy term in the teacher loss; 0 disables it
  bool compress_vs_teacher = true;   // the +I(z_vs; Z) term of the student loss

  /// Weights must be non-negative and finite, tau strictly positive.
  void validate() const;
};

enum class Ablation { none, no_ib, no_hsic, no_ssr, full_finetune };

std::string to_string(Ablation a);
/// "none", "no-ib", "no-hsic", "no-ssr", "full-finetune".
Ablation parse_ablation(const std::string& text);
std::vector<Ablation> all_ablations();

/// Weights after switching off what the ablation removes: no-ib zeroes beta_t
/// and beta_vs, no-hsic zeroes lambda_orth. The other two ablations act on the
/// schedule, not the weights.
LossWeights apply_ablation(LossWeights w, Ablation a);

/// The critics the information terms are estimated with.
struct CriticSet {
  VariationalCritic* teacher_y = nullptr;  // q(y | Z_g)
  VariationalCritic* vs_y = nullptr;       // q(y | z_vs)
  VariationalCritic* vr_y = nullptr;       // q(y | z_vr)
  VariationalCritic* vs_vr = nullptr;      // q(z_vr | z_vs), Gaussian
  VariationalCritic* vs_teacher = nullptr; // q(Z_g | z_vs), Gaussian
  std::vector<VariationalCritic*> view_by_class;  // q(view | Z) per class
};

/// -BA(Z_g; Y) + beta_t * kl, plus lambda_view * view_term when `view_term` is valid.
Var loss_ibt(Tape& tape, const Var& graph_embedding, std::span<const int> labels, const Var& kl, VariationalCritic& critic,
             const LossWeights& w, const Var& view_term = Var());

struct IbsTerms {
  Var prediction;    // -mean(kappa_i * log q(y_i | z_vs_i)) - H(Y) * mean(kappa)
  Var club_vr_y;
  Var club_vs_vr;
  Var club_vs_teacher;  // invalid when the term is disabled
  Var total;
};

/// The Gaussian CLUB targets, z_vr and the teacher embedding, enter as
/// constants: those terms compress z_vs only. Each CLUB estimate enters the
/// total as max(estimate, 0); a negative estimate is critic error, and
/// descending it runs away from a critic that lags behind the encoder. The
/// IbsTerms fields keep the raw estimates.
IbsTerms loss_ibs(Tape& tape, const Var& z_vs, const Var& z_vr, const Var& graph_embedding, std::span<const int> labels,
                  std::span<const double> kappa, const CriticSet& critics, const LossWeights& w);

/// Symmetric InfoNCE between L2-normalised rows of `student` and `teacher`:
/// the mean of the student-to-teacher and teacher-to-student cross-entropies,
/// positives on the diagonal.
Var info_nce(const Var& student, const Var& teacher, double tau);

/// info_nce(proj_vs, teacher) + info_nce(proj_vr, teacher). Throws ContractError for n < 2.
Var loss_ckd(const Var& proj_vs, const Var& proj_vr, const Var& proj_teacher, double tau);

struct LossTerms {
  Var task;
  Var ibt;
  Var ibs;
  Var recon;
  Var ckd;
  Var orth;
};

/// task + lambda_ib (ibt + ibs) + lambda_r recon + lambda_kd (ckd + lambda_orth orth).
Var loss_total(const LossTerms& terms, const LossWeights& w);

}  // namespace dibod
