// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#include "dibod/objectives.hpp"

#include <cmath>
#include <numeric>

#include "dibod/error.hpp"

namespace dibod {

void LossWeights::validate() const {
  const std::pair<const char*, double> fields[] = {
      {"weights.beta_t", beta_t},         {"weights.beta_y", beta_y},       {"weights.beta_vs", beta_vs},
      {"weights.lambda_orth", lambda_orth}, {"weights.lambda_ib", lambda_ib}, {"weights.lambda_r", lambda_r},
      {"weights.lambda_kd", lambda_kd},   {"weights.lambda_view", lambda_view}};
  for (const auto& [name, value] : fields) {
    if (!(value >= 0.0 && std::isfinite(value))) throw ConfigError(name, "must be a non-negative finite number");
  }
  if (!(tau > 0.0 && std::isfinite(tau))) throw ConfigError("weights.tau", "must be positive");
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::none: return "none";
    case Ablation::no_ib: return "no-ib";
    case Ablation::no_hsic: return "no-hsic";
    case Ablation::no_ssr: return "no-ssr";
    case Ablation::full_finetune: return "full-finetune";
  }
  return "unknown";
}

Ablation parse_ablation(const std::string& text) {
  for (Ablation a : all_ablations()) {
    if (to_string(a) == text) return a;
  }
  throw ConfigError("ablation", "unknown ablation '" + text + "'");
}

std::vector<Ablation> all_ablations() {
  return {Ablation::none, Ablation::no_ib, Ablation::no_hsic, Ablation::no_ssr, Ablation::full_finetune};
}

LossWeights apply_ablation(LossWeights w, Ablation a) {
  if (a == Ablation::no_ib) {
    w.beta_t = 0.0;
    w.beta_vs = 0.0;
  }
  if (a == Ablation::no_hsic) w.lambda_orth = 0.0;
  return w;
}

Var loss_ibt(Tape& tape, const Var& graph_embedding, std::span<const int> labels, const Var& kl, VariationalCritic& critic,
             const LossWeights& w, const Var& view_term) {
  Var loss = add(neg(ba_lower_bound(tape, graph_embedding, labels, critic)), scale(kl, w.beta_t));
  if (view_term.valid() && w.lambda_view > 0.0) loss = add(loss, scale(view_term, w.lambda_view));
  return loss;
}

IbsTerms loss_ibs(Tape& tape, const Var& z_vs, const Var& z_vr, const Var& graph_embedding, std::span<const int> labels,
                  std::span<const double> kappa, const CriticSet& critics, const LossWeights& w) {
  const std::size_t n = labels.size();
  if (kappa.size() != n || z_vs.rows() != n) throw DimensionError("loss_ibs: kappa, labels and samples must align");
  if (!critics.vs_y || !critics.vr_y || !critics.vs_vr || (w.compress_vs_teacher && !critics.vs_teacher)) {
    throw ContractError("loss_ibs: missing critic");
  }
  IbsTerms t;
  const double h = label_entropy(labels, static_cast<int>(critics.vs_y->out_features()));
  const double mean_kappa = std::accumulate(kappa.begin(), kappa.end(), 0.0) / static_cast<double>(n);
  Var weighted = mul(ba_log_terms(tape, z_vs, labels, *critics.vs_y),
                     tape.constant(Tensor::column(std::vector<double>(kappa.begin(), kappa.end()))));
  t.prediction = add_scalar(neg(mean(weighted)), -h * mean_kappa);
  t.club_vr_y = club_upper_bound(tape, z_vr, labels, *critics.vr_y);
  t.club_vs_vr = club_upper_bound(tape, z_vs, tape.constant(z_vr.value()), *critics.vs_vr);
  t.total = add(add(t.prediction, scale(relu(t.club_vr_y), w.beta_y)), scale(relu(t.club_vs_vr), w.beta_vs));
  if (w.compress_vs_teacher) {
    t.club_vs_teacher = club_upper_bound(tape, z_vs, tape.constant(graph_embedding.value()), *critics.vs_teacher);
    t.total = add(t.total, relu(t.club_vs_teacher));
  }
  return t;
}

Var info_nce(const Var& student, const Var& teacher, double tau) {
  const std::size_t n = student.rows();
  if (n < 2) throw ContractError("contrastive distillation needs at least two samples");
  if (!student.value().same_shape(teacher.value())) throw DimensionError("info_nce: projection shapes differ");
  Var sim = scale(matmul(l2_normalize_rows(student), transpose(l2_normalize_rows(teacher))), 1.0 / tau);
  std::vector<int> diagonal(n);
  std::iota(diagonal.begin(), diagonal.end(), 0);
  Var forward = cross_entropy_logits(sim, diagonal);
  Var backward = cross_entropy_logits(transpose(sim), diagonal);
  return scale(add(forward, backward), 0.5);
}

Var loss_ckd(const Var& proj_vs, const Var& proj_vr, const Var& proj_teacher, double tau) {
  return add(info_nce(proj_vs, proj_teacher, tau), info_nce(proj_vr, proj_teacher, tau));
}

Var loss_total(const LossTerms& t, const LossWeights& w) {
  Var ib = scale(add(t.ibt, t.ibs), w.lambda_ib);
  Var kd = scale(add(t.ckd, scale(t.orth, w.lambda_orth)), w.lambda_kd);
  return add(add(add(t.task, ib), scale(t.recon, w.lambda_r)), kd);
}

}  // namespace dibod
