// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#include "dibod/mi.hpp"

#include <cmath>

#include "dibod/error.hpp"

namespace dibod {
namespace {

const double kLogFloor = std::log(1e-12);

std::vector<Parameter*> collect_all(Mlp& body, Mlp& logvar, CriticKind kind) {
  std::vector<Parameter*> out;
  body.collect(out);
  if (kind == CriticKind::gaussian) logvar.collect(out);
  return out;
}

void check_labels(std::span<const int> labels, std::size_t n, std::size_t classes, const char* who) {
  if (labels.size() != n) throw DimensionError(std::string(who) + ": label count does not match sample count");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) throw ContractError(std::string(who) + ": label outside critic range");
  }
}

}  // namespace

VariationalCritic::VariationalCritic(const std::string& name, CriticKind kind, std::size_t in, std::size_t out,
                                     std::size_t hidden, Rng& rng, AdamOptions options)
    : kind_(kind),
      in_(in),
      out_(out),
      body_(name + ".body", in, hidden, out, rng),
      logvar_(kind == CriticKind::gaussian ? Mlp(name + ".logvar", in, hidden, out, rng) : Mlp()),
      params_(collect_all(body_, logvar_, kind)),
      optimizer_(params_, options) {}

Var VariationalCritic::log_probs(Tape& tape, const Var& z, bool track) {
  if (kind_ != CriticKind::categorical) throw ContractError("log_probs needs a categorical critic");
  return log_softmax_rows(body_(tape, z, track));
}

std::pair<Var, Var> VariationalCritic::gaussian(Tape& tape, const Var& z, bool track) {
  if (kind_ != CriticKind::gaussian) throw ContractError("gaussian needs a Gaussian critic");
  return {body_(tape, z, track), scale(tanh(scale(logvar_(tape, z, track), 1.0 / kLogvarBound)), kLogvarBound)};
}

double VariationalCritic::finish_step(Tape& tape, const Var& nll) {
  optimizer_.zero_grad();
  tape.backward(nll);
  optimizer_.step();
  return nll.item();
}

double VariationalCritic::fit_step(const Tensor& z, std::span<const int> labels) {
  check_labels(labels, z.rows(), out_, "critic fit");
  Tape tape;
  Var nll = cross_entropy_logits(body_(tape, tape.constant(z), true), labels);
  return finish_step(tape, nll);
}

double VariationalCritic::fit_step(const Tensor& z, const Tensor& targets) {
  if (kind_ != CriticKind::gaussian) throw ContractError("continuous targets need a Gaussian critic");
  if (targets.rows() != z.rows() || targets.cols() != out_) throw DimensionError("critic fit: target shape mismatch");
  Tape tape;
  auto [mu, logvar] = gaussian(tape, tape.constant(z), true);
  Var resid = square(sub(tape.constant(targets), mu));
  Var per_entry = add(mul(resid, exp(neg(logvar))), logvar);
  Var nll = scale(sum(per_entry), 0.5 / static_cast<double>(z.rows()));
  return finish_step(tape, nll);
}

std::vector<Parameter*> VariationalCritic::parameters() { return params_; }

double label_entropy(std::span<const int> labels, int num_classes) {
  if (labels.empty()) return 0.0;
  std::vector<double> counts(static_cast<std::size_t>(num_classes), 0.0);
  for (int y : labels) counts.at(static_cast<std::size_t>(y)) += 1.0;
  double h = 0.0;
  for (double c : counts) {
    if (c > 0.0) {
      const double p = c / static_cast<double>(labels.size());
      h -= p * std::log(p);
    }
  }
  return h;
}

Var ba_log_terms(Tape& tape, const Var& z, std::span<const int> labels, VariationalCritic& critic) {
  check_labels(labels, z.rows(), critic.out_features(), "ba_lower_bound");
  return clamp_min(pick_per_row(critic.log_probs(tape, z), labels), kLogFloor);
}

Var ba_lower_bound(Tape& tape, const Var& z, std::span<const int> labels, VariationalCritic& critic) {
  if (labels.size() < 2) throw ContractError("ba_lower_bound needs at least two samples");
  check_labels(labels, z.rows(), critic.out_features(), "ba_lower_bound");
  const double h = label_entropy(labels, static_cast<int>(critic.out_features()));
  return add_scalar(mean(ba_log_terms(tape, z, labels, critic)), h);
}

Var club_upper_bound(Tape& tape, const Var& z, std::span<const int> labels, VariationalCritic& critic) {
  if (labels.size() < 2) throw ContractError("club_upper_bound needs at least two samples");
  check_labels(labels, z.rows(), critic.out_features(), "club_upper_bound");
  Var logq = clamp_min(critic.log_probs(tape, z), kLogFloor);
  std::vector<double> freq(critic.out_features(), 0.0);
  for (int y : labels) freq[static_cast<std::size_t>(y)] += 1.0 / static_cast<double>(labels.size());
  Var positive = mean(pick_per_row(logq, labels));
  Var negative = mean(matmul(logq, tape.constant(Tensor::column(std::move(freq)))));
  return sub(positive, negative);
}

Var club_upper_bound(Tape& tape, const Var& z, const Var& y, VariationalCritic& critic) {
  if (z.rows() < 2) throw ContractError("club_upper_bound needs at least two samples");
  if (y.rows() != z.rows() || y.cols() != critic.out_features()) throw DimensionError("club_upper_bound: target shape mismatch");
  auto [mu, logvar] = critic.gaussian(tape, z);
  Var precision = exp(neg(logvar));
  Var m1 = mean_cols(y);
  Var m2 = mean_cols(square(y));
  Var positive = mul(square(sub(y, mu)), precision);
  Var marginal = add(sub(square(mu), scale(mul(mu, m1), 2.0)), m2);
  Var negative = mul(marginal, precision);
  return scale(sum(sub(negative, positive)), 0.5 / static_cast<double>(z.rows()));
}

Var kl_compression(const Var& mu, const Var& logvar) {
  if (!mu.value().same_shape(logvar.value())) throw DimensionError("kl_compression: mean and log-variance shapes differ");
  Var terms = sub(add(exp(logvar), square(mu)), add_scalar(logvar, 1.0));
  return scale(sum(terms), 0.5 / static_cast<double>(mu.rows()));
}

Var conditional_club_view(Tape& tape, const Var& z, std::span<const int> view_ids, std::span<const int> labels,
                          std::span<VariationalCritic* const> critics) {
  if (view_ids.size() != z.rows() || labels.size() != z.rows()) throw DimensionError("conditional_club_view: length mismatch");
  Var total;
  int used = 0;
  for (std::size_t c = 0; c < critics.size(); ++c) {
    std::vector<std::size_t> rows;
    std::vector<int> views;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == static_cast<int>(c)) {
        rows.push_back(i);
        views.push_back(view_ids[i]);
      }
    }
    if (rows.size() < 2) continue;
    if (critics[c] == nullptr) throw ContractError("conditional_club_view: class present without a critic");
    Var term = club_upper_bound(tape, gather_rows(z, rows), views, *critics[c]);
    total = used == 0 ? term : add(total, term);
    ++used;
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= critics.size()) throw ContractError("conditional_club_view: label without a critic");
  }
  if (used == 0) return tape.constant(Tensor::scalar(0.0));
  return scale(total, 1.0 / used);
}

}  // namespace dibod
