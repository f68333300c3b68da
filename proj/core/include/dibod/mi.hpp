// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

// Variational mutual-information bounds.
//
// Every estimator takes the critic's parameters as constants on the caller's
// tape: the critic is fitted separately, by maximum likelihood, through
// VariationalCritic::fit_step on detached inputs.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dibod/autodiff.hpp"
#include "dibod/layers.hpp"
#include "dibod/optim.hpp"
#include "dibod/rng.hpp"

namespace dibod {

enum class CriticKind { categorical, gaussian };

inline constexpr double kLogvarBound = 5.0;

/// A conditional model q(target | z) with its own optimizer.
///
/// Categorical critics output row-softmax distributions over `out` classes.
/// Gaussian critics output a diagonal Gaussian over `out`-dimensional targets,
/// with log-variance squashed into (-kLogvarBound, kLogvarBound) by a scaled tanh.
class VariationalCritic {
 public:
  VariationalCritic(const std::string& name, CriticKind kind, std::size_t in, std::size_t out, std::size_t hidden, Rng& rng,
                    AdamOptions options = {});
  VariationalCritic(const VariationalCritic&) = delete;
  VariationalCritic& operator=(const VariationalCritic&) = delete;
  VariationalCritic(VariationalCritic&&) = delete;

  CriticKind kind() const noexcept { return kind_; }
  std::size_t in_features() const noexcept { return in_; }
  std::size_t out_features() const noexcept { return out_; }

  /// n x out log q(c | z_i) for a categorical critic.
  Var log_probs(Tape& tape, const Var& z, bool track = false);
  /// Mean and log-variance, each n x out, for a Gaussian critic.
  std::pair<Var, Var> gaussian(Tape& tape, const Var& z, bool track = false);

  /// One maximum-likelihood step on class labels; returns the negative log-likelihood before the step.
  double fit_step(const Tensor& z, std::span<const int> labels);
  /// One maximum-likelihood step on continuous targets.
  double fit_step(const Tensor& z, const Tensor& targets);

  std::vector<Parameter*> parameters();

 private:
  double finish_step(Tape& tape, const Var& nll);

  CriticKind kind_;
  std::size_t in_;
  std::size_t out_;
  Mlp body_;
  Mlp logvar_;
  std::vector<Parameter*> params_;
  Adam optimizer_;
};

/// Empirical entropy of integer labels, in nats.
double label_entropy(std::span<const int> labels, int num_classes);

/// Per-sample log q(y_i | z_i), clamped below at log(1e-12); n x 1.
Var ba_log_terms(Tape& tape, const Var& z, std::span<const int> labels, VariationalCritic& critic);

/// H(Y) + (1/n) sum_i log q(y_i | z_i): a lower bound on I(Z; Y).
Var ba_lower_bound(Tape& tape, const Var& z, std::span<const int> labels, VariationalCritic& critic);

/// Categorical CLUB: (1/n) sum_i log q(y_i | z_i) - (1/n^2) sum_i sum_j log q(y_j | z_i).
Var club_upper_bound(Tape& tape, const Var& z, std::span<const int> labels, VariationalCritic& critic);

/// Gaussian CLUB against a continuous target matrix `y` (n x d), differentiable in both z and y.
Var club_upper_bound(Tape& tape, const Var& z, const Var& y, VariationalCritic& critic);

/// Mean over rows of 0.5 * sum_d (exp(logvar) + mu^2 - 1 - logvar).
Var kl_compression(const Var& mu, const Var& logvar);

/// Class-stratified categorical CLUB predicting the view id from z, averaged
/// over classes that have at least two samples. `critics[c]` serves class c.
Var conditional_club_view(Tape& tape, const Var& z, std::span<const int> view_ids, std::span<const int> labels,
                          std::span<VariationalCritic* const> critics);

}  // namespace dibod
