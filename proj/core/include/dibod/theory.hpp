// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

// Exact discrete-probability checks of the view-redundancy lemmas and the
// confidence-threshold theorem. All quantities are in nats with 0 log 0 = 0.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dibod/tensor.hpp"

namespace dibod {

/// Joint distribution over named finite axes, stored row-major with the first axis slowest.
class JointTable {
 public:
  static constexpr std::size_t kMaxCardinality = 16;

  JointTable(std::vector<std::string> axes, std::vector<std::size_t> cards, std::vector<double> probs);

  std::size_t axis(const std::string& name) const;
  const std::vector<std::string>& axes() const noexcept { return axes_; }
  const std::vector<std::size_t>& cards() const noexcept { return cards_; }
  const std::vector<double>& probs() const noexcept { return probs_; }

  double at(std::span<const std::size_t> index) const;
  /// Marginal over the listed axes, flattened in the listed order.
  std::vector<double> marginal(std::span<const std::size_t> keep) const;
  /// The conditional table given axis = value (that axis is removed).
  JointTable condition(const std::string& axis, std::size_t value) const;

 private:
  std::vector<std::string> axes_;
  std::vector<std::size_t> cards_;
  std::vector<double> probs_;
};

/// Parses {"axes": [{"name": .., "card": ..}, ..], "probs": [..]}. Throws
/// FormatError on bad structure and ContractError on an invalid distribution.
JointTable joint_table_from_json(const std::string& text);
JointTable read_joint_table(const std::filesystem::path& path);
std::string joint_table_to_json(const JointTable& t);

/// Entropy of the marginal over the named axes.
double entropy(const JointTable& t, std::span<const std::string> axes);
double mi(const JointTable& t, const std::string& a, const std::string& b);
double conditional_mi(const JointTable& t, const std::string& a, const std::string& b, const std::string& given);

struct Lemma1Report {
  double i_y_phi = 0;
  double i_z_phi_given_y = 0;
  double i_z_y = 0;
  double i_z_y_given_phi = 0;
  double gap = 0;
  bool conditions_hold = false;
  bool equivalence_holds = false;
};

/// Uses axes "Z", "Y", "Phi". Conditions and gap are judged at 1e-12.
Lemma1Report check_lemma1(const JointTable& t);

struct Lemma2Report {
  double lhs = 0;                      // I(Z; Y | Phi)
  double rhs = 0;                      // sum_i theta_i I(Z; Y | Phi = i)
  double gap = 0;
  std::vector<double> view_probabilities;  // P(Phi = i)
  std::vector<double> per_view_mi;
  std::vector<double> theta;
  bool theta_matches_view_probabilities = false;
};

/// Throws ContractError unless theta is a distribution over the Phi axis.
Lemma2Report check_lemma2(const JointTable& t, std::span<const double> theta);

/// Samples with a reported confidence row, a prediction and a ground-truth label.
struct ConfidencePopulation {
  Tensor confidences;        // n x m
  std::vector<int> predicted;
  std::vector<int> truth;
  std::size_t num_classes() const noexcept { return confidences.cols(); }
};

/// A block of classes sharing one posterior: inputs in the block reveal the
/// block and nothing more.
struct PosteriorBlock {
  double weight = 1.0;
  std::vector<int> classes;
  std::vector<double> posterior;  // over `classes`
};

/// Ideal predictor: each sample picks a block by weight, reports the block's
/// posterior as its confidence, and draws both the label and the prediction
/// independently from that posterior.
ConfidencePopulation ideal_block_population(std::span<const PosteriorBlock> blocks, std::size_t m, std::size_t n,
                                            std::uint64_t seed);

/// Four classes in two blocks: {0, 1} with posterior (0.7, 0.3), {2, 3} with (0.4, 0.6), equal weights.
std::vector<PosteriorBlock> default_blocks();

/// Binary classes whose posterior is (0.8, 0.2) or (0.3, 0.7) with equal
/// probability and whose prediction is the argmax. Calibrated but not ideal in
/// the theorem's sense.
ConfidencePopulation argmax_mixture_population(std::size_t n, std::uint64_t seed);

struct Theorem1Report {
  std::size_t n = 0;
  std::vector<double> t_empirical;   // mean predicted-class confidence over samples predicted c
  std::vector<double> t_double_sum;  // sum_k p(pred = c | y = k) p(y = k | pred = c)
  std::vector<double> t_expectation; // sum_k p(pred = c | y = k) E_{pred = c} conf_k
  double max_gap_empirical_double_sum = 0;
  double max_gap_double_sum_expectation = 0;
  /// Classes never predicted are skipped.
  std::vector<bool> class_present;
};

Theorem1Report check_theorem1(const ConfidencePopulation& pop);

}  // namespace dibod
