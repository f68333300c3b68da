// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "dibod/error.hpp"
#include "dibod/harness.hpp"
#include "dibod/rng.hpp"
#include "dibod/theory.hpp"

namespace dibod {
namespace {

const std::filesystem::path kTables = std::filesystem::path(DIBOD_FIXTURES) / "tables";

JointTable pair_table(std::vector<double> probs, std::size_t ca, std::size_t cb) {
  return JointTable({"A", "B"}, {ca, cb}, std::move(probs));
}

std::vector<double> random_probs(std::size_t n, Rng& rng) {
  std::vector<double> p(n);
  double total = 0;
  for (double& v : p) total += (v = uniform01(rng) + 1e-3);
  for (double& v : p) v /= total;
  return p;
}

double plogp_sum(const std::vector<double>& p) {
  double h = 0;
  for (double v : p) {
    if (v > 0) h -= v * std::log(v);
  }
  return h;
}

// Marginal of a flat row-major table over the axes flagged in `keep`, by enumeration.
std::vector<double> marginal_of(const std::vector<double>& probs, const std::vector<std::size_t>& cards,
                                const std::vector<bool>& keep) {
  std::size_t out_size = 1;
  for (std::size_t a = 0; a < cards.size(); ++a) {
    if (keep[a]) out_size *= cards[a];
  }
  std::vector<double> out(out_size, 0.0);
  for (std::size_t flat = 0; flat < probs.size(); ++flat) {
    std::size_t rem = flat, key = 0, stride = 1;
    for (std::size_t a = cards.size(); a-- > 0;) {
      const std::size_t idx = rem % cards[a];
      rem /= cards[a];
      if (keep[a]) key += idx * stride, stride *= cards[a];
    }
    out[key] += probs[flat];
  }
  return out;
}

double h_of(const JointTable& t, std::vector<bool> keep) { return plogp_sum(marginal_of(t.probs(), t.cards(), keep)); }

// Z = Y xor N, P(N = 1 | Phi = v) = noise[v], Y ~ Bernoulli(py) independent of Phi.
JointTable xor_table(std::vector<double> noise, std::vector<double> views, double py = 0.5) {
  const std::size_t v = views.size();
  std::vector<double> probs(4 * v, 0.0);
  for (std::size_t z = 0; z < 2; ++z) {
    for (std::size_t y = 0; y < 2; ++y) {
      for (std::size_t f = 0; f < v; ++f) {
        probs[(z * 2 + y) * v + f] = (y ? py : 1 - py) * views[f] * (z != y ? noise[f] : 1 - noise[f]);
      }
    }
  }
  return JointTable({"Z", "Y", "Phi"}, {2, 2, v}, probs);
}

TEST(Mi, IndependentAndIdenticalBinaryPairs) {
  EXPECT_NEAR(mi(pair_table({0.25, 0.25, 0.25, 0.25}, 2, 2), "A", "B"), 0.0, 1e-15);
  EXPECT_NEAR(mi(pair_table({0.5, 0, 0, 0.5}, 2, 2), "A", "B"), std::log(2.0), 1e-15);
}

TEST(Mi, MatchesEntropyIdentityAndIsSymmetric) {
  Rng rng = make_rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const JointTable t = pair_table(random_probs(9, rng), 3, 3);
    const double expected = h_of(t, {true, false}) + h_of(t, {false, true}) - h_of(t, {true, true});
    EXPECT_NEAR(mi(t, "A", "B"), expected, 1e-12);
    EXPECT_NEAR(mi(t, "A", "B"), mi(t, "B", "A"), 1e-12);
    EXPECT_GE(mi(t, "A", "B"), -1e-12);
  }
}

TEST(Mi, CoarseningNeverIncreasesInformation) {
  Rng rng = make_rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t cz = 2 + uniform_index(rng, 5), cy = 2 + uniform_index(rng, 3);
    const JointTable t({"Z", "Y"}, {cz, cy}, random_probs(cz * cy, rng));
    // Merge Z values through a random map onto cz - 1 cells.
    std::vector<std::size_t> to(cz);
    for (std::size_t z = 0; z < cz; ++z) to[z] = z < cz - 1 ? z : uniform_index(rng, cz - 1);
    std::vector<double> merged((cz - 1) * cy, 0.0);
    for (std::size_t z = 0; z < cz; ++z) {
      for (std::size_t y = 0; y < cy; ++y) merged[to[z] * cy + y] += t.probs()[z * cy + y];
    }
    const JointTable coarse({"Z", "Y"}, {cz - 1, cy}, merged);
    EXPECT_LE(mi(coarse, "Z", "Y"), mi(t, "Z", "Y") + 1e-12);
  }
}

TEST(ConditionalMi, IndependentConditionerLeavesMiUnchanged) {
  Rng rng = make_rng(3);
  const std::vector<double> ab = random_probs(6, rng), c = random_probs(3, rng);
  std::vector<double> probs;
  for (double p : ab) {
    for (double q : c) probs.push_back(p * q);
  }
  const JointTable t({"A", "B", "C"}, {2, 3, 3}, probs);
  EXPECT_NEAR(conditional_mi(t, "A", "B", "C"), mi(t, "A", "B"), 1e-12);
}

TEST(ConditionalMi, ConditioningOnACopyRemovesEverything) {
  std::vector<double> probs(8, 0.0);
  probs[0] = probs[7] = 0.5;
  const JointTable t({"A", "B", "C"}, {2, 2, 2}, probs);
  EXPECT_NEAR(conditional_mi(t, "A", "B", "C"), 0.0, 1e-15);
  EXPECT_NEAR(mi(t, "A", "B"), std::log(2.0), 1e-15);
}

TEST(ConditionalMi, MatchesTheChainRule) {
  Rng rng = make_rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const JointTable t({"A", "B", "C"}, {2, 3, 4}, random_probs(24, rng));
    // I(A; B, C) - I(A; C), each from entropies of enumerated marginals.
    const double i_a_bc = h_of(t, {true, false, false}) + h_of(t, {false, true, true}) - h_of(t, {true, true, true});
    const double i_a_c = h_of(t, {true, false, false}) + h_of(t, {false, false, true}) - h_of(t, {true, false, true});
    EXPECT_NEAR(conditional_mi(t, "A", "B", "C"), i_a_bc - i_a_c, 1e-12);
    EXPECT_GE(conditional_mi(t, "A", "B", "C"), -1e-12);
  }
}

TEST(JointTableContract, RejectsInvalidTables) {
  EXPECT_THROW(pair_table({0.5, 0.5, 0.5, 0.5}, 2, 2), ContractError);
  EXPECT_THROW(pair_table({-0.5, 0.5, 0.5, 0.5}, 2, 2), ContractError);
  EXPECT_THROW(pair_table({1.0}, 2, 2), ContractError);
  EXPECT_THROW(JointTable({"A"}, {17}, std::vector<double>(17, 1.0 / 17)), ContractError);
  EXPECT_THROW(mi(pair_table({0.25, 0.25, 0.25, 0.25}, 2, 2), "A", "A"), ContractError);
}

TEST(JointTableJson, RoundTripsAndTypesItsErrors) {
  const JointTable t = xor_table({0.1, 0.3}, {0.4, 0.6});
  const JointTable back = joint_table_from_json(joint_table_to_json(t));
  EXPECT_EQ(back.axes(), t.axes());
  EXPECT_EQ(back.probs(), t.probs());
  EXPECT_THROW(read_joint_table(kTables / "corrupt_mass.json"), ContractError);
  EXPECT_NO_THROW(read_joint_table(kTables / "independent_views.json"));
  EXPECT_THROW(joint_table_from_json("{\"axes\": 3}"), FormatError);
  EXPECT_THROW(joint_table_from_json("not json"), FormatError);
  EXPECT_THROW(read_joint_table(kTables / "absent.json"), IoError);
}

TEST(Lemma1, NoisyChannelIndependentOfTheViewSatisfiesEquivalence) {
  const Lemma1Report r = check_lemma1(xor_table({0.15, 0.15, 0.15}, {0.2, 0.5, 0.3}));
  EXPECT_LT(r.i_y_phi, 1e-12);
  EXPECT_LT(r.i_z_phi_given_y, 1e-12);
  EXPECT_LT(r.gap, 1e-12);
  EXPECT_TRUE(r.conditions_hold);
  EXPECT_TRUE(r.equivalence_holds);
}

TEST(Lemma1, DeterministicCodeGivesZeroGap) {
  const Lemma1Report r = check_lemma1(xor_table({0.0, 0.0}, {0.5, 0.5}, 0.3));
  EXPECT_EQ(r.gap, 0.0);
  EXPECT_TRUE(r.equivalence_holds);
}

TEST(Lemma1, LabelCorrelatedWithViewBreaksEquivalence) {
  // P(Y = Phi) = 0.8, Z = Y xor N with view-independent noise 0.1.
  std::vector<double> probs(8, 0.0);
  for (std::size_t z = 0; z < 2; ++z) {
    for (std::size_t y = 0; y < 2; ++y) {
      for (std::size_t f = 0; f < 2; ++f) probs[(z * 2 + y) * 2 + f] = 0.5 * (y == f ? 0.8 : 0.2) * (z == y ? 0.9 : 0.1);
    }
  }
  const Lemma1Report r = check_lemma1(JointTable({"Z", "Y", "Phi"}, {2, 2, 2}, probs));
  EXPECT_GT(r.i_y_phi, 1e-3);
  EXPECT_GT(r.gap, 1e-3);
  EXPECT_FALSE(r.equivalence_holds);
}

TEST(Lemma1, ViewDependentCodeBreaksEquivalence) {
  const Lemma1Report r = check_lemma1(xor_table({0.0, 0.5}, {0.5, 0.5}));
  EXPECT_GT(r.i_z_phi_given_y, 1e-3);
  EXPECT_GT(r.gap, 1e-3);
  EXPECT_FALSE(r.conditions_hold);
}

TEST(Lemma2, SingleViewIsTrivial) {
  const double theta[] = {1.0};
  const Lemma2Report r = check_lemma2(xor_table({0.2}, {1.0}), theta);
  EXPECT_NEAR(r.gap, 0.0, 1e-15);
}

TEST(Lemma2, SymmetricConstructionHoldsExactly) {
  const double theta[] = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  const Lemma2Report r = check_lemma2(xor_table({0.1, 0.2, 0.3}, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}), theta);
  EXPECT_LT(r.gap, 1e-12);
  EXPECT_TRUE(r.theta_matches_view_probabilities);
  // Per-view values are ln 2 - h(noise) for the binary symmetric channel.
  const double noise[] = {0.1, 0.2, 0.3};
  for (std::size_t v = 0; v < 3; ++v) {
    const double e = noise[v];
    EXPECT_NEAR(r.per_view_mi[v], std::log(2.0) + e * std::log(e) + (1 - e) * std::log(1 - e), 1e-12);
  }
}

TEST(Lemma2, WeightsOtherThanViewProbabilitiesLeaveAGap) {
  const double theta[] = {0.6, 0.3, 0.1};
  const Lemma2Report r = check_lemma2(xor_table({0.1, 0.2, 0.3}, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}), theta);
  EXPECT_GT(r.gap, 1e-3);
  EXPECT_FALSE(r.theta_matches_view_probabilities);
  const double bad[] = {0.5, 0.6, -0.1};
  EXPECT_THROW(check_lemma2(xor_table({0.1, 0.2, 0.3}, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}), bad), ContractError);
}

TEST(HarnessTables, SatisfyTheirStatedRoles) {
  EXPECT_TRUE(check_lemma1(lemma1_noisy_channel_table()).equivalence_holds);
  EXPECT_TRUE(check_lemma1(lemma1_deterministic_table()).equivalence_holds);
  EXPECT_GT(check_lemma1(lemma1_view_dependent_label_table()).gap, 1e-3);
  EXPECT_GT(check_lemma1(lemma1_view_dependent_code_table()).gap, 1e-3);
  const double theta[] = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  EXPECT_LT(check_lemma2(lemma2_symmetric_table(), theta).gap, 1e-12);
}

TEST(Theorem1, DeterministicPosteriorGivesOnes) {
  const PosteriorBlock blocks[] = {{0.5, {0}, {1.0}}, {0.5, {1}, {1.0}}};
  const Theorem1Report r = check_theorem1(ideal_block_population(blocks, 2, 1000, 3));
  for (std::size_t c = 0; c < 2; ++c) {
    EXPECT_EQ(r.t_empirical[c], 1.0);
    EXPECT_EQ(r.t_double_sum[c], 1.0);
    EXPECT_EQ(r.t_expectation[c], 1.0);
  }
}

TEST(Theorem1, IdealPopulationConvergesToTheBlockPosterior) {
  const auto blocks = default_blocks();
  const Theorem1Report large = check_theorem1(ideal_block_population(blocks, 4, 50000, 7));
  // In the population limit every threshold is the class's posterior inside its block.
  const double limit[] = {0.7, 0.3, 0.4, 0.6};
  for (std::size_t c = 0; c < 4; ++c) {
    ASSERT_TRUE(large.class_present[c]);
    EXPECT_NEAR(large.t_empirical[c], limit[c], 0.02);
    EXPECT_LT(std::abs(large.t_empirical[c] - large.t_double_sum[c]), 0.02);
    EXPECT_LT(std::abs(large.t_double_sum[c] - large.t_expectation[c]), 0.02);
  }
  const Theorem1Report small = check_theorem1(ideal_block_population(blocks, 4, 500, 7));
  EXPECT_GT(small.max_gap_empirical_double_sum, large.max_gap_empirical_double_sum);
}

TEST(Theorem1, ArgmaxPredictorIsACounterexample) {
  const Theorem1Report r = check_theorem1(argmax_mixture_population(50000, 7));
  EXPECT_GT(r.max_gap_empirical_double_sum, 0.05);
}

TEST(OracleCheck, FreshSuitePassesWithOneEntryPerCheck) {
  const OracleReport r = cmd_oracle_check();
  EXPECT_TRUE(r.all_pass());
  EXPECT_GE(r.entries.size(), 9u);
  for (const OracleEntry& e : r.entries) EXPECT_TRUE(e.pass) << e.name << ": " << e.report;
  EXPECT_THROW(cmd_oracle_check(kTables / "corrupt_mass.json"), ContractError);
  EXPECT_TRUE(cmd_oracle_check(kTables / "independent_views.json").all_pass());
}

}  // namespace
}  // namespace dibod
