// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "dibod/error.hpp"
#include "dibod/mi.hpp"
#include "gradcheck.hpp"

namespace dibod {
namespace {

using testing::gradcheck;
using testing::random_tensor;

constexpr double kRho = 0.9;
const double kGaussianMi = -0.5 * std::log(1.0 - kRho * kRho);

struct GaussianPairs {
  Tensor z, y;
};

GaussianPairs gaussian_pairs(std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  GaussianPairs p{Tensor::zeros(n, 1), Tensor::zeros(n, 1)};
  for (std::size_t i = 0; i < n; ++i) {
    p.z[i] = standard_normal(rng);
    p.y[i] = kRho * p.z[i] + std::sqrt(1.0 - kRho * kRho) * standard_normal(rng);
  }
  return p;
}

// Equiprobable bins of a standard normal.
std::vector<int> discretize(const Tensor& y, int bins) {
  std::vector<double> cuts;
  for (int b = 1; b < bins; ++b) {
    // Inverse normal CDF by bisection on erfc.
    const double target = static_cast<double>(b) / bins;
    double lo = -10, hi = 10;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (0.5 * std::erfc(-mid / std::sqrt(2.0)) < target ? lo : hi) = mid;
    }
    cuts.push_back(0.5 * (lo + hi));
  }
  std::vector<int> out;
  for (double v : y.values()) out.push_back(static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), v) - cuts.begin()));
  return out;
}

void set_params(VariationalCritic& c, std::initializer_list<Tensor> values) {
  auto ps = c.parameters();
  ASSERT_EQ(ps.size(), values.size());
  std::size_t k = 0;
  for (const Tensor& v : values) {
    ASSERT_TRUE(ps[k]->value.same_shape(v)) << ps[k]->name;
    ps[k++]->value = v;
  }
}

// q(y | z) = softmax(50 z) on one-hot z: the identity channel to within e^-50.
void make_identity_critic(VariationalCritic& c, std::size_t m) {
  Tensor big = Tensor::identity(m);
  for (double& v : big.values()) v *= 50.0;
  set_params(c, {Tensor::identity(m), Tensor::zeros(1, m), big, Tensor::zeros(1, m)});
}

Tensor one_hot(std::span<const int> ids, std::size_t m) {
  Tensor t = Tensor::zeros(ids.size(), m);
  for (std::size_t i = 0; i < ids.size(); ++i) t(i, static_cast<std::size_t>(ids[i])) = 1.0;
  return t;
}

TEST(LabelEntropy, UniformAndDegenerate) {
  const std::vector<int> balanced{0, 1, 0, 1};
  EXPECT_NEAR(label_entropy(balanced, 2), std::log(2.0), 1e-15);
  const std::vector<int> single{2, 2, 2};
  EXPECT_EQ(label_entropy(single, 3), 0.0);
}

TEST(BaLowerBound, PerfectCriticOnIdentityChannelGivesLn2) {
  Rng rng = make_rng(1);
  VariationalCritic c("c", CriticKind::categorical, 2, 2, 2, rng);
  make_identity_critic(c, 2);
  const std::vector<int> y{0, 1, 1, 0, 1, 0};
  Tape t;
  EXPECT_NEAR(ba_lower_bound(t, t.constant(one_hot(y, 2)), y, c).item(), std::log(2.0), 1e-12);
}

TEST(BaLowerBound, UniformCriticGivesEntropyMinusLogM) {
  Rng rng = make_rng(2);
  VariationalCritic c("c", CriticKind::categorical, 3, 3, 4, rng);
  for (Parameter* p : c.parameters()) p->value.fill(0.0);
  const std::vector<int> y{0, 1, 2, 0, 1, 2};
  Tape t;
  const double bound = ba_lower_bound(t, t.constant(random_tensor(6, 3, rng)), y, c).item();
  EXPECT_NEAR(bound, label_entropy(y, 3) - std::log(3.0), 1e-12);
  EXPECT_LE(bound, 1e-12);
}

TEST(BaLowerBound, TrainedCriticOnDiscretizedGaussianStaysBelowTheTrueMi) {
  const GaussianPairs d = gaussian_pairs(1024, 7);
  const std::vector<int> y = discretize(d.y, 8);
  Rng rng = make_rng(8);
  VariationalCritic c("c", CriticKind::categorical, 1, 8, 16, rng, {.lr = 1e-2});
  for (int step = 0; step < 3000; ++step) c.fit_step(d.z, y);
  Tape t;
  const double bound = ba_lower_bound(t, t.constant(d.z), y, c).item();
  EXPECT_LE(bound, kGaussianMi);
  EXPECT_GE(bound, kGaussianMi - 0.15);
}

TEST(BaLowerBound, ClampsImpossibleLabels) {
  Rng rng = make_rng(3);
  VariationalCritic c("c", CriticKind::categorical, 2, 2, 2, rng);
  make_identity_critic(c, 2);
  Tensor big = Tensor::identity(2);
  for (double& v : big.values()) v *= 1e4;
  c.parameters()[2]->value = big;
  const std::vector<int> y{0, 1};
  const std::vector<int> wrong{1, 0};
  Tape t;
  const Var terms = ba_log_terms(t, t.constant(one_hot(y, 2)), wrong, c);
  for (double v : terms.value().values()) EXPECT_NEAR(v, std::log(1e-12), 1e-9);
}

TEST(BaLowerBound, RejectsTinyBatchesAndBadLabels) {
  Rng rng = make_rng(4);
  VariationalCritic c("c", CriticKind::categorical, 2, 2, 2, rng);
  Tape t;
  const std::vector<int> one{0};
  EXPECT_THROW(ba_lower_bound(t, t.constant(Tensor::zeros(1, 2)), one, c), ContractError);
  const std::vector<int> bad{0, 5};
  EXPECT_THROW(ba_lower_bound(t, t.constant(Tensor::zeros(2, 2)), bad, c), ContractError);
}

TEST(ClubUpperBound, ConstantRepresentationGivesZero) {
  Rng rng = make_rng(5);
  VariationalCritic c("c", CriticKind::categorical, 3, 4, 8, rng);
  Tensor z = Tensor::zeros(10, 3);
  for (std::size_t i = 0; i < 10; ++i) z(i, 0) = 0.7, z(i, 2) = -1.3;
  const std::vector<int> y{0, 1, 2, 3, 0, 0, 1, 3, 3, 2};
  Tape t;
  EXPECT_NEAR(club_upper_bound(t, t.constant(z), y, c).item(), 0.0, 1e-12);
}

TEST(ClubUpperBound, IndependentLabelsAverageNearZero) {
  double total = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng = make_rng(seed, {1});
    const Tensor z = random_tensor(512, 1, rng);
    std::vector<int> y(512);
    for (int& v : y) v = static_cast<int>(uniform_index(rng, 2));
    VariationalCritic c("c", CriticKind::categorical, 1, 2, 16, rng, {.lr = 1e-2});
    for (int step = 0; step < 200; ++step) c.fit_step(z, y);
    Tape t;
    total += club_upper_bound(t, t.constant(z), y, c).item();
  }
  EXPECT_NEAR(total / 20.0, 0.0, 0.05);
}

// mu = rho z through relu(z) - relu(-z), constant log-variance at the true conditional variance.
void make_exact_gaussian_critic(VariationalCritic& c) {
  const double logvar = std::log(1.0 - kRho * kRho);
  set_params(c, {Tensor::row({1.0, -1.0}), Tensor::zeros(1, 2), Tensor::column({kRho, -kRho}), Tensor::zeros(1, 1),
                 Tensor::zeros(1, 2), Tensor::zeros(1, 2), Tensor::zeros(2, 1),
                 Tensor::scalar(kLogvarBound * std::atanh(logvar / kLogvarBound))});
}

TEST(ClubUpperBound, ExactGaussianCriticBoundsTheTrueMiFromAbove) {
  Rng rng = make_rng(6);
  VariationalCritic c("c", CriticKind::gaussian, 1, 1, 2, rng);
  make_exact_gaussian_critic(c);
  const GaussianPairs d = gaussian_pairs(4096, 9);
  Tape t;
  auto [mu, logvar] = c.gaussian(t, t.constant(d.z));
  EXPECT_NEAR(logvar.value()[0], std::log(1.0 - kRho * kRho), 1e-12);
  const double club = club_upper_bound(t, t.constant(d.z), t.constant(d.y), c).item();
  EXPECT_GE(club, kGaussianMi);
  // With the exact conditional the estimator's population value is rho^2 / (1 - rho^2).
  EXPECT_NEAR(club, kRho * kRho / (1.0 - kRho * kRho), 0.3);
}

TEST(ClubUpperBound, GaussianFitLowersNll) {
  Rng rng = make_rng(10);
  VariationalCritic c("c", CriticKind::gaussian, 1, 1, 16, rng, {.lr = 1e-2});
  const GaussianPairs d = gaussian_pairs(512, 11);
  const double first = c.fit_step(d.z, d.y);
  double last = first;
  for (int step = 0; step < 1500; ++step) last = c.fit_step(d.z, d.y);
  EXPECT_LT(last, first);
  // Minimum of the per-sample NLL (without the 2 pi constant): 0.5 * (1 + log(1 - rho^2)).
  EXPECT_NEAR(last, 0.5 * (1.0 + std::log(1.0 - kRho * kRho)), 0.05);
}

TEST(KlCompression, ClosedFormCases) {
  Tape t;
  EXPECT_EQ(kl_compression(t.constant(Tensor::zeros(3, 2)), t.constant(Tensor::zeros(3, 2))).item(), 0.0);
  EXPECT_EQ(kl_compression(t.constant(Tensor::row({1, 0})), t.constant(Tensor::zeros(1, 2))).item(), 0.5);
  Rng rng = make_rng(12);
  const Tensor mu = random_tensor(5, 3, rng), lv = random_tensor(5, 3, rng);
  double direct = 0;
  for (std::size_t i = 0; i < mu.size(); ++i) direct += 0.5 * (std::exp(lv[i]) + mu[i] * mu[i] - 1.0 - lv[i]);
  EXPECT_NEAR(kl_compression(t.constant(mu), t.constant(lv)).item(), direct / 5.0, 1e-12);
  EXPECT_THROW(kl_compression(t.constant(mu), t.constant(Tensor::zeros(5, 2))), DimensionError);
}

TEST(ConditionalClubView, ViewBlindRepresentationGivesZero) {
  Rng rng = make_rng(13);
  VariationalCritic c0("c0", CriticKind::categorical, 2, 2, 4, rng), c1("c1", CriticKind::categorical, 2, 2, 4, rng);
  const Tensor per_sample = random_tensor(4, 2, rng);
  Tensor z = Tensor::zeros(8, 2);
  std::vector<int> views, labels;
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t k = 0; k < 2; ++k) z(i, k) = per_sample(i / 2, k);
    views.push_back(static_cast<int>(i % 2));
    labels.push_back(i < 4 ? 0 : 1);
  }
  const std::vector<VariationalCritic*> critics{&c0, &c1};
  Tape t;
  EXPECT_NEAR(conditional_club_view(t, t.constant(z), views, labels, critics).item(), 0.0, 1e-12);
}

TEST(ConditionalClubView, OneHotViewCodeReachesLogV) {
  Rng rng = make_rng(14);
  constexpr std::size_t kViews = 3;
  VariationalCritic c0("c0", CriticKind::categorical, kViews, kViews, kViews, rng);
  VariationalCritic c1("c1", CriticKind::categorical, kViews, kViews, kViews, rng);
  make_identity_critic(c0, kViews);
  make_identity_critic(c1, kViews);
  std::vector<int> views, labels;
  for (int i = 0; i < 12; ++i) {
    views.push_back(i % 3);
    labels.push_back(i / 6);
  }
  const std::vector<VariationalCritic*> critics{&c0, &c1};
  Tape t;
  EXPECT_GE(conditional_club_view(t, t.constant(one_hot(views, kViews)), views, labels, critics).item(),
            std::log(static_cast<double>(kViews)));
}

TEST(ConditionalClubView, SingleClassCollapsesToPlainClub) {
  Rng rng = make_rng(15);
  VariationalCritic c0("c0", CriticKind::categorical, 2, 2, 4, rng), c1("c1", CriticKind::categorical, 2, 2, 4, rng);
  const Tensor z = random_tensor(6, 2, rng);
  const std::vector<int> views{0, 1, 1, 0, 0, 1}, labels(6, 1);
  const std::vector<VariationalCritic*> critics{&c0, &c1};
  Tape t;
  EXPECT_NEAR(conditional_club_view(t, t.constant(z), views, labels, critics).item(),
              club_upper_bound(t, t.constant(z), views, c1).item(), 1e-15);
}

TEST(ConditionalClubView, SkipsClassesWithOneSampleAndRejectsMissingCritics) {
  Rng rng = make_rng(16);
  VariationalCritic c0("c0", CriticKind::categorical, 2, 2, 4, rng), c1("c1", CriticKind::categorical, 2, 2, 4, rng);
  const Tensor z = random_tensor(5, 2, rng);
  const std::vector<int> views{0, 1, 1, 0, 0}, labels{0, 0, 0, 0, 1};
  const std::vector<VariationalCritic*> both{&c0, &c1};
  Tape t;
  const std::vector<std::size_t> first{0, 1, 2, 3};
  const std::vector<int> first_views{0, 1, 1, 0};
  EXPECT_NEAR(conditional_club_view(t, t.constant(z), views, labels, both).item(),
              club_upper_bound(t, gather_rows(t.constant(z), first), first_views, c0).item(), 1e-15);
  const std::vector<VariationalCritic*> only_first{&c0};
  EXPECT_THROW(conditional_club_view(t, t.constant(z), views, labels, only_first), ContractError);
}

TEST(MiGradients, BoundsMatchFiniteDifferencesInZ) {
  Rng rng = make_rng(17);
  VariationalCritic cat("cat", CriticKind::categorical, 3, 3, 5, rng);
  VariationalCritic gauss("g", CriticKind::gaussian, 3, 2, 5, rng);
  VariationalCritic v0("v0", CriticKind::categorical, 3, 2, 5, rng), v1("v1", CriticKind::categorical, 3, 2, 5, rng);
  const std::vector<int> y{0, 2, 1, 1, 0, 2};
  const std::vector<int> views{0, 1, 0, 1, 1, 0}, classes{0, 0, 0, 1, 1, 1};
  const std::vector<VariationalCritic*> per_class{&v0, &v1};
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor z = random_tensor(6, 3, rng);
    EXPECT_LE(gradcheck([&](Tape& t, std::span<const Var> v) { return ba_lower_bound(t, v[0], y, cat); }, {z}).max_rel_err,
              1e-4);
    EXPECT_LE(gradcheck([&](Tape& t, std::span<const Var> v) { return club_upper_bound(t, v[0], y, cat); }, {z}).max_rel_err,
              1e-4);
    EXPECT_LE(gradcheck([&](Tape& t, std::span<const Var> v) { return club_upper_bound(t, v[0], v[1], gauss); },
                        {z, random_tensor(6, 2, rng)})
                  .max_rel_err,
              1e-4);
    EXPECT_LE(gradcheck([&](Tape& t, std::span<const Var> v) { return conditional_club_view(t, v[0], views, classes, per_class); },
                        {z})
                  .max_rel_err,
              1e-4);
    EXPECT_LE(gradcheck([](Tape&, std::span<const Var> v) { return kl_compression(v[0], v[1]); },
                        {random_tensor(4, 3, rng), random_tensor(4, 3, rng)})
                  .max_rel_err,
              1e-4);
  }
}

}  // namespace
}  // namespace dibod
