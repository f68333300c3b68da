// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#include "dibod/theory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dibod/error.hpp"
#include "dibod/rng.hpp"

namespace dibod {
namespace {

double plogp_ratio(double p, double q) { return p > 0.0 ? p * std::log(p / q) : 0.0; }

std::size_t sample_index(std::span<const double> weights, Rng& rng) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double u = uniform01(rng) * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return weights.size() - 1;
}

}  // namespace

JointTable::JointTable(std::vector<std::string> axes, std::vector<std::size_t> cards, std::vector<double> probs)
    : axes_(std::move(axes)), cards_(std::move(cards)), probs_(std::move(probs)) {
  if (axes_.empty() || axes_.size() != cards_.size()) throw ContractError("joint table: axes and cardinalities disagree");
  std::size_t size = 1;
  for (std::size_t i = 0; i < cards_.size(); ++i) {
    if (cards_[i] == 0 || cards_[i] > kMaxCardinality) throw ContractError("joint table: cardinality outside [1, 16]");
    for (std::size_t j = 0; j < i; ++j) {
      if (axes_[j] == axes_[i]) throw ContractError("joint table: duplicate axis " + axes_[i]);
    }
    size *= cards_[i];
  }
  if (probs_.size() != size) throw ContractError("joint table: expected " + std::to_string(size) + " probabilities");
  double mass = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ContractError("joint table: negative or non-finite probability");
    mass += p;
  }
  if (std::abs(mass - 1.0) > 1e-12) throw ContractError("joint table: total mass " + std::to_string(mass) + " is not 1");
}

std::size_t JointTable::axis(const std::string& name) const {
  auto it = std::find(axes_.begin(), axes_.end(), name);
  if (it == axes_.end()) throw ContractError("joint table has no axis " + name);
  return static_cast<std::size_t>(it - axes_.begin());
}

double JointTable::at(std::span<const std::size_t> index) const {
  if (index.size() != cards_.size()) throw DimensionError("joint table index has the wrong rank");
  std::size_t flat = 0;
  for (std::size_t i = 0; i < cards_.size(); ++i) flat = flat * cards_[i] + index[i];
  return probs_[flat];
}

std::vector<double> JointTable::marginal(std::span<const std::size_t> keep) const {
  std::size_t size = 1;
  for (std::size_t a : keep) size *= cards_.at(a);
  std::vector<double> out(size, 0.0);
  std::vector<std::size_t> idx(cards_.size(), 0);
  for (double p : probs_) {
    std::size_t flat = 0;
    for (std::size_t a : keep) flat = flat * cards_[a] + idx[a];
    out[flat] += p;
    for (std::size_t i = cards_.size(); i-- > 0;) {
      if (++idx[i] < cards_[i]) break;
      idx[i] = 0;
    }
  }
  return out;
}

JointTable JointTable::condition(const std::string& name, std::size_t value) const {
  const std::size_t ax = axis(name);
  if (value >= cards_[ax]) throw ContractError("joint table: conditioning value out of range");
  if (cards_.size() < 2) throw ContractError("joint table: cannot condition away the only axis");
  std::vector<std::string> axes;
  std::vector<std::size_t> cards;
  for (std::size_t i = 0; i < axes_.size(); ++i) {
    if (i == ax) continue;
    axes.push_back(axes_[i]);
    cards.push_back(cards_[i]);
  }
  std::vector<double> probs;
  std::vector<std::size_t> idx(cards_.size(), 0);
  double mass = 0.0;
  for (double p : probs_) {
    if (idx[ax] == value) {
      probs.push_back(p);
      mass += p;
    }
    for (std::size_t i = cards_.size(); i-- > 0;) {
      if (++idx[i] < cards_[i]) break;
      idx[i] = 0;
    }
  }
  if (!(mass > 0.0)) throw DomainError("joint table: conditioning on a zero-probability event");
  for (double& p : probs) p /= mass;
  // Renormalisation can leave the mass a few ulps from 1.
  const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  for (double& p : probs) p /= total;
  return JointTable(std::move(axes), std::move(cards), std::move(probs));
}

JointTable joint_table_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("joint table JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("axes") || !j.contains("probs") || !j["axes"].is_array() || !j["probs"].is_array()) {
    throw FormatError("joint table JSON needs 'axes' and 'probs' arrays");
  }
  std::vector<std::string> axes;
  std::vector<std::size_t> cards;
  for (const auto& a : j["axes"]) {
    if (!a.is_object() || !a.contains("name") || !a.contains("card") || !a["name"].is_string() ||
        !a["card"].is_number_unsigned()) {
      throw FormatError("joint table axis needs a string 'name' and an unsigned 'card'");
    }
    axes.push_back(a["name"].get<std::string>());
    cards.push_back(a["card"].get<std::size_t>());
  }
  std::vector<double> probs;
  for (const auto& p : j["probs"]) {
    if (!p.is_number()) throw FormatError("joint table probabilities must be numbers");
    probs.push_back(p.get<double>());
  }
  return JointTable(std::move(axes), std::move(cards), std::move(probs));
}

JointTable read_joint_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open joint table " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return joint_table_from_json(ss.str());
}

std::string joint_table_to_json(const JointTable& t) {
  nlohmann::json j;
  j["axes"] = nlohmann::json::array();
  for (std::size_t i = 0; i < t.axes().size(); ++i) j["axes"].push_back({{"name", t.axes()[i]}, {"card", t.cards()[i]}});
  j["probs"] = t.probs();
  return j.dump();
}

double entropy(const JointTable& t, std::span<const std::string> axes) {
  std::vector<std::size_t> keep;
  for (const auto& a : axes) keep.push_back(t.axis(a));
  double h = 0.0;
  for (double p : t.marginal(keep)) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double mi(const JointTable& t, const std::string& a, const std::string& b) {
  const std::size_t ia = t.axis(a);
  const std::size_t ib = t.axis(b);
  if (ia == ib) throw ContractError("mi needs two distinct axes");
  const std::size_t ca = t.cards()[ia];
  const std::size_t cb = t.cards()[ib];
  const std::size_t keep[] = {ia, ib};
  const auto joint = t.marginal(keep);
  std::vector<double> pa(ca, 0.0), pb(cb, 0.0);
  for (std::size_t x = 0; x < ca; ++x) {
    for (std::size_t y = 0; y < cb; ++y) {
      pa[x] += joint[x * cb + y];
      pb[y] += joint[x * cb + y];
    }
  }
  double out = 0.0;
  for (std::size_t x = 0; x < ca; ++x) {
    for (std::size_t y = 0; y < cb; ++y) out += plogp_ratio(joint[x * cb + y], pa[x] * pb[y]);
  }
  return out;
}

double conditional_mi(const JointTable& t, const std::string& a, const std::string& b, const std::string& given) {
  const std::size_t ia = t.axis(a), ib = t.axis(b), ic = t.axis(given);
  if (ia == ib || ia == ic || ib == ic) throw ContractError("conditional_mi needs three distinct axes");
  const std::size_t ca = t.cards()[ia], cb = t.cards()[ib], cc = t.cards()[ic];
  const std::size_t keep[] = {ia, ib, ic};
  const auto joint = t.marginal(keep);
  std::vector<double> pac(ca * cc, 0.0), pbc(cb * cc, 0.0), pc(cc, 0.0);
  for (std::size_t x = 0; x < ca; ++x) {
    for (std::size_t y = 0; y < cb; ++y) {
      for (std::size_t z = 0; z < cc; ++z) {
        const double p = joint[(x * cb + y) * cc + z];
        pac[x * cc + z] += p;
        pbc[y * cc + z] += p;
        pc[z] += p;
      }
    }
  }
  double out = 0.0;
  for (std::size_t x = 0; x < ca; ++x) {
    for (std::size_t y = 0; y < cb; ++y) {
      for (std::size_t z = 0; z < cc; ++z) {
        const double p = joint[(x * cb + y) * cc + z];
        if (p > 0.0) out += p * std::log(p * pc[z] / (pac[x * cc + z] * pbc[y * cc + z]));
      }
    }
  }
  return out;
}

Lemma1Report check_lemma1(const JointTable& t) {
  Lemma1Report r;
  r.i_y_phi = mi(t, "Y", "Phi");
  r.i_z_phi_given_y = conditional_mi(t, "Z", "Phi", "Y");
  r.i_z_y = mi(t, "Z", "Y");
  r.i_z_y_given_phi = conditional_mi(t, "Z", "Y", "Phi");
  r.gap = std::abs(r.i_z_y - r.i_z_y_given_phi);
  r.conditions_hold = r.i_y_phi < 1e-12 && r.i_z_phi_given_y < 1e-12;
  r.equivalence_holds = r.gap < 1e-12;
  return r;
}

Lemma2Report check_lemma2(const JointTable& t, std::span<const double> theta) {
  const std::size_t phi = t.axis("Phi");
  const std::size_t v = t.cards()[phi];
  if (theta.size() != v) throw ContractError("lemma 2: theta needs one weight per view");
  double sum = 0.0;
  for (double w : theta) {
    if (!(w >= 0.0)) throw ContractError("lemma 2: theta must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw ContractError("lemma 2: theta must sum to 1");

  Lemma2Report r;
  r.theta.assign(theta.begin(), theta.end());
  const std::size_t keep[] = {phi};
  r.view_probabilities = t.marginal(keep);
  r.lhs = conditional_mi(t, "Z", "Y", "Phi");
  for (std::size_t i = 0; i < v; ++i) {
    const double term = r.view_probabilities[i] > 0.0 ? mi(t.condition("Phi", i), "Z", "Y") : 0.0;
    r.per_view_mi.push_back(term);
    r.rhs += theta[i] * term;
  }
  r.gap = std::abs(r.lhs - r.rhs);
  r.theta_matches_view_probabilities = true;
  for (std::size_t i = 0; i < v; ++i) {
    if (std::abs(theta[i] - r.view_probabilities[i]) > 1e-12) r.theta_matches_view_probabilities = false;
  }
  return r;
}

ConfidencePopulation ideal_block_population(std::span<const PosteriorBlock> blocks, std::size_t m, std::size_t n,
                                            std::uint64_t seed) {
  if (blocks.empty() || m == 0) throw ContractError("ideal population needs blocks and classes");
  std::vector<bool> seen(m, false);
  std::vector<double> weights;
  for (const PosteriorBlock& b : blocks) {
    if (b.classes.size() != b.posterior.size() || b.classes.empty()) throw ContractError("block posterior does not match its classes");
    if (std::abs(std::accumulate(b.posterior.begin(), b.posterior.end(), 0.0) - 1.0) > 1e-12) {
      throw ContractError("block posterior must sum to 1");
    }
    for (int c : b.classes) {
      if (c < 0 || static_cast<std::size_t>(c) >= m || seen[static_cast<std::size_t>(c)]) {
        throw ContractError("blocks must partition the classes");
      }
      seen[static_cast<std::size_t>(c)] = true;
    }
    weights.push_back(b.weight);
  }
  Rng rng = make_rng(seed);
  ConfidencePopulation pop;
  pop.confidences = Tensor({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    const PosteriorBlock& b = blocks[sample_index(weights, rng)];
    for (std::size_t k = 0; k < b.classes.size(); ++k) pop.confidences(i, static_cast<std::size_t>(b.classes[k])) = b.posterior[k];
    pop.truth.push_back(b.classes[sample_index(b.posterior, rng)]);
    pop.predicted.push_back(b.classes[sample_index(b.posterior, rng)]);
  }
  return pop;
}

std::vector<PosteriorBlock> default_blocks() {
  return {{0.5, {0, 1}, {0.7, 0.3}}, {0.5, {2, 3}, {0.4, 0.6}}};
}

ConfidencePopulation argmax_mixture_population(std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  ConfidencePopulation pop;
  pop.confidences = Tensor({n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    const double p0 = uniform01(rng) < 0.5 ? 0.8 : 0.3;
    pop.confidences(i, 0) = p0;
    pop.confidences(i, 1) = 1.0 - p0;
    pop.truth.push_back(uniform01(rng) < p0 ? 0 : 1);
    pop.predicted.push_back(p0 >= 0.5 ? 0 : 1);
  }
  return pop;
}

Theorem1Report check_theorem1(const ConfidencePopulation& pop) {
  const std::size_t m = pop.num_classes();
  const std::size_t n = pop.truth.size();
  if (pop.predicted.size() != n || pop.confidences.rows() != n) throw DimensionError("theorem 1: population lengths disagree");
  Theorem1Report r;
  r.n = n;
  std::vector<double> joint(m * m, 0.0);  // [pred][truth]
  std::vector<double> pred_count(m, 0.0), truth_count(m, 0.0), conf_sum(m, 0.0);
  std::vector<double> conf_by_pred(m * m, 0.0);  // [pred][k] sum of conf_k
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(pop.predicted[i]);
    const auto y = static_cast<std::size_t>(pop.truth[i]);
    if (c >= m || y >= m) throw ContractError("theorem 1: class index out of range");
    joint[c * m + y] += 1.0;
    pred_count[c] += 1.0;
    truth_count[y] += 1.0;
    conf_sum[c] += pop.confidences(i, c);
    for (std::size_t k = 0; k < m; ++k) conf_by_pred[c * m + k] += pop.confidences(i, k);
  }
  r.t_empirical.assign(m, 0.0);
  r.t_double_sum.assign(m, 0.0);
  r.t_expectation.assign(m, 0.0);
  r.class_present.assign(m, false);
  for (std::size_t c = 0; c < m; ++c) {
    if (pred_count[c] == 0.0) continue;
    r.class_present[c] = true;
    r.t_empirical[c] = conf_sum[c] / pred_count[c];
    for (std::size_t k = 0; k < m; ++k) {
      if (truth_count[k] == 0.0) continue;
      const double pred_given_truth = joint[c * m + k] / truth_count[k];
      r.t_double_sum[c] += pred_given_truth * joint[c * m + k] / pred_count[c];
      r.t_expectation[c] += pred_given_truth * conf_by_pred[c * m + k] / pred_count[c];
    }
    r.max_gap_empirical_double_sum = std::max(r.max_gap_empirical_double_sum, std::abs(r.t_empirical[c] - r.t_double_sum[c]));
    r.max_gap_double_sum_expectation =
        std::max(r.max_gap_double_sum_expectation, std::abs(r.t_double_sum[c] - r.t_expectation[c]));
  }
  return r;
}

}  // namespace dibod
