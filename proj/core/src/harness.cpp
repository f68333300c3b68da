// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#include "dibod/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "dibod/checkpoint.hpp"
#include "dibod/error.hpp"
#include "dibod/rng.hpp"

namespace dibod {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kStreamFoldModel = 31;
constexpr std::uint64_t kStreamFoldTrain = 32;
constexpr std::uint64_t kStreamFinal = 33;
constexpr std::uint64_t kStreamAdaptModel = 34;
constexpr std::uint64_t kStreamAdaptTrain = 35;
constexpr std::uint64_t kStreamTargetFolds = 36;

std::string real_text(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void finish(RunReport& r) {
  const auto acc = r.accuracies();
  r.mean = mean_of(acc);
  r.std = sample_std(acc);
}

RunReport new_report(const std::string& command, const RunConfig& cfg) {
  RunReport r;
  r.command = command;
  r.config_fingerprint = cfg.fingerprint();
  r.config_text = cfg.to_text();
  return r;
}

ModelConfig model_for(const RunConfig& cfg, const Dataset& ds) {
  ModelConfig m = cfg.model;
  m.num_classes = ds.num_classes;
  m.num_views = cfg.views.size();
  m.validate();
  return m;
}

std::vector<std::size_t> all_indices(const Dataset& ds) {
  std::vector<std::size_t> out(ds.size());
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

/// Trains on the whole source and writes the checkpoint the adaptation stage starts from.
void train_source_model(const RunConfig& cfg, const Dataset& ds, const fs::path& path) {
  const ModelConfig mc = model_for(cfg, ds);
  DibodModel model(mc, derive_seed(cfg.seed, {kStreamFinal, 0}));
  TrainOptions opt = cfg.train_options(Phase::pretrain);
  opt.seed = derive_seed(cfg.seed, {kStreamFinal, 1});
  const auto train = all_indices(ds);
  const PhaseResult res = run_phase(model, ds, train, {}, opt);
  fs::create_directories(path.parent_path());
  CheckpointHeader header;
  header.fingerprint = backbone_fingerprint(mc);
  header.meta["source"] = cfg.source;
  header.meta["source_feature_dim"] = std::to_string(ds.feature_dim);
  header.meta["train_accuracy"] = real_text(res.train_accuracy);
  header.meta["config_fingerprint"] = cfg.fingerprint();
  const auto params = model.parameters();
  save_checkpoint(path, header, params);
}

RunReport pretrain_into(const RunConfig& cfg, const fs::path& dir, const PretrainOptions& options) {
  const Dataset ds = load_dataset(cfg.source);
  RunReport report = new_report("pretrain", cfg);
  if (options.cross_validate) {
    const ModelConfig mc = model_for(cfg, ds);
    const FoldPlan plan = make_folds(ds, cfg.folds, cfg.seed);
    for (int f = 0; f < cfg.folds; ++f) {
      const auto fu = static_cast<std::uint64_t>(f);
      DibodModel model(mc, derive_seed(cfg.seed, {kStreamFoldModel, fu}));
      TrainOptions opt = cfg.train_options(Phase::pretrain);
      opt.seed = derive_seed(cfg.seed, {kStreamFoldTrain, fu});
      const auto train = plan.train_indices(f);
      const auto test = plan.test_indices(f);
      const PhaseResult res = run_phase(model, ds, train, test, opt);
      FoldOutcome out;
      out.fold = f;
      out.accuracy = res.test_accuracy;
      out.train_accuracy = res.train_accuracy;
      out.metrics_path = (dir / ("fold_" + std::to_string(f) + ".csv")).generic_string();
      out.teacher_checksum_before = res.teacher_checksum_before;
      out.teacher_checksum_after = res.teacher_checksum_after;
      res.log.write_csv(out.metrics_path);
      report.folds.push_back(out);
    }
  }
  if (options.final_model) {
    const fs::path ckpt = dir / "model.ckpt";
    train_source_model(cfg, ds, ckpt);
    report.checkpoint = ckpt.generic_string();
  }
  finish(report);
  write_text(dir / "report.json", report.to_json());
  return report;
}

RunReport adapt_into(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& dir) {
  const Dataset ds = load_dataset(cfg.target);
  const ModelConfig mc = model_for(cfg, ds);
  const CheckpointHeader header = read_checkpoint_header(checkpoint);
  const std::string expected = backbone_fingerprint(mc);
  if (header.fingerprint != expected) {
    throw ContractError("checkpoint fingerprint " + header.fingerprint + " does not match the configured backbone " +
                        expected);
  }
  auto dim_it = header.meta.find("source_feature_dim");
  if (dim_it == header.meta.end()) throw FormatError("checkpoint lacks meta source_feature_dim");
  const std::size_t source_dim = std::stoul(dim_it->second);

  RunReport report = new_report("adapt", cfg);
  report.checkpoint = checkpoint.generic_string();
  const FoldPlan plan = make_folds(ds, cfg.folds, derive_seed(cfg.seed, {kStreamTargetFolds}));
  for (int f = 0; f < cfg.folds; ++f) {
    const auto fu = static_cast<std::uint64_t>(f);
    DibodModel model(mc, derive_seed(cfg.seed, {kStreamAdaptModel, fu}));
    model.teacher->add_codec(source_dim);
    const auto params = model.parameters();
    load_checkpoint(checkpoint, expected, params);
    TrainOptions opt = cfg.train_options(Phase::adapt);
    opt.seed = derive_seed(cfg.seed, {kStreamAdaptTrain, fu});
    const auto train = plan.train_indices(f);
    const auto test = plan.test_indices(f);
    const PhaseResult res = run_phase(model, ds, train, test, opt);
    FoldOutcome out;
    out.fold = f;
    out.accuracy = res.test_accuracy;
    out.train_accuracy = res.train_accuracy;
    out.metrics_path = (dir / ("fold_" + std::to_string(f) + ".csv")).generic_string();
    out.ssr_path = (dir / ("fold_" + std::to_string(f) + "_ssr.json")).generic_string();
    out.teacher_checksum_before = res.teacher_checksum_before;
    out.teacher_checksum_after = res.teacher_checksum_after;
    res.log.write_csv(out.metrics_path);
    write_text(out.ssr_path, res.ssr ? ssr_to_json(*res.ssr) : "{}");
    report.folds.push_back(out);
  }
  finish(report);
  write_text(dir / "report.json", report.to_json());
  return report;
}

json lemma1_json(const Lemma1Report& r) {
  return {{"I_Y_Phi", r.i_y_phi},
          {"I_Z_Phi_given_Y", r.i_z_phi_given_y},
          {"I_Z_Y", r.i_z_y},
          {"I_Z_Y_given_Phi", r.i_z_y_given_phi},
          {"gap", r.gap},
          {"conditions_hold", r.conditions_hold},
          {"equivalence_holds", r.equivalence_holds}};
}

json lemma2_json(const Lemma2Report& r) {
  return {{"lhs", r.lhs},
          {"rhs", r.rhs},
          {"gap", r.gap},
          {"view_probabilities", r.view_probabilities},
          {"per_view_mi", r.per_view_mi},
          {"theta", r.theta},
          {"theta_matches_view_probabilities", r.theta_matches_view_probabilities}};
}

double theorem_gap(const Theorem1Report& r) {
  return std::max(r.max_gap_empirical_double_sum, r.max_gap_double_sum_expectation);
}

json theorem_json(const Theorem1Report& r) {
  std::vector<int> present;
  for (bool b : r.class_present) present.push_back(b ? 1 : 0);
  return {{"n", r.n},
          {"t_empirical", r.t_empirical},
          {"t_double_sum", r.t_double_sum},
          {"t_expectation", r.t_expectation},
          {"max_gap_empirical_double_sum", r.max_gap_empirical_double_sum},
          {"max_gap_double_sum_expectation", r.max_gap_double_sum_expectation},
          {"class_present", present}};
}

/// Z = Y xor N per view, Y uniform, with noise level `noise[phi]` and P(Phi) = `view_prob`.
JointTable xor_channel(std::span<const double> noise, std::span<const double> view_prob) {
  const std::size_t v = noise.size();
  std::vector<double> probs(2 * 2 * v, 0.0);
  for (std::size_t z = 0; z < 2; ++z) {
    for (std::size_t y = 0; y < 2; ++y) {
      for (std::size_t phi = 0; phi < v; ++phi) {
        probs[(z * 2 + y) * v + phi] = 0.5 * view_prob[phi] * (z == y ? 1.0 - noise[phi] : noise[phi]);
      }
    }
  }
  return JointTable({"Z", "Y", "Phi"}, {2, 2, v}, probs);
}

}  // namespace

std::vector<double> RunReport::accuracies() const {
  std::vector<double> out;
  for (const FoldOutcome& f : folds) out.push_back(f.accuracy);
  return out;
}

bool RunReport::teacher_unchanged() const {
  return std::all_of(folds.begin(), folds.end(),
                     [](const FoldOutcome& f) { return f.teacher_checksum_before == f.teacher_checksum_after; });
}

std::string RunReport::result_fingerprint() const {
  std::string text;
  for (const FoldOutcome& f : folds) {
    text += real_text(f.accuracy) + " " + real_text(f.train_accuracy) + " " + hex64(f.teacher_checksum_after) + "\n";
  }
  return fnv1a_hex(text);
}

std::string RunReport::to_json() const {
  json folds_json = json::array();
  for (const FoldOutcome& f : folds) {
    json j = {{"fold", f.fold},
              {"accuracy", f.accuracy},
              {"train_accuracy", f.train_accuracy},
              {"metrics", f.metrics_path},
              {"teacher_checksum_before", hex64(f.teacher_checksum_before)},
              {"teacher_checksum_after", hex64(f.teacher_checksum_after)}};
    if (!f.ssr_path.empty()) j["ssr"] = f.ssr_path;
    folds_json.push_back(j);
  }
  json j = {{"command", command},
            {"config_fingerprint", config_fingerprint},
            {"result_fingerprint", result_fingerprint()},
            {"accuracies", accuracies()},
            {"mean", mean},
            {"std", std},
            {"summary", real_text(std::round(mean * 10000) / 100) + " +- " + real_text(std::round(std * 10000) / 100)},
            {"teacher_unchanged", teacher_unchanged()},
            {"folds", folds_json},
            {"config", config_text}};
  if (!checkpoint.empty()) j["checkpoint"] = checkpoint;
  return j.dump(2) + "\n";
}

double mean_of(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_std(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean_of(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

std::string backbone_fingerprint(const ModelConfig& model) { return fnv1a_hex("dibod-backbone\n" + model.describe()); }

RunReport cmd_pretrain(const RunConfig& config, const PretrainOptions& options) {
  config.validate();
  return pretrain_into(config, config.output / "pretrain", options);
}

RunReport cmd_adapt(const RunConfig& config, const fs::path& checkpoint) {
  config.validate();
  if (!fs::exists(checkpoint)) throw IoError("checkpoint not found: " + checkpoint.string());
  return adapt_into(config, checkpoint, config.output / "adapt");
}

const AblationRow& AblationTable::row(Ablation a) const {
  for (const AblationRow& r : rows) {
    if (r.ablation == a) return r;
  }
  throw ContractError("ablation table has no row " + to_string(a));
}

std::string AblationTable::to_csv() const {
  std::string out = "ablation,mean,std,teacher_unchanged";
  const std::size_t k = rows.empty() ? 0 : rows.front().report.folds.size();
  for (std::size_t f = 0; f < k; ++f) out += ",fold_" + std::to_string(f);
  out += "\n";
  for (const AblationRow& r : rows) {
    out += to_string(r.ablation) + "," + real_text(r.report.mean) + "," + real_text(r.report.std) + "," +
           (r.report.teacher_unchanged() ? "true" : "false");
    for (double a : r.report.accuracies()) out += "," + real_text(a);
    out += "\n";
  }
  return out;
}

std::string AblationTable::to_json() const {
  json j = json::array();
  for (const AblationRow& r : rows) {
    j.push_back({{"ablation", to_string(r.ablation)},
                 {"mean", r.report.mean},
                 {"std", r.report.std},
                 {"accuracies", r.report.accuracies()},
                 {"teacher_unchanged", r.report.teacher_unchanged()},
                 {"config_fingerprint", r.report.config_fingerprint},
                 {"checkpoint", r.report.checkpoint}});
  }
  return j.dump(2) + "\n";
}

AblationTable cmd_ablate(const RunConfig& config) {
  config.validate();
  const fs::path root = config.output / "ablate";
  const Dataset source = load_dataset(config.source);
  // Ablations that leave the pretraining objective alone reuse the default source model.
  auto changes_pretraining = [&](Ablation a) {
    const LossWeights w = apply_ablation(config.weights, a);
    const LossWeights base = apply_ablation(config.weights, Ablation::none);
    return w.beta_t != base.beta_t || w.beta_vs != base.beta_vs || w.lambda_orth != base.lambda_orth ||
           w.beta_y != base.beta_y || w.lambda_ib != base.lambda_ib || w.lambda_kd != base.lambda_kd ||
           w.lambda_r != base.lambda_r;
  };

  AblationTable table;
  for (Ablation a : all_ablations()) {
    RunConfig cfg = config;
    cfg.ablation = a;
    const fs::path dir = root / to_string(a);
    fs::path ckpt;
    if (a == Ablation::none || changes_pretraining(a)) {
      ckpt = dir / "pretrain" / "model.ckpt";
      train_source_model(cfg, source, ckpt);
    } else {
      ckpt = root / to_string(Ablation::none) / "pretrain" / "model.ckpt";
    }
    RunReport report = adapt_into(cfg, ckpt, dir / "adapt");
    report.command = "ablate";
    table.rows.push_back({a, std::move(report)});
  }
  write_text(root / "table.csv", table.to_csv());
  write_text(root / "table.json", table.to_json());
  return table;
}

std::string mi_curve_csv(std::span<const fs::path> logs) {
  std::string out = "epoch,split,I_zvs_x_proxy,I_zvs_y,I_zvr_y\n";
  for (const fs::path& p : logs) {
    const MetricsLog log = MetricsLog::read_csv(p);
    for (const MetricsRow& r : log.rows()) {
      out += std::to_string(r.epoch) + "," + r.split + "," + real_text(r.i_zvs_x_proxy) + "," + real_text(r.i_zvs_y) +
             "," + real_text(r.i_zvr_y) + "\n";
    }
  }
  return out;
}

JointTable lemma1_noisy_channel_table() {
  const double noise[] = {0.2, 0.2};
  const double views[] = {0.5, 0.5};
  return xor_channel(noise, views);
}

JointTable lemma1_deterministic_table() {
  std::vector<double> probs(8, 0.0);
  for (std::size_t y = 0; y < 2; ++y) {
    for (std::size_t phi = 0; phi < 2; ++phi) probs[(y * 2 + y) * 2 + phi] = (y == 0 ? 0.3 : 0.7) * 0.5;
  }
  return JointTable({"Z", "Y", "Phi"}, {2, 2, 2}, probs);
}

JointTable lemma1_view_dependent_label_table() {
  std::vector<double> probs(8, 0.0);
  for (std::size_t z = 0; z < 2; ++z) {
    for (std::size_t y = 0; y < 2; ++y) {
      for (std::size_t phi = 0; phi < 2; ++phi) {
        const double p_y_phi = 0.5 * (y == phi ? 0.8 : 0.2);
        probs[(z * 2 + y) * 2 + phi] = p_y_phi * (z == y ? 0.9 : 0.1);
      }
    }
  }
  return JointTable({"Z", "Y", "Phi"}, {2, 2, 2}, probs);
}

JointTable lemma1_view_dependent_code_table() {
  const double noise[] = {0.0, 0.5};
  const double views[] = {0.5, 0.5};
  return xor_channel(noise, views);
}

JointTable lemma2_symmetric_table() {
  const double noise[] = {0.1, 0.2, 0.3};
  const double views[] = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  return xor_channel(noise, views);
}

bool OracleReport::all_pass() const {
  return std::all_of(entries.begin(), entries.end(), [](const OracleEntry& e) { return e.pass; });
}

std::string OracleReport::to_json() const {
  json checks = json::array();
  for (const OracleEntry& e : entries) {
    checks.push_back({{"name", e.name}, {"expect", e.expect}, {"pass", e.pass}, {"report", json::parse(e.report)}});
  }
  return json{{"all_pass", all_pass()}, {"checks", checks}}.dump(2) + "\n";
}

OracleReport cmd_oracle_check(const std::optional<fs::path>& fixture) {
  OracleReport report;
  auto add = [&](std::string name, std::string expect, bool pass, const json& detail) {
    report.entries.push_back({std::move(name), std::move(expect), pass, detail.dump()});
  };

  if (fixture) {
    const JointTable t = read_joint_table(*fixture);
    const Lemma1Report r = check_lemma1(t);
    add("fixture_lemma1", "conditions imply |I(Z;Y) - I(Z;Y|Phi)| < 1e-12", !r.conditions_hold || r.equivalence_holds,
        lemma1_json(r));
  }

  const std::pair<const char*, JointTable> holding[] = {{"lemma1_noisy_channel", lemma1_noisy_channel_table()},
                                                       {"lemma1_deterministic", lemma1_deterministic_table()}};
  for (const auto& [name, t] : holding) {
    const Lemma1Report r = check_lemma1(t);
    add(name, "conditions hold and gap < 1e-12", r.conditions_hold && r.gap < 1e-12, lemma1_json(r));
  }
  const std::pair<const char*, JointTable> violating[] = {
      {"lemma1_view_dependent_label", lemma1_view_dependent_label_table()},
      {"lemma1_view_dependent_code", lemma1_view_dependent_code_table()}};
  for (const auto& [name, t] : violating) {
    const Lemma1Report r = check_lemma1(t);
    add(name, "conditions fail and gap > 1e-3", !r.conditions_hold && r.gap > 1e-3, lemma1_json(r));
  }

  const JointTable sym = lemma2_symmetric_table();
  {
    const double theta[] = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    const Lemma2Report r = check_lemma2(sym, theta);
    add("lemma2_symmetric", "theta = P(Phi) and gap < 1e-12", r.theta_matches_view_probabilities && r.gap < 1e-12,
        lemma2_json(r));
  }
  {
    const double theta[] = {0.6, 0.3, 0.1};
    const Lemma2Report r = check_lemma2(sym, theta);
    add("lemma2_mismatched_theta", "theta != P(Phi) and gap > 1e-3", !r.theta_matches_view_probabilities && r.gap > 1e-3,
        lemma2_json(r));
  }

  const auto blocks = default_blocks();
  const Theorem1Report large = check_theorem1(ideal_block_population(blocks, 4, 50000, 7));
  const Theorem1Report small = check_theorem1(ideal_block_population(blocks, 4, 500, 7));
  add("theorem1_ideal_n50000", "every class gap < 0.02", theorem_gap(large) < 0.02, theorem_json(large));
  add("theorem1_gap_shrinks", "max gap at n=500 exceeds max gap at n=50000", theorem_gap(small) > theorem_gap(large),
      json{{"gap_n500", theorem_gap(small)}, {"gap_n50000", theorem_gap(large)}});

  {
    ConfidencePopulation pop;
    const std::size_t n = 64;
    pop.confidences = Tensor::zeros(n, 3);
    for (std::size_t i = 0; i < n; ++i) {
      const int c = static_cast<int>(i % 3);
      pop.confidences(i, static_cast<std::size_t>(c)) = 1.0;
      pop.predicted.push_back(c);
      pop.truth.push_back(c);
    }
    const Theorem1Report r = check_theorem1(pop);
    bool ones = true;
    for (std::size_t c = 0; c < 3; ++c) ones = ones && r.t_empirical[c] == 1.0 && r.t_double_sum[c] == 1.0;
    add("theorem1_deterministic", "all thresholds equal 1 exactly", ones && theorem_gap(r) == 0.0, theorem_json(r));
  }
  {
    const Theorem1Report r = check_theorem1(argmax_mixture_population(50000, 7));
    add("theorem1_argmax_counterexample", "non-ideal predictor separates the empirical and double-sum thresholds by > 0.05",
        r.max_gap_empirical_double_sum > 0.05, theorem_json(r));
  }
  return report;
}

}  // namespace dibod
