// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

// dibod: pretrain, adapt, ablate, mi-curve, oracle-check.
// Exit codes: 0 success, 1 check failure, 2 usage or configuration error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dibod/config.hpp"
#include "dibod/error.hpp"
#include "dibod/harness.hpp"

namespace {

constexpr int kExitCheck = 1;
constexpr int kExitUsage = 2;

/// Flags shared by the training subcommands; applied on top of the config file.
struct Overrides {
  std::string config;
  std::optional<std::string> seed, output, source, target, folds, epochs, adapt_epochs, ablation;
  std::vector<std::string> sets;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "key = value configuration file");
    app->add_option("--seed", seed, "train.seed");
    app->add_option("--output", output, "run.output directory");
    app->add_option("--source", source, "data.source reference");
    app->add_option("--target", target, "data.target reference");
    app->add_option("--folds", folds, "data.folds");
    app->add_option("--epochs", epochs, "train.epochs");
    app->add_option("--adapt-epochs", adapt_epochs, "train.adapt_epochs");
    app->add_option("--ablation", ablation, "none | no-ib | no-hsic | no-ssr | full-finetune");
    app->add_option("--set", sets, "section.key=value override (repeatable)");
  }

  dibod::RunConfig resolve() const {
    dibod::RunConfig cfg = config.empty() ? dibod::RunConfig{} : dibod::load_config(config);
    auto apply = [&](const std::optional<std::string>& v, const char* key) {
      if (v) cfg.set(key, *v);
    };
    apply(seed, "train.seed");
    apply(output, "run.output");
    apply(source, "data.source");
    apply(target, "data.target");
    apply(folds, "data.folds");
    apply(epochs, "train.epochs");
    apply(adapt_epochs, "train.adapt_epochs");
    apply(ablation, "run.ablation");
    for (const std::string& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw dibod::ConfigError(s, "--set expects section.key=value");
      cfg.set(s.substr(0, eq), s.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
  }
};

void print_report(const dibod::RunReport& r) {
  std::cout << r.command << ": mean " << r.mean << " std " << r.std << " over " << r.folds.size() << " folds\n"
            << "config " << r.config_fingerprint << " result " << r.result_fingerprint() << "\n";
  if (!r.checkpoint.empty()) std::cout << "checkpoint " << r.checkpoint << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view information-bottleneck distillation for graph classification"};
  app.require_subcommand(1);

  Overrides pre_opts, adapt_opts, ablate_opts;
  bool skip_cv = false, skip_final = false;
  auto* pretrain = app.add_subcommand("pretrain", "k-fold pretraining on the source dataset");
  pre_opts.attach(pretrain);
  pretrain->add_flag("--no-cv", skip_cv, "skip cross-validation, train only the source model");
  pretrain->add_flag("--no-final-model", skip_final, "skip the whole-source model and checkpoint");

  std::string checkpoint;
  auto* adapt = app.add_subcommand("adapt", "frozen-teacher adaptation on the target dataset");
  adapt_opts.attach(adapt);
  adapt->add_option("--checkpoint", checkpoint, "checkpoint (default <output>/pretrain/model.ckpt)");

  auto* ablate = app.add_subcommand("ablate", "every ablation with shared seeds");
  ablate_opts.attach(ablate);

  std::vector<std::string> logs;
  std::string curve_out;
  auto* curve = app.add_subcommand("mi-curve", "MI estimates per epoch from metrics logs");
  curve->add_option("logs", logs, "metrics CSV files")->check(CLI::ExistingFile);
  curve->add_option("--output", curve_out, "CSV path (default stdout)");

  std::string table, oracle_out;
  auto* oracle = app.add_subcommand("oracle-check", "exact checks of the lemmas and the threshold theorem");
  oracle->add_option("--table", table, "extra joint-table JSON fixture");
  oracle->add_option("--output", oracle_out, "JSON path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*pretrain) {
      if (skip_cv && skip_final) throw dibod::ConfigError("--no-cv", "nothing to do with --no-final-model as well");
      print_report(dibod::cmd_pretrain(pre_opts.resolve(), {!skip_cv, !skip_final}));
    } else if (*adapt) {
      const dibod::RunConfig cfg = adapt_opts.resolve();
      const std::filesystem::path ckpt = checkpoint.empty() ? cfg.output / "pretrain" / "model.ckpt" : std::filesystem::path(checkpoint);
      const dibod::RunReport r = dibod::cmd_adapt(cfg, ckpt);
      print_report(r);
      if (cfg.ablation != dibod::Ablation::full_finetune && !r.teacher_unchanged()) {
        std::cerr << "error: frozen teacher changed during adaptation\n";
        return kExitCheck;
      }
    } else if (*ablate) {
      std::cout << dibod::cmd_ablate(ablate_opts.resolve()).to_csv();
    } else if (*curve) {
      std::vector<std::filesystem::path> paths(logs.begin(), logs.end());
      const std::string csv = dibod::mi_curve_csv(paths);
      if (curve_out.empty()) {
        std::cout << csv;
      } else {
        std::ofstream out(curve_out, std::ios::binary);
        if (!out) throw dibod::IoError("cannot write " + curve_out);
        out << csv;
      }
    } else if (*oracle) {
      const auto report =
          dibod::cmd_oracle_check(table.empty() ? std::nullopt : std::optional<std::filesystem::path>(table));
      const std::string text = report.to_json();
      if (oracle_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream(oracle_out, std::ios::binary) << text;
      }
      if (!report.all_pass()) {
        if (!oracle_out.empty()) std::cerr << text;
        return kExitCheck;
      }
    }
  } catch (const dibod::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const dibod::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const dibod::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const dibod::ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return kExitCheck;
  }
  return 0;
}
