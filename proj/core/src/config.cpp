// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#include "dibod/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dibod/error.hpp"

namespace dibod {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  return out;
}

double to_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) throw ConfigError(key, "expected a number, got '" + v + "'");
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
    throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  const std::uint64_t u = to_uint(key, v);
  if (u > 1000000) throw ConfigError(key, "value too large");
  return static_cast<int>(u);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

std::string real_text(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string kernel_text(const KernelSpec& k) {
  if (k.kind == KernelKind::linear) return "linear";
  return k.bandwidth ? "rbf:" + real_text(*k.bandwidth) : "rbf";
}

std::vector<ViewSpec> parse_views(const std::string& value) {
  std::vector<ViewSpec> out;
  std::uint64_t stream = 0;
  for (const std::string& item : split(value, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("views.specs", "expected kind:rate, got '" + item + "'");
    ViewSpec v;
    v.kind = parse_augment_kind(trim(item.substr(0, colon)));
    v.rate = to_real("views.specs", trim(item.substr(colon + 1)));
    v.seed_stream = stream++;
    v.validate();
    out.push_back(v);
  }
  if (out.size() < 2) throw ConfigError("views.specs", "at least two views are required");
  return out;
}

struct TuRef {
  std::filesystem::path root;
  std::string name;
  std::size_t count = 0;
};

TuRef parse_tu_ref(const std::string& ref, const std::string& field) {
  std::string rest = ref.substr(std::string("tudataset:").size());
  TuRef out;
  auto last = rest.rfind(':');
  if (last == std::string::npos) throw ConfigError(field, "expected tudataset:<root>:<name>");
  std::string tail = rest.substr(last + 1);
  std::string head = rest.substr(0, last);
  const bool numeric = !tail.empty() && std::all_of(tail.begin(), tail.end(), [](char c) { return c >= '0' && c <= '9'; });
  if (numeric && head.find(':') != std::string::npos) {
    out.count = to_uint(field, tail);
    last = head.rfind(':');
    tail = head.substr(last + 1);
    head = head.substr(0, last);
  }
  if (head.empty() || tail.empty()) throw ConfigError(field, "expected tudataset:<root>:<name>");
  out.root = head;
  out.name = tail;
  return out;
}

}  // namespace

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void RunConfig::set(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (key == "data.source") source = v;
  else if (key == "data.target") target = v;
  else if (key == "data.folds") folds = to_int(key, v);
  else if (key == "train.seed") seed = to_uint(key, v);
  else if (key == "train.epochs") epochs = to_int(key, v);
  else if (key == "train.adapt_epochs") adapt_epochs = to_int(key, v);
  else if (key == "train.batch_size") batch_size = to_uint(key, v);
  else if (key == "train.lr") lr = to_real(key, v);
  else if (key == "train.critic_lr") critic_lr = to_real(key, v);
  else if (key == "train.critic_hidden") critic_hidden = to_uint(key, v);
  else if (key == "train.ssr_each_epoch") ssr_each_epoch = to_bool(key, v);
  else if (key == "weights.beta_t") weights.beta_t = to_real(key, v);
  else if (key == "weights.beta_y") weights.beta_y = to_real(key, v);
  else if (key == "weights.beta_vs") weights.beta_vs = to_real(key, v);
  else if (key == "weights.lambda_orth") weights.lambda_orth = to_real(key, v);
  else if (key == "weights.lambda_ib") weights.lambda_ib = to_real(key, v);
  else if (key == "weights.lambda_r") weights.lambda_r = to_real(key, v);
  else if (key == "weights.lambda_kd") weights.lambda_kd = to_real(key, v);
  else if (key == "weights.tau") weights.tau = to_real(key, v);
  else if (key == "weights.lambda_view") weights.lambda_view = to_real(key, v);
  else if (key == "weights.compress_vs_teacher") weights.compress_vs_teacher = to_bool(key, v);
  else if (key == "model.input_width") model.input_width = to_uint(key, v);
  else if (key == "model.hidden") model.hidden = to_uint(key, v);
  else if (key == "model.layers") model.gcn_layers = to_uint(key, v);
  else if (key == "model.projection") model.projection = to_uint(key, v);
  else if (key == "model.pooling") model.pooling = parse_pooling(v);
  else if (key == "views.specs") {
    views = parse_views(v);
    model.num_views = views.size();
  } else if (key == "hsic.kernel") kernel = parse_kernel(v);
  else if (key == "run.ablation") ablation = parse_ablation(v);
  else if (key == "run.output") output = v;
  else throw ConfigError(key, "unknown configuration key");
}

void RunConfig::validate() const {
  if (folds < 2) throw ConfigError("data.folds", "must be at least 2");
  if (epochs < 0 || adapt_epochs < 0) throw ConfigError("train.epochs", "must be non-negative");
  if (batch_size < 2) throw ConfigError("train.batch_size", "must be at least 2");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr", "must be positive");
  if (!(critic_lr > 0.0) || !std::isfinite(critic_lr)) throw ConfigError("train.critic_lr", "must be positive");
  if (critic_hidden == 0) throw ConfigError("train.critic_hidden", "must be positive");
  weights.validate();
  kernel.validate();
  for (const ViewSpec& v : views) v.validate();
  if (views.size() != model.num_views) throw ConfigError("views.specs", "view count does not match the model");
  ModelConfig probe = model;
  probe.num_classes = 2;
  probe.validate();
  check_dataset_ref(source, "data.source");
  check_dataset_ref(target, "data.target");
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  os << "[data]\nsource = " << source << "\ntarget = " << target << "\nfolds = " << folds << "\n\n";
  os << "[train]\nseed = " << seed << "\nepochs = " << epochs << "\nadapt_epochs = " << adapt_epochs
     << "\nbatch_size = " << batch_size << "\nlr = " << real_text(lr) << "\ncritic_lr = " << real_text(critic_lr)
     << "\ncritic_hidden = " << critic_hidden << "\nssr_each_epoch = " << (ssr_each_epoch ? "true" : "false") << "\n\n";
  os << "[weights]\nbeta_t = " << real_text(weights.beta_t) << "\nbeta_y = " << real_text(weights.beta_y)
     << "\nbeta_vs = " << real_text(weights.beta_vs) << "\nlambda_orth = " << real_text(weights.lambda_orth)
     << "\nlambda_ib = " << real_text(weights.lambda_ib) << "\nlambda_r = " << real_text(weights.lambda_r)
     << "\nlambda_kd = " << real_text(weights.lambda_kd) << "\ntau = " << real_text(weights.tau)
     << "\nlambda_view = " << real_text(weights.lambda_view)
     << "\ncompress_vs_teacher = " << (weights.compress_vs_teacher ? "true" : "false") << "\n\n";
  os << "[model]\ninput_width = " << model.input_width << "\nhidden = " << model.hidden << "\nlayers = " << model.gcn_layers
     << "\nprojection = " << model.projection << "\npooling = " << to_string(model.pooling) << "\n\n";
  os << "[views]\nspecs = ";
  for (std::size_t i = 0; i < views.size(); ++i) os << (i ? ", " : "") << to_string(views[i].kind) << ":" << real_text(views[i].rate);
  os << "\n\n[hsic]\nkernel = " << kernel_text(kernel) << "\n\n";
  os << "[run]\nablation = " << to_string(ablation) << "\noutput = " << output.string() << "\n";
  return os.str();
}

std::string RunConfig::fingerprint() const { return fnv1a_hex(to_text()); }

TrainOptions RunConfig::train_options(Phase phase) const {
  TrainOptions o;
  o.phase = phase == Phase::pretrain ? TrainPhase::pretrain(epochs) : TrainPhase::adapt(adapt_epochs, ablation);
  o.ablation = ablation;
  o.weights = weights;
  o.views = views;
  o.batch_size = batch_size;
  o.lr = lr;
  o.critic_lr = critic_lr;
  o.critic_hidden = critic_hidden;
  o.kernel = kernel;
  o.ssr_each_epoch = ssr_each_epoch;
  o.seed = seed;
  return o;
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno), "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno), "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (section.empty()) throw ConfigError(key, "key outside any [section]");
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    cfg.set(section + "." + key, value);
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void check_dataset_ref(const std::string& ref, const std::string& field) {
  if (ref.rfind("synthetic:", 0) == 0) {
    const auto parts = split(ref, ':');
    if (parts.size() < 3 || parts.size() > 4 || (parts[1] != "clean" && parts[1] != "shifted")) {
      throw ConfigError(field, "expected synthetic:clean|shifted:<n>[:<seed>]");
    }
    const auto n = to_uint(field, parts[2]);
    if (n < 20 || n % 2 != 0) throw ConfigError(field, "synthetic corpus size must be even and at least 20");
    if (parts.size() == 4) to_uint(field, parts[3]);
    return;
  }
  if (ref.rfind("tudataset:", 0) == 0) {
    const TuRef tu = parse_tu_ref(ref, field);
    for (const char* suffix : {"_A.txt", "_graph_indicator.txt", "_graph_labels.txt"}) {
      const auto path = tu.root / (tu.name + suffix);
      if (!std::filesystem::exists(path)) throw IoError("dataset file not found: " + path.string());
    }
    return;
  }
  throw ConfigError(field, "unknown dataset reference '" + ref + "'");
}

Dataset load_dataset(const std::string& ref) {
  check_dataset_ref(ref, "dataset");
  if (ref.rfind("synthetic:", 0) == 0) {
    const auto parts = split(ref, ':');
    const MotifSpec spec = parts[1] == "clean" ? MotifSpec::clean() : MotifSpec::shifted();
    const std::uint64_t seed = parts.size() == 4 ? to_uint("dataset", parts[3]) : 1;
    return synth_motif_corpus(to_uint("dataset", parts[2]), seed, spec);
  }
  const TuRef tu = parse_tu_ref(ref, "dataset");
  Dataset ds = parse_tudataset(tu.root, tu.name);
  if (tu.count) ds = head(ds, tu.count);
  ds.validate();
  return ds;
}

}  // namespace dibod
