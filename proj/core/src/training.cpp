// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#include "dibod/training.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "dibod/error.hpp"
#include "dibod/mi.hpp"

namespace dibod {
namespace {

constexpr std::uint64_t kStreamShuffle = 11;
constexpr std::uint64_t kStreamViews = 12;
constexpr std::uint64_t kStreamSample = 13;
constexpr std::uint64_t kStreamCritics = 14;

struct CriticBank {
  std::unique_ptr<VariationalCritic> teacher_y, vs_y, vr_y, vs_vr, vs_teacher;
  std::vector<std::unique_ptr<VariationalCritic>> view_by_class;

  CriticBank(const ModelConfig& cfg, const TrainOptions& opt) {
    Rng rng = make_rng(opt.seed, {kStreamCritics});
    const AdamOptions adam{opt.critic_lr, 0.9, 0.999, 1e-8};
    const auto m = static_cast<std::size_t>(cfg.num_classes);
    const std::size_t h = cfg.hidden;
    const std::size_t hid = opt.critic_hidden;
    teacher_y = std::make_unique<VariationalCritic>("critic.teacher_y", CriticKind::categorical, h, m, hid, rng, adam);
    vs_y = std::make_unique<VariationalCritic>("critic.vs_y", CriticKind::categorical, h, m, hid, rng, adam);
    vr_y = std::make_unique<VariationalCritic>("critic.vr_y", CriticKind::categorical, h, m, hid, rng, adam);
    vs_vr = std::make_unique<VariationalCritic>("critic.vs_vr", CriticKind::gaussian, h, h, hid, rng, adam);
    vs_teacher = std::make_unique<VariationalCritic>("critic.vs_teacher", CriticKind::gaussian, h, h, hid, rng, adam);
    for (std::size_t c = 0; c < m; ++c) {
      view_by_class.push_back(std::make_unique<VariationalCritic>("critic.view" + std::to_string(c), CriticKind::categorical,
                                                                  h, cfg.num_views, hid, rng, adam));
    }
  }

  CriticSet set() const {
    CriticSet s{teacher_y.get(), vs_y.get(), vr_y.get(), vs_vr.get(), vs_teacher.get(), {}};
    for (const auto& c : view_by_class) s.view_by_class.push_back(c.get());
    return s;
  }
};

struct StepValues {
  Var total;
  double task = 0, ibt = 0, ibs = 0, recon = 0, ckd = 0, orth = 0, total_value = 0;
  double kl = 0, ba_vs = 0, club_vr = 0;
  std::size_t correct = 0;
};

struct Context {
  DibodModel& model;
  CriticBank& critics;
  const LossWeights& weights;
  const TrainPhase& phase;
  const KernelSpec& kernel;
};

void require_finite(const char* name, double v, int epoch, std::size_t batch) {
  if (!std::isfinite(v)) {
    throw NumericError("non-finite loss term '" + std::string(name) + "' at epoch " + std::to_string(epoch) + ", batch " +
                       std::to_string(batch));
  }
}

StepValues build_step(Tape& tape, Context& ctx, const ViewSet& views, std::span<const double> kappa, Mode mode, Rng* rng,
                      bool fit_critics, int epoch, std::size_t batch) {
  const GraphBatch& base = *views.base;
  const std::vector<int>& labels = base.labels;
  const LossWeights& w = ctx.weights;
  const bool want_views = w.lambda_view > 0.0;

  TeacherOutput t = teacher_forward(tape, views, *ctx.model.teacher, mode, rng, want_views);
  StudentOutput s = student_forward(tape, t.graph_embedding, *ctx.model.student);

  Var view_stack;
  std::vector<int> view_ids, view_labels;
  if (want_views) {
    const std::size_t g = base.num_graphs();
    const std::size_t total_rows = g * views.size();
    for (std::size_t v = 0; v < views.size(); ++v) {
      std::vector<std::size_t> rows(g);
      for (std::size_t i = 0; i < g; ++i) rows[i] = v * g + i;
      Var part = scatter_add_rows(t.view_graph_embeddings[v], rows, total_rows);
      view_stack = v == 0 ? part : add(view_stack, part);
      view_ids.insert(view_ids.end(), g, static_cast<int>(v));
      view_labels.insert(view_labels.end(), labels.begin(), labels.end());
    }
  }

  if (fit_critics) {
    ctx.critics.teacher_y->fit_step(t.graph_embedding.value(), labels);
    ctx.critics.vs_y->fit_step(s.z_vs.value(), labels);
    ctx.critics.vr_y->fit_step(s.z_vr.value(), labels);
    ctx.critics.vs_vr->fit_step(s.z_vs.value(), s.z_vr.value());
    if (w.compress_vs_teacher) ctx.critics.vs_teacher->fit_step(s.z_vs.value(), t.graph_embedding.value());
    if (want_views) {
      for (std::size_t c = 0; c < ctx.critics.view_by_class.size(); ++c) {
        std::vector<std::size_t> rows;
        std::vector<int> ids;
        for (std::size_t i = 0; i < view_labels.size(); ++i) {
          if (view_labels[i] == static_cast<int>(c)) {
            rows.push_back(i);
            ids.push_back(view_ids[i]);
          }
        }
        if (rows.size() < 2) continue;
        Tensor z({rows.size(), view_stack.cols()});
        for (std::size_t r = 0; r < rows.size(); ++r) {
          auto src = view_stack.value().row_span(rows[r]);
          std::copy(src.begin(), src.end(), z.data() + r * z.cols());
        }
        ctx.critics.view_by_class[c]->fit_step(z, ids);
      }
    }
  }

  const CriticSet critics = ctx.critics.set();
  LossTerms terms;
  const bool adapt = ctx.phase.phase == Phase::adapt;
  const Var& scored = adapt ? s.logits_vs : t.logits;
  terms.task = cross_entropy_logits(scored, labels);
  Var view_term;
  if (want_views) view_term = conditional_club_view(tape, view_stack, view_ids, view_labels, critics.view_by_class);
  terms.ibt = loss_ibt(tape, t.graph_embedding, labels, t.kl, *critics.teacher_y, w, view_term);
  IbsTerms ibs = loss_ibs(tape, s.z_vs, s.z_vr, t.graph_embedding, labels, kappa, critics, w);
  terms.ibs = ibs.total;
  terms.recon = teacher_reconstruct(tape, t, *ctx.model.teacher, views);
  terms.ckd = loss_ckd(s.proj_vs, s.proj_vr, t.projection, w.tau);
  terms.orth = hsic(s.z_vs, s.z_vr, ctx.kernel);

  StepValues out;
  out.total = loss_total(terms, w);
  out.task = terms.task.item();
  out.ibt = terms.ibt.item();
  out.ibs = terms.ibs.item();
  out.recon = terms.recon.item();
  out.ckd = terms.ckd.item();
  out.orth = terms.orth.item();
  out.total_value = out.total.item();
  out.kl = t.kl.item();
  out.ba_vs = ba_lower_bound(tape, s.z_vs, labels, *critics.vs_y).item();
  out.club_vr = ibs.club_vr_y.item();
  const std::pair<const char*, double> checks[] = {{"task", out.task}, {"ibt", out.ibt},   {"ibs", out.ibs},
                                                   {"recon", out.recon}, {"ckd", out.ckd}, {"orth", out.orth}};
  for (const auto& [name, v] : checks) require_finite(name, v, epoch, batch);
  require_finite("total", out.total_value, epoch, batch);

  const auto pred = argmax_rows(scored.value());
  for (std::size_t i = 0; i < labels.size(); ++i) out.correct += pred[i] == labels[i] ? 1 : 0;
  return out;
}

struct EpochSums {
  double total = 0, task = 0, ibt = 0, ibs = 0, recon = 0, ckd = 0, orth = 0, kl = 0, ba_vs = 0, club_vr = 0;
  std::size_t batches = 0, correct = 0, samples = 0;

  void add(const StepValues& v, std::size_t n) {
    total += v.total_value;
    task += v.task;
    ibt += v.ibt;
    ibs += v.ibs;
    recon += v.recon;
    ckd += v.ckd;
    orth += v.orth;
    kl += v.kl;
    ba_vs += v.ba_vs;
    club_vr += v.club_vr;
    ++batches;
    correct += v.correct;
    samples += n;
  }

  MetricsRow row(int epoch, const std::string& split) const {
    const double b = static_cast<double>(batches);
    MetricsRow r;
    r.epoch = epoch;
    r.split = split;
    r.loss_total = total / b;
    r.loss_task = task / b;
    r.loss_ibt = ibt / b;
    r.loss_ibs = ibs / b;
    r.loss_r = recon / b;
    r.loss_ckd = ckd / b;
    r.loss_orth = orth / b;
    r.accuracy = static_cast<double>(correct) / static_cast<double>(samples);
    r.i_zvs_x_proxy = kl / b;
    r.i_zvs_y = ba_vs / b;
    r.i_zvr_y = club_vr / b;
    return r;
  }
};

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::vector<double> kappa_lookup(const std::map<std::size_t, double>& kappa, std::span<const std::size_t> indices) {
  std::vector<double> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    auto it = kappa.find(i);
    out.push_back(it == kappa.end() ? 1.0 : it->second);
  }
  return out;
}

}  // namespace

std::string to_string(Phase p) { return p == Phase::pretrain ? "pretrain" : "adapt"; }

TrainPhase TrainPhase::pretrain(int epochs) { return {Phase::pretrain, false, epochs, false}; }

TrainPhase TrainPhase::adapt(int epochs, Ablation ablation) {
  return {Phase::adapt, ablation != Ablation::full_finetune, epochs, ablation != Ablation::no_ssr};
}

void TrainPhase::validate() const {
  if (epochs < 0) throw ConfigError("train.epochs", "must be non-negative");
  if (phase == Phase::pretrain && (teacher_frozen || kappa_from_ssr)) {
    throw ContractError("pretraining trains the teacher and uses kappa = 1");
  }
}

const char* MetricsLog::header() {
  return "epoch,split,loss_total,loss_task,loss_ibt,loss_ibs,loss_r,loss_ckd,loss_orth,accuracy,I_zvs_x_proxy,I_zvs_y,I_zvr_y";
}

std::vector<MetricsRow> MetricsLog::split(const std::string& name) const {
  std::vector<MetricsRow> out;
  for (const MetricsRow& r : rows_) {
    if (r.split == name) out.push_back(r);
  }
  return out;
}

std::string MetricsLog::to_csv() const {
  std::string out = std::string(header()) + "\n";
  for (const MetricsRow& r : rows_) {
    out += std::to_string(r.epoch) + "," + r.split;
    for (double v : {r.loss_total, r.loss_task, r.loss_ibt, r.loss_ibs, r.loss_r, r.loss_ckd, r.loss_orth, r.accuracy,
                     r.i_zvs_x_proxy, r.i_zvs_y, r.i_zvr_y}) {
      out += "," + format_double(v);
    }
    out += "\n";
  }
  return out;
}

void MetricsLog::write_csv(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_csv();
}

MetricsLog MetricsLog::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metrics log " + path.string());
  std::string line;
  MetricsLog log;
  if (!std::getline(in, line)) return log;
  std::vector<std::string> cols;
  {
    std::istringstream hs(line);
    std::string c;
    while (std::getline(hs, c, ',')) cols.push_back(c);
  }
  const std::vector<std::string> required = {"epoch", "split", "loss_total", "loss_task", "loss_ibt", "loss_ibs", "loss_r",
                                             "loss_ckd", "loss_orth", "accuracy", "I_zvs_x_proxy", "I_zvs_y", "I_zvr_y"};
  std::map<std::string, std::size_t> where;
  for (std::size_t i = 0; i < cols.size(); ++i) where[cols[i]] = i;
  for (const auto& r : required) {
    if (!where.count(r)) throw FormatError(path.string() + ": missing column '" + r + "'");
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    if (cells.size() != cols.size()) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": wrong cell count");
    auto num = [&](const std::string& name) {
      const std::string& s = cells[where[name]];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad number in column " + name);
      }
      return v;
    };
    MetricsRow r;
    r.epoch = static_cast<int>(num("epoch"));
    r.split = cells[where["split"]];
    r.loss_total = num("loss_total");
    r.loss_task = num("loss_task");
    r.loss_ibt = num("loss_ibt");
    r.loss_ibs = num("loss_ibs");
    r.loss_r = num("loss_r");
    r.loss_ckd = num("loss_ckd");
    r.loss_orth = num("loss_orth");
    r.accuracy = num("accuracy");
    r.i_zvs_x_proxy = num("I_zvs_x_proxy");
    r.i_zvs_y = num("I_zvs_y");
    r.i_zvr_y = num("I_zvr_y");
    log.add(std::move(r));
  }
  return log;
}

DibodModel::DibodModel(const ModelConfig& cfg, std::uint64_t seed)
    : config(cfg), teacher(std::make_unique<TeacherModel>(cfg, seed)), student(std::make_unique<StudentModel>(cfg, seed)) {}

std::vector<Parameter*> DibodModel::parameters() {
  std::vector<Parameter*> out = teacher->parameters();
  for (Parameter* p : student->parameters()) out.push_back(p);
  return out;
}

std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> order, std::size_t batch_size) {
  if (batch_size < 2) throw ConfigError("train.batch_size", "must be at least 2");
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (out.size() > 1 && out.back().size() < 2) {
    out[out.size() - 2].insert(out[out.size() - 2].end(), out.back().begin(), out.back().end());
    out.pop_back();
  }
  return out;
}

Tensor teacher_confidences(DibodModel& model, const Dataset& ds, std::span<const std::size_t> indices, std::size_t batch_size) {
  model.teacher->add_codec(ds.feature_dim);
  Tensor out({indices.size(), static_cast<std::size_t>(model.config.num_classes)});
  std::size_t row = 0;
  for (const auto& chunk : make_batches(indices, batch_size)) {
    GraphBatch base = make_batch(ds, chunk);
    ViewSet views = identity_view_set(base, model.config.num_views);
    Tape tape;
    TeacherOutput t = teacher_forward(tape, views, *model.teacher, Mode::eval, nullptr);
    Tensor p = softmax_rows(t.logits.value());
    std::copy(p.values().begin(), p.values().end(), out.data() + row * out.cols());
    row += chunk.size();
  }
  return out;
}

double evaluate(DibodModel& model, const Dataset& ds, std::span<const std::size_t> indices, Phase phase, std::size_t batch_size) {
  if (indices.empty()) return 0.0;
  model.teacher->add_codec(ds.feature_dim);
  std::size_t correct = 0;
  for (const auto& chunk : make_batches(indices, batch_size)) {
    GraphBatch base = make_batch(ds, chunk);
    ViewSet views = identity_view_set(base, model.config.num_views);
    Tape tape;
    TeacherOutput t = teacher_forward(tape, views, *model.teacher, Mode::eval, nullptr);
    Var logits = t.logits;
    if (phase == Phase::adapt) logits = student_forward(tape, t.graph_embedding, *model.student).logits_vs;
    const auto pred = argmax_rows(logits.value());
    for (std::size_t i = 0; i < chunk.size(); ++i) correct += pred[i] == base.labels[i] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(indices.size());
}

PhaseResult run_phase(DibodModel& model, const Dataset& ds, std::span<const std::size_t> train,
                      std::span<const std::size_t> test, const TrainOptions& options) {
  const TrainPhase& phase = options.phase;
  phase.validate();
  options.weights.validate();
  for (const ViewSpec& v : options.views) v.validate();
  if (options.views.size() != model.config.num_views) throw ConfigError("views", "view count does not match the model");
  if (ds.num_classes != model.config.num_classes) {
    throw ContractError("dataset has " + std::to_string(ds.num_classes) + " classes, model expects " +
                        std::to_string(model.config.num_classes));
  }
  if (train.size() < 2) throw ContractError("run_phase needs at least two training graphs");

  const LossWeights weights = apply_ablation(options.weights, options.ablation);
  model.teacher->add_codec(ds.feature_dim);
  model.teacher->freeze(phase.teacher_frozen);
  CriticBank critics(model.config, options);
  Context ctx{model, critics, weights, phase, options.kernel};
  Adam optimizer(model.parameters(), AdamOptions{options.lr, 0.9, 0.999, 1e-8});
  const Mode teacher_mode = phase.teacher_frozen ? Mode::eval : Mode::train;

  PhaseResult result;
  result.teacher_checksum_before = model.teacher->checksum();

  std::map<std::size_t, double> kappa;
  auto refresh_ssr = [&] {
    std::vector<int> truth;
    for (std::size_t i : train) truth.push_back(ds.graphs[i].label);
    result.ssr = compute_ssr(teacher_confidences(model, ds, train, options.batch_size), truth);
    kappa.clear();
    if (phase.kappa_from_ssr) {
      for (std::size_t k = 0; k < train.size(); ++k) kappa[train[k]] = result.ssr->kappa[k];
    }
  };
  if (phase.phase == Phase::adapt) refresh_ssr();

  std::vector<std::size_t> order(train.begin(), train.end());
  for (int epoch = 1; epoch <= phase.epochs; ++epoch) {
    if (phase.phase == Phase::adapt && options.ssr_each_epoch && epoch > 1) refresh_ssr();
    Rng shuffle_rng = make_rng(options.seed, {kStreamShuffle, static_cast<std::uint64_t>(epoch)});
    shuffle(order, shuffle_rng);
    EpochSums sums;
    const auto batches = make_batches(order, options.batch_size);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      GraphBatch base = make_batch(ds, batches[b]);
      ViewSet views = make_view_set(base, options.views,
                                    derive_seed(options.seed, {kStreamViews, static_cast<std::uint64_t>(epoch), b}));
      Rng sample_rng = make_rng(options.seed, {kStreamSample, static_cast<std::uint64_t>(epoch), b});
      const auto k = kappa_lookup(kappa, batches[b]);
      Tape tape;
      StepValues step = build_step(tape, ctx, views, k, teacher_mode, &sample_rng, true, epoch, b);
      optimizer.zero_grad();
      tape.backward(step.total);
      optimizer.step();
      sums.add(step, batches[b].size());
      if (options.on_batch) {
        options.on_batch(BatchRecord{epoch, b, step.total_value, step.task, step.ibt, step.ibs, step.recon, step.ckd,
                                     step.orth, weights});
      }
    }
    result.log.add(sums.row(epoch, "train"));

    if (test.size() >= 2) {
      EpochSums eval;
      const auto eval_batches = make_batches(test, options.batch_size);
      for (std::size_t b = 0; b < eval_batches.size(); ++b) {
        GraphBatch base = make_batch(ds, eval_batches[b]);
        ViewSet views = identity_view_set(base, model.config.num_views);
        const std::vector<double> ones(eval_batches[b].size(), 1.0);
        Tape tape;
        eval.add(build_step(tape, ctx, views, ones, Mode::eval, nullptr, false, epoch, b), eval_batches[b].size());
      }
      result.log.add(eval.row(epoch, "test"));
    }
  }

  result.train_accuracy = evaluate(model, ds, train, phase.phase, options.batch_size);
  result.test_accuracy = test.empty() ? 0.0 : evaluate(model, ds, test, phase.phase, options.batch_size);
  result.teacher_checksum_after = model.teacher->checksum();
  return result;
}

}  // namespace dibod
