// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#include "dibod/models.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "dibod/error.hpp"
#include "dibod/mi.hpp"

namespace dibod {
namespace {

constexpr std::uint64_t kStreamEncoder = 1;
constexpr std::uint64_t kStreamHeads = 2;
constexpr std::uint64_t kStreamCodec = 3;
constexpr std::uint64_t kStreamStudent = 4;

Var segment_max(const Var& h, std::span<const std::size_t> graph_of, std::size_t num_graphs) {
  const Tensor& x = h.value();
  const std::size_t d = x.cols();
  Tensor out({num_graphs, d}, -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> arg(num_graphs * d, 0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const std::size_t g = graph_of[r];
    for (std::size_t c = 0; c < d; ++c) {
      if (x(r, c) > out(g, c)) {
        out(g, c) = x(r, c);
        arg[g * d + c] = r;
      }
    }
  }
  return h.tape().record(std::move(out), {h}, [h, arg = std::move(arg), d](Tape& tape, const Tensor&, const Tensor& g) {
    Tensor& gh = tape.grad_of(h);
    for (std::size_t k = 0; k < arg.size(); ++k) gh(arg[k], k % d) += g[k];
  });
}

}  // namespace

std::string to_string(Pooling p) {
  switch (p) {
    case Pooling::mean: return "mean";
    case Pooling::sum: return "sum";
    case Pooling::max: return "max";
  }
  return "unknown";
}

Pooling parse_pooling(const std::string& text) {
  if (text == "mean") return Pooling::mean;
  if (text == "sum") return Pooling::sum;
  if (text == "max") return Pooling::max;
  throw ConfigError("model.pooling", "unknown pooling '" + text + "'");
}

void ModelConfig::validate() const {
  if (num_views < 2) throw ConfigError("model.views", "at least two views are required");
  if (input_width == 0 || hidden == 0 || projection == 0 || gcn_layers == 0) {
    throw ConfigError("model", "layer widths and depth must be positive");
  }
  if (num_classes < 2) throw ConfigError("model.num_classes", "at least two classes are required");
}

std::string ModelConfig::describe() const {
  std::ostringstream os;
  os << "views=" << num_views << ";input=" << input_width << ";hidden=" << hidden << ";layers=" << gcn_layers
     << ";projection=" << projection << ";classes=" << num_classes << ";pooling=" << to_string(pooling);
  return os.str();
}

Var propagate(std::shared_ptr<const Propagation> p, const Var& h) {
  Tensor out = p->apply(h.value());
  // The operator is symmetric, so the adjoint is P itself.
  return h.tape().record(std::move(out), {h}, [h, p](Tape& tape, const Tensor&, const Tensor& g) {
    Tensor back = p->apply(g);
    Tensor& gh = tape.grad_of(h);
    for (std::size_t i = 0; i < back.size(); ++i) gh[i] += back[i];
  });
}

Var gcn_layer(std::shared_ptr<const Propagation> p, const Var& h, const Var& w) {
  if (h.cols() != w.rows()) {
    throw DimensionError("gcn_layer: feature width " + std::to_string(h.cols()) + " does not match weight rows " +
                         std::to_string(w.rows()));
  }
  // P (h w) == (P h) w; multiplying first keeps the sparse product on the narrower side.
  return relu(propagate(std::move(p), matmul(h, w)));
}

Var pool(const Var& h, std::span<const std::size_t> graph_of, std::size_t num_graphs, Pooling kind) {
  if (graph_of.size() != h.rows()) throw DimensionError("pool: graph index length does not match rows");
  std::vector<double> counts(num_graphs, 0.0);
  for (std::size_t g : graph_of) {
    if (g >= num_graphs) throw ContractError("pool: graph index out of range");
    counts[g] += 1.0;
  }
  for (double c : counts) {
    if (c == 0.0) throw ContractError("pool: a graph has no rows");
  }
  if (kind == Pooling::max) return segment_max(h, graph_of, num_graphs);
  Var summed = scatter_add_rows(h, graph_of, num_graphs);
  if (kind == Pooling::sum) return summed;
  for (double& c : counts) c = 1.0 / c;
  return mul(summed, h.tape().constant(Tensor::column(std::move(counts))));
}

TeacherModel::TeacherModel(const ModelConfig& config, std::uint64_t seed) : config_(config), seed_(seed) {
  config_.validate();
  Rng enc_rng = make_rng(seed, {kStreamEncoder});
  encoders_.resize(config_.num_views);
  for (std::size_t v = 0; v < config_.num_views; ++v) {
    for (std::size_t l = 0; l < config_.gcn_layers; ++l) {
      Parameter w;
      w.name = "teacher.encoder" + std::to_string(v) + ".layer" + std::to_string(l);
      w.value = glorot_uniform(l == 0 ? config_.input_width : config_.hidden, config_.hidden, enc_rng);
      encoders_[v].push_back(std::move(w));
    }
  }
  fusion_.name = "teacher.fusion";
  fusion_.value = Tensor::zeros(1, config_.num_views);
  Rng head_rng = make_rng(seed, {kStreamHeads});
  mu_ = Linear("teacher.mu", config_.hidden, config_.hidden, head_rng);
  logvar_ = Linear("teacher.logvar", config_.hidden, config_.hidden, head_rng);
  classifier_ = Linear("teacher.classifier", config_.hidden, static_cast<std::size_t>(config_.num_classes), head_rng);
  projection_ = Linear("teacher.projection", config_.hidden, config_.projection, head_rng);
}

TeacherModel::Codec& TeacherModel::add_codec(std::size_t feature_dim) {
  if (feature_dim == 0) throw ContractError("codec feature width must be positive");
  auto it = codecs_.find(feature_dim);
  if (it != codecs_.end()) return *it->second;
  Rng rng = make_rng(seed_, {kStreamCodec, feature_dim});
  auto codec = std::make_unique<Codec>();
  const std::string prefix = "teacher.codec" + std::to_string(feature_dim);
  codec->adapter = Linear(prefix + ".adapter", feature_dim, config_.input_width, rng);
  for (std::size_t v = 0; v < config_.num_views; ++v) {
    codec->decoders.emplace_back(prefix + ".decoder" + std::to_string(v), config_.hidden, config_.hidden, feature_dim, rng);
  }
  if (codecs_.empty()) primary_dim_ = feature_dim;
  return *codecs_.emplace(feature_dim, std::move(codec)).first->second;
}

TeacherModel::Codec& TeacherModel::codec(std::size_t feature_dim) {
  auto it = codecs_.find(feature_dim);
  if (it == codecs_.end()) throw ContractError("teacher has no codec for feature width " + std::to_string(feature_dim));
  return *it->second;
}

namespace {
void collect_codec(TeacherModel::Codec& c, std::vector<Parameter*>& out) {
  c.adapter.collect(out);
  for (Mlp& d : c.decoders) d.collect(out);
}
}  // namespace

std::vector<Parameter*> TeacherModel::core_parameters() {
  std::vector<Parameter*> out;
  for (auto& layers : encoders_) {
    for (Parameter& p : layers) out.push_back(&p);
  }
  out.push_back(&fusion_);
  mu_.collect(out);
  logvar_.collect(out);
  classifier_.collect(out);
  projection_.collect(out);
  if (primary_dim_ != 0) collect_codec(*codecs_.at(primary_dim_), out);
  return out;
}

std::vector<Parameter*> TeacherModel::parameters() {
  std::vector<Parameter*> out = core_parameters();
  for (auto& [dim, codec] : codecs_) {
    if (dim != primary_dim_) collect_codec(*codec, out);
  }
  return out;
}

std::vector<double> TeacherModel::fusion_weights() const {
  Tensor w = softmax_rows(fusion_.value);
  return {w.values().begin(), w.values().end()};
}

void TeacherModel::freeze(bool frozen) {
  for (Parameter* p : core_parameters()) p->trainable = !frozen;
  frozen_ = frozen;
}

std::uint64_t TeacherModel::checksum() {
  const auto params = core_parameters();
  return dibod::checksum(params);
}

TeacherOutput teacher_forward(Tape& tape, const ViewSet& views, TeacherModel& model, Mode mode, Rng* rng,
                              bool per_view_embeddings) {
  const ModelConfig& cfg = model.config();
  if (views.base == nullptr || views.size() != cfg.num_views) {
    throw ContractError("teacher_forward: expected " + std::to_string(cfg.num_views) + " views");
  }
  if (mode == Mode::train && rng == nullptr) throw ContractError("teacher_forward: train mode needs an rng");
  const GraphBatch& base = *views.base;
  const std::size_t n_base = base.num_nodes();
  const std::size_t n_graphs = base.num_graphs();
  TeacherModel::Codec& codec = model.codec(base.feature_dim());

  TeacherOutput out;
  std::vector<Var> scattered;
  Tensor presence({n_base, cfg.num_views});
  for (std::size_t v = 0; v < views.size(); ++v) {
    const GraphBatch& view = views.views[v];
    if (view.num_graphs() != n_graphs || view.base_num_nodes != n_base) {
      throw ContractError("teacher_forward: view does not match its base batch");
    }
    auto prop = std::make_shared<const Propagation>(view);
    Var h = codec.adapter(tape, tape.constant(view.features));
    for (std::size_t l = 0; l < cfg.gcn_layers; ++l) h = gcn_layer(prop, h, tape.leaf(model.encoder_weight(v, l)));
    if (per_view_embeddings) {
      const auto graph_of = view.graph_of_node();
      out.view_graph_embeddings.push_back(pool(h, graph_of, n_graphs, cfg.pooling));
    }
    scattered.push_back(scatter_add_rows(h, view.base_node, n_base));
    for (std::size_t b : view.base_node) presence(b, v) = 1.0;
  }

  std::vector<double> uncovered(n_base, 0.0);
  for (std::size_t i = 0; i < n_base; ++i) {
    bool any = false;
    for (std::size_t v = 0; v < cfg.num_views; ++v) any = any || presence(i, v) > 0.0;
    if (any) {
      out.row_of_base.push_back(static_cast<std::ptrdiff_t>(out.covered.size()));
      out.covered.push_back(i);
    } else {
      out.row_of_base.push_back(-1);
      uncovered[i] = 1.0;
    }
  }

  Var theta = softmax_rows(tape.leaf(model.fusion_logits()));
  Var numer = mul(tape.constant(std::move(presence)), theta);
  Var weights = div(numer, add(sum_rows(numer), tape.constant(Tensor::column(std::move(uncovered)))));
  Var fused = mul(scattered[0], slice_cols(weights, 0, 1));
  for (std::size_t v = 1; v < cfg.num_views; ++v) fused = add(fused, mul(scattered[v], slice_cols(weights, v, v + 1)));
  Var z = gather_rows(fused, out.covered);

  out.mu = model.mu_head()(tape, z);
  out.logvar = model.logvar_head()(tape, z);
  if (mode == Mode::train) {
    Tensor eps({out.mu.rows(), out.mu.cols()});
    for (double& e : eps.values()) e = standard_normal(*rng);
    out.node_embedding = add(out.mu, mul(exp(scale(out.logvar, 0.5)), tape.constant(std::move(eps))));
  } else {
    out.node_embedding = out.mu;
  }
  out.kl = kl_compression(out.mu, out.logvar);

  const auto base_graph = base.graph_of_node();
  std::vector<std::size_t> graph_of;
  graph_of.reserve(out.covered.size());
  for (std::size_t b : out.covered) graph_of.push_back(base_graph[b]);
  out.graph_embedding = pool(out.node_embedding, graph_of, n_graphs, cfg.pooling);
  out.logits = model.classifier()(tape, out.graph_embedding);
  out.projection = model.projection()(tape, out.graph_embedding);
  return out;
}

Var teacher_reconstruct(Tape& tape, const TeacherOutput& out, TeacherModel& model, const ViewSet& views) {
  TeacherModel::Codec& codec = model.codec(views.base->feature_dim());
  Var total;
  std::size_t pairs = 0;
  for (std::size_t v = 0; v < views.size(); ++v) {
    const GraphBatch& view = views.views[v];
    std::vector<std::size_t> rows;
    rows.reserve(view.num_nodes());
    for (std::size_t b : view.base_node) {
      const std::ptrdiff_t r = out.row_of_base.at(b);
      if (r < 0) throw ContractError("teacher_reconstruct: view node has no fused embedding");
      rows.push_back(static_cast<std::size_t>(r));
    }
    Var recon = codec.decoders.at(v)(tape, gather_rows(out.node_embedding, rows));
    Var err = sum(square(sub(tape.constant(view.features), recon)));
    total = v == 0 ? err : add(total, err);
    pairs += rows.size();
  }
  return scale(total, 1.0 / static_cast<double>(pairs));
}

StudentModel::StudentModel(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng = make_rng(seed, {kStreamStudent});
  const std::size_t h = config.hidden;
  const auto m = static_cast<std::size_t>(config.num_classes);
  vs_head_ = Mlp("student.vs_head", h, h, h, rng);
  vr_head_ = Mlp("student.vr_head", h, h, h, rng);
  vs_classifier_ = Linear("student.vs_classifier", h, m, rng);
  vr_classifier_ = Linear("student.vr_classifier", h, m, rng);
  vs_projection_ = Linear("student.vs_projection", h, config.projection, rng);
  vr_projection_ = Linear("student.vr_projection", h, config.projection, rng);
}

std::vector<Parameter*> StudentModel::parameters() {
  std::vector<Parameter*> out;
  vs_head_.collect(out);
  vr_head_.collect(out);
  vs_classifier_.collect(out);
  vr_classifier_.collect(out);
  vs_projection_.collect(out);
  vr_projection_.collect(out);
  return out;
}

StudentOutput student_forward(Tape& tape, const Var& graph_embedding, StudentModel& model) {
  StudentOutput out;
  out.z_vs = model.vs_head()(tape, graph_embedding);
  out.z_vr = model.vr_head()(tape, graph_embedding);
  out.logits_vs = model.vs_classifier()(tape, out.z_vs);
  out.logits_vr = model.vr_classifier()(tape, out.z_vr);
  out.proj_vs = model.vs_projection()(tape, out.z_vs);
  out.proj_vr = model.vr_projection()(tape, out.z_vr);
  return out;
}

}  // namespace dibod
