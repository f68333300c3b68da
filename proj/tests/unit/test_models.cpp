// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "dibod/error.hpp"
#include "dibod/models.hpp"
#include "dibod/optim.hpp"
#include "gradcheck.hpp"

namespace dibod {
namespace {

using testing::gradcheck;
using testing::random_tensor;

GraphBatch batch_of(std::vector<Graph> graphs, std::size_t dim) {
  Dataset ds;
  ds.name = "models";
  ds.num_classes = 2;
  ds.feature_dim = dim;
  ds.graphs = std::move(graphs);
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  return make_batch(ds, idx);
}

Graph random_graph(std::size_t n, std::vector<Edge> edges, std::size_t dim, Rng& rng, int label = 0) {
  Graph g;
  g.num_nodes = n;
  g.edges = std::move(edges);
  g.node_features = random_tensor(n, dim, rng);
  g.label = label;
  return g;
}

ModelConfig small_config() {
  ModelConfig c;
  c.input_width = 4;
  c.hidden = 6;
  c.projection = 3;
  return c;
}

TEST(Propagation, FourNodePathMatchesHandComputation) {
  Rng rng = make_rng(1);
  const GraphBatch b = batch_of({random_graph(4, {{0, 1}, {1, 2}, {2, 3}}, 1, rng)}, 1);
  // Degrees with self-loops: 2, 3, 3, 2.
  const double d[] = {2, 3, 3, 2};
  const Tensor p = Propagation(b).dense();
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      const bool linked = i == j || (i > j ? i - j : j - i) == 1;
      EXPECT_NEAR(p(i, j), linked ? 1.0 / std::sqrt(d[i] * d[j]) : 0.0, 1e-15);
    }
  }
}

TEST(GcnLayer, FourNodePathMatchesHandPropagation) {
  Rng rng = make_rng(2);
  const GraphBatch b = batch_of({random_graph(4, {{0, 1}, {1, 2}, {2, 3}}, 3, rng)}, 3);
  const Tensor w = random_tensor(3, 2, rng);
  const double d[] = {2, 3, 3, 2};
  Tape t;
  const Tensor out =
      gcn_layer(std::make_shared<const Propagation>(b), t.constant(b.features), t.constant(w)).value();
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t c = 0; c < 2; ++c) {
      double acc = 0;
      for (std::size_t j = 0; j < 4; ++j) {
        if (i != j && (i > j ? i - j : j - i) != 1) continue;
        double hw = 0;
        for (std::size_t k = 0; k < 3; ++k) hw += b.features(j, k) * w(k, c);
        acc += hw / std::sqrt(d[i] * d[j]);
      }
      EXPECT_NEAR(out(i, c), std::max(acc, 0.0), 1e-12);
    }
  }
}

TEST(GcnLayer, SingleNodeWithIdentityWeightIsRelu) {
  Graph g;
  g.num_nodes = 1;
  g.node_features = Tensor::row({-1.5, 2.0});
  const GraphBatch b = batch_of({g}, 2);
  Tape t;
  const Tensor out =
      gcn_layer(std::make_shared<const Propagation>(b), t.constant(b.features), t.constant(Tensor::identity(2)))
          .value();
  EXPECT_EQ(out, Tensor::row({0.0, 2.0}));
}

TEST(GcnLayer, SymmetricPairGivesIdenticalRows) {
  Graph g;
  g.num_nodes = 2;
  g.edges = {{0, 1}};
  g.node_features = Tensor::from_rows({{0.3, -0.7}, {0.3, -0.7}});
  const GraphBatch b = batch_of({g}, 2);
  Rng rng = make_rng(4);
  Tape t;
  const Tensor out =
      gcn_layer(std::make_shared<const Propagation>(b), t.constant(b.features), t.constant(random_tensor(2, 5, rng)))
          .value();
  for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(out(0, c), out(1, c));
}

TEST(GcnLayer, WidthMismatchIsDimensionError) {
  Rng rng = make_rng(1);
  const GraphBatch b = batch_of({random_graph(2, {{0, 1}}, 3, rng)}, 3);
  Tape t;
  EXPECT_THROW(gcn_layer(std::make_shared<const Propagation>(b), t.constant(b.features), t.constant(Tensor::zeros(2, 2))),
               DimensionError);
}

TEST(GcnLayer, NodePermutationEquivariance) {
  Rng rng = make_rng(8);
  const std::vector<Edge> edges{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 4}, {1, 3}};
  const Graph g = random_graph(5, edges, 3, rng);
  const Tensor w = random_tensor(3, 4, rng);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::uint32_t> perm(5);
    std::iota(perm.begin(), perm.end(), 0u);
    shuffle(perm, rng);
    Graph pg = g;
    pg.edges.clear();
    for (const auto& [u, v] : g.edges) pg.edges.emplace_back(std::min(perm[u], perm[v]), std::max(perm[u], perm[v]));
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t c = 0; c < 3; ++c) pg.node_features(perm[i], c) = g.node_features(i, c);
    }
    const GraphBatch b = batch_of({g}, 3), pb = batch_of({pg}, 3);
    Tape t;
    const Tensor a = gcn_layer(std::make_shared<const Propagation>(b), t.constant(b.features), t.constant(w)).value();
    const Tensor pa =
        gcn_layer(std::make_shared<const Propagation>(pb), t.constant(pb.features), t.constant(w)).value();
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(pa(perm[i], c), a(i, c), 1e-14);
    }
  }
}

TEST(GcnLayer, GradientMatchesFiniteDifferences) {
  Rng rng = make_rng(12);
  const GraphBatch b = batch_of({random_graph(5, {{0, 1}, {1, 2}, {2, 3}, {1, 4}}, 3, rng),
                                 random_graph(3, {{0, 2}}, 3, rng)},
                                3);
  auto p = std::make_shared<const Propagation>(b);
  for (int trial = 0; trial < 10; ++trial) {
    const auto r = gradcheck(
        [&](Tape&, std::span<const Var> v) { return sum(square(gcn_layer(p, gcn_layer(p, v[0], v[1]), v[2]))); },
        {random_tensor(8, 3, rng), random_tensor(3, 4, rng), random_tensor(4, 2, rng)});
    EXPECT_LE(r.max_rel_err, 1e-4);
  }
}

TEST(Pool, MeanSumMaxAndGraphOrder) {
  Tape t;
  Var h = t.constant(Tensor::from_rows({{1, -2}, {3, 4}, {5, 0}}));
  const std::vector<std::size_t> graph_of{1, 0, 1};
  EXPECT_EQ(pool(h, graph_of, 2, Pooling::mean).value(), Tensor::from_rows({{3, 4}, {3, -1}}));
  EXPECT_EQ(pool(h, graph_of, 2, Pooling::sum).value(), Tensor::from_rows({{3, 4}, {6, -2}}));
  EXPECT_EQ(pool(h, graph_of, 2, Pooling::max).value(), Tensor::from_rows({{3, 4}, {5, 0}}));
  const std::vector<std::size_t> empty_graph{0, 0, 0};
  EXPECT_THROW(pool(h, empty_graph, 2, Pooling::mean), ContractError);
}

struct TeacherFixture {
  ModelConfig cfg = small_config();
  TeacherModel model{cfg, 5};
  Rng rng = make_rng(6);
  GraphBatch base;

  TeacherFixture() {
    base = batch_of({random_graph(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}}, 3, rng, 0),
                     random_graph(4, {{0, 1}, {0, 2}, {0, 3}}, 3, rng, 1), random_graph(6, {{0, 1}, {2, 3}}, 3, rng, 0)},
                    3);
    model.add_codec(3);
  }
};

TEST(TeacherForward, IdenticalViewsFuseToTheSharedEncoding) {
  TeacherFixture f;
  for (std::size_t l = 0; l < f.cfg.gcn_layers; ++l) f.model.encoder_weight(1, l).value = f.model.encoder_weight(0, l).value;
  const ViewSet views = identity_view_set(f.base, 2);
  Tape t1;
  const Tensor even = teacher_forward(t1, views, f.model, Mode::eval, nullptr).mu.value();
  f.model.fusion_logits().value = Tensor::row({2.0, -1.0});
  Tape t2;
  const Tensor skewed = teacher_forward(t2, views, f.model, Mode::eval, nullptr).mu.value();
  ASSERT_EQ(even.size(), skewed.size());
  for (std::size_t i = 0; i < even.size(); ++i) EXPECT_NEAR(even[i], skewed[i], 1e-12);
}

TEST(TeacherForward, FusionWeightsAreASoftmax) {
  TeacherFixture f;
  f.model.fusion_logits().value = Tensor::row({0.0, std::log(3.0)});
  const auto w = f.model.fusion_weights();
  EXPECT_NEAR(w[0], 0.25, 1e-15);
  EXPECT_NEAR(w[1], 0.75, 1e-15);
}

TEST(TeacherForward, EvalModeIsDeterministicAndUsesTheMean) {
  TeacherFixture f;
  const ViewSet views = make_view_set(f.base, default_view_specs(), 3);
  Tape a, b;
  const TeacherOutput oa = teacher_forward(a, views, f.model, Mode::eval, nullptr);
  const TeacherOutput ob = teacher_forward(b, views, f.model, Mode::eval, nullptr);
  EXPECT_EQ(oa.node_embedding.value(), ob.node_embedding.value());
  EXPECT_EQ(oa.node_embedding.value(), oa.mu.value());
  EXPECT_EQ(oa.logits.value(), ob.logits.value());
  EXPECT_EQ(oa.graph_embedding.rows(), 3u);
}

TEST(TeacherForward, TrainModeNeedsAnRngAndSamples) {
  TeacherFixture f;
  const ViewSet views = identity_view_set(f.base, 2);
  Tape t;
  EXPECT_THROW(teacher_forward(t, views, f.model, Mode::train, nullptr), ContractError);
  Rng rng = make_rng(3);
  const TeacherOutput o = teacher_forward(t, views, f.model, Mode::train, &rng);
  EXPECT_NE(o.node_embedding.value(), o.mu.value());
}

TEST(TeacherForward, KlVanishesOnlyAtTheStandardNormal) {
  TeacherFixture f;
  const ViewSet views = identity_view_set(f.base, 2);
  for (Parameter* p : {&f.model.mu_head().weight(), &f.model.mu_head().bias(), &f.model.logvar_head().weight(),
                       &f.model.logvar_head().bias()}) {
    p->value.fill(0.0);
  }
  Tape t;
  EXPECT_EQ(teacher_forward(t, views, f.model, Mode::eval, nullptr).kl.item(), 0.0);
  f.model.mu_head().bias().value[0] = 0.5;
  Tape t2;
  EXPECT_GT(teacher_forward(t2, views, f.model, Mode::eval, nullptr).kl.item(), 0.0);
}

TEST(TeacherForward, GraphOrderInvariance) {
  TeacherFixture f;
  Rng rng = make_rng(4);
  std::vector<Graph> gs{random_graph(5, {{0, 1}, {1, 2}}, 3, rng), random_graph(3, {{0, 1}}, 3, rng),
                        random_graph(4, {{0, 3}}, 3, rng)};
  const GraphBatch b = batch_of(gs, 3);
  const GraphBatch rb = batch_of({gs[2], gs[0], gs[1]}, 3);
  Tape t1, t2;
  const Tensor z = teacher_forward(t1, identity_view_set(b, 2), f.model, Mode::eval, nullptr).graph_embedding.value();
  const Tensor rz = teacher_forward(t2, identity_view_set(rb, 2), f.model, Mode::eval, nullptr).graph_embedding.value();
  const std::size_t from[] = {2, 0, 1};
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < z.cols(); ++c) EXPECT_NEAR(rz(r, c), z(from[r], c), 1e-13);
  }
}

TEST(TeacherReconstruct, MatchesDoubleLoop) {
  TeacherFixture f;
  const ViewSet views = make_view_set(f.base, default_view_specs(), 11);
  Tape t;
  const TeacherOutput out = teacher_forward(t, views, f.model, Mode::eval, nullptr);
  const double lr = teacher_reconstruct(t, out, f.model, views).item();
  double total = 0;
  std::size_t count = 0;
  for (std::size_t v = 0; v < views.size(); ++v) {
    const Tensor decoded = f.model.codec(3).decoders[v](t, out.node_embedding).value();
    const GraphBatch& view = views.views[v];
    for (std::size_t i = 0; i < view.num_nodes(); ++i) {
      const auto row = static_cast<std::size_t>(out.row_of_base[view.base_node[i]]);
      for (std::size_t c = 0; c < 3; ++c) {
        const double diff = view.features(i, c) - decoded(row, c);
        total += diff * diff;
      }
      ++count;
    }
  }
  EXPECT_NEAR(lr, total / static_cast<double>(count), 1e-12);
}

TEST(TeacherReconstruct, ZeroDecoderGivesMeanSquaredNorm) {
  TeacherFixture f;
  for (Mlp& d : f.model.codec(3).decoders) {
    std::vector<Parameter*> ps;
    d.collect(ps);
    for (Parameter* p : ps) p->value.fill(0.0);
  }
  const ViewSet views = identity_view_set(f.base, 2);
  Tape t;
  const TeacherOutput out = teacher_forward(t, views, f.model, Mode::eval, nullptr);
  double sq = 0;
  for (double x : f.base.features.values()) sq += x * x;
  EXPECT_NEAR(teacher_reconstruct(t, out, f.model, views).item(), sq / static_cast<double>(f.base.num_nodes()), 1e-12);
}

TEST(TeacherReconstruct, PerfectDecoderGivesZero) {
  ModelConfig cfg = small_config();
  TeacherModel model(cfg, 1);
  model.add_codec(1);
  Graph g;
  g.num_nodes = 3;
  g.edges = {{0, 1}, {1, 2}};
  g.node_features = Tensor({3, 1}, 0.75);
  const GraphBatch b = batch_of({g}, 1);
  for (Mlp& d : model.codec(1).decoders) {
    std::vector<Parameter*> ps;
    d.collect(ps);
    for (Parameter* p : ps) p->value.fill(0.0);
    ps.back()->value.fill(0.75);  // output bias reproduces the constant feature
  }
  const ViewSet views = identity_view_set(b, 2);
  Tape t;
  const TeacherOutput out = teacher_forward(t, views, model, Mode::eval, nullptr);
  EXPECT_EQ(teacher_reconstruct(t, out, model, views).item(), 0.0);
}

TEST(StudentForward, ZeroInputWithZeroBiasesGivesZeroCodes) {
  ModelConfig cfg = small_config();
  StudentModel s(cfg, 3);
  std::vector<Parameter*> ps;
  s.vs_head().collect(ps);
  s.vr_head().collect(ps);
  for (Parameter* p : ps) {
    if (p->name.find("bias") != std::string::npos) p->value.fill(0.0);
  }
  Tape t;
  const StudentOutput o = student_forward(t, t.constant(Tensor::zeros(4, cfg.hidden)), s);
  for (double x : o.z_vs.value().values()) EXPECT_EQ(x, 0.0);
  for (double x : o.z_vr.value().values()) EXPECT_EQ(x, 0.0);
  EXPECT_EQ(o.z_vs.cols(), o.z_vr.cols());
  EXPECT_EQ(o.proj_vs.cols(), cfg.projection);
}

TEST(StudentForward, IdenticalRowsGiveIdenticalOutputs) {
  ModelConfig cfg = small_config();
  StudentModel s(cfg, 3);
  Rng rng = make_rng(9);
  Tensor in = random_tensor(3, cfg.hidden, rng);
  for (std::size_t c = 0; c < cfg.hidden; ++c) in(2, c) = in(0, c);
  Tape t;
  const StudentOutput o = student_forward(t, t.constant(in), s);
  for (const Var* v : {&o.z_vs, &o.z_vr, &o.logits_vs, &o.logits_vr, &o.proj_vs, &o.proj_vr}) {
    for (std::size_t c = 0; c < v->cols(); ++c) EXPECT_EQ(v->value()(0, c), v->value()(2, c));
  }
}

TEST(StudentForward, VsHeadWeightGradientMatchesFiniteDifferences) {
  ModelConfig cfg = small_config();
  StudentModel s(cfg, 3);
  std::vector<Parameter*> ps;
  s.vs_head().collect(ps);
  Rng rng = make_rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor in = random_tensor(4, cfg.hidden, rng);
    std::vector<Tensor> inputs;
    for (Parameter* p : ps) inputs.push_back(random_tensor(p->value.rows(), p->value.cols(), rng, 0.5));
    const auto r = gradcheck(
        [&](Tape& t, std::span<const Var> v) {
          Var h = add(matmul(t.constant(in), v[0]), v[1]);
          return sum(square(add(matmul(relu(h), v[2]), v[3])));
        },
        inputs);
    EXPECT_LE(r.max_rel_err, 1e-4);
    // The same composition through the head itself.
    for (std::size_t k = 0; k < ps.size(); ++k) ps[k]->value = inputs[k];
    Tape t;
    Var x = t.constant(in);
    Var h = add(matmul(x, t.constant(inputs[0])), t.constant(inputs[1]));
    const double manual = sum(square(add(matmul(relu(h), t.constant(inputs[2])), t.constant(inputs[3])))).item();
    EXPECT_NEAR(sum(square(student_forward(t, x, s).z_vs)).item(), manual, 1e-12);
  }
}

TEST(FrozenTeacher, HundredAdaptStepsLeaveTheCoreBitIdentical) {
  ModelConfig cfg = small_config();
  TeacherModel teacher(cfg, 21);
  StudentModel student(cfg, 21);
  teacher.add_codec(3);
  Rng rng = make_rng(22);
  const GraphBatch b = batch_of({random_graph(5, {{0, 1}, {1, 2}, {3, 4}}, 3, rng, 0),
                                 random_graph(4, {{0, 1}, {2, 3}}, 3, rng, 1)},
                                3);
  teacher.freeze();
  const std::uint64_t before = teacher.checksum();
  std::vector<Parameter*> params = teacher.parameters();
  for (Parameter* p : student.parameters()) params.push_back(p);
  Adam opt(params, {});
  for (int step = 0; step < 100; ++step) {
    opt.zero_grad();
    Tape t;
    const ViewSet views = make_view_set(b, default_view_specs(), static_cast<std::uint64_t>(step));
    const TeacherOutput out = teacher_forward(t, views, teacher, Mode::train, &rng);
    const StudentOutput s = student_forward(t, out.graph_embedding, student);
    Var loss = add(cross_entropy_logits(s.logits_vs, b.labels), cross_entropy_logits(out.logits, b.labels));
    t.backward(loss);
    opt.step();
  }
  EXPECT_EQ(teacher.checksum(), before);
  teacher.freeze(false);
  EXPECT_FALSE(teacher.frozen());
}

TEST(ModelConfig, DescribeCoversArchitectureFields) {
  ModelConfig a = small_config(), b = small_config();
  EXPECT_EQ(a.describe(), b.describe());
  b.num_classes = 3;
  EXPECT_NE(a.describe(), b.describe());
  b = small_config();
  b.pooling = Pooling::sum;
  EXPECT_NE(a.describe(), b.describe());
  EXPECT_THROW(parse_pooling("attention"), ConfigError);
}

}  // namespace
}  // namespace dibod
