// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <memory>
#include <numeric>

#include "dibod/graph_batch.hpp"
#include "dibod/graph_data.hpp"
#include "dibod/hsic.hpp"
#include "dibod/mi.hpp"
#include "dibod/models.hpp"
#include "dibod/rng.hpp"

namespace {

using namespace dibod;

Tensor normal(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t = Tensor::zeros(rows, cols);
  for (double& v : t.values()) v = standard_normal(rng);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng = make_rng(1);
  const Tensor a = normal(n, 64, rng), b = normal(64, 64, rng);
  for (auto _ : state) {
    Tape t;
    benchmark::DoNotOptimize(matmul(t.constant(a), t.constant(b)).value().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(4)->Range(64, 4096);

// Forward and backward through one GCN layer over a batch of corpus graphs.
void BM_GcnLayer(benchmark::State& state) {
  const Dataset ds = synth_motif_corpus(static_cast<std::size_t>(state.range(0)), 2);
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const GraphBatch batch = make_batch(ds, idx);
  auto prop = std::make_shared<const Propagation>(batch);
  Rng rng = make_rng(2);
  const Tensor h = normal(batch.num_nodes(), 64, rng), w = normal(64, 64, rng);
  for (auto _ : state) {
    Tape t;
    Var wv = t.input(w);
    t.backward(sum(gcn_layer(prop, t.input(h), wv)));
    benchmark::DoNotOptimize(t.grad(wv).data());
  }
  state.counters["nodes"] = static_cast<double>(batch.num_nodes());
}
BENCHMARK(BM_GcnLayer)->Arg(32)->Arg(128)->Arg(512);

void BM_Hsic(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const KernelSpec spec = state.range(1) == 0 ? KernelSpec::linear() : KernelSpec::rbf_median();
  Rng rng = make_rng(3);
  const Tensor a = normal(n, 32, rng), b = normal(n, 32, rng);
  for (auto _ : state) {
    Tape t;
    Var av = t.input(a);
    t.backward(hsic(av, t.input(b), spec));
    benchmark::DoNotOptimize(t.grad(av).data());
  }
}
BENCHMARK(BM_Hsic)->ArgsProduct({{32, 128, 512}, {0, 1}})->ArgNames({"n", "rbf"});

void BM_ClubGaussian(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng = make_rng(4);
  VariationalCritic critic("club", CriticKind::gaussian, 32, 32, 64, rng);
  const Tensor z = normal(n, 32, rng), y = normal(n, 32, rng);
  for (auto _ : state) {
    Tape t;
    benchmark::DoNotOptimize(club_upper_bound(t, t.constant(z), t.constant(y), critic).item());
  }
}
BENCHMARK(BM_ClubGaussian)->Arg(32)->Arg(512);

}  // namespace

BENCHMARK_MAIN();
