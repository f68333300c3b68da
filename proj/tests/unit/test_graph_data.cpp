// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "dibod/error.hpp"
#include "dibod/graph_data.hpp"

namespace dibod {
namespace {

namespace fs = std::filesystem;

const fs::path kTu = fs::path(DIBOD_FIXTURES) / "tu";
const fs::path kBad = fs::path(DIBOD_FIXTURES) / "malformed";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dibod_graph_data_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(ParseTudataset, TwoNodeFixture) {
  const Dataset ds = parse_tudataset(kTu, "TWO");
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.graphs[0].num_nodes, 2u);
  ASSERT_EQ(ds.graphs[0].edges.size(), 1u);
  EXPECT_EQ(ds.graphs[0].edges[0], Edge(0, 1));
  EXPECT_EQ(ds.num_classes, 1);
  // No node labels or attributes: one constant feature.
  EXPECT_EQ(ds.feature_dim, 1u);
  EXPECT_EQ(ds.graphs[0].node_features(1, 0), 1.0);
}

TEST(ParseTudataset, GraphLabelsRemappedInOrderOfFirstAppearance) {
  const Dataset ds = parse_tudataset(kTu, "RELABEL");
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.labels(), (std::vector<int>{0, 1, 0}));
  EXPECT_EQ(ds.graph_label_values, (std::vector<long long>{-1, 1}));
  EXPECT_EQ(ds.graphs[1].num_nodes, 3u);
  EXPECT_EQ(ds.graphs[1].edges, (std::vector<Edge>{{0, 1}, {1, 2}}));
  EXPECT_EQ(ds.graphs[2].num_nodes, 1u);
  EXPECT_TRUE(ds.graphs[2].edges.empty());
}

TEST(ParseTudataset, NodeLabelsBecomeOneHotColumns) {
  const Dataset ds = parse_tudataset(kTu, "NODELAB");
  ASSERT_EQ(ds.feature_dim, 3u);
  // Hand check: node labels 2, 1, 3 | 3, 1 with columns ordered 1, 2, 3.
  const int expected_col[] = {1, 0, 2, 2, 0};
  std::size_t node = 0;
  for (const Graph& g : ds.graphs) {
    for (std::size_t i = 0; i < g.num_nodes; ++i, ++node) {
      for (std::size_t c = 0; c < 3; ++c) {
        EXPECT_EQ(g.node_features(i, c), static_cast<int>(c) == expected_col[node] ? 1.0 : 0.0) << node << "," << c;
      }
    }
  }
  EXPECT_EQ(ds.graphs[0].edges.size(), 3u);
}

TEST(ParseTudataset, LabelsAndAttributesConcatenate) {
  const Dataset ds = parse_tudataset(kTu, "ATTR");
  ASSERT_EQ(ds.feature_dim, 4u);
  EXPECT_EQ(ds.node_attribute_dim, 2u);
  EXPECT_EQ(ds.graphs[0].node_features(0, 0), 1.0);
  EXPECT_EQ(ds.graphs[0].node_features(0, 2), 0.5);
  EXPECT_EQ(ds.graphs[0].node_features(0, 3), -1.0);
  EXPECT_EQ(ds.graphs[1].node_features(1, 1), 1.0);
  EXPECT_EQ(ds.graphs[1].node_features(1, 3), 0.125);
  EXPECT_EQ(ds.labels(), (std::vector<int>{0, 1}));
}

TEST(ParseTudataset, MissingMandatoryFileIsIoError) {
  EXPECT_THROW(parse_tudataset(kBad / "missing", "X"), IoError);
  EXPECT_THROW(parse_tudataset(kTu, "NOSUCH"), IoError);
}

class MalformedFixture : public ::testing::TestWithParam<const char*> {};

TEST_P(MalformedFixture, YieldsFormatError) { EXPECT_THROW(parse_tudataset(kBad / GetParam(), "X"), FormatError); }

INSTANTIATE_TEST_SUITE_P(Corpus, MalformedFixture,
                         ::testing::Values("dangling", "orphan", "decreasing", "crossgraph", "badnumber", "emptygraph",
                                           "ragged", "badpair"));

TEST(ParseTudataset, DanglingIndexMessageNamesTheIndex) {
  try {
    parse_tudataset(kBad / "dangling", "X");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("dangling node index 3"), std::string::npos) << e.what();
  }
}

class RoundTrip : public ::testing::TestWithParam<const char*> {};

TEST_P(RoundTrip, WriterReproducesFixtureBytes) {
  const std::string name = GetParam();
  const Dataset ds = parse_tudataset(kTu, name);
  const fs::path out = scratch("rt_" + name);
  write_tudataset(ds, out, name);
  for (const char* suffix : {"_A.txt", "_graph_indicator.txt", "_graph_labels.txt", "_node_labels.txt",
                             "_node_attributes.txt"}) {
    const fs::path original = kTu / (name + suffix);
    const fs::path written = out / (name + suffix);
    ASSERT_EQ(fs::exists(original), fs::exists(written)) << suffix;
    if (fs::exists(original)) EXPECT_EQ(slurp(original), slurp(written)) << suffix;
  }
}

INSTANTIATE_TEST_SUITE_P(Fixtures, RoundTrip, ::testing::Values("TWO", "RELABEL", "NODELAB", "ATTR"));

void expect_same(const Dataset& a, const Dataset& b) {
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(a.num_classes, b.num_classes);
  EXPECT_EQ(a.feature_dim, b.feature_dim);
  for (std::size_t g = 0; g < a.size(); ++g) {
    EXPECT_EQ(a.graphs[g].num_nodes, b.graphs[g].num_nodes);
    EXPECT_EQ(a.graphs[g].edges, b.graphs[g].edges);
    EXPECT_EQ(a.graphs[g].label, b.graphs[g].label);
    EXPECT_EQ(a.graphs[g].node_features, b.graphs[g].node_features);
  }
}

TEST(RoundTripSynthetic, ParseOfWrittenCorpusIsStructurallyIdentical) {
  const Dataset ds = synth_motif_corpus(40, 3, MotifSpec::shifted());
  const fs::path out = scratch("rt_synth");
  write_tudataset(ds, out, "SYN");
  const Dataset back = parse_tudataset(out, "SYN");
  expect_same(ds, back);
  const fs::path again = scratch("rt_synth2");
  write_tudataset(back, again, "SYN");
  EXPECT_EQ(slurp(out / "SYN_A.txt"), slurp(again / "SYN_A.txt"));
  EXPECT_EQ(slurp(out / "SYN_node_attributes.txt"), slurp(again / "SYN_node_attributes.txt"));
}

TEST(Head, KeepsPrefixAndReindexesLabels) {
  const Dataset ds = parse_tudataset(kTu, "RELABEL");
  const Dataset h = head(ds, 1);
  ASSERT_EQ(h.size(), 1u);
  EXPECT_EQ(h.num_classes, 1);
  EXPECT_EQ(h.graph_label_values, (std::vector<long long>{-1}));
  EXPECT_EQ(head(ds, 99).size(), 3u);
}

TEST(SynthMotif, BalancedByConstruction) {
  const Dataset ds = synth_motif_corpus(20, 7);
  const auto labels = ds.labels();
  EXPECT_EQ(std::count(labels.begin(), labels.end(), 0), 10);
  EXPECT_EQ(std::count(labels.begin(), labels.end(), 1), 10);
  EXPECT_NO_THROW(ds.validate());
}

TEST(SynthMotif, SameSeedSameCorpus) {
  expect_same(synth_motif_corpus(30, 9), synth_motif_corpus(30, 9));
  const Dataset a = synth_motif_corpus(30, 9);
  const Dataset b = synth_motif_corpus(30, 10);
  bool differs = false;
  for (std::size_t g = 0; g < a.size(); ++g) differs = differs || a.graphs[g].edges != b.graphs[g].edges;
  EXPECT_TRUE(differs);
}

TEST(SynthMotif, RejectsBadSizes) {
  EXPECT_THROW(synth_motif_corpus(18, 1), ContractError);
  EXPECT_THROW(synth_motif_corpus(21, 1), ContractError);
}

TEST(SynthMotif, ShiftedVariantHasLargerGraphs) {
  const Dataset clean = synth_motif_corpus(100, 1, MotifSpec::clean());
  const Dataset shifted = synth_motif_corpus(100, 1, MotifSpec::shifted());
  for (const Graph& g : clean.graphs) EXPECT_LE(g.num_nodes, 16u);
  for (const Graph& g : shifted.graphs) EXPECT_GE(g.num_nodes, 14u);
}

// Majority vote within bins of the mean degree, scored in-sample.
double mean_degree_vote_accuracy(const Dataset& ds) {
  std::map<long, std::array<int, 2>> votes;
  std::vector<long> bin(ds.size());
  for (std::size_t g = 0; g < ds.size(); ++g) {
    const Graph& gr = ds.graphs[g];
    const double mean_degree = 2.0 * static_cast<double>(gr.edges.size()) / static_cast<double>(gr.num_nodes);
    bin[g] = std::lround(mean_degree * 10.0);
    ++votes[bin[g]][static_cast<std::size_t>(gr.label)];
  }
  int correct = 0;
  for (std::size_t g = 0; g < ds.size(); ++g) {
    const auto& v = votes[bin[g]];
    const int pred = v[1] > v[0] ? 1 : 0;
    correct += pred == ds.graphs[g].label;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

TEST(SynthMotif, MeanDegreeVoteSeparatesCleanVariant) {
  for (std::uint64_t seed : {1, 2, 3}) EXPECT_GT(mean_degree_vote_accuracy(synth_motif_corpus(200, seed)), 0.8);
}

TEST(DegreeFeatures, BucketsCapAtSeven) {
  std::vector<Edge> star;
  for (std::uint32_t v = 1; v < 10; ++v) star.emplace_back(0, v);
  const Tensor x = degree_features(10, star);
  EXPECT_EQ(x(0, 7), 1.0);
  EXPECT_EQ(x(3, 1), 1.0);
  EXPECT_EQ(x(3, 0), 0.0);
}

Dataset labelled(std::size_t n0, std::size_t n1) {
  Dataset ds;
  ds.name = "counts";
  ds.num_classes = 2;
  ds.feature_dim = 1;
  for (std::size_t i = 0; i < n0 + n1; ++i) {
    Graph g;
    g.num_nodes = 1;
    g.node_features = Tensor({1, 1}, 1.0);
    g.label = i < n0 ? 0 : 1;
    ds.graphs.push_back(g);
  }
  return ds;
}

TEST(MakeFolds, BalancedHundredGivesFiveOfEachPerFold) {
  const Dataset ds = labelled(50, 50);
  const FoldPlan plan = make_folds(ds, 10, 4);
  for (int f = 0; f < 10; ++f) {
    int c0 = 0, c1 = 0;
    for (std::size_t i : plan.test_indices(f)) (ds.graphs[i].label == 0 ? c0 : c1)++;
    EXPECT_EQ(c0, 5);
    EXPECT_EQ(c1, 5);
  }
}

TEST(MakeFolds, FoldsPartitionTheIndices) {
  const Dataset ds = labelled(23, 31);
  const FoldPlan plan = make_folds(ds, 10, 8);
  std::set<std::size_t> seen;
  std::size_t total = 0;
  for (int f = 0; f < 10; ++f) {
    const auto test = plan.test_indices(f);
    const auto train = plan.train_indices(f);
    EXPECT_EQ(test.size() + train.size(), ds.size());
    for (std::size_t i : test) EXPECT_TRUE(seen.insert(i).second);
    total += test.size();
  }
  EXPECT_EQ(total, ds.size());
}

TEST(MakeFolds, ImbalancedClassCountsDifferByAtMostOne) {
  const Dataset ds = labelled(37, 63);
  const FoldPlan plan = make_folds(ds, 10, 2);
  for (int c = 0; c < 2; ++c) {
    std::vector<int> per_fold(10, 0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.graphs[i].label == c) ++per_fold[static_cast<std::size_t>(plan.fold_of[i])];
    }
    const auto [lo, hi] = std::minmax_element(per_fold.begin(), per_fold.end());
    EXPECT_LE(*hi - *lo, 1) << "class " << c;
  }
}

TEST(MakeFolds, DeterministicUnderSeed) {
  const Dataset ds = labelled(30, 30);
  EXPECT_EQ(make_folds(ds, 10, 5).fold_of, make_folds(ds, 10, 5).fold_of);
  EXPECT_NE(make_folds(ds, 10, 5).fold_of, make_folds(ds, 10, 6).fold_of);
}

TEST(MakeFolds, ClassSmallerThanKIsContractError) {
  EXPECT_THROW(make_folds(labelled(9, 30), 10, 1), ContractError);
}

}  // namespace
}  // namespace dibod
