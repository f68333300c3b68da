// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#include "dibod/graph_data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string_view>

#include "dibod/error.hpp"
#include "dibod/rng.hpp"

namespace dibod {
namespace fs = std::filesystem;

namespace {

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  while (!lines.empty() && lines.back().find_first_not_of(" \t") == std::string::npos) lines.pop_back();
  return lines;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_commas(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(',', start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

long long parse_int(std::string_view tok, const fs::path& file, std::size_t line) {
  long long v = 0;
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end || tok.empty()) {
    throw FormatError(file.filename().string() + ":" + std::to_string(line + 1) + ": expected an integer, got '" +
                      std::string(tok) + "'");
  }
  return v;
}

double parse_real(std::string_view tok, const fs::path& file, std::size_t line) {
  double v = 0.0;
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end || tok.empty()) {
    throw FormatError(file.filename().string() + ":" + std::to_string(line + 1) + ": expected a real, got '" +
                      std::string(tok) + "'");
  }
  return v;
}

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void normalize_edges(std::vector<Edge>& edges) {
  for (Edge& e : edges) {
    if (e.first > e.second) std::swap(e.first, e.second);
  }
  std::erase_if(edges, [](const Edge& e) { return e.first == e.second; });
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

}  // namespace

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(graphs.size());
  for (const Graph& g : graphs) out.push_back(g.label);
  return out;
}

void Dataset::validate() const {
  if (graphs.empty()) throw ContractError("dataset '" + name + "' has no graphs");
  std::vector<int> per_class(static_cast<std::size_t>(std::max(num_classes, 0)), 0);
  for (const Graph& g : graphs) {
    if (g.num_nodes == 0) throw ContractError("graph with no nodes");
    if (g.node_features.rows() != g.num_nodes || g.node_features.cols() != feature_dim) {
      throw ContractError("node feature matrix does not match num_nodes x feature_dim");
    }
    if (g.label < 0 || g.label >= num_classes) throw ContractError("graph label outside [0, num_classes)");
    ++per_class[static_cast<std::size_t>(g.label)];
    for (const Edge& e : g.edges) {
      if (e.first >= g.num_nodes || e.second >= g.num_nodes) throw ContractError("edge endpoint out of range");
      if (e.first == e.second) throw ContractError("self-loop stored in graph");
    }
  }
  for (int c : per_class) {
    if (c == 0) throw ContractError("dataset '" + name + "' has a class with no graphs");
  }
}

Dataset parse_tudataset(const fs::path& root, const std::string& name) {
  const fs::path a_path = root / (name + "_A.txt");
  const fs::path ind_path = root / (name + "_graph_indicator.txt");
  const fs::path gl_path = root / (name + "_graph_labels.txt");
  const fs::path nl_path = root / (name + "_node_labels.txt");
  const fs::path na_path = root / (name + "_node_attributes.txt");

  const auto ind_lines = read_lines(ind_path);
  const auto gl_lines = read_lines(gl_path);
  const auto a_lines = read_lines(a_path);

  Dataset ds;
  ds.name = name;
  const std::size_t n_graphs = gl_lines.size();
  if (n_graphs == 0) throw FormatError(gl_path.filename().string() + ": no graph labels");

  std::map<long long, int> label_index;
  std::vector<int> graph_label(n_graphs);
  for (std::size_t i = 0; i < n_graphs; ++i) {
    const long long v = parse_int(trim(gl_lines[i]), gl_path, i);
    auto [it, inserted] = label_index.emplace(v, static_cast<int>(ds.graph_label_values.size()));
    if (inserted) ds.graph_label_values.push_back(v);
    graph_label[i] = it->second;
  }
  ds.num_classes = static_cast<int>(ds.graph_label_values.size());

  const std::size_t n_nodes = ind_lines.size();
  std::vector<std::size_t> graph_of(n_nodes);
  std::vector<std::size_t> counts(n_graphs, 0);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    const long long g = parse_int(trim(ind_lines[i]), ind_path, i);
    if (g < 1 || static_cast<std::size_t>(g) > n_graphs) {
      throw FormatError(ind_path.filename().string() + ":" + std::to_string(i + 1) + ": node " +
                        std::to_string(i + 1) + " assigned to no graph (id " + std::to_string(g) + ")");
    }
    graph_of[i] = static_cast<std::size_t>(g - 1);
    if (i > 0 && graph_of[i] < graph_of[i - 1]) {
      throw FormatError(ind_path.filename().string() + ":" + std::to_string(i + 1) + ": graph ids must be non-decreasing");
    }
    ++counts[graph_of[i]];
  }
  std::vector<std::size_t> first_node(n_graphs, 0);
  for (std::size_t g = 0; g < n_graphs; ++g) {
    if (counts[g] == 0) throw FormatError("graph " + std::to_string(g + 1) + " has no nodes");
    first_node[g] = g == 0 ? 0 : first_node[g - 1] + counts[g - 1];
  }

  std::vector<std::vector<Edge>> edges(n_graphs);
  for (std::size_t i = 0; i < a_lines.size(); ++i) {
    const auto line = trim(a_lines[i]);
    if (line.empty()) continue;
    const auto toks = split_commas(line);
    if (toks.size() != 2) {
      throw FormatError(a_path.filename().string() + ":" + std::to_string(i + 1) + ": expected 'u, v'");
    }
    const long long u = parse_int(toks[0], a_path, i);
    const long long v = parse_int(toks[1], a_path, i);
    for (long long x : {u, v}) {
      if (x < 1 || static_cast<std::size_t>(x) > n_nodes) {
        throw FormatError(a_path.filename().string() + ":" + std::to_string(i + 1) + ": dangling node index " +
                          std::to_string(x));
      }
    }
    const std::size_t gu = graph_of[static_cast<std::size_t>(u - 1)];
    const std::size_t gv = graph_of[static_cast<std::size_t>(v - 1)];
    if (gu != gv) {
      throw FormatError(a_path.filename().string() + ":" + std::to_string(i + 1) + ": edge crosses graphs");
    }
    edges[gu].emplace_back(static_cast<std::uint32_t>(static_cast<std::size_t>(u - 1) - first_node[gu]),
                           static_cast<std::uint32_t>(static_cast<std::size_t>(v - 1) - first_node[gu]));
  }

  std::vector<long long> node_label;
  if (fs::exists(nl_path)) {
    const auto lines = read_lines(nl_path);
    if (lines.size() != n_nodes) throw FormatError(nl_path.filename().string() + ": expected one label per node");
    std::set<long long> distinct;
    node_label.resize(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) {
      node_label[i] = parse_int(trim(lines[i]), nl_path, i);
      distinct.insert(node_label[i]);
    }
    ds.node_label_values.assign(distinct.begin(), distinct.end());
  }

  std::vector<std::vector<double>> attributes;
  if (fs::exists(na_path)) {
    const auto lines = read_lines(na_path);
    if (lines.size() != n_nodes) throw FormatError(na_path.filename().string() + ": expected one row per node");
    attributes.resize(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) {
      for (auto tok : split_commas(trim(lines[i]))) attributes[i].push_back(parse_real(tok, na_path, i));
      if (attributes[i].size() != attributes[0].size()) {
        throw FormatError(na_path.filename().string() + ":" + std::to_string(i + 1) + ": ragged attribute row");
      }
    }
    ds.node_attribute_dim = attributes[0].size();
  }

  const std::size_t label_dim = ds.node_label_values.size();
  const bool constant_feature = label_dim == 0 && ds.node_attribute_dim == 0;
  ds.feature_dim = constant_feature ? 1 : label_dim + ds.node_attribute_dim;

  ds.graphs.resize(n_graphs);
  for (std::size_t g = 0; g < n_graphs; ++g) {
    Graph& graph = ds.graphs[g];
    graph.num_nodes = counts[g];
    graph.label = graph_label[g];
    graph.edges = std::move(edges[g]);
    normalize_edges(graph.edges);
    graph.node_features = Tensor({graph.num_nodes, ds.feature_dim});
    for (std::size_t local = 0; local < graph.num_nodes; ++local) {
      const std::size_t node = first_node[g] + local;
      if (constant_feature) {
        graph.node_features(local, 0) = 1.0;
        continue;
      }
      if (label_dim) {
        const auto it = std::lower_bound(ds.node_label_values.begin(), ds.node_label_values.end(), node_label[node]);
        graph.node_features(local, static_cast<std::size_t>(it - ds.node_label_values.begin())) = 1.0;
      }
      for (std::size_t a = 0; a < ds.node_attribute_dim; ++a) {
        graph.node_features(local, label_dim + a) = attributes[node][a];
      }
    }
  }
  return ds;
}

void write_tudataset(const Dataset& ds, const fs::path& root, const std::string& name) {
  fs::create_directories(root);
  auto open = [&](const std::string& suffix) {
    std::ofstream out(root / (name + suffix));
    if (!out) throw IoError("cannot write " + (root / (name + suffix)).string());
    return out;
  };
  std::ofstream a = open("_A.txt");
  std::ofstream ind = open("_graph_indicator.txt");
  std::ofstream gl = open("_graph_labels.txt");
  const std::size_t label_dim = ds.node_label_values.size();
  std::ofstream nl;
  std::ofstream na;
  if (label_dim) nl = open("_node_labels.txt");
  if (ds.node_attribute_dim) na = open("_node_attributes.txt");

  std::size_t offset = 0;
  for (std::size_t g = 0; g < ds.graphs.size(); ++g) {
    const Graph& graph = ds.graphs[g];
    std::vector<std::vector<std::uint32_t>> adj(graph.num_nodes);
    for (const Edge& e : graph.edges) {
      adj[e.first].push_back(e.second);
      adj[e.second].push_back(e.first);
    }
    for (std::size_t u = 0; u < graph.num_nodes; ++u) {
      std::sort(adj[u].begin(), adj[u].end());
      for (std::uint32_t v : adj[u]) a << (offset + u + 1) << ", " << (offset + v + 1) << '\n';
      ind << (g + 1) << '\n';
      if (label_dim) {
        std::size_t col = 0;
        for (std::size_t c = 0; c < label_dim; ++c) {
          if (graph.node_features(u, c) > graph.node_features(u, col)) col = c;
        }
        nl << ds.node_label_values[col] << '\n';
      }
      if (ds.node_attribute_dim) {
        for (std::size_t k = 0; k < ds.node_attribute_dim; ++k) {
          if (k) na << ", ";
          na << format_real(graph.node_features(u, label_dim + k));
        }
        na << '\n';
      }
    }
    gl << ds.graph_label_values.at(static_cast<std::size_t>(graph.label)) << '\n';
    offset += graph.num_nodes;
  }
}

Dataset head(const Dataset& ds, std::size_t count) {
  Dataset out = ds;
  out.graphs.resize(std::min(count, ds.graphs.size()));
  std::map<int, int> remap;
  std::vector<long long> values;
  for (Graph& g : out.graphs) {
    auto [it, inserted] = remap.emplace(g.label, static_cast<int>(values.size()));
    if (inserted) values.push_back(ds.graph_label_values.at(static_cast<std::size_t>(g.label)));
    g.label = it->second;
  }
  out.graph_label_values = std::move(values);
  out.num_classes = static_cast<int>(out.graph_label_values.size());
  return out;
}

MotifSpec MotifSpec::clean() { return MotifSpec{}; }

MotifSpec MotifSpec::shifted() {
  MotifSpec s;
  s.name = "motif-shifted";
  s.min_nodes = 14;
  s.max_nodes = 26;
  s.chord_fraction = 0.15;
  s.edge_noise = 0.1;
  return s;
}

Tensor degree_features(std::size_t num_nodes, std::span<const Edge> edges) {
  std::vector<std::size_t> degree(num_nodes, 0);
  for (const Edge& e : edges) {
    ++degree[e.first];
    ++degree[e.second];
  }
  Tensor x({num_nodes, 8});
  for (std::size_t i = 0; i < num_nodes; ++i) x(i, std::min<std::size_t>(degree[i], 7)) = 1.0;
  return x;
}

Dataset synth_motif_corpus(std::size_t n_graphs, std::uint64_t seed, const MotifSpec& spec) {
  if (n_graphs < 20 || n_graphs % 2 != 0) throw ContractError("synth_motif_corpus: n_graphs must be even and >= 20");
  if (spec.min_nodes < 4 || spec.max_nodes < spec.min_nodes) throw ContractError("synth_motif_corpus: bad node range");
  if (spec.edge_noise < 0.0 || spec.edge_noise > 1.0 || spec.chord_fraction < 0.0) {
    throw ContractError("synth_motif_corpus: noise and chord fraction must be non-negative probabilities");
  }

  Dataset ds;
  ds.name = spec.name;
  ds.num_classes = 2;
  ds.feature_dim = 8;
  ds.graph_label_values = {0, 1};
  ds.node_attribute_dim = 8;
  ds.graphs.reserve(n_graphs);

  for (std::size_t i = 0; i < n_graphs; ++i) {
    Rng rng = make_rng(seed, {i, spec.min_nodes, spec.max_nodes});
    const int label = static_cast<int>(i % 2);
    const std::size_t n = spec.min_nodes + uniform_index(rng, spec.max_nodes - spec.min_nodes + 1);
    std::set<Edge> edges;
    auto connect = [&](std::size_t u, std::size_t v) {
      if (u == v) return false;
      return edges.emplace(static_cast<std::uint32_t>(std::min(u, v)), static_cast<std::uint32_t>(std::max(u, v))).second;
    };
    if (label == 0) {
      for (std::size_t u = 0; u < n; ++u) connect(u, (u + 1) % n);
      const auto chords = static_cast<std::size_t>(spec.chord_fraction * static_cast<double>(n));
      for (std::size_t added = 0, tries = 0; added < chords && tries < 100 * n; ++tries) {
        if (connect(uniform_index(rng, n), uniform_index(rng, n))) ++added;
      }
    } else {
      for (std::size_t u = 1; u < n; ++u) connect(0, u);
    }
    std::vector<Edge> kept;
    for (const Edge& e : edges) {
      if (uniform01(rng) >= spec.edge_noise) kept.push_back(e);
    }
    edges = std::set<Edge>(kept.begin(), kept.end());
    for (std::size_t u = 0; u < n; ++u) {
      if (uniform01(rng) < spec.edge_noise) {
        for (int tries = 0; tries < 20 && !connect(u, uniform_index(rng, n)); ++tries) {
        }
      }
    }

    std::vector<std::uint32_t> perm(n);
    for (std::size_t u = 0; u < n; ++u) perm[u] = static_cast<std::uint32_t>(u);
    shuffle(perm, rng);
    Graph g;
    g.num_nodes = n;
    g.label = label;
    for (const Edge& e : edges) g.edges.emplace_back(perm[e.first], perm[e.second]);
    normalize_edges(g.edges);
    g.node_features = degree_features(n, g.edges);
    ds.graphs.push_back(std::move(g));
  }
  return ds;
}

std::vector<std::size_t> FoldPlan::train_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] != fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::test_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) out.push_back(i);
  }
  return out;
}

FoldPlan make_folds(const Dataset& ds, int k, std::uint64_t seed) {
  if (k < 2) throw ContractError("make_folds: k must be at least 2");
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.fold_of.assign(ds.graphs.size(), -1);
  std::size_t dealt = 0;
  for (int c = 0; c < ds.num_classes; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
      if (ds.graphs[i].label == c) members.push_back(i);
    }
    if (members.size() < static_cast<std::size_t>(k)) {
      throw ContractError("make_folds: class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                          " members, fewer than k = " + std::to_string(k));
    }
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(c)});
    shuffle(members, rng);
    for (std::size_t idx : members) plan.fold_of[idx] = static_cast<int>(dealt++ % static_cast<std::size_t>(k));
  }
  return plan;
}

}  // namespace dibod
