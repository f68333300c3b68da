// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#include "dibod/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "dibod/error.hpp"

namespace dibod {
namespace {

constexpr const char* kMagic = "dibod-checkpoint 1";

struct Parsed {
  CheckpointHeader header;
  std::unordered_map<std::string, Tensor> tensors;
};

Parsed parse(const std::filesystem::path& path, bool header_only) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw FormatError(path.string() + ": not a dibod checkpoint");
  Parsed out;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "fingerprint") {
      std::getline(ls >> std::ws, out.header.fingerprint);
    } else if (key == "meta") {
      std::string k, v;
      ls >> k;
      std::getline(ls >> std::ws, v);
      out.header.meta[k] = v;
    } else if (key == "param") {
      if (header_only) break;
      std::string name;
      std::size_t rows = 0, cols = 0;
      if (!(ls >> name >> rows >> cols) || rows == 0 || cols == 0) throw FormatError(path.string() + ": bad param line '" + line + "'");
      std::string values;
      if (!std::getline(in, values)) throw FormatError(path.string() + ": truncated values for " + name);
      std::vector<double> data;
      data.reserve(rows * cols);
      const char* p = values.data();
      const char* end = values.data() + values.size();
      while (p < end) {
        while (p < end && *p == ' ') ++p;
        if (p == end) break;
        double v = 0.0;
        auto [next, ec] = std::from_chars(p, end, v);
        if (ec != std::errc()) throw FormatError(path.string() + ": bad number in " + name);
        data.push_back(v);
        p = next;
      }
      if (data.size() != rows * cols) throw FormatError(path.string() + ": wrong value count for " + name);
      out.tensors.emplace(name, Tensor({rows, cols}, std::move(data)));
    } else if (!key.empty()) {
      throw FormatError(path.string() + ": unknown record '" + key + "'");
    }
  }
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const CheckpointHeader& header, std::span<Parameter* const> params) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << kMagic << '\n' << "fingerprint " << header.fingerprint << '\n';
  for (const auto& [k, v] : header.meta) out << "meta " << k << ' ' << v << '\n';
  char buf[64];
  for (const Parameter* p : params) {
    out << "param " << p->name << ' ' << p->value.rows() << ' ' << p->value.cols() << '\n';
    bool first = true;
    for (double v : p->value.values()) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      if (!first) out << ' ';
      out.write(buf, end - buf);
      first = false;
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path) { return parse(path, true).header; }

CheckpointHeader load_checkpoint(const std::filesystem::path& path, const std::string& expected_fingerprint,
                                 std::span<Parameter* const> params) {
  Parsed parsed = parse(path, false);
  if (parsed.header.fingerprint != expected_fingerprint) {
    throw ContractError("checkpoint fingerprint mismatch: file has '" + parsed.header.fingerprint + "', config expects '" +
                        expected_fingerprint + "'");
  }
  for (Parameter* p : params) {
    auto it = parsed.tensors.find(p->name);
    if (it == parsed.tensors.end()) throw FormatError(path.string() + ": missing parameter " + p->name);
    if (!it->second.same_shape(p->value)) throw FormatError(path.string() + ": shape mismatch for " + p->name);
    p->value = it->second;
  }
  return parsed.header;
}

}  // namespace dibod
