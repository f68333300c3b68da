// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

// Structured-text checkpoints:
//
//   dibod-checkpoint 1
//   fingerprint <text>
//   meta <key> <value>            (zero or more)
//   param <name> <rows> <cols>
//   <rows * cols shortest round-trip doubles, space separated>
//   ...

#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>

#include "dibod/autodiff.hpp"

namespace dibod {

struct CheckpointHeader {
  std::string fingerprint;
  std::map<std::string, std::string> meta;
};

void save_checkpoint(const std::filesystem::path& path, const CheckpointHeader& header, std::span<Parameter* const> params);

/// Reads only the header lines.
CheckpointHeader read_checkpoint_header(const std::filesystem::path& path);

/// Restores every parameter in `params` by name. Throws ContractError naming
/// both fingerprints when they differ, FormatError when a parameter is missing
/// or has the wrong shape, and IoError when the file cannot be read.
CheckpointHeader load_checkpoint(const std::filesystem::path& path, const std::string& expected_fingerprint,
                                 std::span<Parameter* const> params);

}  // namespace dibod
