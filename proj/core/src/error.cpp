// SPDX-FileCopyrightText: Copyright (c) 2026 The dibod Authors
// SPDX-License-Identifier: Apache-2.0

#include "dibod/error.hpp"

#include <utility>

namespace dibod {

ConfigError::ConfigError(std::string field, const std::string& what)
    : Error("config field '" + field + "': " + what), field_(std::move(field)) {}

}  // namespace dibod
