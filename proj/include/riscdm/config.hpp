// SPDX-License-Identifier: Apache-2.0
//
// riscdm: conditional diffusion channel generation for double-RIS links
// Copyright (C) 2026 The riscdm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include "riscdm/evaluation.hpp"
#include "riscdm/training.hpp"

#include <filesystem>
#include <string>

// JSON configuration documents. Unknown keys are rejected, absent keys take
// their defaults, and serialization writes every field so a saved config
// fully describes its run.
namespace riscdm {

TrainConfig parse_train_config(const std::string &text);
SweepConfig parse_sweep_config(const std::string &text);
TrainConfig load_train_config(const std::filesystem::path &path);
SweepConfig load_sweep_config(const std::filesystem::path &path);

/// Canonical pretty-printed JSON with all defaults materialized.
std::string to_json_text(const TrainConfig &cfg);
std::string to_json_text(const SweepConfig &cfg);

/// JSON line for the training log: {"epoch", "mean_loss", "wall_ms"}.
std::string epoch_log_line(const EpochReport &report);

} // namespace riscdm
