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

#include "riscdm/channel.hpp"
#include "riscdm/diffusion.hpp"
#include "riscdm/network.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace riscdm {

inline constexpr const char checkpoint_magic[9] = "CDMCKPT1";
inline constexpr int checkpoint_version = 1;

/// A trained denoiser plus everything needed to sample from it or resume
/// training. Loading always validates tensor shapes against the descriptor.
struct Checkpoint {
    DenoiserParams params;
    SystemGeometry geometry;
    Index t_max = 500;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    double signal_power = 1.0;
    Index epoch = 0;  // completed epochs
    std::optional<AdamState> adam;
    std::string training_config;  // JSON text, informational

    Schedule schedule() const { return build_linear_schedule(t_max, beta_start, beta_end); }
};

/// Layout: magic, u64 header length, JSON header, every tensor as
/// little-endian float64 in column-major order, then Adam first and second
/// moments in the same order when present. The write is atomic.
void save_checkpoint(const std::filesystem::path &path, const Checkpoint &ckpt);
/// Throws ErrorCode::corrupt_checkpoint on a missing, truncated or malformed file.
Checkpoint load_checkpoint(const std::filesystem::path &path);

/// Throws ErrorCode::geometry_mismatch unless the checkpoint was trained for `geom`.
void require_geometry(const Checkpoint &ckpt, const SystemGeometry &geom);

/// Parameters-only convenience wrappers.
void save_params(const DenoiserParams &params, const SystemGeometry &geom, const Schedule &schedule,
                 const std::filesystem::path &path);
DenoiserParams load_params(const std::filesystem::path &path);

} // namespace riscdm
