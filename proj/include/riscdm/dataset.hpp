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
#include "riscdm/common.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace riscdm {

inline constexpr const char *dataset_format_version = "cdmds-1";

struct DatasetHeader {
    SystemGeometry geometry;
    std::uint64_t seed = 0;
    double signal_power = 1.0;  // calibrated E|h_i|^2 used for the pilots
    Index count = 0;            // filled in by write_dataset
};

/// One (B_m, indicator, y, snr_db) tuple. `channel` is the full cascaded
/// channel for generated data and the estimate for inference output.
struct DatasetRecord {
    ComplexMatrix channel;  // N x M2
    RealVector indicator;   // M2, 1 = observed
    ComplexVector pilot;    // N
    double snr_db = 0.0;

    MaskedChannel masked() const;
};

struct Dataset {
    DatasetHeader header;
    std::vector<DatasetRecord> records;
};

/// Doubles per binary record: 2 N M2 + M2 + 2 N + 1.
Index record_length(Index n, Index m2);

/// File layout: u64 header length, JSON header, then `count` records of
/// little-endian float64 in the order vectorize(B), indicator, vectorize(y), snr_db.
void write_dataset(const std::filesystem::path &path, const Dataset &data);
Dataset read_dataset(const std::filesystem::path &path);

} // namespace riscdm
