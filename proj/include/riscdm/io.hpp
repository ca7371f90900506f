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

#include "riscdm/common.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>

// Little-endian binary helpers shared by the dataset and checkpoint formats.
namespace riscdm::io {

void write_u64(std::ostream &out, std::uint64_t v);
void write_f64(std::ostream &out, std::span<const double> values);
std::uint64_t read_u64(std::istream &in, const std::string &what);
void read_f64(std::istream &in, std::span<double> values, const std::string &what);

/// Length-prefixed UTF-8 block (u64 byte count, then the bytes).
void write_block(std::ostream &out, const std::string &bytes);
std::string read_block(std::istream &in, const std::string &what, std::uint64_t max_bytes);

/// Writes through a sibling temporary file and renames it into place, so a
/// reader never observes a half-written file.
void atomic_write(const std::filesystem::path &path, const std::function<void(std::ostream &)> &fill);

std::string read_file(const std::filesystem::path &path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

} // namespace riscdm::io
