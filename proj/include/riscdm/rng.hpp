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

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace riscdm {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of the stream addressed by `path` under `master`. Streams are a pure
/// function of (master, path), so work split across threads in any order
/// draws the same numbers as a serial run.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path)
{
    std::uint64_t s = splitmix64(master);
    for (auto p : path)
        s = splitmix64(s ^ splitmix64(p + 0x632be59bd9b4e019ULL));
    return s;
}

inline Rng derive_stream(std::uint64_t master, std::initializer_list<std::uint64_t> path)
{
    return Rng(derive_seed(master, path));
}

// Stream labels, kept distinct so no two consumers share a sequence.
namespace stream {
inline constexpr std::uint64_t calibration = 1;
inline constexpr std::uint64_t dataset = 2;
inline constexpr std::uint64_t init = 3;
inline constexpr std::uint64_t epoch = 4;
inline constexpr std::uint64_t sweep = 5;
inline constexpr std::uint64_t inference = 6;
inline constexpr std::uint64_t validation = 7;
} // namespace stream

template <typename Derived>
void fill_standard_normal(Eigen::DenseBase<Derived> &out, Rng &rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index j = 0; j < out.cols(); ++j)
        for (Index i = 0; i < out.rows(); ++i)
            out(i, j) = normal(rng);
}

inline RealMatrix standard_normal(Index rows, Index cols, Rng &rng)
{
    RealMatrix out(rows, cols);
    fill_standard_normal(out, rng);
    return out;
}

/// i.i.d. CN(0,1) entries: real and imaginary parts each N(0, 1/2).
inline ComplexMatrix circular_normal(Index rows, Index cols, Rng &rng)
{
    std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
    ComplexMatrix out(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) {
            const double re = normal(rng);
            const double im = normal(rng);
            out(i, j) = Complex(re, im);
        }
    return out;
}

inline double uniform01(Rng &rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

} // namespace riscdm
