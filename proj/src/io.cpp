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

#include "riscdm/io.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace riscdm::io {

namespace {

template <typename T>
T to_little(T v)
{
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        std::reverse(b, b + sizeof(T));
        std::memcpy(&v, b, sizeof(T));
    }
    return v;
}

} // namespace

void write_u64(std::ostream &out, std::uint64_t v)
{
    v = to_little(v);
    out.write(reinterpret_cast<const char *>(&v), sizeof v);
}

void write_f64(std::ostream &out, std::span<const double> values)
{
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char *>(values.data()), std::streamsize(values.size_bytes()));
    } else {
        for (double v : values) {
            v = to_little(v);
            out.write(reinterpret_cast<const char *>(&v), sizeof v);
        }
    }
}

std::uint64_t read_u64(std::istream &in, const std::string &what)
{
    std::uint64_t v = 0;
    if (!in.read(reinterpret_cast<char *>(&v), sizeof v))
        throw Error(ErrorCode::io, what + ": unexpected end of file");
    return to_little(v);
}

void read_f64(std::istream &in, std::span<double> values, const std::string &what)
{
    if (!in.read(reinterpret_cast<char *>(values.data()), std::streamsize(values.size_bytes())))
        throw Error(ErrorCode::io, what + ": unexpected end of file");
    if constexpr (std::endian::native == std::endian::big)
        for (double &v : values)
            v = to_little(v);
}

void write_block(std::ostream &out, const std::string &bytes)
{
    write_u64(out, bytes.size());
    out.write(bytes.data(), std::streamsize(bytes.size()));
}

std::string read_block(std::istream &in, const std::string &what, std::uint64_t max_bytes)
{
    const std::uint64_t n = read_u64(in, what);
    if (n > max_bytes)
        throw Error(ErrorCode::io, what + ": block length " + std::to_string(n) + " is implausible");
    std::string s(n, '\0');
    if (!in.read(s.data(), std::streamsize(n)))
        throw Error(ErrorCode::io, what + ": unexpected end of file");
    return s;
}

void atomic_write(const std::filesystem::path &path, const std::function<void(std::ostream &)> &fill)
{
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error(ErrorCode::io, "cannot open '" + tmp.string() + "' for writing");
        fill(out);
        out.flush();
        if (!out)
            throw Error(ErrorCode::io, "write to '" + tmp.string() + "' failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error(ErrorCode::io, "cannot move '" + tmp.string() + "' to '" + path.string() + "'");
    }
}

std::string read_file(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::io, "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed)
{
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace riscdm::io
