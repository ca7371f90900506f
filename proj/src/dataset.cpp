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

#include "riscdm/dataset.hpp"

#include "riscdm/io.hpp"

#include <json.hpp>

#include <fstream>

namespace riscdm {

using nlohmann::json;

MaskedChannel DatasetRecord::masked() const
{
    return apply_mask(channel, MaskSpec::from_indicator(indicator));
}

Index record_length(Index n, Index m2) { return 2 * n * m2 + m2 + 2 * n + 1; }

namespace {

json header_json(const Dataset &data)
{
    const auto &g = data.header.geometry;
    return json{{"version", dataset_format_version},
                {"geometry",
                 {{"n", g.n_bs_antennas}, {"m1", g.m1_elements}, {"m2", g.m2_elements}}},
                {"element_spacing", g.element_spacing},
                {"carrier_wavelength", g.carrier_wavelength},
                {"seed", data.header.seed},
                {"signal_power", data.header.signal_power},
                {"count", data.records.size()},
                {"record_length", record_length(g.n_bs_antennas, g.m2_elements)}};
}

} // namespace

void write_dataset(const std::filesystem::path &path, const Dataset &data)
{
    const auto &g = data.header.geometry;
    g.validate();
    const Index n = g.n_bs_antennas, m2 = g.m2_elements;
    for (const auto &r : data.records)
        require(r.channel.rows() == n && r.channel.cols() == m2 && r.indicator.size() == m2 &&
                    r.pilot.size() == n,
                "dataset record does not match the header geometry", ErrorCode::geometry_mismatch);
    const std::string header = header_json(data).dump();
    io::atomic_write(path, [&](std::ostream &out) {
        io::write_block(out, header);
        RealVector rec(record_length(n, m2));
        for (const auto &r : data.records) {
            rec << vectorize(r.channel), r.indicator, vectorize(r.pilot), r.snr_db;
            io::write_f64(out, {rec.data(), std::size_t(rec.size())});
        }
    });
}

Dataset read_dataset(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::io, "cannot open dataset '" + path.string() + "'");
    const std::string what = "dataset '" + path.string() + "'";
    json h;
    try {
        h = json::parse(io::read_block(in, what, 1 << 20));
    } catch (const json::exception &e) {
        throw Error(ErrorCode::io, what + ": bad header: " + e.what());
    }
    Dataset data;
    try {
        if (h.at("version").get<std::string>() != dataset_format_version)
            throw Error(ErrorCode::io, what + ": unsupported version '" +
                                           h.at("version").get<std::string>() + "'");
        auto &g = data.header.geometry;
        g.n_bs_antennas = h.at("geometry").at("n").get<Index>();
        g.m1_elements = h.at("geometry").at("m1").get<Index>();
        g.m2_elements = h.at("geometry").at("m2").get<Index>();
        g.element_spacing = h.at("element_spacing").get<double>();
        g.carrier_wavelength = h.at("carrier_wavelength").get<double>();
        data.header.seed = h.at("seed").get<std::uint64_t>();
        data.header.signal_power = h.at("signal_power").get<double>();
        data.header.count = h.at("count").get<Index>();
        g.validate();
        if (h.at("record_length").get<Index>() != record_length(g.n_bs_antennas, g.m2_elements))
            throw Error(ErrorCode::io, what + ": record length disagrees with geometry");
    } catch (const json::exception &e) {
        throw Error(ErrorCode::io, what + ": bad header: " + e.what());
    }
    const Index n = data.header.geometry.n_bs_antennas, m2 = data.header.geometry.m2_elements;
    const Index len = 2 * n * m2;
    RealVector rec(record_length(n, m2));
    data.records.reserve(std::size_t(data.header.count));
    for (Index i = 0; i < data.header.count; ++i) {
        io::read_f64(in, {rec.data(), std::size_t(rec.size())}, what);
        DatasetRecord r;
        r.channel = devectorize(rec.head(len), n, m2);
        r.indicator = rec.segment(len, m2);
        r.pilot = devectorize(rec.segment(len + m2, 2 * n), n, 1).col(0);
        r.snr_db = rec(rec.size() - 1);
        data.records.push_back(std::move(r));
    }
    if (in.peek() != std::char_traits<char>::eof())
        throw Error(ErrorCode::io, what + ": trailing bytes after the last record");
    data.header.count = Index(data.records.size());
    return data;
}

} // namespace riscdm
