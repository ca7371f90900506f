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

#include "riscdm/checkpoint.hpp"

#include "riscdm/io.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>

namespace riscdm {

using nlohmann::json;

namespace {

json arch_json(const ArchitectureDescriptor &a)
{
    return json{{"kind", to_string(a.kind)},
                {"hidden_width", a.hidden_width},
                {"hidden_layers", a.hidden_layers},
                {"step_embedding_dim", a.step_embedding_dim},
                {"condition_embedding_dim", a.condition_embedding_dim},
                {"kernel_size", a.kernel_size},
                {"activation", a.activation}};
}

ArchitectureDescriptor arch_from_json(const json &j)
{
    ArchitectureDescriptor a;
    a.kind = architecture_from_string(j.at("kind").get<std::string>());
    a.hidden_width = j.at("hidden_width").get<Index>();
    a.hidden_layers = j.at("hidden_layers").get<Index>();
    a.step_embedding_dim = j.at("step_embedding_dim").get<Index>();
    a.condition_embedding_dim = j.at("condition_embedding_dim").get<Index>();
    a.kernel_size = j.at("kernel_size").get<Index>();
    a.activation = j.at("activation").get<std::string>();
    return a;
}

void write_tensors(std::ostream &out, const std::vector<RealMatrix> &ts)
{
    for (const auto &t : ts)
        io::write_f64(out, {t.data(), std::size_t(t.size())});
}

[[noreturn]] void corrupt(const std::string &what, const std::string &why)
{
    throw Error(ErrorCode::corrupt_checkpoint, "corrupt checkpoint " + what + ": " + why);
}

} // namespace

void save_checkpoint(const std::filesystem::path &path, const Checkpoint &ckpt)
{
    const auto &p = ckpt.params;
    require(p.n_antennas == ckpt.geometry.n_bs_antennas && p.m2_elements == ckpt.geometry.m2_elements,
            "checkpoint parameters do not match its geometry", ErrorCode::geometry_mismatch);
    json tensors = json::array();
    for (const auto &t : p.tensors)
        tensors.push_back({{"name", t.name}, {"rows", t.value.rows()}, {"cols", t.value.cols()}});
    const auto &g = ckpt.geometry;
    json h{{"version", checkpoint_version},
           {"architecture", arch_json(p.arch)},
           {"geometry", {{"n", g.n_bs_antennas}, {"m1", g.m1_elements}, {"m2", g.m2_elements}}},
           {"element_spacing", g.element_spacing},
           {"carrier_wavelength", g.carrier_wavelength},
           {"schedule", {{"t_max", ckpt.t_max}, {"beta_start", ckpt.beta_start}, {"beta_end", ckpt.beta_end}}},
           {"schedule_fingerprint", io::hex64(ckpt.schedule().fingerprint())},
           {"signal_power", ckpt.signal_power},
           {"epoch", ckpt.epoch},
           {"adam_step", ckpt.adam ? json(ckpt.adam->step) : json(nullptr)},
           {"tensors", tensors},
           {"training_config", ckpt.training_config.empty() ? json(nullptr)
                                                            : json::parse(ckpt.training_config)}};
    if (ckpt.adam)
        require(ckpt.adam->m.size() == p.tensors.size() && ckpt.adam->v.size() == p.tensors.size(),
                "checkpoint: optimizer state does not match the parameters");
    const std::string header = h.dump();
    io::atomic_write(path, [&](std::ostream &out) {
        out.write(checkpoint_magic, 8);
        io::write_block(out, header);
        for (const auto &t : p.tensors)
            io::write_f64(out, {t.value.data(), std::size_t(t.value.size())});
        if (ckpt.adam) {
            write_tensors(out, ckpt.adam->m);
            write_tensors(out, ckpt.adam->v);
        }
    });
}

Checkpoint load_checkpoint(const std::filesystem::path &path)
{
    const std::string what = "'" + path.string() + "'";
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::corrupt_checkpoint, "cannot open checkpoint " + what);
    char magic[8] = {};
    if (!in.read(magic, 8) || std::memcmp(magic, checkpoint_magic, 8) != 0)
        corrupt(what, "bad magic");
    Checkpoint c;
    std::vector<std::pair<Index, Index>> shapes;
    try {
        const json h = json::parse(io::read_block(in, what, 1 << 24));
        if (h.at("version").get<int>() != checkpoint_version)
            corrupt(what, "unsupported version " + h.at("version").dump());
        auto &g = c.geometry;
        g.n_bs_antennas = h.at("geometry").at("n").get<Index>();
        g.m1_elements = h.at("geometry").at("m1").get<Index>();
        g.m2_elements = h.at("geometry").at("m2").get<Index>();
        g.element_spacing = h.at("element_spacing").get<double>();
        g.carrier_wavelength = h.at("carrier_wavelength").get<double>();
        c.t_max = h.at("schedule").at("t_max").get<Index>();
        c.beta_start = h.at("schedule").at("beta_start").get<double>();
        c.beta_end = h.at("schedule").at("beta_end").get<double>();
        if (h.at("schedule_fingerprint").get<std::string>() != io::hex64(c.schedule().fingerprint()))
            corrupt(what, "schedule fingerprint mismatch");
        c.signal_power = h.at("signal_power").get<double>();
        c.epoch = h.at("epoch").get<Index>();
        c.params = zero_params(arch_from_json(h.at("architecture")), g.n_bs_antennas, g.m2_elements);
        const json &ts = h.at("tensors");
        if (ts.size() != c.params.tensors.size())
            corrupt(what, "tensor count disagrees with the architecture");
        for (std::size_t i = 0; i < ts.size(); ++i) {
            const auto &t = c.params.tensors[i];
            if (ts[i].at("name").get<std::string>() != t.name ||
                ts[i].at("rows").get<Index>() != t.value.rows() ||
                ts[i].at("cols").get<Index>() != t.value.cols())
                corrupt(what, "tensor '" + ts[i].at("name").get<std::string>() +
                                  "' disagrees with the architecture");
        }
        if (!h.at("adam_step").is_null()) {
            c.adam = AdamState::zeros_like(c.params);
            c.adam->step = h.at("adam_step").get<std::int64_t>();
        }
        if (!h.at("training_config").is_null())
            c.training_config = h.at("training_config").dump();
    } catch (const json::exception &e) {
        corrupt(what, std::string("bad header: ") + e.what());
    } catch (const Error &e) {
        if (e.code() == ErrorCode::corrupt_checkpoint)
            throw;
        corrupt(what, e.what());
    }
    try {
        auto read_all = [&](auto &&tensor_at, std::size_t n) {
            for (std::size_t i = 0; i < n; ++i) {
                RealMatrix &t = tensor_at(i);
                io::read_f64(in, {t.data(), std::size_t(t.size())}, what);
            }
        };
        const std::size_t n = c.params.tensors.size();
        read_all([&](std::size_t i) -> RealMatrix & { return c.params.tensors[i].value; }, n);
        if (c.adam) {
            read_all([&](std::size_t i) -> RealMatrix & { return c.adam->m[i]; }, n);
            read_all([&](std::size_t i) -> RealMatrix & { return c.adam->v[i]; }, n);
        }
    } catch (const Error &e) {
        corrupt(what, e.what());
    }
    if (in.peek() != std::char_traits<char>::eof())
        corrupt(what, "trailing bytes");
    if (!c.params.all_finite())
        corrupt(what, "non-finite parameter values");
    return c;
}

void require_geometry(const Checkpoint &ckpt, const SystemGeometry &geom)
{
    const auto &g = ckpt.geometry;
    if (!g.same_array_shape(geom))
        throw Error(ErrorCode::geometry_mismatch,
                    "checkpoint trained for geometry (" + std::to_string(g.n_bs_antennas) + "," +
                        std::to_string(g.m1_elements) + "," + std::to_string(g.m2_elements) +
                        ") cannot serve (" + std::to_string(geom.n_bs_antennas) + "," +
                        std::to_string(geom.m1_elements) + "," + std::to_string(geom.m2_elements) + ")");
}

void save_params(const DenoiserParams &params, const SystemGeometry &geom, const Schedule &schedule,
                 const std::filesystem::path &path)
{
    Checkpoint c;
    c.params = params;
    c.geometry = geom;
    c.t_max = schedule.steps();
    c.beta_start = schedule.beta_start();
    c.beta_end = schedule.beta_end();
    save_checkpoint(path, c);
}

DenoiserParams load_params(const std::filesystem::path &path) { return load_checkpoint(path).params; }

} // namespace riscdm
