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

#include "riscdm/config.hpp"

#include "riscdm/io.hpp"

#include <json.hpp>

#include <set>

namespace riscdm {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string &msg) { throw Error(ErrorCode::invalid_config, msg); }

json parse_document(const std::string &text)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error &e) {
        // Byte offset to line/column for humans.
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        bad("malformed JSON at line " + std::to_string(line) + ", column " + std::to_string(col) +
            ": " + e.what());
    }
}

// Reads fields of one JSON object and remembers which keys were consumed.
class Fields {
public:
    Fields(const json &j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object())
            bad("'" + where() + "' must be a JSON object");
    }

    template <typename T>
    void get(const std::string &key, T &out)
    {
        seen_.insert(key);
        if (!j_.contains(key))
            return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception &) {
            bad("'" + path_ + key + "' has the wrong type: " + j_.at(key).dump());
        }
    }

    const json *child(const std::string &key)
    {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    std::string sub(const std::string &key) const { return path_ + key + "."; }

    void finish() const
    {
        for (const auto &[k, v] : j_.items())
            if (!seen_.count(k))
                bad("unknown key '" + path_ + k + "'");
    }

private:
    std::string where() const { return path_.empty() ? "<root>" : path_.substr(0, path_.size() - 1); }

    const json &j_;
    std::string path_;
    std::set<std::string> seen_;
};

void read_shape(const json &j, const std::string &path, SystemGeometry &g)
{
    Fields f(j, path);
    f.get("n", g.n_bs_antennas);
    f.get("m1", g.m1_elements);
    f.get("m2", g.m2_elements);
    f.get("wavelength", g.carrier_wavelength);
    f.finish();
}

json shape_json(const SystemGeometry &g)
{
    return {{"n", g.n_bs_antennas}, {"m1", g.m1_elements}, {"m2", g.m2_elements},
            {"wavelength", g.carrier_wavelength}};
}

void read_network(const json &j, ArchitectureDescriptor &a)
{
    Fields f(j, "network.");
    std::string kind = to_string(a.kind);
    f.get("kind", kind);
    try {
        a.kind = architecture_from_string(kind);
    } catch (const Error &) {
        bad("'network.kind' must be \"mlp\" or \"conv1d\"");
    }
    f.get("hidden_width", a.hidden_width);
    f.get("hidden_layers", a.hidden_layers);
    f.get("step_embedding_dim", a.step_embedding_dim);
    f.get("condition_embedding_dim", a.condition_embedding_dim);
    f.get("kernel_size", a.kernel_size);
    f.get("activation", a.activation);
    f.finish();
}

json network_json(const ArchitectureDescriptor &a)
{
    return {{"kind", to_string(a.kind)},
            {"hidden_width", a.hidden_width},
            {"hidden_layers", a.hidden_layers},
            {"step_embedding_dim", a.step_embedding_dim},
            {"condition_embedding_dim", a.condition_embedding_dim},
            {"kernel_size", a.kernel_size},
            {"activation", a.activation}};
}

} // namespace

TrainConfig parse_train_config(const std::string &text)
{
    const json doc = parse_document(text);
    TrainConfig c;
    Fields f(doc, "");
    if (const json *g = f.child("geometry"))
        read_shape(*g, "geometry.", c.geometry);
    f.get("spacing", c.geometry.element_spacing);
    f.get("environments", c.environments);
    f.get("samples_per_environment", c.samples_per_environment);
    f.get("epochs", c.epochs);
    f.get("batch_size", c.batch_size);
    f.get("learning_rate", c.learning_rate);
    f.get("lambda2", c.lambda2);
    f.get("condition_dropout", c.condition_dropout);
    if (const json *s = f.child("schedule")) {
        Fields fs(*s, "schedule.");
        fs.get("t_max", c.schedule.t_max);
        fs.get("beta_start", c.schedule.beta_start);
        fs.get("beta_end", c.schedule.beta_end);
        fs.finish();
    }
    std::vector<double> snr{c.snr_low_db, c.snr_high_db};
    f.get("snr_range", snr);
    if (snr.size() != 2)
        bad("'snr_range' must be [low_db, high_db]");
    c.snr_low_db = snr[0];
    c.snr_high_db = snr[1];
    f.get("mask_ratios", c.mask_ratios);
    f.get("seed", c.seed);
    if (const json *n = f.child("network"))
        read_network(*n, c.network);
    f.get("calibration_draws", c.calibration_draws);
    f.finish();
    c.validate();
    return c;
}

std::string to_json_text(const TrainConfig &c)
{
    const json j{{"geometry", shape_json(c.geometry)},
                 {"spacing", c.geometry.element_spacing},
                 {"environments", c.environments},
                 {"samples_per_environment", c.samples_per_environment},
                 {"epochs", c.epochs},
                 {"batch_size", c.batch_size},
                 {"learning_rate", c.learning_rate},
                 {"lambda2", c.lambda2},
                 {"condition_dropout", c.condition_dropout},
                 {"schedule",
                  {{"t_max", c.schedule.t_max},
                   {"beta_start", c.schedule.beta_start},
                   {"beta_end", c.schedule.beta_end}}},
                 {"snr_range", {c.snr_low_db, c.snr_high_db}},
                 {"mask_ratios", c.mask_ratios},
                 {"seed", c.seed},
                 {"network", network_json(c.network)},
                 {"calibration_draws", c.calibration_draws}};
    return j.dump(2) + "\n";
}

SweepConfig parse_sweep_config(const std::string &text)
{
    const json doc = parse_document(text);
    SweepConfig c;
    Fields f(doc, "");
    f.get("snr_db", c.snr_db);
    f.get("mask_ratios", c.mask_ratios);
    double spacing = c.geometries.front().element_spacing;
    f.get("spacing", spacing);
    if (const json *gs = f.child("geometries")) {
        if (!gs->is_array())
            bad("'geometries' must be an array");
        c.geometries.clear();
        for (std::size_t i = 0; i < gs->size(); ++i) {
            SystemGeometry g;
            read_shape((*gs)[i], "geometries[" + std::to_string(i) + "].", g);
            c.geometries.push_back(g);
        }
    }
    for (auto &g : c.geometries)
        g.element_spacing = spacing;
    f.get("methods", c.methods);
    f.get("trials", c.trials);
    f.get("seed", c.seed);
    f.get("lambda2", c.lambda2);
    f.get("posterior_samples", c.posterior_samples);
    f.get("calibration_draws", c.calibration_draws);
    f.finish();
    c.validate();
    return c;
}

std::string to_json_text(const SweepConfig &c)
{
    json geoms = json::array();
    for (const auto &g : c.geometries)
        geoms.push_back(shape_json(g));
    const json j{{"snr_db", c.snr_db},
                 {"mask_ratios", c.mask_ratios},
                 {"spacing", c.geometries.empty() ? 0.25 : c.geometries.front().element_spacing},
                 {"geometries", geoms},
                 {"methods", c.methods},
                 {"trials", c.trials},
                 {"seed", c.seed},
                 {"lambda2", c.lambda2},
                 {"posterior_samples", c.posterior_samples},
                 {"calibration_draws", c.calibration_draws}};
    return j.dump(2) + "\n";
}

TrainConfig load_train_config(const std::filesystem::path &path)
{
    return parse_train_config(io::read_file(path));
}

SweepConfig load_sweep_config(const std::filesystem::path &path)
{
    return parse_sweep_config(io::read_file(path));
}

std::string epoch_log_line(const EpochReport &r)
{
    return json{{"epoch", r.epoch}, {"mean_loss", r.mean_loss}, {"wall_ms", r.wall_ms}}.dump();
}

} // namespace riscdm
