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
#include "riscdm/config.hpp"
#include "riscdm/dataset.hpp"
#include "riscdm/evaluation.hpp"
#include "riscdm/io.hpp"
#include "riscdm/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace riscdm;
using nlohmann::json;

namespace {

constexpr const char *tool_version = "0.1.0";

std::atomic<bool> g_stop{false};

extern "C" void on_sigint(int) { g_stop.store(true); }

std::string utc_now()
{
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

int exit_code(ErrorCode c)
{
    switch (c) {
    case ErrorCode::invalid_config:
        return 2;
    case ErrorCode::io:
        return 3;
    case ErrorCode::geometry_mismatch:
        return 4;
    case ErrorCode::corrupt_checkpoint:
        return 5;
    default:
        return 1;
    }
}

// Self-describing record of one run, written next to its primary output.
struct Manifest {
    Manifest(std::string cmd, std::string cfg, std::uint64_t s)
        : command(std::move(cmd)), config_text(std::move(cfg)), seed(s)
    {
    }

    std::string command;
    std::string config_text;
    std::uint64_t seed = 0;
    std::string started = utc_now();
    std::vector<std::string> outputs;
    json extra = json::object();

    void write(const fs::path &primary) const
    {
        json j{{"tool", "riscdm"},
               {"version", tool_version},
               {"command", command},
               {"config_hash", io::hex64(io::fnv1a(config_text))},
               {"seed", seed},
               {"started_utc", started},
               {"finished_utc", utc_now()},
               {"outputs", outputs},
               {"config", config_text.empty() ? json(nullptr) : json::parse(config_text)}};
        j.update(extra);
        fs::path path = primary;
        path += ".manifest.json";
        const std::string text = j.dump(2) + "\n";
        io::atomic_write(path, [&](std::ostream &out) { out << text; });
    }
};

std::vector<std::string> split_list(const std::string &s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty())
            out.push_back(item);
    return out;
}

int cmd_gen_data(const fs::path &config, const fs::path &out, std::optional<std::uint64_t> seed,
                 Index threads)
{
    TrainConfig cfg = load_train_config(config);
    if (seed)
        cfg.seed = *seed;
    Manifest m{"gen-data", to_json_text(cfg), cfg.seed};
    const Dataset data = generate_dataset(cfg, threads);
    write_dataset(out, data);
    m.outputs = {out.string()};
    m.extra = {{"records", data.records.size()},
               {"signal_power", data.header.signal_power},
               {"dataset_hash", io::hex64(io::fnv1a(io::read_file(out)))}};
    m.write(out);
    std::cout << "wrote " << data.records.size() << " records to " << out.string() << "\n";
    return 0;
}

int cmd_train(const fs::path &config, const fs::path &data_path, const fs::path &out, bool resume,
              fs::path log, std::optional<std::uint64_t> seed)
{
    TrainConfig cfg = load_train_config(config);
    if (seed)
        cfg.seed = *seed;
    const Dataset data = read_dataset(data_path);
    if (!data.header.geometry.same_array_shape(cfg.geometry))
        throw Error(ErrorCode::geometry_mismatch,
                    "dataset geometry " + geometry_key(data.header.geometry) +
                        " does not match config geometry " + geometry_key(cfg.geometry));
    std::optional<Checkpoint> start;
    if (resume && fs::exists(out)) {
        start = load_checkpoint(out);
        std::cout << "resuming after epoch " << start->epoch << "\n";
    }
    if (log.empty()) {
        log = out;
        log += ".log.jsonl";
    }
    Manifest m{"train", to_json_text(cfg), cfg.seed};
    TrainOptions opt;
    opt.checkpoint_path = out;
    opt.log_path = log;
    opt.stop = &g_stop;
    opt.config_text = m.config_text;
    opt.on_epoch = [&](const EpochReport &r) {
        std::cout << epoch_log_line(r) << std::endl;
    };
    std::signal(SIGINT, on_sigint);
    const TrainResult res = train(cfg, data, opt, std::move(start));
    std::signal(SIGINT, SIG_DFL);
    if (res.interrupted) {
        std::cerr << "interrupted; checkpoint holds epoch " << res.checkpoint.epoch << "\n";
        return 130;
    }
    if (res.history.empty())
        save_checkpoint(out, res.checkpoint);
    m.outputs = {out.string(), log.string()};
    m.extra = {{"epochs_completed", res.checkpoint.epoch},
               {"checkpoint_hash", io::hex64(io::fnv1a(io::read_file(out)))}};
    m.write(out);
    return 0;
}

int cmd_infer(const fs::path &ckpt_path, const fs::path &input, const fs::path &out,
              std::uint64_t seed, const CdmSettings &settings)
{
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const Dataset in = read_dataset(input);
    require_geometry(ckpt, in.header.geometry);
    std::vector<CdmInput> inputs;
    for (const auto &r : in.records)
        inputs.push_back({r.masked(), r.pilot});
    const auto est = cdm_estimate(ckpt, inputs, settings, seed);
    Dataset result = in;
    for (std::size_t i = 0; i < est.size(); ++i)
        result.records[i].channel = est[i];
    write_dataset(out, result);
    Manifest m{"infer", "", seed};
    m.outputs = {out.string()};
    m.extra = {{"checkpoint", ckpt_path.string()},
               {"input", input.string()},
               {"lambda2", settings.guidance.lambda2},
               {"posterior_samples", settings.posterior_samples},
               {"data_consistency", settings.data_consistency},
               {"output_hash", io::hex64(io::fnv1a(io::read_file(out)))}};
    m.write(out);
    std::cout << "wrote " << est.size() << " estimates to " << out.string() << "\n";
    return 0;
}

int cmd_sweep(const fs::path &config, const fs::path &ckpt_dir, const fs::path &out,
              const std::string &methods, std::optional<std::uint64_t> seed, Index threads)
{
    SweepConfig cfg = config.empty() ? SweepConfig{} : load_sweep_config(config);
    if (!methods.empty())
        cfg.methods = split_list(methods);
    if (seed)
        cfg.seed = *seed;
    cfg.validate();
    CheckpointSet ckpts;
    const bool need = std::any_of(cfg.methods.begin(), cfg.methods.end(), method_needs_checkpoint);
    if (need) {
        if (ckpt_dir.empty())
            throw Error(ErrorCode::invalid_config, "--checkpoints is required for the cdm methods");
        ckpts = load_checkpoints(ckpt_dir, cfg.geometries);
    }
    Manifest m{"sweep", to_json_text(cfg), cfg.seed};
    const SweepResult res = run_sweep(cfg, ckpts, threads, [](const EvalRecord &r) {
        std::cerr << r.method << " " << geometry_key({r.n, r.m1, r.m2}) << " rho=" << r.rho
                  << " snr=" << r.snr_db << " nmse=" << r.nmse_mean << " +- " << r.ci95() << "\n";
    });
    for (const auto &w : res.warnings)
        std::cerr << "warning: " << w << "\n";
    write_sweep_csv(out, res.records);
    m.outputs = {out.string()};
    m.extra = {{"records", res.records.size()},
               {"warnings", res.warnings},
               {"csv_hash", io::hex64(io::fnv1a(io::read_file(out)))}};
    m.write(out);
    return 0;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"riscdm: conditional diffusion estimation of double-RIS cascaded channels"};
    app.set_version_flag("--version", tool_version);
    app.require_subcommand(1);

    fs::path config, out, data, checkpoint, input, checkpoints, log;
    std::optional<std::uint64_t> seed;
    std::uint64_t infer_seed = 1;
    Index threads = 0;
    bool resume = false, no_dc = false;
    std::string methods;
    CdmSettings cdm;

    auto *gen = app.add_subcommand("gen-data", "generate a training dataset");
    gen->add_option("--config", config, "training config (JSON)")->required();
    gen->add_option("--out", out, "dataset file")->required();
    gen->add_option("--seed", seed, "override the config seed");
    gen->add_option("--threads", threads, "worker threads (0 = all cores)");

    auto *tr = app.add_subcommand("train", "train the conditional denoiser");
    tr->add_option("--config", config, "training config (JSON)")->required();
    tr->add_option("--data", data, "dataset file")->required();
    tr->add_option("--out", out, "checkpoint file, rewritten after every epoch")->required();
    tr->add_option("--log", log, "JSON-lines log (default <out>.log.jsonl)");
    tr->add_option("--seed", seed, "override the config seed");
    tr->add_flag("--resume", resume, "continue from --out if it exists");
    tr->add_option("--threads", threads, "accepted for symmetry; training is single-threaded");

    auto *inf = app.add_subcommand("infer", "reconstruct full channels from partial observations");
    inf->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    inf->add_option("--input", input, "dataset file with partial channels")->required();
    inf->add_option("--out", out, "output dataset file holding the estimates")->required();
    inf->add_option("--seed", infer_seed, "sampling seed")->capture_default_str();
    inf->add_option("--lambda2", cdm.guidance.lambda2, "guidance weight")->capture_default_str();
    inf->add_option("--posterior-samples", cdm.posterior_samples, "draws averaged per estimate")
        ->capture_default_str();
    inf->add_flag("--no-data-consistency", no_dc, "keep generated values at observed columns");
    inf->add_option("--threads", threads, "worker threads (0 = all cores)");

    auto *sw = app.add_subcommand("sweep", "NMSE sweep over SNR, mask ratio and geometry");
    sw->add_option("--config", config, "sweep config (JSON); defaults when omitted");
    sw->add_option("--checkpoints", checkpoints, "directory holding cdm_<N>x<M1>x<M2>.ckpt");
    sw->add_option("--out", out, "CSV file")->required();
    sw->add_option("--methods", methods, "comma-separated subset of zero_fill,lmmse,cdm,cdm_nodc");
    sw->add_option("--seed", seed, "override the config seed");
    sw->add_option("--threads", threads, "worker threads (0 = all cores)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        // --help and --version exit 0; usage errors share the config exit code
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*gen)
            return cmd_gen_data(config, out, seed, threads);
        if (*tr)
            return cmd_train(config, data, out, resume, log, seed);
        if (*inf) {
            cdm.data_consistency = !no_dc;
            cdm.threads = threads;
            return cmd_infer(checkpoint, input, out, infer_seed, cdm);
        }
        if (*sw)
            return cmd_sweep(config, checkpoints, out, methods, seed, threads);
    } catch (const Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.code());
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
