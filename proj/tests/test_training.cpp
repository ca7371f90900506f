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

#include <doctest.h>

#include "riscdm/config.hpp"
#include "riscdm/training.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>

// Covered tests:
// - Dataset size, ordering, mask ratios, SNR range, thread independence
// - Records of one realization share the end-to-end channel
// - Dataset file round trip and damage detection
// - Training set normalization
// - Untrained network loss equals the noise dimension
// - Small-set overfitting
// - lambda2 = 0 ignores the conditions
// - Dropout 1 collapses both guidance branches
// - Interrupt discards the partial epoch; resume is bit-identical
// - Resume rejects incompatible checkpoints
// - Config validation

using namespace riscdm;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny_config()
{
    TrainConfig c;
    c.geometry = SystemGeometry{2, 3, 4};
    c.environments = 2;
    c.samples_per_environment = 5;
    c.epochs = 3;
    c.batch_size = 8;
    c.learning_rate = 3e-3;
    c.schedule = ScheduleConfig{20, 1e-3, 0.2};
    c.seed = 9;
    c.network.hidden_width = 8;
    c.network.hidden_layers = 2;
    c.network.step_embedding_dim = 4;
    c.network.condition_embedding_dim = 4;
    c.calibration_draws = 500;
    return c;
}

bool same_params(const DenoiserParams &a, const DenoiserParams &b, double tol = 0.0)
{
    if (a.tensors.size() != b.tensors.size())
        return false;
    for (std::size_t k = 0; k < a.tensors.size(); ++k)
        if ((a.tensors[k].value - b.tensors[k].value).cwiseAbs().maxCoeff() > tol)
            return false;
    return true;
}

fs::path temp_path(const std::string &name)
{
    return fs::temp_directory_path() / ("riscdm_test_training_" + name);
}

} // namespace

TEST_CASE("dataset holds one record per environment, realization and RIS1 element")
{
    const TrainConfig cfg = tiny_config();
    const Dataset d = generate_dataset(cfg, 1);
    REQUIRE(d.records.size() == 2 * 5 * 3);
    CHECK(d.header.seed == 9);
    CHECK(d.header.signal_power > 0.0);
    std::set<Index> observed_counts;
    for (const auto &r : d.records) {
        CHECK(r.channel.rows() == 2);
        CHECK(r.channel.cols() == 4);
        CHECK(r.pilot.size() == 2);
        CHECK(r.snr_db >= -5.0);
        CHECK(r.snr_db <= 20.0);
        observed_counts.insert(Index(r.indicator.sum()));
        // masked columns are zeroed in the masked view only
        const MaskedChannel mc = r.masked();
        for (Index j = 0; j < 4; ++j)
            if (r.indicator(j) == 0.0)
                CHECK(mc.partial.col(j).isZero(0.0));
    }
    // rho = 0.2 keeps 3 of 4 (round(0.8) = 1 masked), rho = 0.5 keeps 2
    CHECK(observed_counts == std::set<Index>{2, 3});
}

TEST_CASE("dataset generation is deterministic and thread-count independent")
{
    const TrainConfig cfg = tiny_config();
    const Dataset a = generate_dataset(cfg, 1);
    const Dataset b = generate_dataset(cfg, 3);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].channel == b.records[i].channel);
        CHECK(a.records[i].pilot == b.records[i].pilot);
        CHECK(a.records[i].indicator == b.records[i].indicator);
        CHECK(a.records[i].snr_db == b.records[i].snr_db);
    }
    CHECK(a.header.signal_power == b.header.signal_power);
    TrainConfig other = cfg;
    other.seed = 10;
    CHECK(generate_dataset(other, 1).records[0].channel != a.records[0].channel);
}

TEST_CASE("records of one realization share the end-to-end channel")
{
    TrainConfig cfg = tiny_config();
    cfg.snr_low_db = cfg.snr_high_db = 250.0;
    const Dataset d = generate_dataset(cfg, 1);
    for (std::size_t k = 0; k < 10; ++k) {
        const ComplexVector &y0 = d.records[3 * k].pilot;
        for (std::size_t m = 1; m < 3; ++m) {
            CHECK((d.records[3 * k + m].pilot - y0).norm() < 1e-9 * y0.norm());
            // distinct cascaded channels per RIS1 element
            CHECK(d.records[3 * k + m].channel != d.records[3 * k].channel);
        }
    }
}

TEST_CASE("dataset files round trip and reject damage")
{
    const Dataset d = generate_dataset(tiny_config(), 1);
    const fs::path path = temp_path("data.bin");
    write_dataset(path, d);
    const Dataset back = read_dataset(path);
    CHECK(back.header.count == Index(d.records.size()));
    CHECK(back.header.signal_power == d.header.signal_power);
    CHECK(back.header.geometry.same_array_shape(d.header.geometry));
    REQUIRE(back.records.size() == d.records.size());
    for (std::size_t i = 0; i < d.records.size(); ++i) {
        CHECK(back.records[i].channel == d.records[i].channel);
        CHECK(back.records[i].pilot == d.records[i].pilot);
        CHECK(back.records[i].indicator == d.records[i].indicator);
    }
    const auto size = fs::file_size(path);
    fs::resize_file(path, size - 1);
    try {
        read_dataset(path);
        FAIL("expected io error");
    } catch (const Error &e) {
        CHECK(e.code() == ErrorCode::io);
    }
    fs::remove(path);
    CHECK_THROWS_AS(read_dataset(path), Error);
    CHECK(record_length(4, 16) == 2 * 4 * 16 + 16 + 8 + 1);
}

TEST_CASE("training set divides target and partial channel by the observed RMS")
{
    const Dataset d = generate_dataset(tiny_config(), 1);
    const TrainingSet set = make_training_set(d, d.header.signal_power);
    REQUIRE(set.size() == 30);
    for (Index i = 0; i < set.size(); ++i) {
        const auto &r = d.records[std::size_t(i)];
        const double s = observed_rms(r.masked());
        CHECK(set.scale(i) == s);
        CHECK((set.x0.col(i) - vectorize(r.channel) / s).cwiseAbs().maxCoeff() < 1e-14);
        CHECK((set.cond.partial.col(i) - vectorize(r.masked().partial) / s).cwiseAbs().maxCoeff() < 1e-14);
        CHECK(set.cond.present(i) == 1.0);
    }
}

TEST_CASE("untrained network loss equals the noise dimension")
{
    TrainConfig cfg = tiny_config();
    cfg.samples_per_environment = 200;
    const Dataset d = generate_dataset(cfg, 1);
    const Checkpoint ck = initial_checkpoint(cfg, d.header.signal_power);
    // zero output layer: loss is E||eps||^2 = 2 N M2 = 16
    CHECK(validate(ck, d, 0.7, 1) == doctest::Approx(16.0).epsilon(0.05));
}

TEST_CASE("training overfits a small set")
{
    TrainConfig cfg = tiny_config();
    cfg.environments = 1;
    cfg.samples_per_environment = 2;
    cfg.epochs = 400;
    cfg.batch_size = 6;
    cfg.condition_dropout = 0.0;
    cfg.schedule = ScheduleConfig{10, 0.1, 0.5};
    const Dataset d = generate_dataset(cfg, 1);
    const TrainResult r = train(cfg, d);
    REQUIRE(r.history.size() == 400);
    double first = 0, last = 0;
    for (int i = 0; i < 20; ++i) {
        first += r.history[std::size_t(i)].mean_loss / 20;
        last += r.history[r.history.size() - 1 - std::size_t(i)].mean_loss / 20;
    }
    CAPTURE(first);
    CAPTURE(last);
    CHECK(last < 0.5 * first);
}

TEST_CASE("lambda2 = 0 training does not depend on the conditions")
{
    const TrainConfig cfg = tiny_config();
    const Dataset d = generate_dataset(cfg, 1);
    const TrainingSet a = make_training_set(d, d.header.signal_power);
    TrainingSet b = a;
    Rng noise(3);
    b.cond.partial = standard_normal(b.cond.partial.rows(), b.cond.partial.cols(), noise);
    b.cond.pilot = standard_normal(b.cond.pilot.rows(), b.cond.pilot.cols(), noise);
    const Checkpoint ck = initial_checkpoint(cfg, d.header.signal_power);
    const Schedule s = cfg.schedule.build();
    const EpochSettings settings{8, 1e-3, 0.0, 0.1, nullptr};
    DenoiserParams pa = ck.params, pb = ck.params;
    AdamState aa = *ck.adam, ab = *ck.adam;
    Rng ra(5), rb(5);
    const double la = train_epoch(pa, aa, a, s, settings, ra);
    const double lb = train_epoch(pb, ab, b, s, settings, rb);
    CHECK(la == lb);
    CHECK(same_params(pa, pb));
    CHECK_FALSE(same_params(pa, ck.params));
}

TEST_CASE("full condition dropout makes every guidance weight train the same model")
{
    const TrainConfig cfg = tiny_config();
    const Dataset d = generate_dataset(cfg, 1);
    const TrainingSet set = make_training_set(d, d.header.signal_power);
    const Checkpoint ck = initial_checkpoint(cfg, d.header.signal_power);
    const Schedule s = cfg.schedule.build();
    DenoiserParams p0 = ck.params, p7 = ck.params;
    AdamState a0 = *ck.adam, a7 = *ck.adam;
    Rng r0(8), r7(8);
    train_epoch(p0, a0, set, s, EpochSettings{8, 1e-3, 0.0, 1.0, nullptr}, r0);
    train_epoch(p7, a7, set, s, EpochSettings{8, 1e-3, 0.7, 1.0, nullptr}, r7);
    CHECK(same_params(p0, p7, 1e-9));
}

TEST_CASE("interrupted training resumes to the uninterrupted result")
{
    const TrainConfig cfg = tiny_config();
    const Dataset d = generate_dataset(cfg, 1);
    const TrainResult full = train(cfg, d);
    CHECK_FALSE(full.interrupted);
    CHECK(full.checkpoint.epoch == 3);

    const fs::path ckpt = temp_path("interrupt.ckpt");
    const fs::path log = temp_path("interrupt.log");
    fs::remove(log);
    std::atomic<bool> stop{false};
    TrainOptions opts;
    opts.checkpoint_path = ckpt;
    opts.log_path = log;
    opts.stop = &stop;
    opts.on_epoch = [&](const EpochReport &r) {
        if (r.epoch == 1)
            stop = true;
    };
    const TrainResult part = train(cfg, d, opts);
    CHECK(part.interrupted);
    CHECK(part.history.size() == 1);
    CHECK(part.checkpoint.epoch == 1);

    const Checkpoint saved = load_checkpoint(ckpt);
    CHECK(saved.epoch == 1);
    TrainOptions resume_opts;
    resume_opts.log_path = log;
    const TrainResult rest = train(cfg, d, resume_opts, saved);
    CHECK(rest.history.size() == 2);
    CHECK(rest.checkpoint.epoch == 3);
    CHECK(same_params(rest.checkpoint.params, full.checkpoint.params));
    CHECK(rest.checkpoint.adam->step == full.checkpoint.adam->step);

    std::ifstream in(log);
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        ++lines;
        CHECK(line.find("\"epoch\":" + std::to_string(lines)) != std::string::npos);
    }
    CHECK(lines == 3);
    fs::remove(ckpt);
    fs::remove(log);
}

TEST_CASE("stop requested before the first batch leaves the checkpoint untouched")
{
    const TrainConfig cfg = tiny_config();
    const Dataset d = generate_dataset(cfg, 1);
    std::atomic<bool> stop{true};
    TrainOptions opts;
    opts.stop = &stop;
    const TrainResult r = train(cfg, d, opts);
    CHECK(r.interrupted);
    CHECK(r.history.empty());
    CHECK(r.checkpoint.epoch == 0);
    CHECK(same_params(r.checkpoint.params, initial_checkpoint(cfg, d.header.signal_power).params));
}

TEST_CASE("resume rejects incompatible checkpoints")
{
    const TrainConfig cfg = tiny_config();
    const Dataset d = generate_dataset(cfg, 1);
    Checkpoint ck = initial_checkpoint(cfg, d.header.signal_power);

    auto expect = [&](const TrainConfig &c, const Checkpoint &k, ErrorCode code) {
        try {
            train(c, d, {}, k);
            FAIL("expected an error");
        } catch (const Error &e) {
            CHECK(e.code() == code);
        }
    };
    TrainConfig wider = cfg;
    wider.network.hidden_width = 9;
    expect(wider, ck, ErrorCode::invalid_config);
    TrainConfig longer = cfg;
    longer.schedule.t_max = 21;
    expect(longer, ck, ErrorCode::invalid_config);
    Checkpoint no_adam = ck;
    no_adam.adam.reset();
    expect(cfg, no_adam, ErrorCode::invalid_config);
    Checkpoint other = ck;
    other.geometry.n_bs_antennas = 3;
    expect(cfg, other, ErrorCode::geometry_mismatch);
    TrainConfig bigger = cfg;
    bigger.geometry.m2_elements = 5;
    expect(bigger, ck, ErrorCode::geometry_mismatch);
}

TEST_CASE("invalid training configurations are rejected")
{
    auto bad = [](auto mutate) {
        TrainConfig c = tiny_config();
        mutate(c);
        try {
            c.validate();
            return false;
        } catch (const Error &e) {
            return e.code() == ErrorCode::invalid_config;
        }
    };
    CHECK(bad([](TrainConfig &c) { c.lambda2 = 1.2; }));
    CHECK(bad([](TrainConfig &c) { c.condition_dropout = -0.1; }));
    CHECK(bad([](TrainConfig &c) { c.epochs = 0; }));
    CHECK(bad([](TrainConfig &c) { c.batch_size = 0; }));
    CHECK(bad([](TrainConfig &c) { c.learning_rate = 0.0; }));
    CHECK(bad([](TrainConfig &c) { c.snr_low_db = 30.0; }));
    CHECK(bad([](TrainConfig &c) { c.mask_ratios = {}; }));
    CHECK(bad([](TrainConfig &c) { c.mask_ratios = {0.9}; }));
    CHECK(bad([](TrainConfig &c) { c.schedule.beta_end = 1.0; }));
    CHECK(bad([](TrainConfig &c) { c.network.kernel_size = 2; }));
    CHECK(bad([](TrainConfig &c) { c.geometry.n_bs_antennas = 0; }));
    CHECK_FALSE(bad([](TrainConfig &c) { c.condition_dropout = 1.0; }));
    CHECK_FALSE(bad([](TrainConfig &) {}));
}
