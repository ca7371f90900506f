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

#include "riscdm/training.hpp"

#include "riscdm/config.hpp"
#include "riscdm/parallel.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

namespace riscdm {

void TrainConfig::validate() const
{
    try {
        geometry.validate();
    } catch (const Error &e) {
        throw Error(ErrorCode::invalid_config, e.what());
    }
    auto check = [](bool ok, const std::string &msg) { require(ok, msg, ErrorCode::invalid_config); };
    check(environments >= 1, "environments must be >= 1");
    check(samples_per_environment >= 1, "samples_per_environment must be >= 1");
    check(epochs >= 1, "epochs must be >= 1");
    check(batch_size >= 1, "batch_size must be >= 1");
    check(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate must be > 0");
    check(lambda2 >= 0.0 && lambda2 <= 1.0, "lambda2 must lie in [0, 1]");
    check(condition_dropout >= 0.0 && condition_dropout <= 1.0,
          "condition_dropout must lie in [0, 1]");
    check(std::isfinite(snr_low_db) && std::isfinite(snr_high_db) && snr_low_db <= snr_high_db,
          "snr_range must be finite with low <= high");
    check(!mask_ratios.empty(), "mask_ratios must not be empty");
    for (double r : mask_ratios) {
        check(r >= 0.0 && r < 1.0, "mask ratios must lie in [0, 1)");
        check(std::llround(r * double(geometry.m2_elements)) < geometry.m2_elements,
              "mask ratio leaves no observed RIS2 element");
    }
    check(calibration_draws >= 1, "calibration_draws must be >= 1");
    schedule.build();
    network.validate();
}

Dataset generate_dataset(const TrainConfig &cfg, Index threads)
{
    cfg.validate();
    const auto &g = cfg.geometry;
    const SpatialCorrelation c1 = build_correlation_matrix(g.m1_elements, g.element_spacing);
    const SpatialCorrelation c2 = build_correlation_matrix(g.m2_elements, g.element_spacing);
    Rng cal = derive_stream(cfg.seed, {stream::calibration});
    Dataset data;
    data.header.geometry = g;
    data.header.seed = cfg.seed;
    data.header.signal_power = calibrate_signal_power(g, c1, c2, cal, cfg.calibration_draws);

    const Index per_env = cfg.samples_per_environment, m1 = g.m1_elements;
    const Index realizations = cfg.environments * per_env;
    data.records.resize(std::size_t(realizations * m1));
    parallel_for(realizations, threads, [&](Index k) {
        const auto env = std::uint64_t(k / per_env), r = std::uint64_t(k % per_env);
        Rng rng = derive_stream(cfg.seed, {stream::dataset, env, r});
        const ChannelRealization real = sample_realization(g, c1, c2, rng);
        for (Index m = 0; m < m1; ++m) {
            DatasetRecord &rec = data.records[std::size_t(k * m1 + m)];
            rec.snr_db = cfg.snr_low_db + (cfg.snr_high_db - cfg.snr_low_db) * uniform01(rng);
            rec.pilot = simulate_pilot(real, rec.snr_db, data.header.signal_power, rng).y;
            const double ratio = cfg.mask_ratios[rng() % cfg.mask_ratios.size()];
            const MaskSpec mask = MaskSpec::random(g.m2_elements, ratio, rng());
            rec.channel = compose_cascaded(real, m).b_matrix;
            rec.indicator = mask.indicator();
        }
    });
    data.header.count = Index(data.records.size());
    return data;
}

TrainingSet make_training_set(const Dataset &data, double signal_power)
{
    const auto &g = data.header.geometry;
    const Index count = Index(data.records.size());
    require(count >= 1, "training set: dataset is empty");
    TrainingSet set;
    set.x0.resize(g.channel_length(), count);
    set.scale.resize(count);
    set.cond.pilot.resize(2 * g.n_bs_antennas, count);
    set.cond.partial.resize(g.channel_length(), count);
    set.cond.indicator.resize(g.m2_elements, count);
    set.cond.present = RealVector::Ones(count);
    for (Index i = 0; i < count; ++i) {
        const DatasetRecord &r = data.records[std::size_t(i)];
        const PreparedCondition pc = prepare_condition(r.masked(), r.pilot, signal_power);
        set.scale(i) = pc.channel_scale;
        set.x0.col(i) = vectorize(r.channel) / pc.channel_scale;
        set.cond.pilot.col(i) = pc.condition.pilot;
        set.cond.partial.col(i) = pc.condition.partial_channel;
        set.cond.indicator.col(i) = pc.condition.indicator;
    }
    return set;
}

namespace {

struct Batch {
    RealMatrix x0;
    ConditionBatch cond;
};

Batch gather(const TrainingSet &data, std::span<const Index> idx)
{
    const Index b = Index(idx.size());
    Batch out;
    out.x0.resize(data.x0.rows(), b);
    out.cond.pilot.resize(data.cond.pilot.rows(), b);
    out.cond.partial.resize(data.cond.partial.rows(), b);
    out.cond.indicator.resize(data.cond.indicator.rows(), b);
    out.cond.present.resize(b);
    for (Index j = 0; j < b; ++j) {
        const Index i = idx[std::size_t(j)];
        out.x0.col(j) = data.x0.col(i);
        out.cond.pilot.col(j) = data.cond.pilot.col(i);
        out.cond.partial.col(j) = data.cond.partial.col(i);
        out.cond.indicator.col(j) = data.cond.indicator.col(i);
        out.cond.present(j) = data.cond.present(i);
    }
    return out;
}

// Draws t and eps per column and noises the batch in place of x0.
std::vector<Index> noise_batch(Batch &b, const Schedule &s, RealMatrix &eps, Rng &rng)
{
    std::vector<Index> steps(std::size_t(b.x0.cols()));
    eps = standard_normal(b.x0.rows(), b.x0.cols(), rng);
    for (Index j = 0; j < b.x0.cols(); ++j) {
        steps[std::size_t(j)] = 1 + Index(rng() % std::uint64_t(s.steps()));
        b.x0.col(j) = forward_jump(b.x0.col(j), s, steps[std::size_t(j)], eps.col(j));
    }
    return steps;
}

} // namespace

double train_epoch(DenoiserParams &params, AdamState &adam, const TrainingSet &data,
                   const Schedule &schedule, const EpochSettings &settings, Rng &rng)
{
    require(settings.batch_size >= 1, "train_epoch: batch size must be >= 1");
    const Index count = data.size();
    std::vector<Index> order(static_cast<std::size_t>(count));
    std::iota(order.begin(), order.end(), Index(0));
    for (Index i = count - 1; i > 0; --i)
        std::swap(order[std::size_t(i)], order[std::size_t(rng() % std::uint64_t(i + 1))]);

    double total = 0.0;
    for (Index start = 0; start < count; start += settings.batch_size) {
        const Index b = std::min(settings.batch_size, count - start);
        Batch batch = gather(data, std::span<const Index>(order).subspan(std::size_t(start), std::size_t(b)));
        RealMatrix eps;
        const std::vector<Index> steps = noise_batch(batch, schedule, eps, rng);
        for (Index j = 0; j < b; ++j)
            if (uniform01(rng) < settings.condition_dropout)
                batch.cond.present(j) = 0.0;
        ad::Tape tape;
        const LossGraph lg =
            build_guided_loss(tape, params, batch.x0, steps, batch.cond, eps, settings.lambda2);
        const double loss = lg.loss.value()(0, 0);
        if (!std::isfinite(loss))
            throw Error(ErrorCode::numerical_overflow,
                        "non-finite training loss at sample offset " + std::to_string(start));
        const std::vector<RealMatrix> grads = backward(tape, lg);
        adam_update(params, grads, adam, settings.learning_rate);
        total += loss * double(b);
        if (settings.stop && settings.stop->load())
            break;
    }
    return total / double(count);
}

Checkpoint initial_checkpoint(const TrainConfig &cfg, double signal_power)
{
    cfg.validate();
    Checkpoint c;
    c.geometry = cfg.geometry;
    Rng rng = derive_stream(cfg.seed, {stream::init});
    c.params = init_params(cfg.network, cfg.geometry.n_bs_antennas, cfg.geometry.m2_elements, rng);
    c.adam = AdamState::zeros_like(c.params);
    c.t_max = cfg.schedule.t_max;
    c.beta_start = cfg.schedule.beta_start;
    c.beta_end = cfg.schedule.beta_end;
    c.signal_power = signal_power;
    return c;
}

TrainResult train(const TrainConfig &cfg, const Dataset &data, const TrainOptions &options,
                  std::optional<Checkpoint> resume)
{
    cfg.validate();
    if (!data.header.geometry.same_array_shape(cfg.geometry))
        throw Error(ErrorCode::geometry_mismatch, "dataset geometry does not match the training config");
    TrainResult result;
    if (resume) {
        require_geometry(*resume, cfg.geometry);
        require(resume->params.arch == cfg.network, "resume: checkpoint architecture differs from config",
                ErrorCode::invalid_config);
        require(resume->schedule().fingerprint() == cfg.schedule.build().fingerprint(),
                "resume: checkpoint schedule differs from config", ErrorCode::invalid_config);
        require(resume->adam.has_value(), "resume: checkpoint carries no optimizer state",
                ErrorCode::invalid_config);
        result.checkpoint = std::move(*resume);
    } else {
        result.checkpoint = initial_checkpoint(cfg, data.header.signal_power);
    }
    Checkpoint &ck = result.checkpoint;
    ck.training_config = options.config_text.empty() ? to_json_text(cfg) : options.config_text;

    const Schedule schedule = cfg.schedule.build();
    const TrainingSet set = make_training_set(data, ck.signal_power);
    const EpochSettings settings{cfg.batch_size, cfg.learning_rate, cfg.lambda2, cfg.condition_dropout,
                                 options.stop};

    for (Index epoch = ck.epoch + 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        Rng rng = derive_stream(cfg.seed, {stream::epoch, std::uint64_t(epoch)});
        DenoiserParams params = ck.params;
        AdamState adam = *ck.adam;
        // An interrupt lands between batches; the in-progress epoch is
        // discarded and the last checkpoint stays valid.
        const double loss = train_epoch(params, adam, set, schedule, settings, rng);
        if (options.stop && options.stop->load()) {
            result.interrupted = true;
            break;
        }
        ck.params = std::move(params);
        ck.adam = std::move(adam);
        ck.epoch = epoch;
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        const EpochReport report{epoch, loss, ms};
        result.history.push_back(report);
        if (!options.checkpoint_path.empty())
            save_checkpoint(options.checkpoint_path, ck);
        if (!options.log_path.empty()) {
            std::ofstream log(options.log_path, std::ios::app);
            if (!log)
                throw Error(ErrorCode::io, "cannot append to log '" + options.log_path.string() + "'");
            log << epoch_log_line(report) << '\n';
        }
        if (options.on_epoch)
            options.on_epoch(report);
    }
    return result;
}

double validate(const Checkpoint &ckpt, const Dataset &data, double lambda2, std::uint64_t seed,
                Index batch_size)
{
    require_geometry(ckpt, data.header.geometry);
    require(batch_size >= 1, "validate: batch size must be >= 1");
    const Schedule schedule = ckpt.schedule();
    const TrainingSet set = make_training_set(data, ckpt.signal_power);
    Rng rng = derive_stream(seed, {stream::validation});
    std::vector<Index> idx;
    double total = 0.0;
    for (Index start = 0; start < set.size(); start += batch_size) {
        const Index b = std::min(batch_size, set.size() - start);
        idx.resize(std::size_t(b));
        std::iota(idx.begin(), idx.end(), start);
        Batch batch = gather(set, idx);
        RealMatrix eps;
        const std::vector<Index> steps = noise_batch(batch, schedule, eps, rng);
        ad::Tape tape;
        const LossGraph lg =
            build_guided_loss(tape, ckpt.params, batch.x0, steps, batch.cond, eps, lambda2);
        total += lg.loss.value()(0, 0) * double(b);
    }
    return total / double(set.size());
}

} // namespace riscdm
