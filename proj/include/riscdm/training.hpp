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
#include "riscdm/checkpoint.hpp"
#include "riscdm/dataset.hpp"
#include "riscdm/diffusion.hpp"
#include "riscdm/network.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

namespace riscdm {

struct ScheduleConfig {
    Index t_max = 500;
    double beta_start = 1e-4;
    double beta_end = 0.02;

    Schedule build() const { return build_linear_schedule(t_max, beta_start, beta_end); }
};

struct TrainConfig {
    SystemGeometry geometry;  // element_spacing doubles as the correlation spacing
    Index environments = 4;
    Index samples_per_environment = 512;  // channel realizations; each yields M1 records
    Index epochs = 50;
    Index batch_size = 64;
    double learning_rate = 1e-3;
    double lambda2 = 0.7;
    double condition_dropout = 0.1;
    ScheduleConfig schedule;
    double snr_low_db = -5.0;
    double snr_high_db = 20.0;
    std::vector<double> mask_ratios{0.2, 0.5};  // drawn uniformly per record
    std::uint64_t seed = 1;
    ArchitectureDescriptor network;
    Index calibration_draws = 10000;

    /// Throws ErrorCode::invalid_config.
    void validate() const;
};

/// Every (environment, realization, m) triple as one record, in that order.
/// Environments share the correlation model and differ in their random stream.
Dataset generate_dataset(const TrainConfig &cfg, Index threads = 0);

/// Network-ready view of a dataset: one column per record, the target and the
/// partial channel both divided by the record's observed RMS.
struct TrainingSet {
    RealMatrix x0;
    ConditionBatch cond;
    RealVector scale;

    Index size() const { return x0.cols(); }
};

TrainingSet make_training_set(const Dataset &data, double signal_power);

struct EpochReport {
    Index epoch = 0;  // 1-based
    double mean_loss = 0.0;
    double wall_ms = 0.0;
};

/// Knobs of one pass over a training set.
struct EpochSettings {
    Index batch_size = 64;
    double learning_rate = 1e-3;
    double lambda2 = 0.7;
    double condition_dropout = 0.1;
    const std::atomic<bool> *stop = nullptr;  // checked between batches
};

/// One shuffled pass with uniform t in [1, T]; returns the sample-weighted
/// mean loss. All randomness comes from `rng`.
double train_epoch(DenoiserParams &params, AdamState &adam, const TrainingSet &data,
                   const Schedule &schedule, const EpochSettings &settings, Rng &rng);

struct TrainOptions {
    std::filesystem::path checkpoint_path;  // rewritten atomically after each epoch
    std::filesystem::path log_path;         // JSON lines, appended
    std::function<void(const EpochReport &)> on_epoch;
    const std::atomic<bool> *stop = nullptr;  // checked between batches
    std::string config_text;                  // stored in the checkpoint header
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochReport> history;
    bool interrupted = false;
};

/// Fresh parameters and optimizer state for `cfg`.
Checkpoint initial_checkpoint(const TrainConfig &cfg, double signal_power);

/// Runs epochs checkpoint.epoch + 1 .. cfg.epochs. Epoch e draws from its own
/// derived stream, so an interrupted run resumed from its last checkpoint ends
/// bit-identical to an uninterrupted one.
TrainResult train(const TrainConfig &cfg, const Dataset &data, const TrainOptions &options = {},
                  std::optional<Checkpoint> resume = std::nullopt);

/// Guided noise-prediction loss on `data` without parameter updates and with
/// every condition present.
double validate(const Checkpoint &ckpt, const Dataset &data, double lambda2, std::uint64_t seed,
                Index batch_size = 256);

} // namespace riscdm
