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
#include "riscdm/diffusion.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace riscdm {

/// ||b_hat - b_true||_F^2 / ||b_true||_F^2 for a single trial.
template <typename A, typename B>
double nmse(const Eigen::MatrixBase<A> &b_hat, const Eigen::MatrixBase<B> &b_true)
{
    require(b_hat.rows() == b_true.rows() && b_hat.cols() == b_true.cols(), "nmse: shape mismatch");
    const double ref = b_true.squaredNorm();
    require(ref > 0.0, "nmse: ground truth has zero norm");
    return (b_hat - b_true).squaredNorm() / ref;
}

/// The observed columns as they are, zeros elsewhere.
ComplexMatrix zero_fill_baseline(const ComplexMatrix &partial, const RealVector &indicator);

/// Column covariance of B_m = G2 diag(d_m u_m): the entrywise square of the
/// RIS2 correlation, since row n of G2 and column m of D both carry it.
RealMatrix cascaded_column_covariance(const SpatialCorrelation &corr2);

/// Per BS-antenna row, masked entries get Sigma_mo (Sigma_oo + s2 I)^-1 b_o;
/// observed entries pass through. Throws ErrorCode::not_psd if the observed
/// block stays singular after a relative 1e-10 diagonal load.
ComplexMatrix lmmse_oracle(const ComplexMatrix &partial, const RealVector &indicator,
                           const RealMatrix &column_covariance, double noise_variance);
ComplexMatrix lmmse_oracle(const ComplexMatrix &partial, const RealVector &indicator,
                           const SpatialCorrelation &corr2, double noise_variance);

struct CdmSettings {
    GuidanceConfig guidance;
    /// Posterior draws averaged into one estimate.
    Index posterior_samples = 8;
    /// Overwrite observed columns with their observed values.
    bool data_consistency = true;
    ReverseNoise noise = ReverseNoise::std_dev;
    /// Trials sampled together; fixed so results do not depend on threads.
    Index chunk_trials = 16;
    Index threads = 0;

    void validate() const;
};

struct CdmInput {
    MaskedChannel masked;
    ComplexVector pilot;
};

/// Algorithm-level inference: condition on (pilot, partial channel, mask),
/// run the guided reverse process from pure noise, rescale, devectorize and
/// average posterior_samples draws. Chunk c draws from its own derived stream.
std::vector<ComplexMatrix> cdm_estimate(const Checkpoint &ckpt, std::span<const CdmInput> inputs,
                                        const CdmSettings &settings, std::uint64_t seed);
ComplexMatrix cdm_estimate(const Checkpoint &ckpt, const MaskedChannel &masked,
                           const ComplexVector &pilot, const CdmSettings &settings,
                           std::uint64_t seed);

struct EvalRecord {
    std::string method;
    double snr_db = 0.0;
    double rho = 0.0;  // requested mask ratio
    Index n = 0, m1 = 0, m2 = 0;
    double lambda2 = 0.0;  // NaN for methods without guidance
    Index n_trials = 0;
    double nmse_mean = 0.0;
    double nmse_std = 0.0;  // sample standard deviation across trials
    std::uint64_t seed = 0;
    std::vector<double> trial_nmse;  // not serialized

    /// Half-width of the normal-approximation 95% interval of the mean.
    double ci95() const;
};

struct SweepConfig {
    std::vector<double> snr_db{-5.0, 0.0, 5.0, 10.0, 15.0, 20.0};
    std::vector<double> mask_ratios{0.2, 0.5};
    std::vector<SystemGeometry> geometries{SystemGeometry{}};
    std::vector<std::string> methods{"zero_fill", "lmmse", "cdm"};
    Index trials = 500;
    std::uint64_t seed = 1;
    std::vector<double> lambda2{0.7};
    Index posterior_samples = 8;
    Index calibration_draws = 10000;

    void validate() const;
};

/// Known method names: zero_fill, lmmse, cdm (with data consistency) and
/// cdm_nodc (raw generated channel).
bool method_needs_checkpoint(const std::string &method);

/// "cdm_<N>x<M1>x<M2>.ckpt".
std::string checkpoint_filename(const SystemGeometry &geom);
std::string geometry_key(const SystemGeometry &geom);

using CheckpointSet = std::map<std::string, Checkpoint>;  // keyed by geometry_key
/// Loads the checkpoint of each geometry found in `dir`; absent files are skipped.
CheckpointSet load_checkpoints(const std::filesystem::path &dir,
                               const std::vector<SystemGeometry> &geometries);

struct SweepResult {
    std::vector<EvalRecord> records;
    std::vector<std::string> warnings;  // one per skipped cell
};

/// Records are ordered geometry, mask ratio, SNR, method, lambda2. Trial i of
/// a geometry uses the same realization and RIS1 index m in every cell, the
/// same mask across SNRs and the same pilot noise across mask ratios.
SweepResult run_sweep(const SweepConfig &cfg, const CheckpointSet &checkpoints, Index threads = 0,
                      const std::function<void(const EvalRecord &)> &progress = {});

inline constexpr const char *sweep_csv_header =
    "method,snr_db,rho,n,m1,m2,lambda2,n_trials,nmse_mean,nmse_std,seed";

std::string format_sweep_csv(std::span<const EvalRecord> records);
void write_sweep_csv(const std::filesystem::path &path, std::span<const EvalRecord> records);
std::vector<EvalRecord> parse_sweep_csv(const std::string &text);

} // namespace riscdm
