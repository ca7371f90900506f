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

#include "riscdm/autodiff.hpp"
#include "riscdm/channel.hpp"
#include "riscdm/common.hpp"
#include "riscdm/diffusion.hpp"
#include "riscdm/rng.hpp"

#include <span>
#include <string>
#include <vector>

namespace riscdm {

enum class ArchitectureKind {
    /// Fully connected residual stack over the whole vectorized channel.
    mlp,
    /// Convolution along the RIS2 element axis; each position carries the
    /// 2N real channels of one column of B_m.
    conv1d,
};

std::string to_string(ArchitectureKind kind);
ArchitectureKind architecture_from_string(const std::string &name);

struct ArchitectureDescriptor {
    ArchitectureKind kind = ArchitectureKind::conv1d;
    Index hidden_width = 64;  // units (mlp) or channels (conv1d)
    Index hidden_layers = 4;  // input layer plus residual layers
    Index step_embedding_dim = 32;
    Index condition_embedding_dim = 32;
    Index kernel_size = 3;
    std::string activation = "silu";

    void validate() const;
    bool operator==(const ArchitectureDescriptor &) const = default;
};

struct ParamTensor {
    std::string name;
    RealMatrix value;
};

/// Weights of the conditional noise predictor for one array geometry.
struct DenoiserParams {
    ArchitectureDescriptor arch;
    Index n_antennas = 0;
    Index m2_elements = 0;
    std::vector<ParamTensor> tensors;

    Index channel_length() const { return 2 * n_antennas * m2_elements; }
    Index condition_length() const { return 2 * n_antennas + channel_length() + m2_elements; }
    Index parameter_count() const;
    bool all_finite() const;
    const RealMatrix &tensor(const std::string &name) const;
    RealMatrix &tensor(const std::string &name);
};

struct InitOptions {
    /// Untrained network predicts zero noise.
    bool zero_output_layer = true;
    /// Condition branch starts silent; it only moves once it sees conditions.
    bool zero_condition_projection = true;
};

DenoiserParams init_params(const ArchitectureDescriptor &arch, Index n_antennas, Index m2_elements,
                           Rng &rng, InitOptions options = {});
DenoiserParams zero_params(const ArchitectureDescriptor &arch, Index n_antennas, Index m2_elements);

/// Sinusoidal embedding: sin(t / 10000^(2i/dim)) for i < dim/2, then the matching cosines.
RealVector step_embedding(Index t, Index dimension);

/// Network-facing condition: normalized pilot, zero-filled partial channel
/// and the observation indicator. present = false is the unconditional branch.
struct ConditionVector {
    RealVector pilot;            // 2N
    RealVector partial_channel;  // 2 N M2
    RealVector indicator;        // M2
    bool present = true;
};

struct ConditionBatch {
    RealMatrix pilot;      // 2N x B
    RealMatrix partial;    // 2NM2 x B
    RealMatrix indicator;  // M2 x B
    RealVector present;    // B, entries 0 or 1

    Index size() const { return present.size(); }
    static ConditionBatch from(const ConditionVector &c);
    static ConditionBatch from(std::span<const ConditionVector> cs);
    /// Same conditions, every one marked absent.
    ConditionBatch without_condition() const;
    /// Each column repeated `copies` times consecutively.
    ConditionBatch repeated(Index copies) const;
};

/// A condition together with the per-sample scale the channel was divided by.
struct PreparedCondition {
    ConditionVector condition;
    double channel_scale = 1.0;
};

/// Normalizes the partial channel by its observed RMS and the pilot by the
/// calibrated signal power. The same scale must divide the training target.
PreparedCondition prepare_condition(const MaskedChannel &masked, const ComplexVector &pilot,
                                    double signal_power);
double observed_rms(const MaskedChannel &masked);

/// Condition embedding: one linear + activation layer on (pilot, partial,
/// indicator); zero when the condition is absent. One column for mlp, one
/// column per RIS2 element for conv1d.
RealMatrix embed_condition(const ConditionVector &cond, const DenoiserParams &params);

/// Differentiable forward pass over a batch (columns). Output is in the
/// network's native layout; see to_native_layout().
struct ForwardGraph {
    std::vector<ad::Var> params;  // aligned with DenoiserParams::tensors
    ad::Var output;
};

ForwardGraph build_forward(ad::Tape &tape, const DenoiserParams &params, const RealMatrix &x_t,
                           std::span<const Index> steps, const ConditionBatch &cond);

/// Reorders a batch of vectorized channels into the network's output layout
/// and back; the identity for mlp.
RealMatrix to_native_layout(const DenoiserParams &params, const RealMatrix &x);
RealMatrix from_native_layout(const DenoiserParams &params, const RealMatrix &y);

/// eps_theta(x_t, t, cond) for every column. Throws numerical_overflow with
/// the layer index if an activation goes non-finite.
RealMatrix predict_noise(const DenoiserParams &params, const RealMatrix &x_t,
                         std::span<const Index> steps, const ConditionBatch &cond);
RealVector predict_noise(const DenoiserParams &params, const RealVector &x_t, Index t,
                         const ConditionVector &cond);

/// Response of the first layer to the condition embedding. It does not depend
/// on x_t or t, so a sampler computes it once and reuses it at every step.
RealMatrix condition_response(const DenoiserParams &params, const ConditionBatch &cond);
/// Tape-free forward pass from a precomputed condition_response(); agrees
/// with build_forward() to rounding.
RealMatrix predict_noise_cached(const DenoiserParams &params, const RealMatrix &x_t,
                                std::span<const Index> steps, const RealMatrix &response);

/// Guided noise-prediction loss sum_b ||eps_b - (l2 eps_cond + (1 - l2) eps_uncond)||^2 / B.
/// `cond.present` is the per-sample dropout decision for the conditional branch.
struct LossGraph {
    ForwardGraph forward;
    ad::Var loss;
};

LossGraph build_guided_loss(ad::Tape &tape, const DenoiserParams &params, const RealMatrix &x_t,
                            std::span<const Index> steps, const ConditionBatch &cond,
                            const RealMatrix &eps, double lambda2);

/// Reverse-mode gradients of `loss` for every tensor, aligned with params.tensors.
std::vector<RealMatrix> backward(ad::Tape &tape, const LossGraph &graph);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<RealMatrix> m, v;
    std::int64_t step = 0;

    static AdamState zeros_like(const DenoiserParams &params);
};

/// In-place bias-corrected Adam step on `params`.
void adam_update(DenoiserParams &params, std::span<const RealMatrix> grads, AdamState &state,
                 double lr, const AdamConfig &cfg = {});

/// Binds one condition per chain (column) to a parameter set so the
/// diffusion sampler can query both guidance branches.
class ConditionedDenoiser : public NoisePredictor {
public:
    ConditionedDenoiser(const DenoiserParams &params, ConditionBatch cond);

    Index dimension() const override { return params_.channel_length(); }
    RealMatrix predict(const RealMatrix &x_t, Index t, bool conditional) const override;
    RealMatrix predict_guided(const RealMatrix &x_t, Index t, const GuidanceConfig &cfg) const override;

private:
    const DenoiserParams &params_;
    Index batch_ = 0;
    RealMatrix response_;  // condition_response of [conditional | unconditional]
};

} // namespace riscdm
