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

#include "riscdm/common.hpp"
#include "riscdm/rng.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

namespace riscdm {

/// Variance schedule beta_1..beta_T with the derived alpha and cumulative
/// alpha-bar tables. Steps are 1-based; alpha_bar(0) is 1.
template <typename Scalar = double>
class NoiseSchedule {
public:
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    static NoiseSchedule linear(Index t_max, Scalar beta_start, Scalar beta_end)
    {
        require(t_max >= 2, "schedule: t_max must be >= 2", ErrorCode::invalid_config);
        require(beta_start > Scalar(0) && beta_start <= beta_end && beta_end < Scalar(1),
                "schedule: need 0 < beta_start <= beta_end < 1", ErrorCode::invalid_config);
        NoiseSchedule s;
        s.beta_start_ = beta_start;
        s.beta_end_ = beta_end;
        s.beta_.resize(t_max);
        s.alpha_.resize(t_max);
        s.alpha_bar_.resize(t_max + 1);
        s.alpha_bar_(0) = Scalar(1);
        for (Index t = 1; t <= t_max; ++t) {
            const Scalar b =
                beta_start + Scalar(t - 1) * (beta_end - beta_start) / Scalar(t_max - 1);
            s.beta_(t - 1) = b;
            s.alpha_(t - 1) = Scalar(1) - b;
            s.alpha_bar_(t) = s.alpha_bar_(t - 1) * s.alpha_(t - 1);
        }
        return s;
    }

    Index steps() const { return beta_.size(); }
    Scalar beta_start() const { return beta_start_; }
    Scalar beta_end() const { return beta_end_; }
    Scalar beta(Index t) const { return beta_(check(t) - 1); }
    Scalar alpha(Index t) const { return alpha_(check(t) - 1); }
    Scalar alpha_bar(Index t) const
    {
        require(t >= 0 && t <= steps(), "schedule: step out of range");
        return alpha_bar_(t);
    }

    /// (1 - abar_{t-1}) / (1 - abar_t) * beta_t; zero at t = 1.
    Scalar posterior_variance(Index t) const
    {
        check(t);
        return (Scalar(1) - alpha_bar_(t - 1)) / (Scalar(1) - alpha_bar_(t)) * beta_(t - 1);
    }

    std::uint64_t fingerprint() const
    {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        auto mix = [&h](std::uint64_t v) {
            for (int i = 0; i < 8; ++i) {
                h ^= (v >> (8 * i)) & 0xffU;
                h *= 0x100000001b3ULL;
            }
        };
        mix(static_cast<std::uint64_t>(steps()));
        mix(std::bit_cast<std::uint64_t>(double(beta_start_)));
        mix(std::bit_cast<std::uint64_t>(double(beta_end_)));
        return h;
    }

private:
    Index check(Index t) const
    {
        require(t >= 1 && t <= steps(), "schedule: step " + std::to_string(t) +
                                            " out of range [1, " + std::to_string(steps()) + "]");
        return t;
    }

    Scalar beta_start_{}, beta_end_{};
    Vector beta_, alpha_, alpha_bar_;
};

using Schedule = NoiseSchedule<double>;

inline Schedule build_linear_schedule(Index t_max, double beta_start, double beta_end)
{
    return Schedule::linear(t_max, beta_start, beta_end);
}

inline double posterior_variance(const Schedule &s, Index t) { return s.posterior_variance(t); }

// x_t = sqrt(1 - beta_t) x_{t-1} + sqrt(beta_t) eps, column-wise.
template <typename A, typename B>
RealMatrix forward_step(const Eigen::MatrixBase<A> &x_prev, const Schedule &s, Index t,
                        const Eigen::MatrixBase<B> &eps)
{
    require(x_prev.rows() == eps.rows() && x_prev.cols() == eps.cols(),
            "forward_step: noise shape mismatch");
    return std::sqrt(1.0 - s.beta(t)) * x_prev + std::sqrt(s.beta(t)) * eps;
}

template <typename A>
RealMatrix forward_step(const Eigen::MatrixBase<A> &x_prev, const Schedule &s, Index t, Rng &rng)
{
    return forward_step(x_prev, s, t, standard_normal(x_prev.rows(), x_prev.cols(), rng));
}

struct NoisedSample {
    RealMatrix x_t;
    RealMatrix eps;
};

/// Closed-form marginal draw x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
template <typename A, typename B>
RealMatrix forward_jump(const Eigen::MatrixBase<A> &x0, const Schedule &s, Index t,
                        const Eigen::MatrixBase<B> &eps)
{
    require(x0.rows() == eps.rows() && x0.cols() == eps.cols(), "forward_jump: noise shape mismatch");
    require(t >= 1, "forward_jump: t must be >= 1");
    const double ab = s.alpha_bar(t);
    return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

template <typename A>
NoisedSample forward_jump(const Eigen::MatrixBase<A> &x0, const Schedule &s, Index t, Rng &rng)
{
    NoisedSample out;
    out.eps = standard_normal(x0.rows(), x0.cols(), rng);
    out.x_t = forward_jump(x0, s, t, out.eps);
    return out;
}

struct GuidanceConfig {
    double lambda2 = 0.7;

    void validate() const
    {
        require(lambda2 >= 0.0 && lambda2 <= 1.0, "guidance: lambda2 must lie in [0, 1]",
                ErrorCode::invalid_config);
    }
};

/// lambda2 * eps_cond + (1 - lambda2) * eps_uncond.
template <typename A, typename B>
RealMatrix guided_noise(const Eigen::MatrixBase<A> &eps_cond, const Eigen::MatrixBase<B> &eps_uncond,
                        const GuidanceConfig &cfg)
{
    cfg.validate();
    require(eps_cond.rows() == eps_uncond.rows() && eps_cond.cols() == eps_uncond.cols(),
            "guided_noise: length mismatch");
    return cfg.lambda2 * eps_cond + (1.0 - cfg.lambda2) * eps_uncond;
}

/// One or more chains (columns) at diffusion step `step`.
struct DiffusionState {
    RealMatrix x;
    Index step = 0;
};

enum class ReverseNoise {
    std_dev,           // sqrt(Sigma) z, the Gaussian reverse transition
    literal_variance,  // Sigma z, compatibility form
};

/// x_{t-1} = (x_t - beta_t / sqrt(1 - abar_t) eps) / sqrt(alpha_t) + noise_scale * z.
DiffusionState reverse_step(const DiffusionState &state, const RealMatrix &eps_tilde,
                            const Schedule &s, const RealMatrix &z,
                            ReverseNoise mode = ReverseNoise::std_dev);
/// Draws z from the stream; z is zero at t = 1.
DiffusionState reverse_step(const DiffusionState &state, const RealMatrix &eps_tilde,
                            const Schedule &s, Rng &rng, ReverseNoise mode = ReverseNoise::std_dev);

/// A noise-prediction model with its condition already bound.
class NoisePredictor {
public:
    virtual ~NoisePredictor() = default;
    virtual Index dimension() const = 0;
    /// Predicted noise for every column of `x_t`.
    virtual RealMatrix predict(const RealMatrix &x_t, Index t, bool conditional) const = 0;
    /// Blended prediction; override to batch both branches into one pass.
    virtual RealMatrix predict_guided(const RealMatrix &x_t, Index t, const GuidanceConfig &cfg) const
    {
        if (cfg.lambda2 == 1.0)
            return predict(x_t, t, true);
        if (cfg.lambda2 == 0.0)
            return predict(x_t, t, false);
        return guided_noise(predict(x_t, t, true), predict(x_t, t, false), cfg);
    }
};

/// Ancestral sampling from x_T ~ N(0, I) down to x_0 for `chains` columns.
RealMatrix sample(const NoisePredictor &model, const Schedule &s, const GuidanceConfig &cfg,
                  Index chains, Rng &rng, ReverseNoise mode = ReverseNoise::std_dev);

} // namespace riscdm
