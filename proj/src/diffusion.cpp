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

#include "riscdm/diffusion.hpp"

namespace riscdm {

DiffusionState reverse_step(const DiffusionState &state, const RealMatrix &eps_tilde,
                            const Schedule &s, const RealMatrix &z, ReverseNoise mode)
{
    const Index t = state.step;
    require(t >= 1 && t <= s.steps(), "reverse_step: state step out of range");
    require(eps_tilde.rows() == state.x.rows() && eps_tilde.cols() == state.x.cols(),
            "reverse_step: noise prediction shape mismatch");
    require(z.rows() == state.x.rows() && z.cols() == state.x.cols(),
            "reverse_step: z shape mismatch");

    const double var = s.posterior_variance(t);
    const double noise_scale = (mode == ReverseNoise::std_dev) ? std::sqrt(var) : var;
    DiffusionState next;
    next.step = t - 1;
    next.x = (state.x - (s.beta(t) / std::sqrt(1.0 - s.alpha_bar(t))) * eps_tilde) /
             std::sqrt(s.alpha(t));
    if (t > 1)
        next.x += noise_scale * z;
    return next;
}

DiffusionState reverse_step(const DiffusionState &state, const RealMatrix &eps_tilde,
                            const Schedule &s, Rng &rng, ReverseNoise mode)
{
    if (state.step == 1)
        return reverse_step(state, eps_tilde, s, RealMatrix::Zero(state.x.rows(), state.x.cols()),
                            mode);
    return reverse_step(state, eps_tilde, s, standard_normal(state.x.rows(), state.x.cols(), rng),
                        mode);
}

RealMatrix sample(const NoisePredictor &model, const Schedule &s, const GuidanceConfig &cfg,
                  Index chains, Rng &rng, ReverseNoise mode)
{
    cfg.validate();
    require(chains >= 1, "sample: chains must be >= 1");
    DiffusionState state{standard_normal(model.dimension(), chains, rng), s.steps()};
    while (state.step >= 1) {
        const RealMatrix eps = model.predict_guided(state.x, state.step, cfg);
        require(eps.allFinite(), "sample: non-finite noise prediction at step " +
                                     std::to_string(state.step),
                ErrorCode::numerical_overflow);
        state = reverse_step(state, eps, s, rng, mode);
    }
    return state.x;
}

} // namespace riscdm
