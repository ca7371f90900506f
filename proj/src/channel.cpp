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

#include "riscdm/channel.hpp"

#include <algorithm>
#include <numeric>

namespace riscdm {

void SystemGeometry::validate() const
{
    require(n_bs_antennas >= 1 && m1_elements >= 1 && m2_elements >= 1,
            "geometry: N, M1 and M2 must all be >= 1", ErrorCode::invalid_config);
    require(element_spacing > 0.0 && std::isfinite(element_spacing),
            "geometry: element_spacing must be > 0", ErrorCode::invalid_config);
    require(carrier_wavelength > 0.0, "geometry: carrier_wavelength must be > 0",
            ErrorCode::invalid_config);
}

SpatialCorrelation correlation_from_matrix(const RealMatrix &omega)
{
    require(omega.rows() == omega.cols() && omega.rows() >= 1, "correlation matrix must be square");
    const Index m = omega.rows();
    double jitter = 0.0;
    for (;;) {
        Eigen::LLT<RealMatrix> llt(omega + jitter * RealMatrix::Identity(m, m));
        if (llt.info() == Eigen::Success) {
            SpatialCorrelation out;
            out.matrix = omega;
            out.cholesky_factor = llt.matrixL();
            out.jitter = jitter;
            return out;
        }
        if (jitter >= max_cholesky_jitter)
            break;
        jitter = (jitter == 0.0) ? 1e-16 : std::min(jitter * 10.0, max_cholesky_jitter);
    }
    throw Error(ErrorCode::not_psd, "correlation not PSD (Cholesky failed with jitter 1e-10)");
}

SpatialCorrelation build_correlation_matrix(Index m, double spacing)
{
    return correlation_from_matrix(sinc_correlation<double>(m, spacing));
}

ComplexVector sample_correlated_vector(const SpatialCorrelation &corr, Rng &rng)
{
    const ComplexVector w = circular_normal(corr.dimension(), 1, rng);
    return corr.cholesky_factor.cast<Complex>() * w;
}

static ComplexVector random_phases(Index m, Rng &rng)
{
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    ComplexVector theta(m);
    for (Index i = 0; i < m; ++i)
        theta(i) = std::polar(1.0, angle(rng));
    return theta;
}

RisPhaseConfig RisPhaseConfig::random(Index m1, Index m2, Rng &rng)
{
    RisPhaseConfig cfg;
    cfg.theta1 = random_phases(m1, rng);
    cfg.theta2 = random_phases(m2, rng);
    return cfg;
}

RisPhaseConfig RisPhaseConfig::identity(Index m1, Index m2)
{
    return {ComplexVector::Ones(m1), ComplexVector::Ones(m2)};
}

ChannelRealization sample_realization(const SystemGeometry &geom, const SpatialCorrelation &corr1,
                                      const SpatialCorrelation &corr2, Rng &rng)
{
    geom.validate();
    require(corr1.dimension() == geom.m1_elements,
            "sample_realization: corr1 dimension does not match M1", ErrorCode::geometry_mismatch);
    require(corr2.dimension() == geom.m2_elements,
            "sample_realization: corr2 dimension does not match M2", ErrorCode::geometry_mismatch);

    const ComplexMatrix l2 = corr2.cholesky_factor.cast<Complex>();
    ChannelRealization real;
    real.u = sample_correlated_vector(corr1, rng);
    // columns of D and rows of G2 both live on the RIS2 array
    real.d_matrix = l2 * circular_normal(geom.m2_elements, geom.m1_elements, rng);
    real.g2 = (l2 * circular_normal(geom.m2_elements, geom.n_bs_antennas, rng)).transpose();
    real.phases = RisPhaseConfig::random(geom.m1_elements, geom.m2_elements, rng);
    return real;
}

CascadedChannel compose_cascaded(const ChannelRealization &real, Index m_index)
{
    require(m_index >= 0 && m_index < real.m1(),
            "compose_cascaded: m_index " + std::to_string(m_index) + " out of range [0, " +
                std::to_string(real.m1()) + ")");
    const ComplexVector d_tilde = real.d_matrix.col(m_index) * real.u(m_index);
    return {m_index, real.g2 * d_tilde.asDiagonal()};
}

ComplexVector end_to_end_channel(const ChannelRealization &real)
{
    return real.g2 * (real.phases.theta2.asDiagonal() *
                      (real.d_matrix * (real.phases.theta1.asDiagonal() * real.u)));
}

double calibrate_signal_power(const SystemGeometry &geom, const SpatialCorrelation &corr1,
                              const SpatialCorrelation &corr2, Rng &rng, Index draws)
{
    require(draws >= 1, "calibrate_signal_power: draws must be >= 1");
    double total = 0.0;
    for (Index k = 0; k < draws; ++k)
        total += end_to_end_channel(sample_realization(geom, corr1, corr2, rng)).squaredNorm();
    return total / double(draws * geom.n_bs_antennas);
}

PilotObservation simulate_pilot(const ChannelRealization &real, double snr_db, double signal_power,
                                Rng &rng)
{
    require(std::isfinite(snr_db), "simulate_pilot: snr_db must be finite");
    require(signal_power > 0.0, "simulate_pilot: signal_power must be > 0");
    PilotObservation obs;
    obs.snr_db = snr_db;
    obs.noise_variance = signal_power / db_to_linear(snr_db);
    obs.y = end_to_end_channel(real) +
            std::sqrt(obs.noise_variance) * circular_normal(real.n(), 1, rng);
    return obs;
}

PilotObservation noiseless_pilot(const ChannelRealization &real)
{
    return {end_to_end_channel(real), std::numeric_limits<double>::infinity(), 0.0};
}

MaskSpec MaskSpec::random(Index m2, double mask_ratio, std::uint64_t seed)
{
    require(m2 >= 1, "mask: M2 must be >= 1");
    require(mask_ratio >= 0.0 && mask_ratio < 1.0, "mask: ratio must lie in [0, 1)",
            ErrorCode::invalid_config);
    const Index masked = static_cast<Index>(std::llround(mask_ratio * double(m2)));
    const Index observed = m2 - masked;
    require(observed >= 1, "mask: ratio " + std::to_string(mask_ratio) +
                               " leaves no observed element for M2 = " + std::to_string(m2),
            ErrorCode::invalid_config);

    std::vector<Index> order(static_cast<std::size_t>(m2));
    std::iota(order.begin(), order.end(), Index(0));
    Rng rng(seed);
    // Fisher-Yates written out: std::shuffle's draw pattern is library-defined
    for (Index i = m2 - 1; i > 0; --i) {
        const auto j = static_cast<Index>(rng() % static_cast<std::uint64_t>(i + 1));
        std::swap(order[std::size_t(i)], order[std::size_t(j)]);
    }
    MaskSpec mask;
    mask.m2_ = m2;
    mask.requested_ = mask_ratio;
    mask.seed_ = seed;
    mask.observed_.assign(order.begin(), order.begin() + observed);
    std::sort(mask.observed_.begin(), mask.observed_.end());
    return mask;
}

MaskSpec MaskSpec::from_indicator(const RealVector &indicator)
{
    MaskSpec mask;
    mask.m2_ = indicator.size();
    for (Index j = 0; j < indicator.size(); ++j) {
        require(indicator(j) == 0.0 || indicator(j) == 1.0, "mask indicator must be binary");
        if (indicator(j) == 1.0)
            mask.observed_.push_back(j);
    }
    require(!mask.observed_.empty(), "mask indicator has no observed element");
    mask.requested_ = mask.mask_ratio();
    return mask;
}

RealVector MaskSpec::indicator() const
{
    RealVector ind = RealVector::Zero(m2_);
    for (auto j : observed_)
        ind(j) = 1.0;
    return ind;
}

MaskedChannel apply_mask(const ComplexMatrix &b, const MaskSpec &mask)
{
    require(b.cols() == mask.m2(), "apply_mask: mask dimension does not match M2",
            ErrorCode::geometry_mismatch);
    MaskedChannel out;
    out.partial = ComplexMatrix::Zero(b.rows(), b.cols());
    for (auto j : mask.observed_indices())
        out.partial.col(j) = b.col(j);
    out.indicator = mask.indicator();
    return out;
}

} // namespace riscdm
