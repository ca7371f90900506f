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

#include <cmath>
#include <numbers>
#include <vector>

namespace riscdm {

struct SystemGeometry {
    Index n_bs_antennas = 4;  // N
    Index m1_elements = 16;   // RIS1
    Index m2_elements = 16;   // RIS2
    double element_spacing = 0.25;  // in wavelengths
    double carrier_wavelength = 1.0;

    void validate() const;
    /// Length of a vectorized N x M2 cascaded channel.
    Index channel_length() const { return 2 * n_bs_antennas * m2_elements; }
    bool same_array_shape(const SystemGeometry &o) const
    {
        return n_bs_antennas == o.n_bs_antennas && m1_elements == o.m1_elements &&
               m2_elements == o.m2_elements;
    }
};

/// Sinc-law correlation between elements of a uniform linear surface:
/// entry (f, g) is sin(k)/k with k = 2 pi |f - g| d / lambda, and 1 on the diagonal.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> sinc_correlation(Index m, Scalar spacing)
{
    require(m >= 1, "correlation dimension must be >= 1");
    require(spacing > Scalar(0), "element spacing must be > 0");
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> omega(m, m);
    for (Index f = 0; f < m; ++f)
        for (Index g = 0; g < m; ++g) {
            const Scalar k = Scalar(2) * std::numbers::pi_v<Scalar> * Scalar(std::abs(f - g)) * spacing;
            omega(f, g) = (f == g) ? Scalar(1) : std::sin(k) / k;
        }
    return omega;
}

struct SpatialCorrelation {
    RealMatrix matrix;
    RealMatrix cholesky_factor;  // lower triangular, L L^T = matrix (+ jitter)
    double jitter = 0.0;

    Index dimension() const { return matrix.rows(); }
};

inline constexpr double max_cholesky_jitter = 1e-10;

/// Throws ErrorCode::not_psd if no jitter up to 1e-10 makes the matrix factorable.
SpatialCorrelation build_correlation_matrix(Index m, double spacing);
SpatialCorrelation correlation_from_matrix(const RealMatrix &omega);

/// L w with w ~ CN(0, I): a CN(0, Omega) draw.
ComplexVector sample_correlated_vector(const SpatialCorrelation &corr, Rng &rng);

struct RisPhaseConfig {
    ComplexVector theta1;  // length M1, unit modulus
    ComplexVector theta2;  // length M2, unit modulus

    static RisPhaseConfig random(Index m1, Index m2, Rng &rng);
    static RisPhaseConfig identity(Index m1, Index m2);
};

struct ChannelRealization {
    ComplexVector u;         // user -> RIS1, M1
    ComplexMatrix d_matrix;  // RIS1 -> RIS2, M2 x M1
    ComplexMatrix g2;        // RIS2 -> BS, N x M2
    RisPhaseConfig phases;

    Index n() const { return g2.rows(); }
    Index m1() const { return u.size(); }
    Index m2() const { return g2.cols(); }
};

ChannelRealization sample_realization(const SystemGeometry &geom, const SpatialCorrelation &corr1,
                                      const SpatialCorrelation &corr2, Rng &rng);

struct CascadedChannel {
    Index m_index = 0;  // zero-based RIS1 element
    ComplexMatrix b_matrix;  // N x M2
};

/// B_m = G2 diag(d_m u_m), so that h = sum_m B_m theta2 theta1_m.
CascadedChannel compose_cascaded(const ChannelRealization &real, Index m_index);

/// h = G2 diag(theta2) D diag(theta1) u.
ComplexVector end_to_end_channel(const ChannelRealization &real);

struct PilotObservation {
    ComplexVector y;
    double snr_db = 0.0;
    double noise_variance = 0.0;
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

/// Mean per-antenna received power E|h_i|^2, estimated over `draws` realizations.
double calibrate_signal_power(const SystemGeometry &geom, const SpatialCorrelation &corr1,
                              const SpatialCorrelation &corr2, Rng &rng, Index draws = 10000);

/// y = h s + n with s = 1 and n ~ CN(0, signal_power / snr).
PilotObservation simulate_pilot(const ChannelRealization &real, double snr_db, double signal_power,
                                Rng &rng);
PilotObservation noiseless_pilot(const ChannelRealization &real);

class MaskSpec {
public:
    /// Uniformly random observed subset with M2 - round(rho M2) elements.
    static MaskSpec random(Index m2, double mask_ratio, std::uint64_t seed);
    static MaskSpec from_indicator(const RealVector &indicator);

    Index m2() const { return m2_; }
    double requested_ratio() const { return requested_; }
    /// 1 - M2^P / M2, exact after rounding.
    double mask_ratio() const { return 1.0 - double(observed_.size()) / double(m2_); }
    const std::vector<Index> &observed_indices() const { return observed_; }
    std::uint64_t seed() const { return seed_; }
    RealVector indicator() const;

private:
    Index m2_ = 0;
    double requested_ = 0.0;
    std::vector<Index> observed_;
    std::uint64_t seed_ = 0;
};

struct MaskedChannel {
    ComplexMatrix partial;  // N x M2, masked columns exactly zero
    RealVector indicator;   // M2, 1 = observed
};

MaskedChannel apply_mask(const ComplexMatrix &b, const MaskSpec &mask);

/// Column-major, all real parts followed by all imaginary parts.
template <typename Derived>
RealVector vectorize(const Eigen::MatrixBase<Derived> &b)
{
    const Index n = b.size();
    RealVector x(2 * n);
    Index k = 0;
    for (Index j = 0; j < b.cols(); ++j)
        for (Index i = 0; i < b.rows(); ++i, ++k) {
            x(k) = std::real(b(i, j));
            x(n + k) = std::imag(b(i, j));
        }
    return x;
}

template <typename Derived>
ComplexMatrix devectorize(const Eigen::MatrixBase<Derived> &x, Index n, Index m2)
{
    require(x.size() == 2 * n * m2, "devectorize: length " + std::to_string(x.size()) +
                                        " does not match 2*" + std::to_string(n) + "*" +
                                        std::to_string(m2));
    const Index len = n * m2;
    ComplexMatrix b(n, m2);
    Index k = 0;
    for (Index j = 0; j < m2; ++j)
        for (Index i = 0; i < n; ++i, ++k)
            b(i, j) = Complex(x(k), x(len + k));
    return b;
}

} // namespace riscdm
