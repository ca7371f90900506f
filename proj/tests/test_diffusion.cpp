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

#include "riscdm/diffusion.hpp"

#include <cmath>

// Covered tests:
// - Linear schedule endpoints, midpoint, cumulative product (high-precision references)
// - Schedule validation and fingerprint
// - Posterior variance bounds
// - Forward step chain vs closed-form jump (moments)
// - Reverse step with the true noise lands on the posterior mean
// - Reverse noise modes and the noiseless final step
// - Guided noise blend and lambda2 validation
// - Ancestral sampling with the exact score of a Gaussian toy
// - Guidance endpoints select the conditional / unconditional model

using namespace riscdm;

namespace {

// Exact noise predictor for x0 ~ N(mu, s^2 I): E[eps | x_t].
class GaussianScore : public NoisePredictor {
public:
    GaussianScore(const Schedule &s, RealVector mu_cond, RealVector mu_uncond, double sd)
        : s_(s), mu_c_(std::move(mu_cond)), mu_u_(std::move(mu_uncond)), sd_(sd)
    {
    }
    Index dimension() const override { return mu_c_.size(); }
    RealMatrix predict(const RealMatrix &x, Index t, bool conditional) const override
    {
        const double ab = s_.alpha_bar(t);
        const RealVector &mu = conditional ? mu_c_ : mu_u_;
        const double var = ab * sd_ * sd_ + 1.0 - ab;
        return std::sqrt(1.0 - ab) * (x.colwise() - std::sqrt(ab) * mu) / var;
    }

private:
    const Schedule &s_;
    RealVector mu_c_, mu_u_;
    double sd_;
};

} // namespace

TEST_CASE("linear schedule matches high-precision reference values")
{
    const Schedule s = build_linear_schedule(500, 1e-4, 0.02);
    CHECK(s.steps() == 500);
    CHECK(s.beta(1) == 1e-4);
    CHECK(s.beta(500) == doctest::Approx(0.02).epsilon(1e-15));
    CHECK(s.beta(250) == doctest::Approx(0.010030060120240481).epsilon(1e-14));
    CHECK(s.alpha_bar(0) == 1.0);
    CHECK(s.alpha_bar(1) == doctest::Approx(0.9999).epsilon(1e-15));
    CHECK(s.alpha_bar(500) == doctest::Approx(0.00635271079701505).epsilon(1e-11));
    CHECK(std::sqrt(s.alpha_bar(500)) == doctest::Approx(0.0797038944908907824).epsilon(1e-11));
    for (Index t = 1; t <= 500; ++t) {
        CHECK(s.alpha(t) == 1.0 - s.beta(t));
        if (t > 1) {
            CHECK(s.beta(t) > s.beta(t - 1));
            CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
        }
    }
}

TEST_CASE("schedule rejects invalid parameters and out-of-range steps")
{
    CHECK_THROWS_AS(build_linear_schedule(1, 1e-4, 0.02), Error);
    CHECK_THROWS_AS(build_linear_schedule(10, 0.0, 0.02), Error);
    CHECK_THROWS_AS(build_linear_schedule(10, 0.03, 0.02), Error);
    CHECK_THROWS_AS(build_linear_schedule(10, 1e-4, 1.0), Error);
    try {
        build_linear_schedule(10, 0.1, 0.01);
    } catch (const Error &e) {
        CHECK(e.code() == ErrorCode::invalid_config);
    }
    const Schedule s = build_linear_schedule(10, 1e-4, 0.02);
    CHECK_THROWS_AS(s.beta(0), Error);
    CHECK_THROWS_AS(s.beta(11), Error);
    CHECK_THROWS_AS(s.alpha_bar(11), Error);
    // constant schedule is allowed
    const Schedule c = build_linear_schedule(4, 0.01, 0.01);
    CHECK(c.alpha_bar(4) == doctest::Approx(std::pow(0.99, 4)));
}

TEST_CASE("schedule fingerprint tracks every parameter")
{
    const auto f = build_linear_schedule(500, 1e-4, 0.02).fingerprint();
    CHECK(f == build_linear_schedule(500, 1e-4, 0.02).fingerprint());
    CHECK(f != build_linear_schedule(499, 1e-4, 0.02).fingerprint());
    CHECK(f != build_linear_schedule(500, 2e-4, 0.02).fingerprint());
    CHECK(f != build_linear_schedule(500, 1e-4, 0.03).fingerprint());
}

TEST_CASE("posterior variance is zero at the first step and bounded by beta")
{
    const Schedule s = build_linear_schedule(500, 1e-4, 0.02);
    CHECK(s.posterior_variance(1) == 0.0);
    for (Index t = 2; t <= 500; ++t) {
        CHECK(s.posterior_variance(t) > 0.0);
        CHECK(s.posterior_variance(t) < s.beta(t));
    }
    // far from the start the ratio tends to one
    CHECK(s.posterior_variance(500) / s.beta(500) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("chained forward steps match the closed-form marginal")
{
    const Schedule s = build_linear_schedule(50, 1e-4, 0.02);
    const Index trials = 20000;
    RealMatrix x0(3, trials);
    x0.row(0).setConstant(1.0);
    x0.row(1).setConstant(-2.0);
    x0.row(2).setConstant(0.5);
    Rng rng(1);
    RealMatrix x = x0;
    for (Index t = 1; t <= 50; ++t)
        x = forward_step(x, s, t, rng);
    const double ab = s.alpha_bar(50);
    for (Index i = 0; i < 3; ++i) {
        const double mean = x.row(i).mean();
        const double var = (x.row(i).array() - mean).square().mean();
        CHECK(std::abs(mean - std::sqrt(ab) * x0(i, 0)) < 0.02);
        CHECK(var == doctest::Approx(1.0 - ab).epsilon(0.05));
    }
    // the jump with the same noise is exactly affine
    const RealMatrix eps = standard_normal(3, 4, rng);
    const RealMatrix j = forward_jump(x0.leftCols(4), s, 50, eps);
    CHECK((j - (std::sqrt(ab) * x0.leftCols(4) + std::sqrt(1 - ab) * eps)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK_THROWS_AS(forward_jump(x0.leftCols(4), s, 50, RealMatrix::Zero(3, 3)), Error);
}

TEST_CASE("single forward step with unit noise")
{
    const Schedule s = build_linear_schedule(10, 0.04, 0.04);
    const RealMatrix x = RealMatrix::Constant(1, 1, 2.0);
    const RealMatrix e = RealMatrix::Constant(1, 1, 1.0);
    CHECK(forward_step(x, s, 3, e)(0, 0) == doctest::Approx(std::sqrt(0.96) * 2.0 + 0.2));
}

TEST_CASE("reverse step with the true noise returns the posterior mean")
{
    const Schedule s = build_linear_schedule(500, 1e-4, 0.02);
    Rng rng(5);
    const RealMatrix x0 = standard_normal(6, 3, rng);
    for (Index t : {2, 17, 250, 500}) {
        const NoisedSample ns = forward_jump(x0, s, t, rng);
        const DiffusionState next =
            reverse_step({ns.x_t, t}, ns.eps, s, RealMatrix::Zero(6, 3));
        const double abp = s.alpha_bar(t - 1), ab = s.alpha_bar(t);
        const RealMatrix mu = (std::sqrt(abp) * s.beta(t) / (1 - ab)) * x0 +
                              (std::sqrt(s.alpha(t)) * (1 - abp) / (1 - ab)) * ns.x_t;
        CHECK(next.step == t - 1);
        CHECK((next.x - mu).cwiseAbs().maxCoeff() < 1e-9);
    }
    // at t = 1 the true noise recovers x0 exactly
    const NoisedSample one = forward_jump(x0, s, 1, rng);
    const DiffusionState back = reverse_step({one.x_t, 1}, one.eps, s, rng);
    CHECK((back.x - x0).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("reverse noise modes scale z by the deviation or the variance")
{
    const Schedule s = build_linear_schedule(100, 1e-4, 0.02);
    const RealMatrix x = RealMatrix::Constant(2, 1, 0.3);
    const RealMatrix eps = RealMatrix::Constant(2, 1, -0.1);
    const RealMatrix z = RealMatrix::Constant(2, 1, 1.0);
    const RealMatrix base = reverse_step({x, 60}, eps, s, RealMatrix::Zero(2, 1)).x;
    const RealMatrix a = reverse_step({x, 60}, eps, s, z, ReverseNoise::std_dev).x;
    const RealMatrix b = reverse_step({x, 60}, eps, s, z, ReverseNoise::literal_variance).x;
    CHECK((a - base)(0) == doctest::Approx(std::sqrt(s.posterior_variance(60))));
    CHECK((b - base)(0) == doctest::Approx(s.posterior_variance(60)));
    // nothing is added at the last step
    CHECK(reverse_step({x, 1}, eps, s, z).x == reverse_step({x, 1}, eps, s, RealMatrix::Zero(2, 1)).x);
    CHECK_THROWS_AS(reverse_step({x, 0}, eps, s, z), Error);
    CHECK_THROWS_AS(reverse_step({x, 5}, RealMatrix::Zero(3, 1), s, z), Error);
}

TEST_CASE("guided noise is the lambda2 blend")
{
    RealMatrix c(2, 1), u(2, 1);
    c << 1.0, 2.0;
    u << -1.0, 4.0;
    CHECK(guided_noise(c, u, GuidanceConfig{1.0}) == c);
    CHECK(guided_noise(c, u, GuidanceConfig{0.0}) == u);
    const RealMatrix g = guided_noise(c, u, GuidanceConfig{0.7});
    CHECK(g(0) == doctest::Approx(0.4));
    CHECK(g(1) == doctest::Approx(2.6));
    CHECK_THROWS_AS(guided_noise(c, u, GuidanceConfig{1.5}), Error);
    CHECK_THROWS_AS(guided_noise(c, u, GuidanceConfig{-0.1}), Error);
    CHECK_THROWS_AS(guided_noise(c, RealMatrix::Zero(3, 1), GuidanceConfig{0.5}), Error);
}

TEST_CASE("ancestral sampling with the exact score reproduces a Gaussian target")
{
    const Schedule s = build_linear_schedule(500, 1e-4, 0.02);
    RealVector mu(2);
    mu << 1.5, -0.5;
    const double sd = 0.3;
    GaussianScore model(s, mu, mu, sd);
    Rng rng(9);
    const Index chains = 20000;
    const RealMatrix x = sample(model, s, GuidanceConfig{0.7}, chains, rng);
    for (Index i = 0; i < 2; ++i) {
        const double m = x.row(i).mean();
        const double v = (x.row(i).array() - m).square().mean();
        CHECK(m == doctest::Approx(mu(i)).epsilon(0.02));
        CHECK(std::sqrt(v) == doctest::Approx(sd).epsilon(0.05));
    }
    const double cov = ((x.row(0).array() - x.row(0).mean()) * (x.row(1).array() - x.row(1).mean())).mean();
    CHECK(std::abs(cov) < 0.01);
}

TEST_CASE("guidance endpoints select one model and intermediate weights interpolate")
{
    const Schedule s = build_linear_schedule(200, 1e-4, 0.02);
    RealVector mc = RealVector::Constant(1, 2.0), mu = RealVector::Constant(1, -2.0);
    GaussianScore model(s, mc, mu, 0.2);
    auto mean_for = [&](double l2) {
        Rng rng(3);
        return sample(model, s, GuidanceConfig{l2}, 4000, rng).mean();
    };
    const double m1 = mean_for(1.0), m0 = mean_for(0.0), mh = mean_for(0.5);
    CHECK(m1 == doctest::Approx(2.0).epsilon(0.03));
    CHECK(m0 == doctest::Approx(-2.0).epsilon(0.03));
    CHECK(mh > m0);
    CHECK(mh < m1);
    CHECK(std::abs(mh) < 0.1);
}

TEST_CASE("sampling is deterministic for a fixed stream")
{
    const Schedule s = build_linear_schedule(50, 1e-4, 0.02);
    GaussianScore model(s, RealVector::Zero(3), RealVector::Ones(3), 1.0);
    Rng a(77), b(77), c(78);
    const RealMatrix xa = sample(model, s, GuidanceConfig{0.7}, 5, a);
    CHECK(xa == sample(model, s, GuidanceConfig{0.7}, 5, b));
    CHECK(xa != sample(model, s, GuidanceConfig{0.7}, 5, c));
    CHECK_THROWS_AS(sample(model, s, GuidanceConfig{0.7}, 0, a), Error);
}
