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

#include "riscdm/checkpoint.hpp"
#include "riscdm/io.hpp"
#include "riscdm/network.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

// Covered tests:
// - Step embedding values
// - Hand-computed forward pass of a one-unit network
// - Tape forward vs tape-free fast path, both architectures
// - Loss gradients vs central finite differences, both architectures
// - Absent condition ignores the condition contents
// - Zero-initialized output / condition layers
// - Guided prediction equals the explicit blend
// - Native layout round trip
// - Condition normalization (observed RMS, pilot power)
// - Overflow guard names the layer
// - Adam: first step size, convergence on a quadratic, shape guard
// - Checkpoint round trip, corruption, geometry mismatch

using namespace riscdm;
namespace fs = std::filesystem;

namespace {

ArchitectureDescriptor small_arch(ArchitectureKind kind)
{
    ArchitectureDescriptor a;
    a.kind = kind;
    a.hidden_width = 5;
    a.hidden_layers = 2;
    a.step_embedding_dim = 4;
    a.condition_embedding_dim = 3;
    a.kernel_size = 3;
    return a;
}

ConditionBatch random_conditions(Index n, Index m2, Index b, Rng &rng)
{
    ConditionBatch c;
    c.pilot = standard_normal(2 * n, b, rng);
    c.partial = standard_normal(2 * n * m2, b, rng);
    c.indicator = RealMatrix::Ones(m2, b);
    for (Index j = 0; j < b; ++j)
        c.indicator(j % m2, j) = 0.0;
    c.present = RealVector::Ones(b);
    if (b > 1)
        c.present(1) = 0.0;
    return c;
}

double loss_value(const DenoiserParams &p, const RealMatrix &x, std::span<const Index> steps,
                  const ConditionBatch &c, const RealMatrix &eps, double l2)
{
    ad::Tape tape;
    return build_guided_loss(tape, p, x, steps, c, eps, l2).loss.value()(0, 0);
}

fs::path temp_path(const std::string &name)
{
    return fs::temp_directory_path() / ("riscdm_test_denoiser_" + name);
}

Checkpoint small_checkpoint(Rng &rng)
{
    Checkpoint ck;
    ck.geometry = SystemGeometry{2, 3, 3};
    ck.params = init_params(small_arch(ArchitectureKind::conv1d), 2, 3, rng, {false, false});
    ck.t_max = 20;
    ck.signal_power = 9.5;
    ck.epoch = 3;
    ck.adam = AdamState::zeros_like(ck.params);
    for (auto &m : ck.adam->m)
        m.setRandom();
    for (auto &v : ck.adam->v)
        v = v.setRandom().cwiseAbs();
    ck.adam->step = 42;
    ck.training_config = "{\"epochs\":3}";
    return ck;
}

} // namespace

TEST_CASE("step embedding is sines then cosines on a geometric frequency ladder")
{
    const RealVector e0 = step_embedding(0, 4);
    CHECK(e0(0) == 0.0);
    CHECK(e0(1) == 0.0);
    CHECK(e0(2) == 1.0);
    CHECK(e0(3) == 1.0);
    const RealVector e = step_embedding(7, 4);
    CHECK(e(0) == doctest::Approx(std::sin(7.0)));
    CHECK(e(1) == doctest::Approx(std::sin(0.07)));
    CHECK(e(2) == doctest::Approx(std::cos(7.0)));
    CHECK(e(3) == doctest::Approx(std::cos(0.07)));
    CHECK_THROWS_AS(step_embedding(3, 5), Error);
}

TEST_CASE("one-unit network matches a hand computation")
{
    ArchitectureDescriptor a;
    a.kind = ArchitectureKind::mlp;
    a.hidden_width = 1;
    a.hidden_layers = 1;
    a.step_embedding_dim = 2;
    a.condition_embedding_dim = 1;
    DenoiserParams p = zero_params(a, 1, 1);
    REQUIRE(p.tensors.size() == 6);
    p.tensor("cond.w") << 0.1, -0.2, 0.3, 0.4, -0.5;
    p.tensor("cond.b") << 0.05;
    p.tensor("in.w") << 0.7, -0.3, 0.2, 0.1, 0.9;
    p.tensor("in.b") << -0.1;
    p.tensor("out.w") << 1.5, -2.0;
    p.tensor("out.b") << 0.25, 0.5;

    ConditionVector c;
    c.pilot = RealVector::Zero(2);
    c.pilot << 0.6, -0.4;
    c.partial_channel = RealVector::Zero(2);
    c.partial_channel << 1.2, 0.8;
    c.indicator = RealVector::Ones(1);
    RealVector x(2);
    x << 0.3, -1.1;
    const Index t = 5;

    auto sl = [](double v) { return v / (1.0 + std::exp(-v)); };
    const double ce = sl(0.1 * 0.6 - 0.2 * -0.4 + 0.3 * 1.2 + 0.4 * 0.8 - 0.5 * 1.0 + 0.05);
    const double h = sl(0.7 * 0.3 - 0.3 * -1.1 + 0.2 * std::sin(5.0) + 0.1 * std::cos(5.0) + 0.9 * ce - 0.1);
    const RealVector y = predict_noise(p, x, t, c);
    CHECK(y(0) == doctest::Approx(1.5 * h + 0.25).epsilon(1e-14));
    CHECK(y(1) == doctest::Approx(-2.0 * h + 0.5).epsilon(1e-14));

    c.present = false;
    const double h0 = sl(0.7 * 0.3 - 0.3 * -1.1 + 0.2 * std::sin(5.0) + 0.1 * std::cos(5.0) - 0.1);
    CHECK(predict_noise(p, x, t, c)(0) == doctest::Approx(1.5 * h0 + 0.25).epsilon(1e-14));
    CHECK(embed_condition(c, p).isZero(0.0));
}

TEST_CASE("fast path agrees with the tape forward pass")
{
    for (auto kind : {ArchitectureKind::mlp, ArchitectureKind::conv1d}) {
        CAPTURE(to_string(kind));
        Rng rng(1);
        const DenoiserParams p = init_params(small_arch(kind), 2, 4, rng, {false, false});
        const Index b = 5;
        const RealMatrix x = standard_normal(16, b, rng);
        const std::vector<Index> steps{1, 7, 20, 3, 11};
        const ConditionBatch c = random_conditions(2, 4, b, rng);
        ad::Tape tape;
        const ForwardGraph g = build_forward(tape, p, x, steps, c);
        const RealMatrix slow = from_native_layout(p, g.output.value());
        const RealMatrix fast = predict_noise(p, x, steps, c);
        CHECK((slow - fast).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(fast.cwiseAbs().maxCoeff() > 1e-3);
        // single-column form
        const RealVector one = predict_noise(p, RealVector(x.col(2)), 20,
                                             ConditionVector{c.pilot.col(2), c.partial.col(2),
                                                             c.indicator.col(2), true});
        CHECK((one - fast.col(2)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("loss gradients match central finite differences")
{
    for (auto kind : {ArchitectureKind::mlp, ArchitectureKind::conv1d})
        for (double l2 : {0.7, 1.0, 0.0}) {
            CAPTURE(to_string(kind));
            CAPTURE(l2);
            Rng rng(2);
            DenoiserParams p = init_params(small_arch(kind), 1, 4, rng, {false, false});
            const Index b = 3;
            const RealMatrix x = standard_normal(8, b, rng);
            const RealMatrix eps = standard_normal(8, b, rng);
            const std::vector<Index> steps{2, 9, 30};
            const ConditionBatch c = random_conditions(1, 4, b, rng);
            ad::Tape tape;
            const LossGraph lg = build_guided_loss(tape, p, x, steps, c, eps, l2);
            const std::vector<RealMatrix> grads = backward(tape, lg);
            REQUIRE(grads.size() == p.tensors.size());
            double worst = 0.0;
            const double h = 1e-6;
            for (std::size_t k = 0; k < p.tensors.size(); ++k) {
                RealMatrix &w = p.tensors[k].value;
                for (Index i = 0; i < w.size(); ++i) {
                    const double keep = w(i);
                    w(i) = keep + h;
                    const double up = loss_value(p, x, steps, c, eps, l2);
                    w(i) = keep - h;
                    const double dn = loss_value(p, x, steps, c, eps, l2);
                    w(i) = keep;
                    const double fd = (up - dn) / (2 * h);
                    const double err = std::abs(fd - grads[k](i)) / std::max(1.0, std::abs(fd));
                    worst = std::max(worst, err);
                }
            }
            CHECK(worst < 1e-6);
            if (l2 == 0.0) {
                // unconditional-only loss never reaches the condition layer
                CHECK(grads[0].isZero(0.0));
                CHECK(grads[1].isZero(0.0));
            }
        }
}

TEST_CASE("absent condition makes the prediction independent of the condition contents")
{
    for (auto kind : {ArchitectureKind::mlp, ArchitectureKind::conv1d}) {
        Rng rng(4);
        const DenoiserParams p = init_params(small_arch(kind), 2, 4, rng, {false, false});
        const RealMatrix x = standard_normal(16, 2, rng);
        const std::vector<Index> steps{4, 4};
        ConditionBatch a = random_conditions(2, 4, 2, rng).without_condition();
        ConditionBatch b = random_conditions(2, 4, 2, rng).without_condition();
        CHECK(predict_noise(p, x, steps, a) == predict_noise(p, x, steps, b));
        a.present.setOnes();
        b.present.setOnes();
        CHECK(predict_noise(p, x, steps, a) != predict_noise(p, x, steps, b));
    }
}

TEST_CASE("default initialization silences the output and condition layers")
{
    Rng rng(5);
    const DenoiserParams p = init_params(ArchitectureDescriptor{}, 4, 16, rng);
    CHECK(p.tensor("out.w").isZero(0.0));
    CHECK(p.tensor("out.b").isZero(0.0));
    CHECK(p.tensor("cond.w").isZero(0.0));
    CHECK_FALSE(p.tensor("in.w").isZero(0.0));
    const double bound = 1.0 / std::sqrt(double(p.tensor("in.w").cols()));
    CHECK(p.tensor("in.w").cwiseAbs().maxCoeff() <= bound);
    const ConditionBatch c = random_conditions(4, 16, 3, rng);
    CHECK(predict_noise(p, standard_normal(128, 3, rng), std::vector<Index>{1, 2, 3}, c).isZero(0.0));
    CHECK(p.all_finite());
    CHECK_THROWS_AS(p.tensor("nope"), Error);
}

TEST_CASE("guided prediction is the blend of both branches")
{
    Rng rng(6);
    const DenoiserParams p = init_params(small_arch(ArchitectureKind::conv1d), 2, 4, rng, {false, false});
    ConditionBatch c = random_conditions(2, 4, 3, rng);
    c.present.setOnes();
    const ConditionedDenoiser d(p, c);
    CHECK(d.dimension() == 16);
    const RealMatrix x = standard_normal(16, 3, rng);
    const RealMatrix ec = d.predict(x, 12, true);
    const RealMatrix eu = d.predict(x, 12, false);
    const std::vector<Index> steps(3, 12);
    CHECK((ec - predict_noise(p, x, steps, c)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((eu - predict_noise(p, x, steps, c.without_condition())).cwiseAbs().maxCoeff() < 1e-12);
    for (double l2 : {0.0, 0.3, 0.7, 1.0})
        CHECK((d.predict_guided(x, 12, GuidanceConfig{l2}) - guided_noise(ec, eu, GuidanceConfig{l2}))
                  .cwiseAbs()
                  .maxCoeff() < 1e-12);
    CHECK_THROWS_AS(d.predict(standard_normal(16, 2, rng), 1, true), Error);
}

TEST_CASE("native layout round trip")
{
    Rng rng(7);
    const DenoiserParams p = zero_params(small_arch(ArchitectureKind::conv1d), 3, 5);
    const RealMatrix x = standard_normal(30, 4, rng);
    const RealMatrix y = to_native_layout(p, x);
    CHECK(y.rows() == 6);
    CHECK(y.cols() == 20);
    CHECK(from_native_layout(p, y) == x);
    // column j of B sits at position j: real parts then imaginary parts
    CHECK(y(0, 2) == x(2 * 3, 0));
    CHECK(y(3, 2) == x(15 + 2 * 3, 0));
}

TEST_CASE("condition normalization uses the observed RMS and the signal power")
{
    Rng rng(8);
    const ComplexMatrix b = 7.0 * circular_normal(4, 16, rng);
    const MaskedChannel mc = apply_mask(b, MaskSpec::random(16, 0.5, 2));
    const ComplexVector y = circular_normal(4, 1, rng).col(0) * 10.0;
    const PreparedCondition pc = prepare_condition(mc, y, 100.0);
    const double rms = std::sqrt(mc.partial.squaredNorm() / (4.0 * 8.0));
    CHECK(pc.channel_scale == doctest::Approx(rms));
    CHECK(pc.condition.partial_channel.squaredNorm() / 32.0 == doctest::Approx(1.0));
    CHECK((pc.condition.pilot - vectorize(y) / 10.0).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(pc.condition.indicator == mc.indicator);
    CHECK_THROWS_AS(prepare_condition(mc, y.head(3), 100.0), Error);
    CHECK_THROWS_AS(prepare_condition(mc, y, 0.0), Error);
    // all-zero observations leave the scale at one
    MaskedChannel zero{ComplexMatrix::Zero(4, 16), mc.indicator};
    CHECK(observed_rms(zero) == 1.0);
}

TEST_CASE("overflow in a layer is reported with its index")
{
    Rng rng(9);
    DenoiserParams p = init_params(small_arch(ArchitectureKind::mlp), 1, 2, rng, {false, false});
    p.tensor("hidden1.w").setConstant(1e308);
    const ConditionBatch c = random_conditions(1, 2, 2, rng);
    const RealMatrix x = RealMatrix::Constant(4, 2, 1e3);
    try {
        predict_noise(p, x, std::vector<Index>{1, 1}, c);
        FAIL("expected overflow");
    } catch (const Error &e) {
        CHECK(e.code() == ErrorCode::numerical_overflow);
        CHECK(std::string(e.what()).find("layer 2") != std::string::npos);
    }
    ad::Tape tape;
    CHECK_THROWS_AS(build_forward(tape, p, x, std::vector<Index>{1, 1}, c), Error);
}

TEST_CASE("Adam first step moves each weight by the learning rate")
{
    DenoiserParams p = zero_params(small_arch(ArchitectureKind::mlp), 1, 1);
    AdamState st = AdamState::zeros_like(p);
    std::vector<RealMatrix> g;
    for (const auto &t : p.tensors)
        g.push_back(RealMatrix::Constant(t.value.rows(), t.value.cols(), -3.0));
    adam_update(p, g, st, 0.01);
    CHECK(st.step == 1);
    for (const auto &t : p.tensors)
        CHECK((t.value.array() - 0.01).abs().maxCoeff() < 1e-8);
    g.pop_back();
    CHECK_THROWS_AS(adam_update(p, g, st, 0.01), Error);
}

TEST_CASE("Adam minimizes a quadratic")
{
    DenoiserParams p = zero_params(small_arch(ArchitectureKind::mlp), 1, 1);
    Rng rng(10);
    std::vector<RealMatrix> target;
    for (const auto &t : p.tensors)
        target.push_back(standard_normal(t.value.rows(), t.value.cols(), rng));
    AdamState st = AdamState::zeros_like(p);
    for (int it = 0; it < 3000; ++it) {
        std::vector<RealMatrix> g;
        for (std::size_t k = 0; k < p.tensors.size(); ++k)
            g.push_back(2.0 * (p.tensors[k].value - target[k]));
        adam_update(p, g, st, 0.01);
    }
    for (std::size_t k = 0; k < p.tensors.size(); ++k)
        CHECK((p.tensors[k].value - target[k]).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("checkpoint round trip is bit exact")
{
    Rng rng(11);
    const Checkpoint ck = small_checkpoint(rng);
    const fs::path path = temp_path("roundtrip.ckpt");
    save_checkpoint(path, ck);
    CHECK_FALSE(fs::exists(path.string() + ".tmp"));
    const Checkpoint back = load_checkpoint(path);
    CHECK(back.params.arch == ck.params.arch);
    REQUIRE(back.params.tensors.size() == ck.params.tensors.size());
    for (std::size_t k = 0; k < ck.params.tensors.size(); ++k) {
        CHECK(back.params.tensors[k].name == ck.params.tensors[k].name);
        CHECK(back.params.tensors[k].value == ck.params.tensors[k].value);
        CHECK(back.adam->m[k] == ck.adam->m[k]);
        CHECK(back.adam->v[k] == ck.adam->v[k]);
    }
    CHECK(back.adam->step == 42);
    CHECK(back.epoch == 3);
    CHECK(back.signal_power == 9.5);
    CHECK(back.t_max == 20);
    CHECK(back.schedule().fingerprint() == ck.schedule().fingerprint());
    CHECK(back.geometry.same_array_shape(ck.geometry));
    CHECK(back.training_config == ck.training_config);

    Checkpoint no_adam = ck;
    no_adam.adam.reset();
    save_checkpoint(path, no_adam);
    CHECK_FALSE(load_checkpoint(path).adam.has_value());

    save_params(ck.params, ck.geometry, ck.schedule(), path);
    CHECK(load_params(path).tensors.back().value == ck.params.tensors.back().value);
    fs::remove(path);
}

TEST_CASE("damaged checkpoints are rejected as corrupt")
{
    Rng rng(12);
    const Checkpoint ck = small_checkpoint(rng);
    const fs::path good = temp_path("good.ckpt");
    save_checkpoint(good, ck);
    const std::string bytes = io::read_file(good);

    auto expect_corrupt = [](const fs::path &p) {
        try {
            load_checkpoint(p);
            FAIL("expected corrupt_checkpoint");
        } catch (const Error &e) {
            CHECK(e.code() == ErrorCode::corrupt_checkpoint);
        }
    };
    auto write = [](const fs::path &p, const std::string &data) {
        std::ofstream(p, std::ios::binary) << data;
    };
    const fs::path bad = temp_path("bad.ckpt");

    expect_corrupt(temp_path("missing.ckpt"));
    write(bad, bytes.substr(0, bytes.size() - 8));
    expect_corrupt(bad);
    write(bad, bytes.substr(0, 20));
    expect_corrupt(bad);
    write(bad, bytes + "x");
    expect_corrupt(bad);
    std::string magic = bytes;
    magic[0] = 'X';
    write(bad, magic);
    expect_corrupt(bad);
    std::string header = bytes;
    const auto pos = header.find("\"rows\"");
    REQUIRE(pos != std::string::npos);
    header[pos + 1] = 'x';
    write(bad, header);
    expect_corrupt(bad);
    write(bad, "");
    expect_corrupt(bad);

    Checkpoint nan = ck;
    nan.params.tensors[2].value(0, 0) = std::numeric_limits<double>::quiet_NaN();
    save_checkpoint(bad, nan);
    expect_corrupt(bad);
    fs::remove(bad);
    fs::remove(good);
}

TEST_CASE("geometry checks compare the array shape")
{
    Rng rng(13);
    const Checkpoint ck = small_checkpoint(rng);
    CHECK_NOTHROW(require_geometry(ck, SystemGeometry{2, 3, 3}));
    for (const SystemGeometry &g : {SystemGeometry{4, 3, 3}, SystemGeometry{2, 4, 3}, SystemGeometry{2, 3, 4}}) {
        try {
            require_geometry(ck, g);
            FAIL("expected geometry_mismatch");
        } catch (const Error &e) {
            CHECK(e.code() == ErrorCode::geometry_mismatch);
        }
    }
    const DenoiserParams &p = ck.params;
    const ConditionBatch c = random_conditions(2, 3, 1, rng);
    try {
        predict_noise(p, standard_normal(10, 1, rng), std::vector<Index>{1}, c);
        FAIL("expected geometry_mismatch");
    } catch (const Error &e) {
        CHECK(e.code() == ErrorCode::geometry_mismatch);
    }
}
