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

#include "riscdm/network.hpp"

#include <cmath>
#include <utility>

namespace riscdm {

std::string to_string(ArchitectureKind kind)
{
    return kind == ArchitectureKind::mlp ? "mlp" : "conv1d";
}

ArchitectureKind architecture_from_string(const std::string &name)
{
    if (name == "mlp")
        return ArchitectureKind::mlp;
    if (name == "conv1d")
        return ArchitectureKind::conv1d;
    throw Error(ErrorCode::invalid_config, "unknown architecture '" + name + "'");
}

void ArchitectureDescriptor::validate() const
{
    require(hidden_width >= 1 && hidden_layers >= 1, "architecture: width and layers must be >= 1",
            ErrorCode::invalid_config);
    require(step_embedding_dim >= 2 && step_embedding_dim % 2 == 0,
            "architecture: step embedding dimension must be even", ErrorCode::invalid_config);
    require(condition_embedding_dim >= 1, "architecture: condition embedding must be >= 1",
            ErrorCode::invalid_config);
    require(kernel_size >= 1 && kernel_size % 2 == 1, "architecture: kernel size must be odd",
            ErrorCode::invalid_config);
    require(activation == "silu", "architecture: only the 'silu' activation is supported",
            ErrorCode::invalid_config);
}

Index DenoiserParams::parameter_count() const
{
    Index n = 0;
    for (const auto &t : tensors)
        n += t.value.size();
    return n;
}

bool DenoiserParams::all_finite() const
{
    for (const auto &t : tensors)
        if (!t.value.allFinite())
            return false;
    return true;
}

const RealMatrix &DenoiserParams::tensor(const std::string &name) const
{
    for (const auto &t : tensors)
        if (t.name == name)
            return t.value;
    throw Error(ErrorCode::invalid_argument, "no parameter tensor named '" + name + "'");
}

RealMatrix &DenoiserParams::tensor(const std::string &name)
{
    return const_cast<RealMatrix &>(std::as_const(*this).tensor(name));
}

namespace {

struct LayerShape {
    std::string name;
    Index rows, cols;
    bool is_output = false;
    bool is_condition = false;
};

std::vector<LayerShape> layer_shapes(const ArchitectureDescriptor &a, Index n, Index m2)
{
    const Index width = a.hidden_width;
    std::vector<LayerShape> layers;
    if (a.kind == ArchitectureKind::mlp) {
        const Index x_len = 2 * n * m2;
        const Index c_len = 2 * n + x_len + m2;
        layers.push_back({"cond", a.condition_embedding_dim, c_len, false, true});
        layers.push_back({"in", width, x_len + a.step_embedding_dim + a.condition_embedding_dim});
        for (Index l = 1; l < a.hidden_layers; ++l)
            layers.push_back({"hidden" + std::to_string(l), width, width});
        layers.push_back({"out", x_len, width, true});
    } else {
        const Index k = a.kernel_size;
        layers.push_back({"cond", a.condition_embedding_dim, 4 * n + 1, false, true});
        layers.push_back({"step", width, a.step_embedding_dim});
        layers.push_back({"in", width, k * (2 * n + a.condition_embedding_dim)});
        for (Index l = 1; l < a.hidden_layers; ++l)
            layers.push_back({"hidden" + std::to_string(l), width, k * width});
        layers.push_back({"out", 2 * n, width, true});
    }
    return layers;
}

DenoiserParams make_params(const ArchitectureDescriptor &arch, Index n, Index m2)
{
    arch.validate();
    require(n >= 1 && m2 >= 1, "denoiser: N and M2 must be >= 1");
    DenoiserParams p;
    p.arch = arch;
    p.n_antennas = n;
    p.m2_elements = m2;
    for (const auto &l : layer_shapes(arch, n, m2)) {
        p.tensors.push_back({l.name + ".w", RealMatrix::Zero(l.rows, l.cols)});
        p.tensors.push_back({l.name + ".b", RealMatrix::Zero(l.rows, 1)});
    }
    return p;
}

} // namespace

DenoiserParams zero_params(const ArchitectureDescriptor &arch, Index n, Index m2)
{
    return make_params(arch, n, m2);
}

DenoiserParams init_params(const ArchitectureDescriptor &arch, Index n, Index m2, Rng &rng,
                           InitOptions options)
{
    DenoiserParams p = make_params(arch, n, m2);
    std::size_t k = 0;
    for (const auto &l : layer_shapes(arch, n, m2)) {
        const bool silent = (l.is_output && options.zero_output_layer) ||
                            (l.is_condition && options.zero_condition_projection);
        const double bound = 1.0 / std::sqrt(double(l.cols));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (int part = 0; part < 2; ++part, ++k) {
            RealMatrix &v = p.tensors[k].value;
            if (silent)
                continue;
            for (Index j = 0; j < v.cols(); ++j)
                for (Index i = 0; i < v.rows(); ++i)
                    v(i, j) = u(rng);
        }
    }
    return p;
}

RealVector step_embedding(Index t, Index dimension)
{
    require(dimension >= 2 && dimension % 2 == 0, "step_embedding: dimension must be even");
    require(t >= 0, "step_embedding: step must be >= 0");
    const Index half = dimension / 2;
    RealVector e(dimension);
    for (Index i = 0; i < half; ++i) {
        const double freq = std::pow(10000.0, -2.0 * double(i) / double(dimension));
        e(i) = std::sin(double(t) * freq);
        e(half + i) = std::cos(double(t) * freq);
    }
    return e;
}

ConditionBatch ConditionBatch::from(const ConditionVector &c)
{
    return from(std::span<const ConditionVector>(&c, 1));
}

ConditionBatch ConditionBatch::from(std::span<const ConditionVector> cs)
{
    require(!cs.empty(), "condition batch: empty");
    const Index b = Index(cs.size());
    ConditionBatch out;
    out.pilot.resize(cs[0].pilot.size(), b);
    out.partial.resize(cs[0].partial_channel.size(), b);
    out.indicator.resize(cs[0].indicator.size(), b);
    out.present.resize(b);
    for (Index j = 0; j < b; ++j) {
        const auto &c = cs[std::size_t(j)];
        require(c.pilot.size() == out.pilot.rows() && c.partial_channel.size() == out.partial.rows() &&
                    c.indicator.size() == out.indicator.rows(),
                "condition batch: inconsistent condition lengths");
        out.pilot.col(j) = c.pilot;
        out.partial.col(j) = c.partial_channel;
        out.indicator.col(j) = c.indicator;
        out.present(j) = c.present ? 1.0 : 0.0;
    }
    return out;
}

ConditionBatch ConditionBatch::without_condition() const
{
    ConditionBatch out = *this;
    out.present.setZero();
    return out;
}

ConditionBatch ConditionBatch::repeated(Index copies) const
{
    require(copies >= 1, "condition batch: copies must be >= 1");
    auto rep = [copies](const RealMatrix &m) {
        RealMatrix out(m.rows(), m.cols() * copies);
        for (Index j = 0; j < m.cols(); ++j)
            out.middleCols(j * copies, copies) = m.col(j).replicate(1, copies);
        return out;
    };
    ConditionBatch out;
    out.pilot = rep(pilot);
    out.partial = rep(partial);
    out.indicator = rep(indicator);
    out.present = rep(present).reshaped();
    return out;
}

double observed_rms(const MaskedChannel &masked)
{
    const double observed = masked.indicator.sum();
    if (observed <= 0.0)
        return 1.0;
    const double rms =
        std::sqrt(masked.partial.squaredNorm() / (observed * double(masked.partial.rows())));
    return rms > 0.0 ? rms : 1.0;
}

PreparedCondition prepare_condition(const MaskedChannel &masked, const ComplexVector &pilot,
                                    double signal_power)
{
    require(signal_power > 0.0, "prepare_condition: signal power must be > 0");
    require(pilot.size() == masked.partial.rows(), "prepare_condition: pilot length must equal N",
            ErrorCode::geometry_mismatch);
    require(masked.indicator.size() == masked.partial.cols(),
            "prepare_condition: indicator length must equal M2", ErrorCode::geometry_mismatch);
    PreparedCondition out;
    out.channel_scale = observed_rms(masked);
    out.condition.pilot = vectorize(pilot) / std::sqrt(signal_power);
    out.condition.partial_channel = vectorize(masked.partial) / out.channel_scale;
    out.condition.indicator = masked.indicator;
    out.condition.present = true;
    return out;
}

namespace {

void check_inputs(const DenoiserParams &p, const RealMatrix &x_t, std::span<const Index> steps,
                  const ConditionBatch &c)
{
    require(x_t.rows() == p.channel_length(),
            "denoiser: x_t length " + std::to_string(x_t.rows()) + " does not match 2*N*M2 = " +
                std::to_string(p.channel_length()),
            ErrorCode::geometry_mismatch);
    require(Index(steps.size()) == x_t.cols() && c.size() == x_t.cols(),
            "denoiser: batch sizes of x_t, steps and condition differ");
    require(c.pilot.rows() == 2 * p.n_antennas && c.partial.rows() == p.channel_length() &&
                c.indicator.rows() == p.m2_elements,
            "denoiser: condition shape does not match geometry", ErrorCode::geometry_mismatch);
}

RealMatrix step_embeddings(std::span<const Index> steps, Index dim)
{
    RealMatrix e(dim, Index(steps.size()));
    for (Index j = 0; j < e.cols(); ++j)
        e.col(j) = step_embedding(steps[std::size_t(j)], dim);
    return e;
}

ad::Var checked(ad::Var v, Index layer)
{
    if (!v.value().allFinite())
        throw Error(ErrorCode::numerical_overflow,
                    "numerical overflow in denoiser layer " + std::to_string(layer));
    return v;
}

ad::Var dense(ad::Var w, ad::Var b, ad::Var x) { return ad::add_bias(ad::matmul(w, x), b); }

// Per-position condition rows: partial column (2N), indicator (1), pilot (2N).
RealMatrix conv_condition_input(const DenoiserParams &p, const ConditionBatch &c)
{
    const Index n = p.n_antennas, m2 = p.m2_elements, len = n * m2;
    RealMatrix out(4 * n + 1, m2 * c.size());
    for (Index b = 0; b < c.size(); ++b)
        for (Index j = 0; j < m2; ++j) {
            auto col = out.col(b * m2 + j);
            col.segment(0, n) = c.partial.col(b).segment(j * n, n);
            col.segment(n, n) = c.partial.col(b).segment(len + j * n, n);
            col(2 * n) = c.indicator(j, b);
            col.segment(2 * n + 1, 2 * n) = c.pilot.col(b);
        }
    return out;
}

RealVector present_per_position(const ConditionBatch &c, Index m2)
{
    RealVector mask(c.size() * m2);
    for (Index b = 0; b < c.size(); ++b)
        mask.segment(b * m2, m2).setConstant(c.present(b));
    return mask;
}

} // namespace

RealMatrix to_native_layout(const DenoiserParams &p, const RealMatrix &x)
{
    if (p.arch.kind == ArchitectureKind::mlp)
        return x;
    const Index n = p.n_antennas, m2 = p.m2_elements, len = n * m2;
    require(x.rows() == 2 * len, "to_native_layout: length mismatch", ErrorCode::geometry_mismatch);
    RealMatrix out(2 * n, m2 * x.cols());
    for (Index b = 0; b < x.cols(); ++b)
        for (Index j = 0; j < m2; ++j) {
            out.col(b * m2 + j).head(n) = x.col(b).segment(j * n, n);
            out.col(b * m2 + j).tail(n) = x.col(b).segment(len + j * n, n);
        }
    return out;
}

RealMatrix from_native_layout(const DenoiserParams &p, const RealMatrix &y)
{
    if (p.arch.kind == ArchitectureKind::mlp)
        return y;
    const Index n = p.n_antennas, m2 = p.m2_elements, len = n * m2;
    require(y.rows() == 2 * n && y.cols() % m2 == 0, "from_native_layout: shape mismatch");
    const Index batch = y.cols() / m2;
    RealMatrix out(2 * len, batch);
    for (Index b = 0; b < batch; ++b)
        for (Index j = 0; j < m2; ++j) {
            out.col(b).segment(j * n, n) = y.col(b * m2 + j).head(n);
            out.col(b).segment(len + j * n, n) = y.col(b * m2 + j).tail(n);
        }
    return out;
}

ForwardGraph build_forward(ad::Tape &tape, const DenoiserParams &p, const RealMatrix &x_t,
                           std::span<const Index> steps, const ConditionBatch &cond)
{
    check_inputs(p, x_t, steps, cond);
    ForwardGraph g;
    for (const auto &t : p.tensors)
        g.params.push_back(tape.parameter(t.value));
    auto w = [&](std::size_t layer) { return g.params[2 * layer]; };
    auto b = [&](std::size_t layer) { return g.params[2 * layer + 1]; };
    const auto &a = p.arch;
    const RealMatrix se = step_embeddings(steps, a.step_embedding_dim);
    Index layer = 0;

    if (a.kind == ArchitectureKind::mlp) {
        RealMatrix cin(p.condition_length(), cond.size());
        cin << cond.pilot, cond.partial, cond.indicator;
        ad::Var ce = ad::mask_cols(ad::silu(dense(w(0), b(0), tape.constant(std::move(cin)))),
                                   cond.present);
        const ad::Var parts[] = {tape.constant(x_t), tape.constant(se), checked(ce, layer++)};
        ad::Var h = checked(ad::silu(dense(w(1), b(1), ad::concat_rows(parts))), layer++);
        for (Index l = 1; l < a.hidden_layers; ++l)
            h = checked(ad::add(h, ad::silu(dense(w(1 + l), b(1 + l), h))), layer++);
        g.output = checked(dense(w(1 + a.hidden_layers), b(1 + a.hidden_layers), h), layer);
        return g;
    }

    const Index m2 = p.m2_elements, k = a.kernel_size;
    ad::Var ce = ad::mask_cols(
        ad::silu(dense(w(0), b(0), tape.constant(conv_condition_input(p, cond)))),
        present_per_position(cond, m2));
    ad::Var step_bias = ad::repeat_cols(dense(w(1), b(1), tape.constant(se)), m2);
    const ad::Var parts[] = {tape.constant(to_native_layout(p, x_t)), checked(ce, layer++)};
    ad::Var h = ad::silu(ad::add(
        dense(w(2), b(2), ad::im2col1d(ad::concat_rows(parts), m2, k)), step_bias));
    h = checked(h, layer++);
    for (Index l = 1; l < a.hidden_layers; ++l)
        h = checked(ad::add(h, ad::silu(dense(w(2 + l), b(2 + l), ad::im2col1d(h, m2, k)))), layer++);
    g.output = checked(dense(w(2 + a.hidden_layers), b(2 + a.hidden_layers), h), layer);
    return g;
}

RealMatrix embed_condition(const ConditionVector &cond, const DenoiserParams &p)
{
    const ConditionBatch batch = ConditionBatch::from(cond);
    require(batch.pilot.rows() == 2 * p.n_antennas && batch.partial.rows() == p.channel_length() &&
                batch.indicator.rows() == p.m2_elements,
            "embed_condition: condition shape does not match geometry", ErrorCode::geometry_mismatch);
    const RealMatrix &w = p.tensor("cond.w");
    const RealVector &bias = p.tensor("cond.b").col(0);
    const Index cols = p.arch.kind == ArchitectureKind::mlp ? 1 : p.m2_elements;
    if (!cond.present)
        return RealMatrix::Zero(p.arch.condition_embedding_dim, cols);
    RealMatrix in;
    if (p.arch.kind == ArchitectureKind::mlp) {
        in.resize(p.condition_length(), 1);
        in << cond.pilot, cond.partial_channel, cond.indicator;
    } else {
        in = conv_condition_input(p, batch);
    }
    RealMatrix pre = (w * in).colwise() + bias;
    return ad::silu(pre);
}

namespace {

RealMatrix silu_values(const RealMatrix &m) { return ad::silu(m); }

const RealMatrix &checked_values(const RealMatrix &m, Index layer)
{
    if (!m.allFinite())
        throw Error(ErrorCode::numerical_overflow,
                    "numerical overflow in denoiser layer " + std::to_string(layer));
    return m;
}

// Columns of the first-layer weight acting on the channel input and on the
// condition embedding (plus, for mlp, the step embedding in between).
struct InputWeights {
    RealMatrix x, step, cond;
};

InputWeights split_input_weights(const DenoiserParams &p)
{
    const RealMatrix &w = p.tensor("in.w");
    const auto &a = p.arch;
    InputWeights out;
    if (a.kind == ArchitectureKind::mlp) {
        const Index xl = p.channel_length(), se = a.step_embedding_dim;
        out.x = w.leftCols(xl);
        out.step = w.middleCols(xl, se);
        out.cond = w.rightCols(a.condition_embedding_dim);
        return out;
    }
    const Index k = a.kernel_size, xc = 2 * p.n_antennas, ce = a.condition_embedding_dim;
    out.x.resize(w.rows(), k * xc);
    out.cond.resize(w.rows(), k * ce);
    for (Index o = 0; o < k; ++o) {
        out.x.middleCols(o * xc, xc) = w.middleCols(o * (xc + ce), xc);
        out.cond.middleCols(o * ce, ce) = w.middleCols(o * (xc + ce) + xc, ce);
    }
    return out;
}

} // namespace

RealMatrix condition_response(const DenoiserParams &p, const ConditionBatch &cond)
{
    require(cond.pilot.rows() == 2 * p.n_antennas && cond.partial.rows() == p.channel_length() &&
                cond.indicator.rows() == p.m2_elements && cond.pilot.cols() == cond.size() &&
                cond.partial.cols() == cond.size() && cond.indicator.cols() == cond.size(),
            "condition_response: condition shape does not match geometry", ErrorCode::geometry_mismatch);
    const RealMatrix &w = p.tensor("cond.w");
    const RealVector bias = p.tensor("cond.b").col(0);
    const InputWeights in = split_input_weights(p);
    if (p.arch.kind == ArchitectureKind::mlp) {
        RealMatrix cin(p.condition_length(), cond.size());
        cin << cond.pilot, cond.partial, cond.indicator;
        RealMatrix pre = w * cin;
        pre.colwise() += bias;
        const RealMatrix ce = silu_values(pre) * cond.present.asDiagonal();
        return in.cond * ce;
    }
    RealMatrix pre = w * conv_condition_input(p, cond);
    pre.colwise() += bias;
    const RealMatrix ce = silu_values(pre) * present_per_position(cond, p.m2_elements).asDiagonal();
    return in.cond * ad::im2col1d(ce, p.m2_elements, p.arch.kernel_size);
}

RealMatrix predict_noise_cached(const DenoiserParams &p, const RealMatrix &x_t,
                                std::span<const Index> steps, const RealMatrix &response)
{
    require(x_t.rows() == p.channel_length(),
            "denoiser: x_t length " + std::to_string(x_t.rows()) + " does not match 2*N*M2 = " +
                std::to_string(p.channel_length()),
            ErrorCode::geometry_mismatch);
    require(Index(steps.size()) == x_t.cols(), "denoiser: batch sizes of x_t and steps differ");
    const auto &a = p.arch;
    const Index positions = a.kind == ArchitectureKind::mlp ? 1 : p.m2_elements;
    require(response.rows() == a.hidden_width && response.cols() == x_t.cols() * positions,
            "denoiser: cached condition response has the wrong shape");
    const InputWeights in = split_input_weights(p);
    const RealMatrix se = step_embeddings(steps, a.step_embedding_dim);
    Index layer = 0;

    RealMatrix h;
    std::size_t next;  // index of the first residual layer's weight
    if (a.kind == ArchitectureKind::mlp) {
        h.noalias() = in.x * x_t;
        h.noalias() += in.step * se;
        h += response;
        h.colwise() += p.tensor("in.b").col(0);
        next = 4;
    } else {
        const Index k = a.kernel_size;
        RealMatrix sb = p.tensor("step.w") * se;
        sb.colwise() += p.tensor("step.b").col(0);
        h.noalias() = in.x * ad::im2col1d(to_native_layout(p, x_t), positions, k);
        h += response;
        h.colwise() += p.tensor("in.b").col(0);
        for (Index b = 0; b < x_t.cols(); ++b)
            h.middleCols(b * positions, positions).colwise() += sb.col(b);
        next = 6;
    }
    ++layer;  // the condition embedding counts as layer 0
    h = silu_values(h);
    checked_values(h, layer++);
    RealMatrix pre;
    for (Index l = 1; l < a.hidden_layers; ++l, next += 2) {
        const RealMatrix &w = p.tensors[next].value;
        if (a.kind == ArchitectureKind::mlp)
            pre.noalias() = w * h;
        else
            pre.noalias() = w * ad::im2col1d(h, positions, a.kernel_size);
        pre.colwise() += p.tensors[next + 1].value.col(0);
        h += silu_values(pre);
        checked_values(h, layer++);
    }
    RealMatrix out = p.tensors[next].value * h;
    out.colwise() += p.tensors[next + 1].value.col(0);
    checked_values(out, layer);
    return from_native_layout(p, out);
}

RealMatrix predict_noise(const DenoiserParams &params, const RealMatrix &x_t,
                         std::span<const Index> steps, const ConditionBatch &cond)
{
    check_inputs(params, x_t, steps, cond);
    return predict_noise_cached(params, x_t, steps, condition_response(params, cond));
}

RealVector predict_noise(const DenoiserParams &params, const RealVector &x_t, Index t,
                         const ConditionVector &cond)
{
    const Index steps[] = {t};
    return predict_noise(params, RealMatrix(x_t), steps, ConditionBatch::from(cond)).col(0);
}

LossGraph build_guided_loss(ad::Tape &tape, const DenoiserParams &params, const RealMatrix &x_t,
                            std::span<const Index> steps, const ConditionBatch &cond,
                            const RealMatrix &eps, double lambda2)
{
    require(lambda2 >= 0.0 && lambda2 <= 1.0, "guided loss: lambda2 must lie in [0, 1]");
    require(eps.rows() == x_t.rows() && eps.cols() == x_t.cols(), "guided loss: eps shape mismatch");
    const Index batch = x_t.cols();
    LossGraph lg;
    ad::Var eps_tilde;
    if (lambda2 == 1.0 || lambda2 == 0.0) {
        const ConditionBatch c = lambda2 == 1.0 ? cond : cond.without_condition();
        lg.forward = build_forward(tape, params, x_t, steps, c);
        eps_tilde = lg.forward.output;
    } else {
        // both branches in one pass: columns [conditional | unconditional]
        RealMatrix x2(x_t.rows(), 2 * batch);
        x2 << x_t, x_t;
        std::vector<Index> s2(steps.begin(), steps.end());
        s2.insert(s2.end(), steps.begin(), steps.end());
        const ConditionBatch u = cond.without_condition();
        ConditionBatch c2;
        c2.pilot.resize(cond.pilot.rows(), 2 * batch);
        c2.pilot << cond.pilot, u.pilot;
        c2.partial.resize(cond.partial.rows(), 2 * batch);
        c2.partial << cond.partial, u.partial;
        c2.indicator.resize(cond.indicator.rows(), 2 * batch);
        c2.indicator << cond.indicator, u.indicator;
        c2.present.resize(2 * batch);
        c2.present << cond.present, u.present;
        lg.forward = build_forward(tape, params, x2, s2, c2);
        const Index half = lg.forward.output.cols() / 2;
        eps_tilde = ad::lerp(ad::slice_cols(lg.forward.output, 0, half),
                             ad::slice_cols(lg.forward.output, half, half), lambda2);
    }
    const ad::Var target = tape.constant(to_native_layout(params, eps));
    lg.loss = ad::scale(ad::sum_squares(ad::sub(target, eps_tilde)), 1.0 / double(batch));
    return lg;
}

std::vector<RealMatrix> backward(ad::Tape &tape, const LossGraph &graph)
{
    tape.backward(graph.loss);
    std::vector<RealMatrix> grads;
    grads.reserve(graph.forward.params.size());
    for (auto v : graph.forward.params)
        grads.push_back(tape.grad(v));
    return grads;
}

AdamState AdamState::zeros_like(const DenoiserParams &params)
{
    AdamState s;
    for (const auto &t : params.tensors) {
        s.m.push_back(RealMatrix::Zero(t.value.rows(), t.value.cols()));
        s.v.push_back(RealMatrix::Zero(t.value.rows(), t.value.cols()));
    }
    return s;
}

void adam_update(DenoiserParams &params, std::span<const RealMatrix> grads, AdamState &state,
                 double lr, const AdamConfig &cfg)
{
    const std::size_t n = params.tensors.size();
    require(grads.size() == n && state.m.size() == n && state.v.size() == n,
            "adam_update: tensor count mismatch");
    for (std::size_t i = 0; i < n; ++i)
        require(grads[i].rows() == params.tensors[i].value.rows() &&
                    grads[i].cols() == params.tensors[i].value.cols() &&
                    state.m[i].rows() == grads[i].rows() && state.m[i].cols() == grads[i].cols(),
                "adam_update: shape mismatch for '" + params.tensors[i].name + "'");
    ++state.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, double(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, double(state.step));
    for (std::size_t i = 0; i < n; ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i].cwiseAbs2();
        params.tensors[i].value.array() -=
            lr * (state.m[i].array() / c1) / ((state.v[i].array() / c2).sqrt() + cfg.epsilon);
    }
}

ConditionedDenoiser::ConditionedDenoiser(const DenoiserParams &params, ConditionBatch cond)
    : params_(params), batch_(cond.size())
{
    const ConditionBatch uncond = cond.without_condition();
    ConditionBatch both;
    both.pilot.resize(cond.pilot.rows(), 2 * batch_);
    both.pilot << cond.pilot, uncond.pilot;
    both.partial.resize(cond.partial.rows(), 2 * batch_);
    both.partial << cond.partial, uncond.partial;
    both.indicator.resize(cond.indicator.rows(), 2 * batch_);
    both.indicator << cond.indicator, uncond.indicator;
    both.present.resize(2 * batch_);
    both.present << cond.present, uncond.present;
    response_ = condition_response(params_, both);
}

RealMatrix ConditionedDenoiser::predict(const RealMatrix &x_t, Index t, bool conditional) const
{
    require(x_t.cols() == batch_, "conditioned denoiser: expected one column per bound condition");
    const std::vector<Index> steps(static_cast<std::size_t>(batch_), t);
    const Index half = response_.cols() / 2;
    return predict_noise_cached(params_, x_t, steps,
                                conditional ? response_.leftCols(half) : response_.rightCols(half));
}

RealMatrix ConditionedDenoiser::predict_guided(const RealMatrix &x_t, Index t,
                                               const GuidanceConfig &cfg) const
{
    cfg.validate();
    if (cfg.lambda2 == 1.0 || cfg.lambda2 == 0.0)
        return predict(x_t, t, cfg.lambda2 == 1.0);
    require(x_t.cols() == batch_, "conditioned denoiser: expected one column per bound condition");
    RealMatrix x2(x_t.rows(), 2 * batch_);
    x2 << x_t, x_t;
    const std::vector<Index> steps(static_cast<std::size_t>(2 * batch_), t);
    const RealMatrix out = predict_noise_cached(params_, x2, steps, response_);
    return guided_noise(out.leftCols(batch_), out.rightCols(batch_), cfg);
}

} // namespace riscdm
