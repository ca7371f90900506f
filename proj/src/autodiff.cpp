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

#include "riscdm/autodiff.hpp"

#include <cmath>

namespace riscdm::ad {

Var Tape::constant(RealMatrix value) { return record(std::move(value), {}, nullptr); }

Var Tape::parameter(const RealMatrix &value)
{
    Node n;
    n.ref = &value;
    n.needs_grad = true;
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Var Tape::record(RealMatrix value, std::vector<std::size_t> inputs, Backward back)
{
    Node n;
    n.value = std::move(value);
    for (auto i : inputs)
        n.needs_grad = n.needs_grad || nodes_[i].needs_grad;
    n.inputs = std::move(inputs);
    if (n.needs_grad)
        n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

const Tape::Node &Tape::node(Var v) const
{
    require(v.tape == this && v.id < nodes_.size(), "autodiff: variable does not belong to this tape");
    return nodes_[v.id];
}

const RealMatrix &Tape::value(Var v) const
{
    const Node &n = node(v);
    return n.ref ? *n.ref : n.value;
}

RealMatrix Tape::grad(Var v) const
{
    const Node &n = node(v);
    if (n.grad.size() == 0)
        return RealMatrix::Zero(value(v).rows(), value(v).cols());
    return n.grad;
}

RealMatrix &Tape::grad_slot(std::size_t id)
{
    Node &n = nodes_[id];
    if (n.grad.size() == 0) {
        const RealMatrix &v = n.ref ? *n.ref : n.value;
        n.grad = RealMatrix::Zero(v.rows(), v.cols());
    }
    return n.grad;
}

void Tape::backward(Var loss)
{
    require(loss.tape == this && loss.id < nodes_.size(),
            "backward: loss variable was not recorded on this tape");
    require(value(loss).rows() == 1 && value(loss).cols() == 1, "backward: loss must be a scalar");
    for (auto &n : nodes_)
        n.grad.resize(0, 0);
    grad_slot(loss.id)(0, 0) = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node &n = nodes_[i];
        if (n.back && n.grad.size() != 0)
            n.back(*this, i);
    }
}

namespace {

Tape &same_tape(Var a, Var b)
{
    require(a.tape != nullptr && a.tape == b.tape, "autodiff: operands live on different tapes");
    return *a.tape;
}

} // namespace

Var matmul(Var a, Var b)
{
    Tape &t = same_tape(a, b);
    require(a.cols() == b.rows(), "matmul: inner dimension mismatch");
    RealMatrix out;
    out.noalias() = a.value() * b.value();
    return t.record(std::move(out), {a.id, b.id}, [](Tape &tp, std::size_t id) {
        const auto ia = tp.inputs(id)[0], ib = tp.inputs(id)[1];
        const RealMatrix &g = tp.grad_of(id);
        if (tp.needs_grad(ia))
            tp.grad_slot(ia).noalias() += g * tp.value(ib).transpose();
        if (tp.needs_grad(ib))
            tp.grad_slot(ib).noalias() += tp.value(ia).transpose() * g;
    });
}

Var add(Var a, Var b)
{
    Tape &t = same_tape(a, b);
    require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
    return t.record(a.value() + b.value(), {a.id, b.id}, [](Tape &tp, std::size_t id) {
        for (auto in : tp.inputs(id))
            if (tp.needs_grad(in))
                tp.grad_slot(in) += tp.grad_of(id);
    });
}

Var sub(Var a, Var b)
{
    Tape &t = same_tape(a, b);
    require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
    return t.record(a.value() - b.value(), {a.id, b.id}, [](Tape &tp, std::size_t id) {
        const auto ia = tp.inputs(id)[0], ib = tp.inputs(id)[1];
        if (tp.needs_grad(ia))
            tp.grad_slot(ia) += tp.grad_of(id);
        if (tp.needs_grad(ib))
            tp.grad_slot(ib) -= tp.grad_of(id);
    });
}

Var add_bias(Var a, Var bias)
{
    Tape &t = same_tape(a, bias);
    require(bias.cols() == 1 && bias.rows() == a.rows(), "add_bias: bias must be rows x 1");
    RealMatrix out = a.value().colwise() + bias.value().col(0);
    return t.record(std::move(out), {a.id, bias.id}, [](Tape &tp, std::size_t id) {
        const auto ia = tp.inputs(id)[0], ib = tp.inputs(id)[1];
        if (tp.needs_grad(ia))
            tp.grad_slot(ia) += tp.grad_of(id);
        if (tp.needs_grad(ib))
            tp.grad_slot(ib) += tp.grad_of(id).rowwise().sum();
    });
}

Var scale(Var a, double s)
{
    return a.tape->record(s * a.value(), {a.id}, [s](Tape &tp, std::size_t id) {
        tp.grad_slot(tp.inputs(id)[0]) += s * tp.grad_of(id);
    });
}

Var lerp(Var a, Var b, double w)
{
    Tape &t = same_tape(a, b);
    require(a.rows() == b.rows() && a.cols() == b.cols(), "lerp: shape mismatch");
    return t.record(w * a.value() + (1.0 - w) * b.value(), {a.id, b.id},
                    [w](Tape &tp, std::size_t id) {
                        const auto ia = tp.inputs(id)[0], ib = tp.inputs(id)[1];
                        if (tp.needs_grad(ia))
                            tp.grad_slot(ia) += w * tp.grad_of(id);
                        if (tp.needs_grad(ib))
                            tp.grad_slot(ib) += (1.0 - w) * tp.grad_of(id);
                    });
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

RealMatrix silu(const RealMatrix &x)
{
    return (x.array() / (1.0 + (-x.array()).exp())).matrix();
}

Var silu(Var a)
{
    return a.tape->record(silu(a.value()), {a.id}, [](Tape &tp, std::size_t id) {
        const auto in = tp.inputs(id)[0];
        const auto x = tp.value(in).array();
        const Eigen::ArrayXXd s = 1.0 / (1.0 + (-x).exp());
        tp.grad_slot(in).array() += tp.grad_of(id).array() * s * (1.0 + x * (1.0 - s));
    });
}

Var concat_rows(std::span<const Var> parts)
{
    require(!parts.empty(), "concat_rows: no operands");
    Tape &t = *parts.front().tape;
    const Index cols = parts.front().cols();
    Index rows = 0;
    std::vector<std::size_t> ids;
    for (auto p : parts) {
        require(p.tape == &t && p.cols() == cols, "concat_rows: column count mismatch");
        rows += p.rows();
        ids.push_back(p.id);
    }
    RealMatrix out(rows, cols);
    Index r = 0;
    for (auto p : parts) {
        out.middleRows(r, p.rows()) = p.value();
        r += p.rows();
    }
    return t.record(std::move(out), std::move(ids), [](Tape &tp, std::size_t id) {
        Index r0 = 0;
        for (auto in : tp.inputs(id)) {
            const Index n = tp.value(in).rows();
            if (tp.needs_grad(in))
                tp.grad_slot(in) += tp.grad_of(id).middleRows(r0, n);
            r0 += n;
        }
    });
}

Var concat_cols(std::span<const Var> parts)
{
    require(!parts.empty(), "concat_cols: no operands");
    Tape &t = *parts.front().tape;
    const Index rows = parts.front().rows();
    Index cols = 0;
    std::vector<std::size_t> ids;
    for (auto p : parts) {
        require(p.tape == &t && p.rows() == rows, "concat_cols: row count mismatch");
        cols += p.cols();
        ids.push_back(p.id);
    }
    RealMatrix out(rows, cols);
    Index c = 0;
    for (auto p : parts) {
        out.middleCols(c, p.cols()) = p.value();
        c += p.cols();
    }
    return t.record(std::move(out), std::move(ids), [](Tape &tp, std::size_t id) {
        Index c0 = 0;
        for (auto in : tp.inputs(id)) {
            const Index n = tp.value(in).cols();
            if (tp.needs_grad(in))
                tp.grad_slot(in) += tp.grad_of(id).middleCols(c0, n);
            c0 += n;
        }
    });
}

Var slice_cols(Var a, Index start, Index count)
{
    require(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols: range out of bounds");
    return a.tape->record(a.value().middleCols(start, count), {a.id},
                          [start, count](Tape &tp, std::size_t id) {
                              tp.grad_slot(tp.inputs(id)[0]).middleCols(start, count) +=
                                  tp.grad_of(id);
                          });
}

Var mask_cols(Var a, const RealVector &mask)
{
    require(mask.size() == a.cols(), "mask_cols: mask length mismatch");
    RealMatrix out = a.value() * mask.asDiagonal();
    return a.tape->record(std::move(out), {a.id}, [mask](Tape &tp, std::size_t id) {
        tp.grad_slot(tp.inputs(id)[0]) += tp.grad_of(id) * mask.asDiagonal();
    });
}

Var repeat_cols(Var a, Index each)
{
    require(each >= 1, "repeat_cols: repeat count must be >= 1");
    const RealMatrix &v = a.value();
    RealMatrix out(v.rows(), v.cols() * each);
    for (Index b = 0; b < v.cols(); ++b)
        out.middleCols(b * each, each) = v.col(b).replicate(1, each);
    return a.tape->record(std::move(out), {a.id}, [each](Tape &tp, std::size_t id) {
        RealMatrix &g = tp.grad_slot(tp.inputs(id)[0]);
        const RealMatrix &go = tp.grad_of(id);
        for (Index b = 0; b < g.cols(); ++b)
            g.col(b) += go.middleCols(b * each, each).rowwise().sum();
    });
}

namespace {

// Visits every (dst offset block, src block) pair of a zero-padded 1-D unfold.
template <typename F>
void for_each_window(Index channels, Index positions, Index batch, Index kernel, F &&f)
{
    const Index half = kernel / 2;
    for (Index o = 0; o < kernel; ++o) {
        const Index shift = o - half;
        const Index lo = std::max<Index>(0, -shift);
        const Index hi = std::min<Index>(positions, positions - shift);
        if (hi <= lo)
            continue;
        for (Index b = 0; b < batch; ++b)
            f(o * channels, b * positions + lo, b * positions + lo + shift, hi - lo);
    }
}

} // namespace

RealMatrix im2col1d(const RealMatrix &v, Index positions, Index kernel)
{
    require(kernel >= 1 && kernel % 2 == 1, "im2col1d: kernel size must be odd");
    require(positions >= 1 && v.cols() % positions == 0, "im2col1d: columns not a multiple of positions");
    const Index channels = v.rows();
    RealMatrix out = RealMatrix::Zero(channels * kernel, v.cols());
    for_each_window(channels, positions, v.cols() / positions, kernel,
                    [&](Index row, Index dst, Index src, Index len) {
                        out.block(row, dst, channels, len) = v.middleCols(src, len);
                    });
    return out;
}

Var im2col1d(Var a, Index positions, Index kernel)
{
    require(kernel >= 1 && kernel % 2 == 1, "im2col1d: kernel size must be odd");
    require(positions >= 1 && a.cols() % positions == 0, "im2col1d: columns not a multiple of positions");
    const Index channels = a.rows();
    const Index batch = a.cols() / positions;
    RealMatrix out = im2col1d(a.value(), positions, kernel);
    return a.tape->record(std::move(out), {a.id}, [=](Tape &tp, std::size_t id) {
        RealMatrix &g = tp.grad_slot(tp.inputs(id)[0]);
        const RealMatrix &go = tp.grad_of(id);
        for_each_window(channels, positions, batch, kernel, [&](Index row, Index dst, Index src, Index len) {
            g.middleCols(src, len) += go.block(row, dst, channels, len);
        });
    });
}

Var sum_squares(Var a)
{
    RealMatrix out(1, 1);
    out(0, 0) = a.value().squaredNorm();
    return a.tape->record(std::move(out), {a.id}, [](Tape &tp, std::size_t id) {
        const auto in = tp.inputs(id)[0];
        tp.grad_slot(in) += (2.0 * tp.grad_of(id)(0, 0)) * tp.value(in);
    });
}

} // namespace riscdm::ad
