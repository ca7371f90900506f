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

#include <functional>
#include <span>
#include <vector>

// Minimal reverse-mode differentiation over dense matrices. Nodes are
// appended in evaluation order, so reverse insertion order is a valid
// topological order for the backward sweep.
namespace riscdm::ad {

class Tape;

struct Var {
    Tape *tape = nullptr;
    std::size_t id = 0;

    const RealMatrix &value() const;
    Index rows() const { return value().rows(); }
    Index cols() const { return value().cols(); }
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape &) = delete;
    Tape &operator=(const Tape &) = delete;

    /// Input that never receives a gradient.
    Var constant(RealMatrix value);
    /// Differentiable leaf bound by reference; `value` must outlive the tape.
    Var parameter(const RealMatrix &value);

    const RealMatrix &value(Var v) const;
    /// Gradient of the last backward() target; zero matrix if unreached.
    RealMatrix grad(Var v) const;
    bool needs_grad(Var v) const { return node(v).needs_grad; }
    std::size_t size() const { return nodes_.size(); }

    /// Seeds d(loss)/d(loss) = 1 and sweeps every recorded node once.
    void backward(Var loss);

    using Backward = std::function<void(Tape &, std::size_t)>;
    Var record(RealMatrix value, std::vector<std::size_t> inputs, Backward back);
    /// Accumulates into the gradient of node `id` (allocated on first use).
    RealMatrix &grad_slot(std::size_t id);
    const RealMatrix &grad_of(std::size_t id) const { return nodes_[id].grad; }
    const std::vector<std::size_t> &inputs(std::size_t id) const { return nodes_[id].inputs; }
    bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
    const RealMatrix &value(std::size_t id) const
    {
        return nodes_[id].ref ? *nodes_[id].ref : nodes_[id].value;
    }

private:
    struct Node {
        RealMatrix value;
        const RealMatrix *ref = nullptr;
        RealMatrix grad;
        std::vector<std::size_t> inputs;
        Backward back;
        bool needs_grad = false;
    };
    const Node &node(Var v) const;
    std::vector<Node> nodes_;
};

inline const RealMatrix &Var::value() const { return tape->value(*this); }

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// a + bias broadcast over columns; bias is rows x 1.
Var add_bias(Var a, Var bias);
Var scale(Var a, double s);
/// w a + (1 - w) b.
Var lerp(Var a, Var b, double w);
Var silu(Var a);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, Index start, Index count);
/// Multiplies column j by mask(j).
Var mask_cols(Var a, const RealVector &mask);
/// r x B -> r x (B * each), column b repeated `each` times consecutively.
Var repeat_cols(Var a, Index each);
/// Unfolds a C x (P * B) sequence batch into (K * C) x (P * B) windows of
/// `kernel` neighbouring positions, zero padded at both ends.
Var im2col1d(Var a, Index positions, Index kernel);
RealMatrix im2col1d(const RealMatrix &a, Index positions, Index kernel);
/// sum of squared entries, as a 1 x 1 node.
Var sum_squares(Var a);

double silu(double x);
RealMatrix silu(const RealMatrix &x);

} // namespace riscdm::ad
