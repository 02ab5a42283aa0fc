// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode automatic differentiation over row-major matrices.
//
// Every activation in the toy models is a 2-D matrix laid out as
// [time x features], so the engine only knows about matrices. A Tape records
// operations in creation order; Tape::backward walks the list in reverse,
// which is a valid topological order by construction.

#pragma once

#include "slotllm/abi.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace slotllm::inline SLOTLLM_ABI {

#ifdef SLOTLLM_DOUBLE
using Scalar = double;
#else
using Scalar = float;
#endif

using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

/// A named learnable tensor together with its accumulated gradient.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;
    bool trainable = true;

    Parameter() = default;
    Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)) {}

    Index size() const { return value.size(); }
    /// Gradient buffers are allocated lazily; this (re)allocates and clears.
    void zero_grad() { grad.setZero(value.rows(), value.cols()); }
    bool has_grad() const { return grad.size() == value.size(); }
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
class Var {
public:
    Var() = default;
    Var(Tape* tape, int id) : tape_(tape), id_(id) {}

    const Matrix& value() const;
    Index rows() const { return value().rows(); }
    Index cols() const { return value().cols(); }
    bool requires_grad() const;
    int id() const { return id_; }
    Tape* tape() const { return tape_; }
    bool valid() const { return tape_ != nullptr; }

private:
    Tape* tape_ = nullptr;
    int id_ = -1;
};

class Tape {
public:
    /// When recording is false, no backward closures are kept (inference mode).
    explicit Tape(bool recording = true) : recording_(recording) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool recording() const { return recording_; }

    /// Constant leaf (never receives gradient).
    Var constant(Matrix value);
    /// Leaf bound to a Parameter; gradients land in Parameter::grad when trainable.
    Var param(Parameter& p);

    /// Seeds d(loss)/d(loss) = 1 for a 1x1 loss and propagates to every leaf.
    void backward(Var loss);

    // Used by op implementations.
    struct Node {
        Matrix value;
        const Matrix* external = nullptr;
        Matrix grad;
        Matrix* param_grad = nullptr;
        bool requires_grad = false;
        std::function<void()> backward;

        const Matrix& val() const { return external ? *external : value; }
    };

    Var push(Matrix value, bool requires_grad, std::function<void()> backward = {});
    /// Creates the node first so that the backward closure can capture its id.
    int reserve(Matrix value, bool requires_grad);
    void set_backward(int id, std::function<void()> fn);

    Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
    const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
    /// Gradient buffer of a node (zero matrix when nothing has flowed into it yet).
    const Matrix& grad(int id);
    /// Adds `g` into the gradient of node `id`.
    template <typename Derived>
    void accumulate(int id, const Eigen::MatrixBase<Derived>& g) {
        Node& n = node(id);
        if (!n.requires_grad) return;
        Matrix& target = n.param_grad ? *n.param_grad : n.grad;
        if (target.size() == 0) target.setZero(g.rows(), g.cols());
        target.noalias() += g;
    }
    std::size_t size() const { return nodes_.size(); }

private:
    bool recording_;
    std::vector<Node> nodes_;
};

/// Differentiable operations. All shapes are [rows x cols]; "rows" is time.
namespace ops {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, Scalar s);
/// Adds a [1 x c] row vector to every row of `a`.
Var add_row(Var a, Var row);
Var matmul(Var a, Var b);
/// x * w (+ bias when bias is valid).
Var affine(Var x, Var w, Var bias = {});
Var silu(Var a);
Var gelu(Var a);
Var relu(Var a);
Var rms_norm(Var x, Var gain, Scalar eps = 1e-5f);
Var layer_norm(Var x, Var gamma, Var beta, Scalar eps = 1e-5f);
/// Rows of `table` selected by `indices` (embedding lookup or row gather).
Var gather_rows(Var table, std::span<const int> indices);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(Var a, Index begin, Index count);
/// Right-pads with zero rows to a multiple of `factor`, then concatenates each
/// group of `factor` consecutive rows: [n x d] -> [ceil(n/factor) x factor*d].
Var stack_frames(Var a, Index factor);
/// im2col over time: output row t holds input rows t*stride - pad_left + j for
/// j in [0, kernel), zero outside the input. Output rows: ceil(n / stride) when
/// pad_left = (kernel - 1) / 2.
Var unfold_time(Var a, Index kernel, Index stride, Index pad_left);
/// Inverted dropout; identity when p == 0.
Var dropout(Var a, Scalar p, std::mt19937_64& rng);
/// Multi-head scaled dot-product attention with rotary position embeddings.
Var attention(Var q, Var k, Var v, int n_heads, bool causal, bool rotary = true, Index position_offset = 0);
/// Sum over rows of token-level cross-entropy, multiplied by `weight`. 1x1 result.
/// Rows whose target is negative are ignored.
Var cross_entropy(Var logits, std::span<const int> targets, Scalar weight);
/// 0.5 * ||a - target||^2 scaled by `weight`. 1x1 result.
Var squared_error(Var a, const Matrix& target, Scalar weight = 1);
Var sum(Var a);

}  // namespace ops

/// Numerically stable row-wise log-softmax (no autograd).
Matrix log_softmax_rows(const Matrix& logits);

/// In-place rotary embedding of rows at positions offset, offset+1, ... (no
/// autograd; matches the rotation inside ops::attention).
void apply_rotary(Matrix& x, int n_heads, Index position_offset);

}  // namespace slotllm
