// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Layer building blocks shared by the encoder, the adapters and the decoder LM.

#pragma once

#include "slotllm/tensor.hpp"

#include <functional>
#include <optional>
#include <random>
#include <string>

namespace slotllm::inline SLOTLLM_ABI {

using ParameterVisitor = std::function<void(Parameter&)>;
using ConstParameterVisitor = std::function<void(const Parameter&)>;

/// Per-forward switches. Dropout only fires when `training` is set and an RNG is given.
struct ForwardContext {
    bool training = false;
    std::mt19937_64* rng = nullptr;
};

/// Low-rank adaptation settings. Targets every affine map of the adapted module.
struct LoraSpec {
    int rank = 32;
    double alpha = 128.0;
    double dropout = 0.05;
    double init_std = 0.02;

    double scale() const { return alpha / static_cast<double>(rank); }
    void validate() const;
};

/// y = x W + b, optionally with a low-rank side path scale * dropout(x) A B.
class Linear {
public:
    Linear() = default;
    /// Weights ~ N(0, init_std^2); init_std <= 0 selects 1/sqrt(in). Biases start at zero.
    Linear(const std::string& name, Index in, Index out, bool bias, std::mt19937_64& rng, double init_std = -1.0);

    Var forward(Tape& tape, Var x, const ForwardContext& ctx);
    /// Inference without autograd (no dropout).
    Matrix infer(const Matrix& x) const;

    Index in_features() const { return weight_.value.rows(); }
    Index out_features() const { return weight_.value.cols(); }
    bool has_bias() const { return bias_.has_value(); }

    /// A ~ N(0, init_std^2) with shape [in x r], B = 0 with shape [r x out].
    void attach_lora(const LoraSpec& spec, std::mt19937_64& rng);
    bool has_lora() const { return lora_a_.has_value(); }
    /// Folds scale * A B into W and removes the factors.
    void merge_lora();
    void drop_lora();
    /// Dense weight the layer currently computes with (W + scale * A B).
    Matrix effective_weight() const;

    Parameter& weight() { return weight_; }
    const Parameter& weight() const { return weight_; }
    Parameter* bias() { return bias_ ? &*bias_ : nullptr; }
    Parameter* lora_a() { return lora_a_ ? &*lora_a_ : nullptr; }
    Parameter* lora_b() { return lora_b_ ? &*lora_b_ : nullptr; }

    void for_each_base(const ParameterVisitor& fn);
    void for_each_lora(const ParameterVisitor& fn);
    void for_each_parameter(const ParameterVisitor& fn);

private:
    Parameter weight_;
    std::optional<Parameter> bias_;
    std::optional<Parameter> lora_a_;
    std::optional<Parameter> lora_b_;
    Scalar lora_scale_ = 0;
    Scalar lora_dropout_ = 0;
};

class RmsNorm {
public:
    RmsNorm() = default;
    RmsNorm(const std::string& name, Index dim);
    Var forward(Tape& tape, Var x);
    Matrix infer(const Matrix& x) const;
    void for_each_parameter(const ParameterVisitor& fn) { fn(gain_); }

private:
    Parameter gain_;
};

class LayerNorm {
public:
    LayerNorm() = default;
    LayerNorm(const std::string& name, Index dim);
    Var forward(Tape& tape, Var x);
    void for_each_parameter(const ParameterVisitor& fn) {
        fn(gamma_);
        fn(beta_);
    }

private:
    Parameter gamma_;
    Parameter beta_;
};

/// Matrix of i.i.d. N(0, std^2) entries.
Matrix random_normal(Index rows, Index cols, double std, std::mt19937_64& rng);

}  // namespace slotllm
