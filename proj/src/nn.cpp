// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotllm/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace slotllm::inline SLOTLLM_ABI {

void LoraSpec::validate() const {
    if (rank < 1) throw std::invalid_argument("lora: rank must be >= 1");
    if (!(alpha > 0.0)) throw std::invalid_argument("lora: alpha must be > 0");
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("lora: dropout must be in [0, 1)");
    if (init_std < 0.0) throw std::invalid_argument("lora: init_std must be >= 0");
}

Matrix random_normal(Index rows, Index cols, double std, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, std);
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(dist(rng));
    return m;
}

Linear::Linear(const std::string& name, Index in, Index out, bool bias, std::mt19937_64& rng, double init_std) {
    if (in < 1 || out < 1) throw std::invalid_argument(name + ": linear dimensions must be positive");
    const double std = init_std > 0.0 ? init_std : 1.0 / std::sqrt(static_cast<double>(in));
    weight_ = Parameter(name + ".weight", init_std == 0.0 ? Matrix::Zero(in, out) : random_normal(in, out, std, rng));
    if (bias) bias_ = Parameter(name + ".bias", Matrix::Zero(1, out));
}

Var Linear::forward(Tape& tape, Var x, const ForwardContext& ctx) {
    Var out = ops::affine(x, tape.param(weight_), bias_ ? tape.param(*bias_) : Var{});
    if (lora_a_) {
        Var in = x;
        if (ctx.training && ctx.rng && lora_dropout_ > 0) in = ops::dropout(x, lora_dropout_, *ctx.rng);
        Var low = ops::matmul(in, tape.param(*lora_a_));
        Var up = ops::matmul(low, tape.param(*lora_b_));
        out = ops::add(out, ops::scale(up, lora_scale_));
    }
    return out;
}

Matrix Linear::infer(const Matrix& x) const {
    Matrix y(x.rows(), out_features());
    y.noalias() = x * weight_.value;
    if (bias_) y.rowwise() += bias_->value.row(0);
    if (lora_a_) {
        const Matrix low = x * lora_a_->value;
        y.noalias() += lora_scale_ * (low * lora_b_->value);
    }
    return y;
}

void Linear::attach_lora(const LoraSpec& spec, std::mt19937_64& rng) {
    spec.validate();
    const Index limit = std::min(in_features(), out_features());
    if (spec.rank > limit) {
        throw std::invalid_argument(weight_.name + ": lora rank " + std::to_string(spec.rank) +
                                    " exceeds min(in, out) = " + std::to_string(limit));
    }
    std::string base = weight_.name.substr(0, weight_.name.size() - std::string(".weight").size());
    lora_a_ = Parameter(base + ".lora_a", random_normal(in_features(), spec.rank, spec.init_std, rng));
    lora_b_ = Parameter(base + ".lora_b", Matrix::Zero(spec.rank, out_features()));
    lora_scale_ = static_cast<Scalar>(spec.scale());
    lora_dropout_ = static_cast<Scalar>(spec.dropout);
}

Matrix Linear::effective_weight() const {
    Matrix w = weight_.value;
    if (lora_a_) w.noalias() += lora_scale_ * (lora_a_->value * lora_b_->value);
    return w;
}

void Linear::merge_lora() {
    if (!lora_a_) return;
    weight_.value = effective_weight();
    drop_lora();
}

void Linear::drop_lora() {
    lora_a_.reset();
    lora_b_.reset();
    lora_scale_ = 0;
    lora_dropout_ = 0;
}

void Linear::for_each_base(const ParameterVisitor& fn) {
    fn(weight_);
    if (bias_) fn(*bias_);
}

void Linear::for_each_lora(const ParameterVisitor& fn) {
    if (lora_a_) {
        fn(*lora_a_);
        fn(*lora_b_);
    }
}

void Linear::for_each_parameter(const ParameterVisitor& fn) {
    for_each_base(fn);
    for_each_lora(fn);
}

RmsNorm::RmsNorm(const std::string& name, Index dim) : gain_(name + ".gain", Matrix::Ones(1, dim)) {}

Var RmsNorm::forward(Tape& tape, Var x) { return ops::rms_norm(x, tape.param(gain_)); }

Matrix RmsNorm::infer(const Matrix& x) const {
    Matrix y(x.rows(), x.cols());
    for (Index i = 0; i < x.rows(); ++i) {
        const Scalar ms = x.row(i).squaredNorm() / static_cast<Scalar>(x.cols());
        y.row(i) = x.row(i).cwiseProduct(gain_.value.row(0)) / std::sqrt(ms + static_cast<Scalar>(1e-5f));
    }
    return y;
}

LayerNorm::LayerNorm(const std::string& name, Index dim)
    : gamma_(name + ".gamma", Matrix::Ones(1, dim)), beta_(name + ".beta", Matrix::Zero(1, dim)) {}

Var LayerNorm::forward(Tape& tape, Var x) { return ops::layer_norm(x, tape.param(gamma_), tape.param(beta_)); }

}  // namespace slotllm
