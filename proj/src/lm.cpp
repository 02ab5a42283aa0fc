// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotllm/lm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace slotllm::inline SLOTLLM_ABI {

void LmConfig::validate() const {
    if (vocab < 5) throw std::invalid_argument("lm.vocab must be >= 5");
    if (d_model < 2) throw std::invalid_argument("lm.d_model must be >= 2");
    if (layers < 1) throw std::invalid_argument("lm.layers must be >= 1");
    if (heads < 1 || d_model % heads != 0) throw std::invalid_argument("lm.d_model must be divisible by lm.heads");
    if ((d_model / heads) % 2 != 0) throw std::invalid_argument("lm.d_model / lm.heads must be even");
    if (d_ff < 1) throw std::invalid_argument("lm.d_ff must be >= 1");
}

json LmConfig::to_json() const {
    return {{"vocab", vocab}, {"d_model", d_model}, {"layers", layers}, {"heads", heads}, {"d_ff", d_ff}};
}

LmConfig LmConfig::from_json(const json& j) {
    LmConfig c;
    c.vocab = j.at("vocab").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.layers = j.at("layers").get<int>();
    c.heads = j.at("heads").get<int>();
    c.d_ff = j.at("d_ff").get<int>();
    return c;
}

DecoderLM::DecoderLM(const LmConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    const Index d = cfg_.d_model;
    const Index ff = cfg_.d_ff;
    // Residual-branch outputs start smaller so the stream stays O(1) in depth.
    const double out_std = 1.0 / std::sqrt(static_cast<double>(d) * 2.0 * cfg_.layers);
    embed_ = Parameter("lm.embed", random_normal(cfg_.vocab, d, 1.0, rng));
    for (int l = 0; l < cfg_.layers; ++l) {
        const std::string p = "lm.block" + std::to_string(l) + ".";
        Block b;
        b.attn_norm = RmsNorm(p + "attn_norm", d);
        b.q = Linear(p + "q", d, d, false, rng);
        b.k = Linear(p + "k", d, d, false, rng);
        b.v = Linear(p + "v", d, d, false, rng);
        b.o = Linear(p + "o", d, d, false, rng, out_std);
        b.ffn_norm = RmsNorm(p + "ffn_norm", d);
        b.gate = Linear(p + "gate", d, ff, false, rng);
        b.up = Linear(p + "up", d, ff, false, rng);
        b.down = Linear(p + "down", ff, d, false, rng, out_std * std::sqrt(static_cast<double>(d) / ff));
        blocks_.push_back(std::move(b));
    }
    final_norm_ = RmsNorm("lm.final_norm", d);
    head_ = Linear("lm.head", d, cfg_.vocab, false, rng);
}

Var DecoderLM::embed(Tape& tape, std::span<const int> ids) {
    for (int id : ids) {
        if (id < 0 || id >= cfg_.vocab) throw std::out_of_range("lm: token id " + std::to_string(id) + " outside vocabulary");
    }
    return ops::gather_rows(tape.param(embed_), ids);
}

Matrix DecoderLM::embed_rows(std::span<const int> ids) const {
    Matrix out(static_cast<Index>(ids.size()), cfg_.d_model);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= cfg_.vocab) throw std::out_of_range("lm: token id outside vocabulary");
        out.row(static_cast<Index>(i)) = embed_.value.row(ids[i]);
    }
    return out;
}

Var DecoderLM::hidden(Tape& tape, Var x, const ForwardContext& ctx) {
    if (x.cols() != cfg_.d_model) throw std::invalid_argument("lm: input width != d_model");
    for (Block& b : blocks_) {
        Var n = b.attn_norm.forward(tape, x);
        Var a = ops::attention(b.q.forward(tape, n, ctx), b.k.forward(tape, n, ctx), b.v.forward(tape, n, ctx),
                               cfg_.heads, true);
        x = ops::add(x, b.o.forward(tape, a, ctx));
        Var m = b.ffn_norm.forward(tape, x);
        Var f = ops::mul(ops::silu(b.gate.forward(tape, m, ctx)), b.up.forward(tape, m, ctx));
        x = ops::add(x, b.down.forward(tape, f, ctx));
    }
    return final_norm_.forward(tape, x);
}

Var DecoderLM::logits(Tape& tape, Var h, const ForwardContext& ctx) { return head_.forward(tape, h, ctx); }

Matrix DecoderLM::forward_logits(const Matrix& x) {
    Tape tape(false);
    const ForwardContext ctx;
    return logits(tape, hidden(tape, tape.constant(x), ctx), ctx).value();
}

std::vector<int> DecoderLM::greedy(const Matrix& prefix, int max_new, std::span<const int> stop) const {
    std::vector<int> out;
    if (max_new <= 0) return out;
    LmSession session(*this);
    Matrix logits = session.feed(prefix);
    for (int i = 0; i < max_new; ++i) {
        Eigen::Index tok = 0;
        logits.row(0).maxCoeff(&tok);
        const int t = static_cast<int>(tok);
        if (std::find(stop.begin(), stop.end(), t) != stop.end()) break;
        out.push_back(t);
        if (i + 1 == max_new) break;
        logits = session.feed(embed_.value.row(t));
    }
    return out;
}

void DecoderLM::attach_lora(const LoraSpec& spec, std::mt19937_64& rng) {
    for (Block& b : blocks_) b.each_linear([&](Linear& l) { l.attach_lora(spec, rng); });
}

void DecoderLM::merge_lora() {
    for (Block& b : blocks_) b.each_linear([](Linear& l) { l.merge_lora(); });
}

bool DecoderLM::has_lora() const { return !blocks_.empty() && blocks_.front().q.has_lora(); }

void DecoderLM::for_each_base(const ParameterVisitor& fn) {
    fn(embed_);
    for (Block& b : blocks_) {
        b.attn_norm.for_each_parameter(fn);
        b.ffn_norm.for_each_parameter(fn);
        b.each_linear([&](Linear& l) { l.for_each_base(fn); });
    }
    final_norm_.for_each_parameter(fn);
    head_.for_each_base(fn);
}

void DecoderLM::for_each_lora(const ParameterVisitor& fn) {
    for (Block& b : blocks_) b.each_linear([&](Linear& l) { l.for_each_lora(fn); });
}

void DecoderLM::for_each_parameter(const ParameterVisitor& fn) {
    for_each_base(fn);
    for_each_lora(fn);
}

LmSession::LmSession(const DecoderLM& lm)
    : lm_(&lm), keys_(lm.blocks_.size()), values_(lm.blocks_.size()) {}

Matrix LmSession::feed(const Matrix& x) {
    const LmConfig& cfg = lm_->cfg_;
    if (x.cols() != cfg.d_model || x.rows() < 1) throw std::invalid_argument("LmSession::feed: bad input shape");
    const Index m = x.rows();
    const Index total = len_ + m;
    const Index head_dim = cfg.d_model / cfg.heads;
    const Scalar inv_sqrt = Scalar(1) / std::sqrt(static_cast<Scalar>(head_dim));
    Matrix h = x;
    for (std::size_t l = 0; l < lm_->blocks_.size(); ++l) {
        const DecoderLM::Block& b = lm_->blocks_[l];
        const Matrix n = b.attn_norm.infer(h);
        Matrix q = b.q.infer(n);
        Matrix k = b.k.infer(n);
        apply_rotary(q, cfg.heads, len_);
        apply_rotary(k, cfg.heads, len_);
        Matrix& K = keys_[l];
        Matrix& V = values_[l];
        if (K.rows() < total) {
            const Index cap = std::max<Index>(total, 2 * K.rows());
            K.conservativeResize(cap, cfg.d_model);
            V.conservativeResize(cap, cfg.d_model);
        }
        K.middleRows(len_, m) = k;
        V.middleRows(len_, m) = b.v.infer(n);
        Matrix a(m, cfg.d_model);
        for (int hd = 0; hd < cfg.heads; ++hd) {
            const Index c0 = hd * head_dim;
            Matrix s = q.middleCols(c0, head_dim) * K.block(0, c0, total, head_dim).transpose();
            s *= inv_sqrt;
            for (Index i = 0; i < m; ++i) {
                const Index visible = len_ + i + 1;
                auto row = s.row(i).head(visible);
                const Scalar mx = row.maxCoeff();
                row = (row.array() - mx).exp();
                row /= row.sum();
                if (visible < total) s.row(i).tail(total - visible).setZero();
            }
            a.middleCols(c0, head_dim).noalias() = s * V.block(0, c0, total, head_dim);
        }
        h += b.o.infer(a);
        const Matrix n2 = b.ffn_norm.infer(h);
        const Matrix g = b.gate.infer(n2);
        const Matrix silu = g.array() / (Scalar(1) + (-g.array()).exp());
        h += b.down.infer(silu.cwiseProduct(b.up.infer(n2)));
    }
    len_ = total;
    return lm_->head_.infer(lm_->final_norm_.infer(h.bottomRows(1)));
}

}  // namespace slotllm
