// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotllm/adapters.hpp"

#include <array>
#include <stdexcept>

namespace slotllm::inline SLOTLLM_ABI {

std::string to_string(AdapterKind kind) {
    switch (kind) {
        case AdapterKind::cnn: return "cnn";
        case AdapterKind::linear: return "linear";
        case AdapterKind::mlp: return "mlp";
        case AdapterKind::transformer: return "transformer";
    }
    return "unknown";
}

AdapterKind adapter_kind_from_string(const std::string& name) {
    if (name == "cnn") return AdapterKind::cnn;
    if (name == "linear") return AdapterKind::linear;
    if (name == "mlp") return AdapterKind::mlp;
    if (name == "transformer") return AdapterKind::transformer;
    throw std::invalid_argument("unknown adapter kind '" + name + "' (expected cnn|linear|mlp|transformer)");
}

void AdapterConfig::validate() const {
    auto positive = [](int v, const char* field) {
        if (v < 1) throw std::invalid_argument(std::string("adapter.") + field + " must be >= 1");
    };
    positive(d_enc, "d_enc");
    positive(d_llm, "d_llm");
    positive(subsample, "subsample");
    switch (kind) {
        case AdapterKind::cnn: {
            positive(cnn_layers, "cnn_layers");
            positive(cnn_kernel, "cnn_kernel");
            positive(cnn_stride, "cnn_stride");
            positive(cnn_channels, "cnn_channels");
            int product = 1;
            for (int i = 0; i < cnn_layers; ++i) product *= cnn_stride;
            if (product != subsample) {
                throw std::invalid_argument("adapter.cnn_stride^cnn_layers (" + std::to_string(product) +
                                            ") must equal adapter.subsample (" + std::to_string(subsample) + ")");
            }
            break;
        }
        case AdapterKind::linear:
        case AdapterKind::mlp:
        case AdapterKind::transformer:
            positive(stack, "stack");
            if (stack != subsample) {
                throw std::invalid_argument("adapter.stack (" + std::to_string(stack) +
                                            ") must equal adapter.subsample (" + std::to_string(subsample) + ")");
            }
            if (kind == AdapterKind::mlp) positive(mlp_hidden, "mlp_hidden");
            if (kind == AdapterKind::transformer) {
                positive(tf_d_model, "tf_d_model");
                positive(tf_layers, "tf_layers");
                positive(tf_heads, "tf_heads");
                positive(tf_d_ff, "tf_d_ff");
                if (tf_d_model % tf_heads != 0) {
                    throw std::invalid_argument("adapter.tf_d_model must be divisible by adapter.tf_heads");
                }
                if ((tf_d_model / tf_heads) % 2 != 0) {
                    throw std::invalid_argument("adapter.tf_d_model / tf_heads must be even (rotary positions)");
                }
            }
            break;
    }
}

void Adapter::check_input(const Var& frames) const {
    if (frames.rows() < 1) throw std::invalid_argument("adapter: input has no frames");
    if (frames.cols() != config_.d_enc) {
        throw std::invalid_argument("adapter: input width " + std::to_string(frames.cols()) + " != d_enc " +
                                    std::to_string(config_.d_enc));
    }
}

namespace {

double init_std(AdapterInit init) { return init == AdapterInit::zeros ? 0.0 : -1.0; }

class CnnAdapter final : public Adapter {
public:
    CnnAdapter(const AdapterConfig& cfg, std::mt19937_64& rng, AdapterInit init) : Adapter(cfg) {
        const double s = init_std(init);
        if (cfg.d_enc != cfg.cnn_channels) {
            input_proj_ = Linear("adapter.input_proj", cfg.d_enc, cfg.cnn_channels, cfg.bias, rng, s);
            has_input_proj_ = true;
        }
        for (int i = 0; i < cfg.cnn_layers; ++i) {
            convs_.emplace_back("adapter.conv" + std::to_string(i),
                                static_cast<Index>(cfg.cnn_kernel) * cfg.cnn_channels, cfg.cnn_channels, cfg.bias,
                                rng, s);
        }
        proj_ = Linear("adapter.proj", cfg.cnn_channels, cfg.d_llm, cfg.bias, rng, s);
    }

    Var forward(Tape& tape, Var frames, const ForwardContext& ctx) override {
        check_input(frames);
        Var h = has_input_proj_ ? input_proj_.forward(tape, frames, ctx) : frames;
        const Index pad = (config_.cnn_kernel - 1) / 2;
        for (Linear& conv : convs_) {
            h = ops::unfold_time(h, config_.cnn_kernel, config_.cnn_stride, pad);
            h = ops::gelu(conv.forward(tape, h, ctx));
        }
        return proj_.forward(tape, h, ctx);
    }

    void for_each_parameter(const ParameterVisitor& fn) override {
        if (has_input_proj_) input_proj_.for_each_parameter(fn);
        for (Linear& c : convs_) c.for_each_parameter(fn);
        proj_.for_each_parameter(fn);
    }

private:
    bool has_input_proj_ = false;
    Linear input_proj_;
    std::vector<Linear> convs_;
    Linear proj_;
};

class LinearAdapter final : public Adapter {
public:
    LinearAdapter(const AdapterConfig& cfg, std::mt19937_64& rng, AdapterInit init) : Adapter(cfg) {
        proj_ = Linear("adapter.proj", static_cast<Index>(cfg.stack) * cfg.d_enc, cfg.d_llm, cfg.bias, rng,
                       init_std(init));
    }

    Var forward(Tape& tape, Var frames, const ForwardContext& ctx) override {
        check_input(frames);
        return proj_.forward(tape, ops::stack_frames(frames, config_.stack), ctx);
    }

    void for_each_parameter(const ParameterVisitor& fn) override { proj_.for_each_parameter(fn); }

    Linear& projector() { return proj_; }

private:
    Linear proj_;
};

class MlpAdapter final : public Adapter {
public:
    MlpAdapter(const AdapterConfig& cfg, std::mt19937_64& rng, AdapterInit init) : Adapter(cfg) {
        const Index in = static_cast<Index>(cfg.stack) * cfg.d_enc;
        const double s = init_std(init);
        gate_ = Linear("adapter.gate", in, cfg.mlp_hidden, cfg.bias, rng, s);
        up_ = Linear("adapter.up", in, cfg.mlp_hidden, cfg.bias, rng, s);
        down_ = Linear("adapter.down", cfg.mlp_hidden, cfg.d_llm, cfg.bias, rng, s);
    }

    Var forward(Tape& tape, Var frames, const ForwardContext& ctx) override {
        check_input(frames);
        Var x = ops::stack_frames(frames, config_.stack);
        Var h = ops::mul(ops::silu(gate_.forward(tape, x, ctx)), up_.forward(tape, x, ctx));
        return down_.forward(tape, h, ctx);
    }

    void for_each_parameter(const ParameterVisitor& fn) override {
        gate_.for_each_parameter(fn);
        up_.for_each_parameter(fn);
        down_.for_each_parameter(fn);
    }

private:
    Linear gate_, up_, down_;
};

class TransformerAdapter final : public Adapter {
public:
    TransformerAdapter(const AdapterConfig& cfg, std::mt19937_64& rng, AdapterInit init) : Adapter(cfg) {
        const double s = init_std(init);
        const Index dm = cfg.tf_d_model;
        in_proj_ = Linear("adapter.in_proj", static_cast<Index>(cfg.stack) * cfg.d_enc, dm, cfg.bias, rng, s);
        for (int i = 0; i < cfg.tf_layers; ++i) {
            const std::string p = "adapter.layers." + std::to_string(i);
            Layer l;
            l.norm1 = LayerNorm(p + ".norm1", dm);
            l.q = Linear(p + ".q", dm, dm, cfg.bias, rng, s);
            l.k = Linear(p + ".k", dm, dm, cfg.bias, rng, s);
            l.v = Linear(p + ".v", dm, dm, cfg.bias, rng, s);
            l.o = Linear(p + ".o", dm, dm, cfg.bias, rng, s);
            l.norm2 = LayerNorm(p + ".norm2", dm);
            l.ff1 = Linear(p + ".ff1", dm, cfg.tf_d_ff, cfg.bias, rng, s);
            l.ff2 = Linear(p + ".ff2", cfg.tf_d_ff, dm, cfg.bias, rng, s);
            layers_.push_back(std::move(l));
        }
        final_norm_ = LayerNorm("adapter.final_norm", dm);
        if (cfg.tf_d_model != cfg.d_llm) {
            out_proj_ = Linear("adapter.out_proj", dm, cfg.d_llm, cfg.bias, rng, s);
            has_out_proj_ = true;
        }
    }

    Var forward(Tape& tape, Var frames, const ForwardContext& ctx) override {
        check_input(frames);
        Var h = in_proj_.forward(tape, ops::stack_frames(frames, config_.stack), ctx);
        for (Layer& l : layers_) {
            Var n = l.norm1.forward(tape, h);
            Var a = ops::attention(l.q.forward(tape, n, ctx), l.k.forward(tape, n, ctx), l.v.forward(tape, n, ctx),
                                   config_.tf_heads, /*causal=*/false);
            h = ops::add(h, l.o.forward(tape, a, ctx));
            Var f = l.ff2.forward(tape, ops::gelu(l.ff1.forward(tape, l.norm2.forward(tape, h), ctx)), ctx);
            h = ops::add(h, f);
        }
        h = final_norm_.forward(tape, h);
        return has_out_proj_ ? out_proj_.forward(tape, h, ctx) : h;
    }

    void for_each_parameter(const ParameterVisitor& fn) override {
        in_proj_.for_each_parameter(fn);
        for (Layer& l : layers_) {
            l.norm1.for_each_parameter(fn);
            for (Linear* lin : {&l.q, &l.k, &l.v, &l.o}) lin->for_each_parameter(fn);
            l.norm2.for_each_parameter(fn);
            l.ff1.for_each_parameter(fn);
            l.ff2.for_each_parameter(fn);
        }
        final_norm_.for_each_parameter(fn);
        if (has_out_proj_) out_proj_.for_each_parameter(fn);
    }

private:
    struct Layer {
        LayerNorm norm1;
        Linear q, k, v, o;
        LayerNorm norm2;
        Linear ff1, ff2;
    };
    Linear in_proj_;
    std::vector<Layer> layers_;
    LayerNorm final_norm_;
    bool has_out_proj_ = false;
    Linear out_proj_;
};

}  // namespace

std::unique_ptr<Adapter> make_adapter(const AdapterConfig& cfg, std::uint64_t seed, AdapterInit init) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    switch (cfg.kind) {
        case AdapterKind::cnn: return std::make_unique<CnnAdapter>(cfg, rng, init);
        case AdapterKind::linear: return std::make_unique<LinearAdapter>(cfg, rng, init);
        case AdapterKind::mlp: return std::make_unique<MlpAdapter>(cfg, rng, init);
        case AdapterKind::transformer: return std::make_unique<TransformerAdapter>(cfg, rng, init);
    }
    throw std::invalid_argument("make_adapter: unknown kind");
}

std::int64_t count_params(Adapter& adapter) {
    std::int64_t total = 0;
    adapter.for_each_parameter([&](Parameter& p) { total += static_cast<std::int64_t>(p.size()); });
    return total;
}

}  // namespace slotllm
