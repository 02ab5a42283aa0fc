// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Toy decoder-only language model: token embeddings, pre-norm causal
// self-attention blocks with rotary positions and SwiGLU feed-forward layers,
// a final RMSNorm and an untied output projection.

#pragma once

#include "slotllm/nn.hpp"
#include "slotllm/util.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace slotllm::inline SLOTLLM_ABI {

struct LmConfig {
    int vocab = 0;
    int d_model = 128;
    int layers = 2;
    int heads = 4;
    int d_ff = 384;

    void validate() const;
    json to_json() const;
    static LmConfig from_json(const json& j);
    bool operator==(const LmConfig&) const = default;
};

class LmSession;

class DecoderLM {
public:
    DecoderLM() = default;
    DecoderLM(const LmConfig& cfg, std::uint64_t seed);

    const LmConfig& config() const { return cfg_; }

    /// Embedding rows for `ids`: [len x d_model].
    Var embed(Tape& tape, std::span<const int> ids);
    Matrix embed_rows(std::span<const int> ids) const;
    /// Causal transformer over an embedding sequence; returns final-normed hidden states.
    Var hidden(Tape& tape, Var x, const ForwardContext& ctx);
    /// Next-token logits for the given hidden rows.
    Var logits(Tape& tape, Var h, const ForwardContext& ctx);
    /// Full forward without autograd; logits for every position.
    Matrix forward_logits(const Matrix& x);

    /// Greedy decoding after `prefix` (embedding rows) with a KV cache.
    /// Stops before any token in `stop` or after `max_new` tokens.
    std::vector<int> greedy(const Matrix& prefix, int max_new, std::span<const int> stop) const;

    /// LoRA on every projection inside the blocks (the output head stays dense).
    void attach_lora(const LoraSpec& spec, std::mt19937_64& rng);
    void merge_lora();
    bool has_lora() const;

    void for_each_base(const ParameterVisitor& fn);
    void for_each_lora(const ParameterVisitor& fn);
    void for_each_parameter(const ParameterVisitor& fn);

private:
    friend class LmSession;

    struct Block {
        RmsNorm attn_norm;
        Linear q, k, v, o;
        RmsNorm ffn_norm;
        Linear gate, up, down;

        template <typename Fn>
        void each_linear(Fn&& fn) {
            for (Linear* l : {&q, &k, &v, &o, &gate, &up, &down}) fn(*l);
        }
    };

    LmConfig cfg_;
    Parameter embed_;
    std::vector<Block> blocks_;
    RmsNorm final_norm_;
    Linear head_;
};

/// Incremental inference state: feeds rows one chunk at a time and keeps the
/// rotated keys and values of every layer.
class LmSession {
public:
    explicit LmSession(const DecoderLM& lm);
    /// Appends rows and returns the next-token logits after the last one ([1 x vocab]).
    Matrix feed(const Matrix& x);
    Index length() const { return len_; }

private:
    const DecoderLM* lm_;
    std::vector<Matrix> keys_;
    std::vector<Matrix> values_;
    Index len_ = 0;
};

}  // namespace slotllm
