// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Modality adapters: map speech-encoder frames [n x d_enc] to LM-space frames
// [ceil(n / 8) x d_llm].
//
//   cnn          three same-padded stride-2 convolutions over time, then a
//                linear projector (an input projection is added when
//                d_enc != channels)
//   linear       zero-pad + stack `stack` frames, one affine map
//   mlp          stacking, then a SwiGLU block (gate/up -> hidden, down -> d_llm)
//   transformer  stacking, projection to d_model, pre-norm self-attention
//                layers, final norm, projection to d_llm when d_model != d_llm

#pragma once

#include "slotllm/nn.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace slotllm::inline SLOTLLM_ABI {

enum class AdapterKind { cnn, linear, mlp, transformer };

std::string to_string(AdapterKind kind);
AdapterKind adapter_kind_from_string(const std::string& name);

struct AdapterConfig {
    AdapterKind kind = AdapterKind::mlp;
    int d_enc = 64;
    int d_llm = 128;
    int subsample = 8;
    bool bias = true;

    // cnn
    int cnn_layers = 3;
    int cnn_kernel = 3;
    int cnn_stride = 2;
    int cnn_channels = 512;

    // linear / mlp / transformer
    int stack = 8;
    int mlp_hidden = 2048;

    // transformer
    int tf_d_model = 2048;
    int tf_layers = 2;
    int tf_heads = 8;
    int tf_d_ff = 3072;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

/// Whether freshly constructed weights are random or zero. Zero init exists so
/// full-size adapters can be built and counted quickly.
enum class AdapterInit { random, zeros };

class Adapter {
public:
    virtual ~Adapter() = default;

    /// frames: [n x d_enc], n >= 1. Returns [ceil(n / subsample) x d_llm].
    virtual Var forward(Tape& tape, Var frames, const ForwardContext& ctx) = 0;
    virtual void for_each_parameter(const ParameterVisitor& fn) = 0;

    const AdapterConfig& config() const { return config_; }
    /// Number of output frames produced for n input frames.
    Index output_frames(Index n) const { return (n + config_.subsample - 1) / config_.subsample; }

protected:
    explicit Adapter(AdapterConfig cfg) : config_(std::move(cfg)) {}
    void check_input(const Var& frames) const;

    AdapterConfig config_;
};

std::unique_ptr<Adapter> make_adapter(const AdapterConfig& cfg, std::uint64_t seed,
                                      AdapterInit init = AdapterInit::random);

/// Exact number of learnable scalars, by enumeration of the parameter tensors.
std::int64_t count_params(Adapter& adapter);

}  // namespace slotllm
