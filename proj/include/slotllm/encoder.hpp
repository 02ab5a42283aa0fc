// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Toy speech encoder over pseudo-audio frames and the frame-level character
// recognizer used as the cascade's ASR front end.

#pragma once

#include "slotllm/nn.hpp"
#include "slotllm/util.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace slotllm::inline SLOTLLM_ABI {

struct EncoderConfig {
    int d_audio = 16;
    int d_enc = 64;
    int layers = 2;
    int kernel = 3;

    void validate() const;
    json to_json() const;
    static EncoderConfig from_json(const json& j);
    bool operator==(const EncoderConfig&) const = default;
};

/// Stack of same-padded stride-1 temporal convolutions with GELU; layers after
/// the first are residual. Output has as many frames as the input.
class SpeechEncoder {
public:
    SpeechEncoder() = default;
    SpeechEncoder(const EncoderConfig& cfg, std::uint64_t seed, const std::string& name = "encoder");

    /// frames: [n x d_audio] -> [n x d_enc].
    Var forward(Tape& tape, Var frames, const ForwardContext& ctx);
    Index output_frames(Index n) const { return n; }
    const EncoderConfig& config() const { return cfg_; }

    void attach_lora(const LoraSpec& spec, std::mt19937_64& rng);
    void merge_lora();
    bool has_lora() const;

    void for_each_base(const ParameterVisitor& fn);
    void for_each_lora(const ParameterVisitor& fn);
    void for_each_parameter(const ParameterVisitor& fn);

private:
    EncoderConfig cfg_;
    std::vector<Linear> convs_;
};

/// Characters the recognizer can emit: printable ASCII.
inline constexpr int kAsrClasses = 95;

/// Encoder + per-frame character classifier. Training aligns frame i with
/// character i / F; decoding averages log-probabilities over each block of F
/// frames and takes the argmax (a segmental decoder).
class FrameAsr {
public:
    FrameAsr() = default;
    FrameAsr(const EncoderConfig& cfg, int frame_rate_per_char, std::uint64_t seed, const std::string& name = "asr");

    /// Frame cross-entropy summed over frames, times `weight`.
    Var loss(Tape& tape, const Matrix& frames, const std::string& text, Scalar weight, const ForwardContext& ctx);
    std::string transcribe(const Matrix& frames);
    /// Mean per-frame cross-entropy (no autograd).
    double frame_loss(const Matrix& frames, const std::string& text);

    SpeechEncoder& encoder() { return encoder_; }
    const SpeechEncoder& encoder() const { return encoder_; }
    int frame_rate_per_char() const { return F_; }
    void for_each_base(const ParameterVisitor& fn);
    void for_each_lora(const ParameterVisitor& fn) { encoder_.for_each_lora(fn); }
    void for_each_parameter(const ParameterVisitor& fn);

private:
    Matrix log_probs(const Matrix& frames);
    std::vector<int> frame_targets(const std::string& text, Index n_frames) const;

    SpeechEncoder encoder_;
    Linear head_;
    int F_ = 1;
};

}  // namespace slotllm
