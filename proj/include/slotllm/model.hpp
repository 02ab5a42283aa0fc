// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0
//
// The composite speech LLM: speech encoder -> modality adapter -> decoder LM,
// with audio embeddings spliced between text embeddings along time.
//
// Sequence layout for one sample:
//
//   [BOS] instruction "\n" | span | response [EOS]
//
// The instruction segment is just [BOS] when the instruction is empty. The
// span is the adapted audio frames (audio mode), the transcript followed by
// "\n" (text mode), or nothing for samples without audio. Loss covers the
// response segment only.

#pragma once

#include "slotllm/adapters.hpp"
#include "slotllm/audio.hpp"
#include "slotllm/checkpoint.hpp"
#include "slotllm/encoder.hpp"
#include "slotllm/instructions.hpp"
#include "slotllm/lm.hpp"
#include "slotllm/tokenizer.hpp"

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace slotllm::inline SLOTLLM_ABI {

enum class Module { encoder, adapter, lm };
using ModuleSet = std::set<Module>;

std::string to_string(Module m);
Module module_from_string(const std::string& s);

/// How the span between instruction and response is filled.
enum class SpanMode { audio, text };

struct ModelConfig {
    EncoderConfig encoder;
    AdapterConfig adapter;
    LmConfig lm;
    int frame_rate_per_char = 4;

    /// Checks each part and the cross-module widths.
    void validate() const;
    json to_json() const;
    static ModelConfig from_json(const json& j);
};

struct FusedSequence {
    Var embeddings;
    /// Token id per position; -1 on audio frames.
    std::vector<int> tokens;
    std::vector<bool> loss_mask;
    Index instruction_len = 0;
    Index span_len = 0;
    Index response_len = 0;

    Index length() const { return instruction_len + span_len + response_len; }
};

class CompositeModel {
public:
    CompositeModel(const ModelConfig& cfg, Tokenizer tokenizer, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    const Tokenizer& tokenizer() const { return tokenizer_; }

    std::vector<int> instruction_tokens(const std::string& instruction) const;
    std::vector<int> span_tokens(const std::string& transcript) const;
    std::vector<int> response_tokens(const std::string& response) const;

    /// Adapted audio frames [ceil(n / subsample) x d_llm].
    Var speech_embeddings(Tape& tape, const Matrix& frames, const ForwardContext& ctx);

    /// Throws std::out_of_range for an unresolvable audio_ref.
    FusedSequence fuse(Tape& tape, const InstructionSample& sample, const AudioCatalog& catalog, SpanMode mode,
                       const ForwardContext& ctx);
    /// Response-token cross-entropy, averaged over the response and times `weight`.
    Var loss(Tape& tape, const InstructionSample& sample, const AudioCatalog& catalog, SpanMode mode, Scalar weight,
             const ForwardContext& ctx);
    /// Same quantity without autograd.
    double eval_loss(const InstructionSample& sample, const AudioCatalog& catalog, SpanMode mode);

    /// Greedy decoding of the response given an instruction and audio features.
    std::string generate(const std::string& instruction, const Matrix& frames, int max_new = 512);
    /// Text-span variant; an empty transcript omits the span.
    std::string generate_text(const std::string& instruction, const std::string& transcript, int max_new = 512,
                              bool stop_at_newline = false);
    std::string generate(const InstructionSample& sample, const AudioCatalog& catalog, SpanMode mode,
                         int max_new = 512);

    /// Injects LoRA into the LM (and optionally the encoder). Throws when the
    /// rank exceeds a layer's dimensions or LoRA is already present.
    void apply_lora(const LoraSpec& spec, bool include_encoder, std::uint64_t seed);
    /// Folds the low-rank factors into the dense weights.
    void merge_lora();
    bool has_lora() const { return lora_.has_value(); }
    const std::optional<LoraSpec>& lora_spec() const { return lora_; }

    /// Modules in `modules` train (only their LoRA factors when present);
    /// everything else is frozen. Throws "nothing to train" on an empty set.
    void set_trainable(const ModuleSet& modules);
    std::vector<Parameter*> trainable_parameters();

    void for_each_base(Module m, const ParameterVisitor& fn);
    void for_each_lora(Module m, const ParameterVisitor& fn);
    void for_each_parameter(const ParameterVisitor& fn);
    std::int64_t parameter_count(Module m);

    /// SHA-256 of a module's base tensors (names, shapes and values).
    std::string base_hash(Module m);
    /// SHA-256 of a module's LoRA factors (empty-input hash when none).
    std::string lora_hash(Module m);

    SpeechEncoder& encoder() { return asr_.encoder(); }
    /// The encoder together with its frame-level character head.
    FrameAsr& encoder_asr() { return asr_; }
    Adapter& adapter() { return *adapter_; }
    DecoderLM& lm() { return lm_; }

    /// In-memory copy of every parameter value (for best-checkpoint tracking).
    std::vector<Matrix> snapshot();
    void restore(const std::vector<Matrix>& values);

    CheckpointData to_checkpoint();
    /// Rebuilds a model, including LoRA factors, from a checkpoint.
    static CompositeModel from_checkpoint(const CheckpointData& data);
    void save(const std::filesystem::path& path);
    static CompositeModel load(const std::filesystem::path& path);

    /// Copies matching tensors of `data` into `m` (used to install pretrained
    /// foundations). Throws on shape mismatch or a missing tensor.
    void load_module(Module m, const CheckpointData& data);

private:
    std::string decode_response(const std::vector<int>& ids) const;

    ModelConfig cfg_;
    Tokenizer tokenizer_;
    FrameAsr asr_;
    std::unique_ptr<Adapter> adapter_;
    DecoderLM lm_;
    std::optional<LoraSpec> lora_;
    bool lora_on_encoder_ = false;
    std::vector<int> newline_;
};

}  // namespace slotllm
