// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Stand-ins for the pretrained foundation models. The encoder is pretrained
// as a frame-level character recognizer; the LM is pretrained on dialogue
// text, local instruction triplets and a transcript-copy task (never on slot
// data). Both are deterministic functions of their configuration and can be
// cached on disk.

#pragma once

#include "slotllm/corpus.hpp"
#include "slotllm/model.hpp"
#include "slotllm/training.hpp"

#include <filesystem>

namespace slotllm::inline SLOTLLM_ABI {

struct FoundationConfig {
    std::uint64_t seed = 0xf0da7105ULL;
    int conversations = 400;
    int instruction_items = 600;
    long lm_steps = 1500;
    int lm_batch = 16;
    double lm_lr = 2e-3;
    long encoder_steps = 400;
    int encoder_batch = 8;
    double encoder_lr = 3e-3;

    void validate() const;
    json to_json() const;
};

struct Foundation {
    Tokenizer tokenizer;
    CheckpointData encoder;
    CheckpointData lm;
    /// Final pretraining eval losses and the cache key.
    json info;
};

/// Vocabulary shared by every model: grammar words, templates, labels and
/// the auxiliary-task texts.
Tokenizer build_shared_tokenizer();

/// Pretrains both foundations. `model_cfg.lm.vocab` is ignored (taken from the tokenizer).
Foundation pretrain_foundation(const ModelConfig& model_cfg, const AudioSettings& audio, std::uint64_t grammar_seed,
                               const FoundationConfig& cfg, const ProgressFn& progress = {});

/// Loads `<cache_dir>/foundation-<key>.{encoder,lm}.ckpt` when present,
/// otherwise pretrains and stores them. An empty cache_dir disables caching.
Foundation load_or_pretrain_foundation(const ModelConfig& model_cfg, const AudioSettings& audio,
                                       std::uint64_t grammar_seed, const FoundationConfig& cfg,
                                       const std::filesystem::path& cache_dir, const ProgressFn& progress = {});

/// Composite model with a fresh adapter (from `seed`) on top of the foundations.
CompositeModel assemble_model(const ModelConfig& model_cfg, const Foundation& f, std::uint64_t seed);

}  // namespace slotllm
