// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reference systems: a text-only NLU fine-tuned on gold transcripts, a
// cascade of a separately trained ASR into that same NLU, and a speech LLM
// that trains only a CNN adapter between the frozen foundations.

#pragma once

#include "slotllm/evaluation.hpp"
#include "slotllm/foundation.hpp"
#include "slotllm/training.hpp"

#include <functional>
#include <memory>

namespace slotllm::inline SLOTLLM_ABI {

struct BaselineSetup {
    const Foundation* foundation = nullptr;
    ModelConfig model;
    /// SLOT train/eval samples (AST train/eval for the cascade ASR).
    DataBundle data;
    StrategyOptions train;
    std::uint64_t seed = 0;
    int max_new = 96;

    void validate() const;
};

struct TextBaseline {
    /// LM with the fine-tuned LoRA merged in; the encoder and adapter are unused.
    CompositeModel model;
    StrategyResult training;
    EvalRun eval;
    /// base_hash of the NLU LM.
    std::string nlu_hash;
};

/// Fine-tunes the foundation LM on instruction + gold transcript -> slot JSON
/// and evaluates it on gold transcripts.
TextBaseline run_text_baseline(const BaselineSetup& setup);

/// Evaluates a text-span model on gold transcripts.
EvalRun evaluate_text(CompositeModel& nlu, const std::vector<InstructionSample>& eval, const AudioCatalog& catalog,
                      int max_new);

/// Audio reference + features -> transcript.
using Transcriber = std::function<std::string(const std::string& audio_ref, const Matrix& frames)>;

struct CascadeSystem {
    /// Frame-level recognizer trained from scratch on AST pairs; only its
    /// encoder module is meaningful.
    std::unique_ptr<CompositeModel> asr;
    StrategyResult asr_training;
    /// The text baseline's LM (not owned).
    CompositeModel* nlu = nullptr;

    Transcriber transcriber();
};

struct CascadeRun {
    EvalRun eval;
    /// Corpus WER of the transcripts fed to the NLU.
    double wer = 0;
    std::vector<std::string> transcripts;
};

/// Transcribes each eval sample's audio, then runs the NLU with the text
/// template on the hypothesis.
CascadeRun evaluate_cascade(CompositeModel& nlu, const Transcriber& asr, const std::vector<InstructionSample>& eval,
                            const AudioCatalog& catalog, int max_new);

/// Gold transcript lookup, for oracle comparisons.
Transcriber identity_transcriber(const AudioCatalog& catalog);

struct CascadeBaseline {
    CascadeSystem system;
    CascadeRun run;
};

CascadeBaseline run_cascade(const BaselineSetup& setup, TextBaseline& text);

struct SpeechLlmBaseline {
    CompositeModel model;
    StrategyResult training;
    EvalRun eval;
};

/// CNN adapter between the pretrained encoder and the text baseline's LM;
/// only the adapter trains unless `lm_lora` adds LoRA factors to the LM.
SpeechLlmBaseline run_speechllm_baseline(const BaselineSetup& setup, TextBaseline& text, bool lm_lora = false);

/// Installs `source`'s LM weights into `target`.
void copy_lm(CompositeModel& target, CompositeModel& source);

}  // namespace slotllm
