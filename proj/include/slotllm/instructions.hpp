// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Instruction-tuning triplets (audio, instruction, response) for slot filling
// and the auxiliary tasks, plus the multitask mixer.

#pragma once

#include "slotllm/audio.hpp"
#include "slotllm/corpus.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace slotllm::inline SLOTLLM_ABI {

enum class Task { SLOT, AST, SIT, SQIT, CONT };

std::string to_string(Task t);
Task task_from_string(const std::string& s);

struct SampleMeta {
    /// Context turns actually included (the draw truncated at the conversation start).
    int context_T = 0;
    /// Context size as drawn, before truncation.
    int context_T_drawn = 0;
    int n_distractors = 0;
    int template_id = -1;

    bool operator==(const SampleMeta&) const = default;
};

struct InstructionSample {
    std::string audio_ref;  // empty for text-only samples
    std::string instruction;
    std::string response;
    Task task = Task::SLOT;
    SampleMeta meta;
    /// Labels named in the instruction (gold plus distractors), empty when not querying.
    std::vector<std::string> queried_labels;

    bool has_audio() const { return !audio_ref.empty(); }
    bool operator==(const InstructionSample&) const = default;
};

json to_json(const InstructionSample& s);
InstructionSample instruction_sample_from_json(const json& j);
void save_samples(const std::filesystem::path& path, const std::vector<InstructionSample>& samples);
std::vector<InstructionSample> load_samples(const std::filesystem::path& path);

struct InstructionBuildConfig {
    int T_max = 3;
    int S_min = 1;
    int S_max = 5;
    int n_templates = 10;
    double query_specific_slots = 0.5;
    std::uint64_t seed = 0;

    void validate() const;
};

/// The prompt templates; ids 0-4 are the reference set, 5-9 paraphrases.
const std::vector<std::string>& prompt_templates();
/// Versioned registry {"version": 1, "templates": [{"id", "text"}]}.
json template_registry();

/// Fills {slots} (rendered "[a, b]", or "all slot types" when empty) and
/// {context} (previous transcripts, one per line).
std::string render_prompt(int template_id, const std::vector<std::string>& slots,
                          const std::vector<std::string>& context);

/// Single-line JSON object in first-mention order, "{}" when empty.
std::string canonical_slot_json(const SlotMap& slots);

/// One SLOT sample per turn. `label_inventory` supplies distractor candidates.
std::vector<InstructionSample> build_slot_samples(const Conversation& conv, const InstructionBuildConfig& cfg,
                                                  const std::vector<std::string>& label_inventory);
std::vector<InstructionSample> build_slot_samples(const std::vector<Conversation>& convs,
                                                  const InstructionBuildConfig& cfg,
                                                  const std::vector<std::string>& label_inventory);

inline constexpr const char* kTranscribeInstruction = "Transcribe the audio.";

std::vector<InstructionSample> build_ast_samples(const std::vector<Conversation>& convs);

/// Greedy text continuation of a transcript, at most `max_new` tokens.
using ContinuationFn = std::function<std::string(const std::string& transcript, int max_new)>;

struct ContinuationBuild {
    std::vector<InstructionSample> samples;
    std::vector<std::string> skipped;  // "audio_ref: reason"
};

/// (audio of the turn, empty instruction, LM continuation of its transcript).
ContinuationBuild build_continuation_samples(const std::vector<Conversation>& convs, const ContinuationFn& lm,
                                             int max_new);

/// A small local instruction corpus. SIT samples speak the input (an existing
/// turn) under a text instruction; SQIT samples speak a self-contained query,
/// registered in `catalog` under "sqit/<seed>/<n>".
std::vector<InstructionSample> build_sit_samples(const std::vector<Conversation>& convs, std::uint64_t seed,
                                                 int count);
std::vector<InstructionSample> build_sqit_samples(int count, std::uint64_t seed, AudioCatalog& catalog);
/// Text-only rendering of a local instruction item: the input is what SIT
/// speaks (or the SQIT query, with an empty instruction).
struct TextTriplet {
    std::string instruction;
    std::string input;
    std::string output;
};

/// Text versions of the SIT and SQIT task families, used for LM pretraining.
std::vector<TextTriplet> local_instruction_triplets(const std::vector<Conversation>& convs, std::uint64_t seed,
                                                    int count);

struct MixSpec {
    std::map<Task, int> counts;

    void validate() const;
};

struct MixResult {
    std::vector<InstructionSample> samples;
    /// Tasks whose requested count exceeded availability (sampled with replacement).
    std::vector<Task> with_replacement;
};

MixResult mix_multitask(const std::map<Task, std::vector<InstructionSample>>& datasets, const MixSpec& spec,
                        std::uint64_t seed);

/// Registers every turn of `convs` in the catalog.
void register_turns(AudioCatalog& catalog, const std::vector<Conversation>& convs);

}  // namespace slotllm
