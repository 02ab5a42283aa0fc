// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic call-center conversations drawn from a templated grammar, with
// ground-truth per-turn slot annotations.

#pragma once

#include "slotllm/abi.hpp"
#include "slotllm/util.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace slotllm::inline SLOTLLM_ABI {

enum class Speaker { agent, customer };

std::string to_string(Speaker s);
Speaker speaker_from_string(const std::string& s);

/// Ordered label -> value pairs (first-mention order).
using SlotMap = std::vector<std::pair<std::string, std::string>>;

struct Turn {
    Speaker speaker = Speaker::agent;
    std::string text;
    std::string audio_ref;

    bool operator==(const Turn&) const = default;
};

struct TurnAnnotation {
    std::string normalized_text;
    SlotMap slots;

    bool operator==(const TurnAnnotation&) const = default;
};

struct Conversation {
    std::string id;
    std::vector<Turn> turns;
    std::optional<std::vector<TurnAnnotation>> annotations;

    bool operator==(const Conversation&) const = default;
    /// Throws std::invalid_argument on empty turn text or an annotation count mismatch.
    void validate() const;
};

json to_json(const Conversation& c);
Conversation conversation_from_json(const json& j);
json slots_to_json(const SlotMap& slots);
/// Accepts an object, or "NA"/null/"" meaning no slots.
SlotMap slots_from_json(const json& j);

void save_conversations(const std::filesystem::path& path, const std::vector<Conversation>& convs);
std::vector<Conversation> load_conversations(const std::filesystem::path& path);

/// Which labels a generated corpus may use.
enum class LabelPool {
    seen,     ///< training distribution
    shifted,  ///< first `shifted_seen_labels` seen labels plus every unseen label
    all,
};

std::string to_string(LabelPool p);
LabelPool label_pool_from_string(const std::string& s);

struct CorpusConfig {
    int n_seen_labels = 15;
    int shifted_seen_labels = 12;
    double slot_turn_rate = 0.6;
    /// Fraction of slot-bearing turns that carry two slots.
    double two_slot_rate = 0.2;
    int min_turns = 4;
    int max_turns = 8;
    LabelPool pool = LabelPool::seen;
    /// Independent sampling stream; the label partition depends on the grammar seed only.
    std::uint64_t stream = 0;
    std::string id_prefix = "conv";

    void validate() const;
};

struct LabelManifest {
    std::vector<std::string> seen_labels;
    std::vector<std::string> unseen_labels;
    std::uint64_t grammar_seed = 0;

    bool operator==(const LabelManifest&) const = default;
};

json to_json(const LabelManifest& m);
LabelManifest manifest_from_json(const json& j);

/// Every label the grammar knows, in a fixed order.
const std::vector<std::string>& label_inventory();

/// Seen/unseen partition of the inventory, a pure function of the seed.
LabelManifest make_manifest(std::uint64_t grammar_seed, const CorpusConfig& cfg = {});

/// Labels a corpus drawn from `pool` may contain.
std::vector<std::string> pool_labels(const LabelManifest& m, LabelPool pool, const CorpusConfig& cfg);

std::vector<Conversation> gen_toy_corpus(int n_conversations, std::uint64_t grammar_seed,
                                         const CorpusConfig& cfg = {});

/// Distinct words the grammar can emit (values, carriers, fillers, label parts).
std::vector<std::string> grammar_lexicon();

/// Words that can appear inside slot values.
std::vector<std::string> value_lexicon();

/// Capitalizes and terminates a raw transcript the way annotations render it.
std::string normalize_transcript(const std::string& text);

}  // namespace slotllm
