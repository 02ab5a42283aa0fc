// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Partial-match slot scoring, word error rate, ID/OOD splitting and
// end-to-end evaluation of generated slot JSON.
//
// Scoring: within one turn, predicted and gold pairs may only match when
// their normalized labels are identical. A matched pair earns the size of the
// multiset intersection of its value tokens; each pair is used at most once
// and the matching maximizes total credit. Micro precision divides total
// credit by all predicted value tokens, recall by all gold value tokens.

#pragma once

#include "slotllm/instructions.hpp"
#include "slotllm/util.hpp"

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace slotllm::inline SLOTLLM_ABI {

struct SlotPair {
    std::string label;
    std::string value;

    bool operator==(const SlotPair&) const = default;
};

using TurnSlots = std::vector<SlotPair>;

/// Lowercase, trimmed, runs of whitespace / '_' / '-' collapsed to one '_'.
std::string normalize_label(std::string_view label);
/// Lowercase, ASCII punctuation removed, split on whitespace.
std::vector<std::string> value_tokens(std::string_view value);

TurnSlots to_slot_pairs(const SlotMap& slots);

/// Parses a JSON object of label -> value, tolerating code fences and
/// surrounding text. Returns nullopt when no JSON object can be parsed.
std::optional<TurnSlots> parse_slot_json(const std::string& text);

/// Optimal credit for one turn. Label groups with at most kExactGroupLimit
/// gold pairs are solved exactly; larger groups fall back to greedy.
inline constexpr int kExactGroupLimit = 10;
long turn_credit(const TurnSlots& pred, const TurnSlots& gold);
/// Greedy matching by descending pair token-F1.
long greedy_credit(const TurnSlots& pred, const TurnSlots& gold);

struct LabelStats {
    long credit = 0;
    long pred_tokens = 0;
    long gold_tokens = 0;
    long pred_pairs = 0;
    long gold_pairs = 0;

    double precision() const;
    double recall() const;
    double f1() const;
};

struct EvalReport {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    long credit = 0;
    long pred_tokens = 0;
    long gold_tokens = 0;
    long turns = 0;
    long gold_pairs = 0;
    long pred_pairs = 0;
    long parse_failures = 0;
    std::map<std::string, LabelStats> per_label;
    std::optional<double> wer;

    json to_json() const;
};

/// A nullopt prediction is a parse failure (zero predicted pairs).
/// Throws std::invalid_argument on a length mismatch.
EvalReport score_slots(const std::vector<std::optional<TurnSlots>>& predictions,
                       const std::vector<TurnSlots>& references);

/// Word-level Levenshtein distance summed over pairs / total reference words.
double wer(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references);
long word_edit_distance(const std::vector<std::string>& hyp, const std::vector<std::string>& ref);

struct SplitResult {
    std::vector<InstructionSample> id_samples;
    std::vector<InstructionSample> ood_samples;
    double overlap_fraction = 0;
};

/// Gold labels of a SLOT sample (from its response JSON).
std::vector<std::string> gold_labels(const InstructionSample& sample);

/// ID iff every gold label is seen; labels are normalized before comparison.
SplitResult split_id_ood(const std::vector<InstructionSample>& samples, const std::set<std::string>& seen_labels);

using ResponseGenerator = std::function<std::string(const InstructionSample&)>;

struct EvalRun {
    EvalReport report;
    std::vector<std::string> outputs;
};

/// Generates a response per sample and scores it against the sample's gold JSON.
EvalRun evaluate_model(const std::vector<InstructionSample>& eval_set, const ResponseGenerator& generate);

/// Plain-text table with columns System, Prec, Recall, F1.
std::string format_table(const std::vector<std::pair<std::string, EvalReport>>& rows);

}  // namespace slotllm
