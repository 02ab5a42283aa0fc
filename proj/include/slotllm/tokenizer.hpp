// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Word-level tokenizer with a character fallback.
//
// Text is split into runs of ASCII letters (optionally preceded by one space)
// and single characters. A run becomes one token when it is in the vocabulary,
// otherwise it is spelled out character by character. Every printable ASCII
// character and newline is in the vocabulary, so decode(encode(s)) == s for
// ASCII input.

#pragma once

#include "slotllm/abi.hpp"
#include "slotllm/util.hpp"

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace slotllm::inline SLOTLLM_ABI {

class Tokenizer {
public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kUnk = 3;

    /// Builds the vocabulary from letter runs found in `texts` (each run is
    /// added bare and with a leading space).
    /// Character-only vocabulary (specials, newline, printable ASCII).
    Tokenizer();
    static Tokenizer build(std::span<const std::string> texts);
    static Tokenizer from_json(const json& j);
    json to_json() const;

    std::vector<int> encode(std::string_view text) const;
    std::string decode(std::span<const int> ids) const;
    const std::string& piece(int id) const { return pieces_.at(static_cast<std::size_t>(id)); }
    int size() const { return static_cast<int>(pieces_.size()); }
    bool operator==(const Tokenizer& o) const { return pieces_ == o.pieces_; }

private:
    explicit Tokenizer(std::vector<std::string> pieces);

    std::vector<std::string> pieces_;
    std::unordered_map<std::string, int> index_;
};

}  // namespace slotllm
