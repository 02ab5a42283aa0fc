// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotllm/tokenizer.hpp"

#include <set>
#include <stdexcept>

namespace slotllm::inline SLOTLLM_ABI {

namespace {

bool is_letter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

}  // namespace

Tokenizer::Tokenizer(std::vector<std::string> pieces) : pieces_(std::move(pieces)) {
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
        if (!index_.emplace(pieces_[i], static_cast<int>(i)).second) {
            throw std::invalid_argument("tokenizer: duplicate piece '" + pieces_[i] + "'");
        }
    }
}

Tokenizer::Tokenizer() : Tokenizer(build({})) {}

Tokenizer Tokenizer::build(std::span<const std::string> texts) {
    std::vector<std::string> pieces = {"<pad>", "<bos>", "<eos>", "<unk>", "\n"};
    for (char c = 32; c < 127; ++c) pieces.emplace_back(1, c);
    std::set<std::string> words;
    for (const std::string& t : texts) {
        std::size_t i = 0;
        while (i < t.size()) {
            if (!is_letter(t[i])) {
                ++i;
                continue;
            }
            std::size_t j = i;
            while (j < t.size() && is_letter(t[j])) ++j;
            words.insert(t.substr(i, j - i));
            i = j;
        }
    }
    for (const std::string& w : words) {
        if (w.size() > 1) pieces.push_back(w);  // single letters already exist as characters
        pieces.push_back(" " + w);
    }
    return Tokenizer(std::move(pieces));
}

Tokenizer Tokenizer::from_json(const json& j) { return Tokenizer(j.at("pieces").get<std::vector<std::string>>()); }

json Tokenizer::to_json() const { return {{"pieces", pieces_}}; }

std::vector<int> Tokenizer::encode(std::string_view text) const {
    std::vector<int> out;
    auto emit_char = [&](char c) {
        auto it = index_.find(std::string(1, c));
        out.push_back(it == index_.end() ? kUnk : it->second);
    };
    std::size_t i = 0;
    while (i < text.size()) {
        const bool spaced = text[i] == ' ' && i + 1 < text.size() && is_letter(text[i + 1]);
        if (spaced || is_letter(text[i])) {
            std::size_t j = spaced ? i + 1 : i;
            while (j < text.size() && is_letter(text[j])) ++j;
            auto it = index_.find(std::string(text.substr(i, j - i)));
            if (it != index_.end()) {
                out.push_back(it->second);
            } else {
                for (std::size_t k = i; k < j; ++k) emit_char(text[k]);
            }
            i = j;
        } else {
            // Multi-byte UTF-8 sequences collapse to a single unknown token.
            if (static_cast<unsigned char>(text[i]) >= 0x80) {
                std::size_t j = i + 1;
                while (j < text.size() && (static_cast<unsigned char>(text[j]) & 0xc0) == 0x80) ++j;
                out.push_back(kUnk);
                i = j;
                continue;
            }
            emit_char(text[i]);
            ++i;
        }
    }
    return out;
}

std::string Tokenizer::decode(std::span<const int> ids) const {
    std::string out;
    for (int id : ids) {
        if (id == kPad || id == kBos || id == kEos) continue;
        if (id < 0 || id >= size()) throw std::out_of_range("tokenizer: id " + std::to_string(id) + " out of range");
        out += id == kUnk ? std::string("?") : pieces_[static_cast<std::size_t>(id)];
    }
    return out;
}

}  // namespace slotllm
