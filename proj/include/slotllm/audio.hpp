// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Character-based pseudo-audio: each code point owns a fixed random base
// vector that is repeated F times, plus optional Gaussian noise.

#pragma once

#include "slotllm/tensor.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>

namespace slotllm::inline SLOTLLM_ABI {

struct PseudoAudio {
    Matrix frames;  // [F * len(text) x d_audio]
    int frame_rate_per_char = 1;
    double noise_sigma = 0.0;
};

class AudioCodebook {
public:
    explicit AudioCodebook(int d_audio = 16, std::uint64_t seed = 0xa0d10c0debULL);

    int dim() const { return d_audio_; }
    std::uint64_t seed() const { return seed_; }
    /// Base vector of a code point (entries ~ N(0, 1), fixed by the seed).
    Matrix vector(char32_t cp) const;

private:
    int d_audio_;
    std::uint64_t seed_;
    Matrix ascii_;  // rows 0..127 precomputed
};

/// Throws std::invalid_argument("empty utterance") on empty text.
PseudoAudio synth_audio(std::string_view text, std::uint64_t seed, int F, double noise_sigma,
                        const AudioCodebook& codebook = AudioCodebook());

/// Inverts the character lookup by nearest base vector per F-frame block over
/// printable ASCII. Exact when the audio was synthesized without noise.
std::string recover_text(const PseudoAudio& audio, const AudioCodebook& codebook = AudioCodebook());

struct AudioSettings {
    int frame_rate_per_char = 4;
    double noise_sigma = 0.05;
    std::uint64_t noise_seed = 0;
    int d_audio = 16;
    std::uint64_t codebook_seed = 0xa0d10c0debULL;

    void validate() const;
};

/// Resolves opaque audio references to (text, per-utterance seed) and
/// synthesizes features on demand.
class AudioCatalog {
public:
    explicit AudioCatalog(AudioSettings settings = {});

    void add(const std::string& ref, const std::string& text);
    bool contains(const std::string& ref) const { return texts_.count(ref) != 0; }
    /// Throws std::out_of_range naming the reference when unknown.
    const std::string& text(const std::string& ref) const;
    PseudoAudio audio(const std::string& ref) const;
    std::uint64_t utterance_seed(const std::string& ref) const;
    std::size_t size() const { return texts_.size(); }

    const AudioSettings& settings() const { return settings_; }
    const AudioCodebook& codebook() const { return codebook_; }
    /// Same references, different acoustic conditions.
    AudioCatalog with_settings(const AudioSettings& s) const;

private:
    AudioSettings settings_;
    AudioCodebook codebook_;
    std::map<std::string, std::string> texts_;
};

}  // namespace slotllm
