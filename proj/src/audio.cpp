// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotllm/audio.hpp"

#include "slotllm/util.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

namespace slotllm::inline SLOTLLM_ABI {

namespace {

// Standard normals from a splitmix64 stream (Box-Muller), so base vectors do
// not depend on the standard library's distribution implementation.
void fill_normal(Scalar* out, int n, std::uint64_t state) {
    for (int i = 0; i < n; i += 2) {
        state = splitmix64(state);
        const double u1 = (static_cast<double>(state >> 11) + 0.5) * 0x1.0p-53;
        state = splitmix64(state);
        const double u2 = static_cast<double>(state >> 11) * 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        out[i] = static_cast<Scalar>(r * std::cos(2 * std::numbers::pi * u2));
        if (i + 1 < n) out[i + 1] = static_cast<Scalar>(r * std::sin(2 * std::numbers::pi * u2));
    }
}

}  // namespace

AudioCodebook::AudioCodebook(int d_audio, std::uint64_t seed) : d_audio_(d_audio), seed_(seed) {
    if (d_audio < 1) throw std::invalid_argument("audio: d_audio must be >= 1");
    ascii_.resize(128, d_audio);
    for (int c = 0; c < 128; ++c) fill_normal(ascii_.row(c).data(), d_audio, mix_seed(seed, static_cast<std::uint64_t>(c)));
}

Matrix AudioCodebook::vector(char32_t cp) const {
    if (cp < 128) return ascii_.row(static_cast<Index>(cp));
    Matrix v(1, d_audio_);
    fill_normal(v.data(), d_audio_, mix_seed(seed_, static_cast<std::uint64_t>(cp)));
    return v;
}

PseudoAudio synth_audio(std::string_view text, std::uint64_t seed, int F, double noise_sigma,
                        const AudioCodebook& codebook) {
    if (F < 1) throw std::invalid_argument("synth_audio: F must be >= 1");
    if (noise_sigma < 0.0) throw std::invalid_argument("synth_audio: noise_sigma must be >= 0");
    const std::u32string cps = utf8_decode(text);
    if (cps.empty()) throw std::invalid_argument("empty utterance");
    PseudoAudio a;
    a.frame_rate_per_char = F;
    a.noise_sigma = noise_sigma;
    a.frames.resize(static_cast<Index>(cps.size()) * F, codebook.dim());
    for (std::size_t i = 0; i < cps.size(); ++i) {
        const Matrix v = codebook.vector(cps[i]);
        for (int f = 0; f < F; ++f) a.frames.row(static_cast<Index>(i) * F + f) = v;
    }
    if (noise_sigma > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> noise(0.0, noise_sigma);
        for (Index i = 0; i < a.frames.size(); ++i) a.frames.data()[i] += static_cast<Scalar>(noise(rng));
    }
    return a;
}

std::string recover_text(const PseudoAudio& audio, const AudioCodebook& codebook) {
    const int F = audio.frame_rate_per_char;
    if (F < 1 || audio.frames.rows() % F != 0) throw std::invalid_argument("recover_text: frame count not a multiple of F");
    std::string out;
    for (Index start = 0; start < audio.frames.rows(); start += F) {
        const Matrix mean = audio.frames.middleRows(start, F).colwise().mean();
        int best = ' ';
        Scalar best_d = std::numeric_limits<Scalar>::max();
        for (int c = 32; c < 127; ++c) {
            const Scalar d = (codebook.vector(static_cast<char32_t>(c)) - mean).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        out.push_back(static_cast<char>(best));
    }
    return out;
}

void AudioSettings::validate() const {
    if (frame_rate_per_char < 1) throw std::invalid_argument("audio.frame_rate_per_char must be >= 1");
    if (noise_sigma < 0.0) throw std::invalid_argument("audio.noise_sigma must be >= 0");
    if (d_audio < 1) throw std::invalid_argument("audio.d_audio must be >= 1");
}

AudioCatalog::AudioCatalog(AudioSettings settings)
    : settings_(settings), codebook_(settings.d_audio, settings.codebook_seed) {
    settings_.validate();
}

void AudioCatalog::add(const std::string& ref, const std::string& text) {
    auto [it, inserted] = texts_.emplace(ref, text);
    if (!inserted && it->second != text) {
        throw std::invalid_argument("audio catalog: reference '" + ref + "' already bound to different text");
    }
}

const std::string& AudioCatalog::text(const std::string& ref) const {
    auto it = texts_.find(ref);
    if (it == texts_.end()) throw std::out_of_range("unresolvable audio_ref '" + ref + "'");
    return it->second;
}

std::uint64_t AudioCatalog::utterance_seed(const std::string& ref) const {
    return mix_seed(settings_.noise_seed, fnv1a64(ref));
}

PseudoAudio AudioCatalog::audio(const std::string& ref) const {
    return synth_audio(text(ref), utterance_seed(ref), settings_.frame_rate_per_char, settings_.noise_sigma,
                       codebook_);
}

AudioCatalog AudioCatalog::with_settings(const AudioSettings& s) const {
    AudioCatalog c(s);
    c.texts_ = texts_;
    return c;
}

}  // namespace slotllm
