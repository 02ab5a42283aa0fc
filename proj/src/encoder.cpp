// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotllm/encoder.hpp"

#include <stdexcept>

namespace slotllm::inline SLOTLLM_ABI {

void EncoderConfig::validate() const {
    if (d_audio < 1) throw std::invalid_argument("encoder.d_audio must be >= 1");
    if (d_enc < 1) throw std::invalid_argument("encoder.d_enc must be >= 1");
    if (layers < 1) throw std::invalid_argument("encoder.layers must be >= 1");
    if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("encoder.kernel must be odd and >= 1");
}

json EncoderConfig::to_json() const {
    return {{"d_audio", d_audio}, {"d_enc", d_enc}, {"layers", layers}, {"kernel", kernel}};
}

EncoderConfig EncoderConfig::from_json(const json& j) {
    EncoderConfig c;
    c.d_audio = j.at("d_audio").get<int>();
    c.d_enc = j.at("d_enc").get<int>();
    c.layers = j.at("layers").get<int>();
    c.kernel = j.at("kernel").get<int>();
    return c;
}

SpeechEncoder::SpeechEncoder(const EncoderConfig& cfg, std::uint64_t seed, const std::string& name) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    for (int l = 0; l < cfg_.layers; ++l) {
        const int in = l == 0 ? cfg_.d_audio : cfg_.d_enc;
        convs_.emplace_back(name + ".conv" + std::to_string(l), static_cast<Index>(in) * cfg_.kernel, cfg_.d_enc,
                            true, rng);
    }
}

Var SpeechEncoder::forward(Tape& tape, Var frames, const ForwardContext& ctx) {
    if (frames.cols() != cfg_.d_audio) {
        throw std::invalid_argument("encoder: input width " + std::to_string(frames.cols()) + " != d_audio " +
                                    std::to_string(cfg_.d_audio));
    }
    if (frames.rows() < 1) throw std::invalid_argument("encoder: input has no frames");
    const Index pad = (cfg_.kernel - 1) / 2;
    Var h = frames;
    for (std::size_t l = 0; l < convs_.size(); ++l) {
        Var y = ops::gelu(convs_[l].forward(tape, ops::unfold_time(h, cfg_.kernel, 1, pad), ctx));
        h = l == 0 ? y : ops::add(h, y);
    }
    return h;
}

void SpeechEncoder::attach_lora(const LoraSpec& spec, std::mt19937_64& rng) {
    for (Linear& c : convs_) c.attach_lora(spec, rng);
}

void SpeechEncoder::merge_lora() {
    for (Linear& c : convs_) c.merge_lora();
}

bool SpeechEncoder::has_lora() const { return !convs_.empty() && convs_.front().has_lora(); }

void SpeechEncoder::for_each_base(const ParameterVisitor& fn) {
    for (Linear& c : convs_) c.for_each_base(fn);
}

void SpeechEncoder::for_each_lora(const ParameterVisitor& fn) {
    for (Linear& c : convs_) c.for_each_lora(fn);
}

void SpeechEncoder::for_each_parameter(const ParameterVisitor& fn) {
    for (Linear& c : convs_) c.for_each_parameter(fn);
}

FrameAsr::FrameAsr(const EncoderConfig& cfg, int frame_rate_per_char, std::uint64_t seed, const std::string& name)
    : encoder_(cfg, mix_seed(seed, 1), name + ".encoder"), F_(frame_rate_per_char) {
    if (F_ < 1) throw std::invalid_argument("asr: frame_rate_per_char must be >= 1");
    std::mt19937_64 rng(mix_seed(seed, 2));
    head_ = Linear(name + ".head", cfg.d_enc, kAsrClasses, true, rng);
}

std::vector<int> FrameAsr::frame_targets(const std::string& text, Index n_frames) const {
    std::vector<int> t(static_cast<std::size_t>(n_frames), -1);
    for (Index i = 0; i < n_frames; ++i) {
        const std::size_t c = static_cast<std::size_t>(i / F_);
        if (c >= text.size()) break;
        const int code = static_cast<unsigned char>(text[c]) - 32;
        if (code >= 0 && code < kAsrClasses) t[static_cast<std::size_t>(i)] = code;
    }
    return t;
}

Var FrameAsr::loss(Tape& tape, const Matrix& frames, const std::string& text, Scalar weight,
                   const ForwardContext& ctx) {
    Var h = encoder_.forward(tape, tape.constant(frames), ctx);
    Var logits = head_.forward(tape, h, ctx);
    const std::vector<int> targets = frame_targets(text, frames.rows());
    return ops::cross_entropy(logits, targets, weight);
}

Matrix FrameAsr::log_probs(const Matrix& frames) {
    Tape tape(false);
    const ForwardContext ctx;
    Var h = encoder_.forward(tape, tape.constant(frames), ctx);
    return log_softmax_rows(head_.forward(tape, h, ctx).value());
}

double FrameAsr::frame_loss(const Matrix& frames, const std::string& text) {
    const Matrix lp = log_probs(frames);
    const std::vector<int> targets = frame_targets(text, frames.rows());
    double total = 0;
    int n = 0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (targets[i] < 0) continue;
        total -= lp(static_cast<Index>(i), targets[i]);
        ++n;
    }
    return n ? total / n : 0.0;
}

std::string FrameAsr::transcribe(const Matrix& frames) {
    const Matrix lp = log_probs(frames);
    std::string out;
    for (Index start = 0; start < lp.rows(); start += F_) {
        const Index len = std::min<Index>(F_, lp.rows() - start);
        Eigen::Index best = 0;
        lp.middleRows(start, len).colwise().sum().maxCoeff(&best);
        out += static_cast<char>(32 + best);
    }
    return out;
}

void FrameAsr::for_each_base(const ParameterVisitor& fn) {
    encoder_.for_each_base(fn);
    head_.for_each_base(fn);
}

void FrameAsr::for_each_parameter(const ParameterVisitor& fn) {
    for_each_base(fn);
    for_each_lora(fn);
}

}  // namespace slotllm
