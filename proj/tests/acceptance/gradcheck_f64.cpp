// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Composite-model gradient check. Compiled against the double-precision
// library; only plain types cross into the rest of the acceptance binary.

#include "criteria.hpp"

#include "slotllm/model.hpp"

#include <algorithm>
#include <cmath>

namespace acceptance {

GradcheckOutcome composite_gradcheck(int coordinates, std::uint64_t seed) {
    using namespace slotllm;
    const Tokenizer tok;
    ModelConfig cfg;
    cfg.frame_rate_per_char = 8;
    cfg.encoder.d_audio = 16;
    cfg.encoder.d_enc = 6;
    cfg.encoder.layers = 1;
    cfg.adapter.kind = AdapterKind::mlp;
    cfg.adapter.d_enc = 6;
    cfg.adapter.d_llm = 4;
    cfg.adapter.mlp_hidden = 4;
    cfg.lm.vocab = tok.size();
    cfg.lm.d_model = 4;
    cfg.lm.layers = 1;
    cfg.lm.heads = 2;
    cfg.lm.d_ff = 4;
    CompositeModel model(cfg, tok, seed);
    LoraSpec lora;
    lora.rank = 2;
    lora.alpha = 4;
    lora.dropout = 0;
    model.apply_lora(lora, false, seed + 1);
    // Non-zero B factors so the low-rank path contributes.
    std::mt19937_64 rng(seed + 2);
    model.for_each_lora(Module::lm, [&](Parameter& p) { p.value = random_normal(p.value.rows(), p.value.cols(), 0.3, rng); });
    model.set_trainable({Module::encoder, Module::adapter, Module::lm});

    AudioSettings audio;
    audio.frame_rate_per_char = 8;
    AudioCatalog catalog(audio);
    catalog.add("g/0", "zip 42");
    InstructionSample sample;
    sample.audio_ref = "g/0";
    sample.instruction = "slots?";
    sample.response = "{\"zip\":\"42\"}";

    GradcheckOutcome out;
    std::vector<Parameter*> params = model.trainable_parameters();
    for (Parameter* p : params) out.largest_slice = std::max<std::int64_t>(out.largest_slice, p->size());
    auto loss = [&](Tape& tape) { return model.loss(tape, sample, catalog, SpanMode::audio, 1, ForwardContext{}); };

    // Analytic gradients once, then pick coordinates that carry gradient.
    for (Parameter* p : params) p->zero_grad();
    {
        Tape tape;
        tape.backward(loss(tape));
    }
    std::vector<std::pair<Parameter*, Index>> coords;
    for (Parameter* p : params) {
        for (Index i = 0; i < p->size(); ++i) {
            if (std::abs(p->grad.data()[i]) > 1e-9) coords.emplace_back(p, i);
        }
    }
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(std::min<std::size_t>(coords.size(), static_cast<std::size_t>(coordinates)));

    auto eval = [&] {
        Tape tape(false);
        return static_cast<double>(loss(tape).value()(0, 0));
    };
    const double eps = 1e-6;
    for (auto [p, i] : coords) {
        const double analytic = p->grad.data()[i];
        double& x = p->value.data()[i];
        const double saved = x;
        x = saved + eps;
        const double up = eval();
        x = saved - eps;
        const double down = eval();
        x = saved;
        const double numeric = (up - down) / (2 * eps);
        const double rel = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-8});
        out.max_rel_error = std::max(out.max_rel_error, rel);
        ++out.checked;
    }
    return out;
}

}  // namespace acceptance
