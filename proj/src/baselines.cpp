// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotllm/baselines.hpp"

#include <map>

namespace slotllm::inline SLOTLLM_ABI {

namespace {

const std::vector<InstructionSample>& slot_eval(const BaselineSetup& s) { return s.data.eval.at(Task::SLOT); }

StrategyPlan one_stage(const std::string& name, Stage stage) {
    stage.name = name;
    stage.budget_frac = 1.0;
    StrategyPlan p;
    p.name = name;
    p.stages = {std::move(stage)};
    return p;
}

}  // namespace

void BaselineSetup::validate() const {
    if (foundation == nullptr) throw std::invalid_argument("baseline: foundation is not set");
    if (data.catalog == nullptr) throw std::invalid_argument("baseline: data bundle has no audio catalog");
    if (!data.train.count(Task::SLOT) || !data.eval.count(Task::SLOT)) {
        throw std::invalid_argument("baseline: SLOT train and eval samples are required");
    }
    if (max_new < 1) throw std::invalid_argument("baseline: max_new must be >= 1");
    model.validate();
}

EvalRun evaluate_text(CompositeModel& nlu, const std::vector<InstructionSample>& eval, const AudioCatalog& catalog,
                      int max_new) {
    return evaluate_model(eval, [&](const InstructionSample& s) { return nlu.generate(s, catalog, SpanMode::text, max_new); });
}

TextBaseline run_text_baseline(const BaselineSetup& setup) {
    setup.validate();
    CompositeModel model = assemble_model(setup.model, *setup.foundation, setup.seed);
    Stage st;
    st.tasks = {Task::SLOT};
    st.span = SpanMode::text;
    st.trainable = {Module::lm};
    st.lora = true;
    st.merge_lora_after = true;
    StrategyResult training = run_strategy(model, one_stage("text-nlu", st), setup.data, setup.train, setup.seed);
    EvalRun eval = evaluate_text(model, slot_eval(setup), *setup.data.catalog, setup.max_new);
    std::string hash = model.base_hash(Module::lm);
    return {std::move(model), std::move(training), std::move(eval), std::move(hash)};
}

Transcriber CascadeSystem::transcriber() {
    CompositeModel* m = asr.get();
    return [m](const std::string&, const Matrix& frames) { return m->encoder_asr().transcribe(frames); };
}

Transcriber identity_transcriber(const AudioCatalog& catalog) {
    return [&catalog](const std::string& ref, const Matrix&) { return catalog.text(ref); };
}

CascadeRun evaluate_cascade(CompositeModel& nlu, const Transcriber& asr, const std::vector<InstructionSample>& eval,
                            const AudioCatalog& catalog, int max_new) {
    CascadeRun run;
    std::map<std::string, std::string> cache;
    std::vector<std::string> hyps, refs;
    run.eval = evaluate_model(eval, [&](const InstructionSample& s) {
        if (!s.has_audio()) return nlu.generate_text(s.instruction, "", max_new);
        auto it = cache.find(s.audio_ref);
        if (it == cache.end()) {
            it = cache.emplace(s.audio_ref, asr(s.audio_ref, catalog.audio(s.audio_ref).frames)).first;
            hyps.push_back(it->second);
            refs.push_back(catalog.text(s.audio_ref));
        }
        run.transcripts.push_back(it->second);
        return nlu.generate_text(s.instruction, it->second, max_new);
    });
    run.wer = refs.empty() ? 0.0 : wer(hyps, refs);
    run.eval.report.wer = run.wer;
    return run;
}

CascadeBaseline run_cascade(const BaselineSetup& setup, TextBaseline& text) {
    setup.validate();
    if (!setup.data.train.count(Task::AST) || !setup.data.eval.count(Task::AST)) {
        throw std::invalid_argument("cascade: AST train and eval samples are required");
    }
    CascadeBaseline out;
    // Fresh weights: the recognizer shares nothing with the foundations.
    out.system.asr = std::make_unique<CompositeModel>(setup.model, setup.foundation->tokenizer, mix_seed(setup.seed, 0xca5));
    Stage st;
    st.tasks = {Task::AST};
    st.objective = StageObjectiveKind::asr_frames;
    st.trainable = {Module::encoder};
    out.system.asr_training =
        run_strategy(*out.system.asr, one_stage("cascade-asr", st), setup.data, setup.train, mix_seed(setup.seed, 0xca5));
    out.system.nlu = &text.model;
    out.run = evaluate_cascade(text.model, out.system.transcriber(), slot_eval(setup), *setup.data.catalog, setup.max_new);
    return out;
}

void copy_lm(CompositeModel& target, CompositeModel& source) {
    if (source.has_lora()) throw std::invalid_argument("copy_lm: merge the source's LoRA factors first");
    std::map<std::string, const Matrix*> values;
    source.for_each_base(Module::lm, [&](Parameter& p) { values[p.name] = &p.value; });
    target.for_each_base(Module::lm, [&](Parameter& p) {
        const auto it = values.find(p.name);
        if (it == values.end()) throw std::runtime_error("copy_lm: source lacks '" + p.name + "'");
        if (it->second->rows() != p.value.rows() || it->second->cols() != p.value.cols()) {
            throw std::runtime_error("copy_lm: '" + p.name + "' has the wrong shape");
        }
        p.value = *it->second;
    });
}

SpeechLlmBaseline run_speechllm_baseline(const BaselineSetup& setup, TextBaseline& text, bool lm_lora) {
    setup.validate();
    ModelConfig cfg = setup.model;
    cfg.adapter.kind = AdapterKind::cnn;
    CompositeModel model = assemble_model(cfg, *setup.foundation, setup.seed);
    copy_lm(model, text.model);
    Stage st;
    st.tasks = {Task::SLOT};
    st.trainable = {Module::adapter};
    if (lm_lora) {
        st.trainable.insert(Module::lm);
        st.lora = true;
    }
    StrategyResult training =
        run_strategy(model, one_stage(lm_lora ? "speechllm-cnn-lora" : "speechllm-cnn", st), setup.data, setup.train, setup.seed);
    EvalRun eval = evaluate_model(slot_eval(setup), [&](const InstructionSample& s) {
        return model.generate(s, *setup.data.catalog, SpanMode::audio, setup.max_new);
    });
    return {std::move(model), std::move(training), std::move(eval)};
}

}  // namespace slotllm
