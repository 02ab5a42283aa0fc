// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "tempdir.hpp"

#include "slotllm/experiment.hpp"

using namespace slotllm;
using slotllm_test::TempDir;

namespace {

/// The smoke configuration's data and foundation, built once per process.
struct SmokeWorld {
    TempDir dir{"baselines"};
    ExperimentConfig cfg;
    CorpusSplits corpus;
    std::unique_ptr<AudioCatalog> catalog;
    Foundation foundation;
    InstructionSets sets;

    SmokeWorld() : cfg(load_experiment_config(std::filesystem::path(SLOTLLM_SOURCE_DIR) / "configs" / "smoke.yaml")) {
        corpus = generate_corpus(cfg);
        catalog = std::make_unique<AudioCatalog>(make_catalog(cfg, corpus));
        foundation = run_foundation(dir.path(), cfg);
        sets = build_instruction_sets(cfg, corpus, foundation, {Task::SLOT, Task::AST});
    }

    BaselineSetup setup() const {
        BaselineSetup s;
        s.foundation = &foundation;
        s.model = cfg.model;
        s.data = make_bundle(cfg, sets, *catalog, {Task::SLOT, Task::AST});
        s.train = strategy_options(cfg, {});
        s.seed = cfg.seed;
        s.max_new = cfg.max_new;
        return s;
    }
};

SmokeWorld& world() {
    static SmokeWorld w;
    return w;
}

}  // namespace

TEST_CASE("text baseline merges its LoRA and reports the NLU hash") {
    SmokeWorld& w = world();
    TextBaseline text = run_text_baseline(w.setup());
    CHECK(!text.model.has_lora());
    CHECK(text.nlu_hash == text.model.base_hash(Module::lm));
    CHECK(text.eval.outputs.size() == w.setup().data.eval.at(Task::SLOT).size());
    REQUIRE(text.training.stages.size() == 1);
    CHECK(text.training.stages[0].trainable == ModuleSet{Module::lm});
}

TEST_CASE("cascade with an oracle transcriber equals the text baseline") {
    SmokeWorld& w = world();
    const BaselineSetup setup = w.setup();
    TextBaseline text = run_text_baseline(setup);
    const auto& eval = setup.data.eval.at(Task::SLOT);
    const EvalRun direct = evaluate_text(text.model, eval, *w.catalog, w.cfg.max_new);
    const CascadeRun oracle = evaluate_cascade(text.model, identity_transcriber(*w.catalog), eval, *w.catalog, w.cfg.max_new);
    CHECK(oracle.wer == 0.0);
    CHECK(oracle.eval.outputs == direct.outputs);
    CHECK(oracle.eval.report.f1 == direct.report.f1);
    CHECK(oracle.eval.report.precision == direct.report.precision);
    CHECK(oracle.eval.report.recall == direct.report.recall);
}

TEST_CASE("cascade and speech LLM reuse the text NLU unchanged") {
    SmokeWorld& w = world();
    TextBaseline text = run_text_baseline(w.setup());
    const std::string nlu = text.nlu_hash;

    CascadeBaseline cascade = run_cascade(w.setup(), text);
    CHECK(cascade.system.nlu == &text.model);
    CHECK(text.model.base_hash(Module::lm) == nlu);
    CHECK(cascade.run.wer >= 0.0);
    CHECK(cascade.run.eval.report.wer.has_value());
    CHECK(cascade.run.transcripts.size() == w.setup().data.eval.at(Task::SLOT).size());

    SpeechLlmBaseline speech = run_speechllm_baseline(w.setup(), text);
    CHECK(speech.model.config().adapter.kind == AdapterKind::cnn);
    CHECK(speech.model.base_hash(Module::lm) == nlu);
    CHECK(!speech.model.has_lora());
    REQUIRE(speech.training.stages.size() == 1);
    CHECK(speech.training.stages[0].trainable == ModuleSet{Module::adapter});
    CHECK(freezing_contract_holds(speech.training.stages[0]));
}

TEST_CASE("copy_lm refuses a LoRA-carrying source") {
    SmokeWorld& w = world();
    CompositeModel a = assemble_model(w.cfg.model, w.foundation, 1);
    CompositeModel b = assemble_model(w.cfg.model, w.foundation, 2);
    LoraSpec spec;
    spec.rank = 2;
    b.apply_lora(spec, false, 3);
    CHECK_THROWS(copy_lm(a, b));
}

TEST_CASE("baseline setup validation") {
    BaselineSetup s;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}
