// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "tempdir.hpp"

#include "slotllm/foundation.hpp"
#include "slotllm/instructions.hpp"
#include "slotllm/tokenizer.hpp"

#include <set>

using namespace slotllm;
using slotllm_test::TempDir;

TEST_CASE("tokenizer round-trips printable ASCII") {
    const std::vector<std::string> corpus = {"hello there", "the weather is fine"};
    const Tokenizer tok = Tokenizer::build(corpus);
    for (const std::string s : {"hello there", "Hello, THERE! 42 {\"a\": 1}\n", "", "x", "~`|\\"}) {
        CHECK(tok.decode(tok.encode(s)) == s);
    }
    const Tokenizer chars;
    CHECK(chars.decode(chars.encode("zebra crossing")) == "zebra crossing");
}

TEST_CASE("known words become single tokens, unknown words are spelled") {
    const std::vector<std::string> corpus = {"hello there"};
    const Tokenizer tok = Tokenizer::build(corpus);
    CHECK(tok.encode("hello there").size() == 2);
    CHECK(tok.encode("hellx").size() == 5);
    CHECK(tok.size() > Tokenizer().size());
    CHECK(Tokenizer::from_json(tok.to_json()) == tok);
}

TEST_CASE("shared tokenizer spells lexicon values character by character") {
    const Tokenizer tok = build_shared_tokenizer();
    const auto values = value_lexicon();
    REQUIRE(!values.empty());
    for (const std::string& v : values) {
        const auto ids = tok.encode(v);
        CHECK(tok.decode(ids) == v);
        for (int id : ids) CHECK_MESSAGE(tok.piece(id).size() == 1, v, " encoded with piece '", tok.piece(id), "'");
    }
    CHECK(build_shared_tokenizer() == tok);
}

TEST_CASE("template registry holds ten templates with both placeholders") {
    const json reg = template_registry();
    CHECK(reg.at("version") == 1);
    REQUIRE(reg.at("templates").size() == 10);
    for (std::size_t i = 0; i < prompt_templates().size(); ++i) {
        CHECK(prompt_templates()[i].find("{slots}") != std::string::npos);
        CHECK(prompt_templates()[i].find("{context}") != std::string::npos);
        CHECK(reg.at("templates").at(i).at("id") == static_cast<int>(i));
    }
}

TEST_CASE("prompt rendering fills slots and context") {
    const std::string q = render_prompt(0, {"person_name", "location"}, {"hi", "hello"});
    CHECK(q.find("[person_name, location]") != std::string::npos);
    CHECK(q.find("hi\nhello") != std::string::npos);
    CHECK(q.find('{') == std::string::npos);
    CHECK(render_prompt(3, {}, {}).find("all slot types") != std::string::npos);
    CHECK_THROWS_AS(render_prompt(10, {}, {}), std::out_of_range);
}

TEST_CASE("canonical slot json keeps first-mention order") {
    CHECK(canonical_slot_json({}) == "{}");
    CHECK(canonical_slot_json({{"b", "2"}, {"a", "1"}}) == "{\"b\":\"2\",\"a\":\"1\"}");
}

TEST_CASE("slot samples: one per turn, gold always queried, context truncated") {
    const auto convs = gen_toy_corpus(30, 4);
    InstructionBuildConfig cfg;
    cfg.seed = 9;
    const auto inventory = label_inventory();
    std::size_t turns = 0;
    for (const Conversation& c : convs) {
        const auto samples = build_slot_samples(c, cfg, inventory);
        REQUIRE(samples.size() == c.turns.size());
        turns += samples.size();
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const InstructionSample& s = samples[i];
            CHECK(s.task == Task::SLOT);
            CHECK(s.audio_ref == c.turns[i].audio_ref);
            CHECK(s.meta.context_T == std::min<int>(s.meta.context_T_drawn, static_cast<int>(i)));
            for (int k = 1; k <= s.meta.context_T; ++k) {
                CHECK(s.instruction.find(c.turns[i - static_cast<std::size_t>(k)].text) != std::string::npos);
            }
            const SlotMap& gold = (*c.annotations)[i].slots;
            CHECK(slots_from_json(json::parse(s.response)) == gold);
            if (s.queried_labels.empty()) {
                CHECK(s.instruction.find("all slot types") != std::string::npos);
                continue;
            }
            const std::set<std::string> q(s.queried_labels.begin(), s.queried_labels.end());
            CHECK(q.size() == s.queried_labels.size());
            CHECK(q.size() == gold.size() + static_cast<std::size_t>(s.meta.n_distractors));
            for (const auto& kv : gold) CHECK(q.count(kv.first) == 1);
        }
    }
    CHECK(build_slot_samples(convs, cfg, inventory).size() == turns);
    CHECK(build_slot_samples(convs, cfg, inventory) == build_slot_samples(convs, cfg, inventory));
}

TEST_CASE("instruction config validation") {
    InstructionBuildConfig c;
    c.S_min = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.T_max = -1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    Conversation bare = gen_toy_corpus(1, 1)[0];
    bare.annotations.reset();
    CHECK_THROWS_AS(build_slot_samples(bare, InstructionBuildConfig{}, label_inventory()), std::invalid_argument);
}

TEST_CASE("ast samples pair each turn with its transcript") {
    const auto convs = gen_toy_corpus(3, 2);
    const auto ast = build_ast_samples(convs);
    std::size_t k = 0;
    for (const Conversation& c : convs) {
        for (const Turn& t : c.turns) {
            REQUIRE(k < ast.size());
            CHECK(ast[k].task == Task::AST);
            CHECK(ast[k].audio_ref == t.audio_ref);
            CHECK(ast[k].instruction == kTranscribeInstruction);
            CHECK(ast[k].response == t.text);
            ++k;
        }
    }
    CHECK(k == ast.size());
}

TEST_CASE("continuation samples record skipped turns") {
    const auto convs = gen_toy_corpus(2, 3);
    int calls = 0;
    const ContinuationBuild b = build_continuation_samples(
        convs,
        [&](const std::string& t, int) -> std::string {
            if (++calls == 2) throw std::runtime_error("boom");
            return calls == 3 ? "" : t.substr(0, 3);
        },
        8);
    CHECK(b.skipped.size() == 2);
    CHECK(b.samples.size() + 2 == build_ast_samples(convs).size());
    for (const InstructionSample& s : b.samples) {
        CHECK(s.task == Task::CONT);
        CHECK(s.instruction.empty());
        CHECK(!s.response.empty());
    }
    CHECK_THROWS_AS(build_continuation_samples(convs, [](const std::string&, int) { return std::string("x"); }, 0),
                    std::invalid_argument);
}

TEST_CASE("sample jsonl round trip") {
    TempDir dir("instr");
    InstructionBuildConfig cfg;
    auto samples = build_slot_samples(gen_toy_corpus(4, 6), cfg, label_inventory());
    const auto ast = build_ast_samples(gen_toy_corpus(1, 6));
    samples.insert(samples.end(), ast.begin(), ast.end());
    save_samples(dir / "s.jsonl", samples);
    CHECK(load_samples(dir / "s.jsonl") == samples);
    for (Task t : {Task::SLOT, Task::AST, Task::SIT, Task::SQIT, Task::CONT}) CHECK(task_from_string(to_string(t)) == t);
    CHECK_THROWS_AS(task_from_string("NER"), std::invalid_argument);
}

TEST_CASE("multitask mix draws the requested counts") {
    const auto convs = gen_toy_corpus(10, 8);
    std::map<Task, std::vector<InstructionSample>> data = {
        {Task::SLOT, build_slot_samples(convs, {}, label_inventory())},
        {Task::AST, build_ast_samples(gen_toy_corpus(1, 8))},
    };
    const std::size_t n_ast = data[Task::AST].size();
    MixSpec spec;
    spec.counts = {{Task::SLOT, 20}, {Task::AST, static_cast<int>(n_ast) + 5}};
    const MixResult r = mix_multitask(data, spec, 3);
    int slot = 0, ast = 0;
    for (const InstructionSample& s : r.samples) (s.task == Task::SLOT ? slot : ast)++;
    CHECK(slot == 20);
    CHECK(ast == static_cast<int>(n_ast) + 5);
    CHECK(r.with_replacement == std::vector<Task>{Task::AST});
    CHECK(mix_multitask(data, spec, 3).samples == r.samples);

    spec.counts = {{Task::CONT, 1}};
    CHECK_THROWS_AS(mix_multitask(data, spec, 3), std::invalid_argument);
    spec.counts = {{Task::SLOT, 0}};
    CHECK_THROWS_AS(mix_multitask(data, spec, 3), std::invalid_argument);
}

TEST_CASE("sqit samples register their audio") {
    AudioCatalog cat{AudioSettings{}};
    const auto s = build_sqit_samples(5, 4, cat);
    REQUIRE(s.size() == 5);
    for (const InstructionSample& x : s) {
        CHECK(x.task == Task::SQIT);
        CHECK(x.audio_ref.rfind("sqit/4/", 0) == 0);
        CHECK(!cat.text(x.audio_ref).empty());
    }
}
