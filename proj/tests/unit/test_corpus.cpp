// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "tempdir.hpp"

#include "slotllm/audio.hpp"
#include "slotllm/corpus.hpp"

#include <cmath>
#include <fstream>
#include <set>

using namespace slotllm;
using slotllm_test::TempDir;

TEST_CASE("corpus generation is deterministic under the seed") {
    const auto a = gen_toy_corpus(1, 7);
    const auto b = gen_toy_corpus(1, 7);
    REQUIRE(a.size() == 1);
    CHECK(a == b);
    CHECK(to_json(a[0]).dump() == to_json(b[0]).dump());
    CHECK(gen_toy_corpus(3, 8) != gen_toy_corpus(3, 7));
}

TEST_CASE("every gold value is a substring of its turn") {
    for (std::uint64_t seed : {1u, 5u, 7u}) {
        for (const Conversation& c : gen_toy_corpus(100, seed)) {
            REQUIRE(c.annotations);
            REQUIRE(c.annotations->size() == c.turns.size());
            for (std::size_t i = 0; i < c.turns.size(); ++i) {
                for (const auto& [label, value] : (*c.annotations)[i].slots) {
                    CHECK_MESSAGE(c.turns[i].text.find(value) != std::string::npos, label, "=", value);
                }
            }
        }
    }
}

TEST_CASE("slot-bearing turn rate matches the configured rate") {
    const CorpusConfig cfg;
    long slot_turns = 0, turns = 0;
    for (const Conversation& c : gen_toy_corpus(1000, 1, cfg)) {
        for (const TurnAnnotation& a : *c.annotations) {
            ++turns;
            slot_turns += !a.slots.empty();
        }
    }
    const double rate = static_cast<double>(slot_turns) / static_cast<double>(turns);
    CHECK(std::abs(rate - cfg.slot_turn_rate) <= 0.03);
}

TEST_CASE("grammar emits both slot-bearing and slot-free turns") {
    int with = 0, without = 0;
    for (const Conversation& c : gen_toy_corpus(20, 2)) {
        for (const TurnAnnotation& a : *c.annotations) (a.slots.empty() ? without : with)++;
    }
    CHECK(with > 0);
    CHECK(without > 0);
}

TEST_CASE("label manifest partitions the inventory") {
    const LabelManifest m = make_manifest(7);
    std::set<std::string> seen(m.seen_labels.begin(), m.seen_labels.end());
    std::set<std::string> unseen(m.unseen_labels.begin(), m.unseen_labels.end());
    CHECK(seen.size() == m.seen_labels.size());
    for (const std::string& l : unseen) CHECK(seen.count(l) == 0);
    CHECK(seen.size() + unseen.size() == label_inventory().size());
    CHECK(make_manifest(7) == m);
    CHECK(manifest_from_json(to_json(m)) == m);

    // Seen-pool conversations only use seen labels.
    for (const Conversation& c : gen_toy_corpus(50, 7)) {
        for (const TurnAnnotation& a : *c.annotations) {
            for (const auto& kv : a.slots) CHECK(seen.count(kv.first) == 1);
        }
    }
}

TEST_CASE("shifted pool overlaps the seen labels by about 48 percent") {
    const CorpusConfig cfg;
    const LabelManifest m = make_manifest(7, cfg);
    const auto pool = pool_labels(m, LabelPool::shifted, cfg);
    std::set<std::string> seen(m.seen_labels.begin(), m.seen_labels.end());
    int overlap = 0;
    for (const std::string& l : pool) overlap += seen.count(l) ? 1 : 0;
    const double frac = static_cast<double>(overlap) / static_cast<double>(pool.size());
    CHECK(std::abs(frac - 0.48) <= 1.0 / static_cast<double>(pool.size()));
}

TEST_CASE("jsonl round trip preserves conversations") {
    TempDir dir("corpus");
    auto convs = gen_toy_corpus(3, 11);
    convs[1].annotations.reset();
    save_conversations(dir / "c.jsonl", convs);
    CHECK(load_conversations(dir / "c.jsonl") == convs);
}

TEST_CASE("truncated record names its line") {
    TempDir dir("corpus");
    const auto convs = gen_toy_corpus(2, 3);
    {
        std::ofstream out(dir / "bad.jsonl");
        const std::string second = to_json(convs[1]).dump();
        out << to_json(convs[0]).dump() << "\n" << second.substr(0, second.size() / 2) << "\n";
    }
    try {
        load_conversations(dir / "bad.jsonl");
        FAIL("expected an error");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("large files keep record order") {
    TempDir dir("corpus");
    std::vector<Conversation> convs;
    for (int i = 0; i < 10000; ++i) {
        Conversation c;
        c.id = "c" + std::to_string(i);
        c.turns.push_back({Speaker::customer, "hello " + std::to_string(i), c.id + "/0"});
        convs.push_back(std::move(c));
    }
    save_conversations(dir / "big.jsonl", convs);
    const auto back = load_conversations(dir / "big.jsonl");
    REQUIRE(back.size() == convs.size());
    for (std::size_t i = 0; i < back.size(); i += 997) CHECK(back[i].id == convs[i].id);
    CHECK(back.back().id == "c9999");
}

TEST_CASE("annotation count must match the turns") {
    Conversation c = gen_toy_corpus(1, 4)[0];
    c.annotations->pop_back();
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    Conversation e = gen_toy_corpus(1, 4)[0];
    e.turns[0].text = "   ";
    CHECK_THROWS_AS(e.validate(), std::invalid_argument);
}

TEST_CASE("noiseless audio repeats each character's vector F times") {
    const PseudoAudio a = synth_audio("ab", 0, 4, 0.0);
    REQUIRE(a.frames.rows() == 8);
    for (int r = 1; r < 4; ++r) CHECK(a.frames.row(r) == a.frames.row(0));
    for (int r = 5; r < 8; ++r) CHECK(a.frames.row(r) == a.frames.row(4));
    CHECK(a.frames.row(0) != a.frames.row(4));
}

TEST_CASE("audio synthesis is deterministic given the seed") {
    CHECK(synth_audio("hello there", 9, 4, 0.1).frames == synth_audio("hello there", 9, 4, 0.1).frames);
    CHECK(synth_audio("hello there", 9, 4, 0.1).frames != synth_audio("hello there", 10, 4, 0.1).frames);
}

TEST_CASE("noise scale: mean frame distance is sigma * sqrt(d)") {
    const double sigma = 0.1;
    const PseudoAudio clean = synth_audio("hello", 0, 4, 0.0);
    double total = 0;
    long n = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const PseudoAudio noisy = synth_audio("hello", seed, 4, sigma);
        for (Index r = 0; r < noisy.frames.rows(); ++r) {
            total += static_cast<double>((noisy.frames.row(r) - clean.frames.row(r)).norm());
            ++n;
        }
    }
    const double expected = sigma * std::sqrt(16.0);
    CHECK(std::abs(total / static_cast<double>(n) - expected) / expected <= 0.10);
}

TEST_CASE("empty utterance is rejected") {
    try {
        synth_audio("", 0, 4, 0.0);
        FAIL("expected an error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()) == "empty utterance");
    }
}

TEST_CASE("noiseless audio inverts to its text") {
    for (const Conversation& c : gen_toy_corpus(5, 2)) {
        for (const Turn& t : c.turns) CHECK(recover_text(synth_audio(t.text, 3, 4, 0.0)) == t.text);
    }
}

TEST_CASE("catalog resolves references and reports unknown ones") {
    AudioSettings s;
    s.frame_rate_per_char = 2;
    AudioCatalog cat(s);
    cat.add("x/0", "okay");
    CHECK(cat.audio("x/0").frames.rows() == 8);
    CHECK(cat.audio("x/0").frames == cat.audio("x/0").frames);
    CHECK_THROWS_AS(cat.text("missing"), std::out_of_range);
    AudioSettings quiet = s;
    quiet.noise_sigma = 0;
    CHECK(recover_text(cat.with_settings(quiet).audio("x/0")) == "okay");
}
