// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "scoring_oracle.hpp"

#include "slotllm/evaluation.hpp"

#include <cmath>

using namespace slotllm;
using slotllm_test::Pairs;

namespace {

TurnSlots turn(const Pairs& p) {
    TurnSlots t;
    for (const auto& [l, v] : p) t.push_back({l, v});
    return t;
}

InstructionSample slot_sample(const SlotMap& gold) {
    InstructionSample s;
    s.task = Task::SLOT;
    s.instruction = "q";
    s.response = canonical_slot_json(gold);
    return s;
}

}  // namespace

TEST_CASE("harrisburg example: P=2/3, R=1, F1=0.8") {
    const TurnSlots gold = {{"location", "Harrisburg"}, {"agent_name", "Heaven"}};
    const TurnSlots pred = {{"location", "Harrisburg PA"}, {"agent_name", "Heaven"}};
    const EvalReport r = score_slots({pred}, {gold});
    CHECK(r.precision == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(r.recall == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.f1 == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(r.credit == 2);
    CHECK(r.pred_tokens == 3);
    CHECK(r.gold_tokens == 2);
}

TEST_CASE("identity scores perfectly, empty predictions score zero") {
    const std::vector<TurnSlots> gold = {{{"person_name", "Matt"}}, {}, {{"date", "May 3"}, {"location", "Erie"}}};
    std::vector<std::optional<TurnSlots>> same(gold.begin(), gold.end());
    const EvalReport r = score_slots(same, gold);
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 1.0);
    CHECK(r.f1 == 1.0);
    CHECK(r.turns == 3);
    CHECK(r.gold_pairs == 3);

    const EvalReport z = score_slots({TurnSlots{}, TurnSlots{}, TurnSlots{}}, gold);
    CHECK(z.precision == 0.0);
    CHECK(z.recall == 0.0);
    CHECK(z.f1 == 0.0);

    const EvalReport f = score_slots({std::nullopt, std::nullopt, std::nullopt}, gold);
    CHECK(f.parse_failures == 3);
    CHECK(f.f1 == 0.0);
    CHECK_THROWS_AS(score_slots({std::nullopt}, gold), std::invalid_argument);
}

TEST_CASE("labels are gated after normalization") {
    CHECK(normalize_label("  Agent Name ") == "agent_name");
    CHECK(normalize_label("agent-name") == "agent_name");
    CHECK(normalize_label("AGENT__name") == "agent_name");
    CHECK(value_tokens("Harrisburg, PA!") == std::vector<std::string>{"harrisburg", "pa"});
    CHECK(turn_credit({{"agent name", "Heaven"}}, {{"agent_name", "heaven"}}) == 1);
    CHECK(turn_credit({{"person_name", "Heaven"}}, {{"agent_name", "Heaven"}}) == 0);
}

TEST_CASE("credit equals the exhaustive oracle on random small turns") {
    std::mt19937_64 rng(20260101);
    for (int i = 0; i < 300; ++i) {
        const Pairs g = slotllm_test::random_pairs(rng, 5);
        const Pairs p = slotllm_test::random_pairs(rng, 5);
        REQUIRE(turn_credit(turn(p), turn(g)) == slotllm_test::oracle_credit(p, g));
    }
}

TEST_CASE("greedy credit never exceeds the optimum") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 300; ++i) {
        const Pairs g = slotllm_test::random_pairs(rng, 5);
        const Pairs p = slotllm_test::random_pairs(rng, 5);
        CHECK(greedy_credit(turn(p), turn(g)) <= slotllm_test::oracle_credit(p, g));
    }
}

TEST_CASE("large label groups fall back to a valid matching") {
    TurnSlots gold, pred;
    for (int i = 0; i < 14; ++i) {
        gold.push_back({"x", "w" + std::to_string(i)});
        pred.push_back({"x", "w" + std::to_string(13 - i)});
    }
    CHECK(turn_credit(pred, gold) == 14);
}

TEST_CASE("spurious predictions never raise precision; correct ones never lower recall") {
    std::mt19937_64 rng(77);
    for (int i = 0; i < 200; ++i) {
        const Pairs g = slotllm_test::random_pairs(rng, 4);
        const Pairs p = slotllm_test::random_pairs(rng, 4);
        const EvalReport base = score_slots({turn(p)}, {turn(g)});
        TurnSlots spurious = turn(p);
        spurious.push_back({"unrelated_label", "noise words"});
        CHECK(score_slots({spurious}, {turn(g)}).precision <= base.precision + 1e-12);
        if (!g.empty()) {
            TurnSlots better = turn(p);
            better.push_back({g[0].first, g[0].second});
            CHECK(score_slots({better}, {turn(g)}).recall >= base.recall - 1e-12);
        }
    }
}

TEST_CASE("f1 is the harmonic mean") {
    const EvalReport r = score_slots({TurnSlots{{"a", "x y z"}}}, {TurnSlots{{"a", "x"}, {"b", "q"}}});
    CHECK(r.f1 == doctest::Approx(2 * r.precision * r.recall / (r.precision + r.recall)));
    CHECK(r.per_label.at("a").credit == 1);
    CHECK(r.per_label.at("b").gold_tokens == 1);
}

TEST_CASE("slot json parsing tolerates fences and rejects garbage") {
    const auto a = parse_slot_json("```json\n{\"person_name\": \"Matt\"}\n```");
    REQUIRE(a);
    CHECK(*a == TurnSlots{{"person_name", "Matt"}});
    CHECK(parse_slot_json("{}")->empty());
    CHECK(!parse_slot_json("no json"));
    CHECK(!parse_slot_json("{\"a\": "));
}

TEST_CASE("wer examples") {
    CHECK(wer({"a b c"}, {"a b c"}) == 0.0);
    CHECK(wer({"a x c"}, {"a b c"}) == doctest::Approx(1.0 / 3.0));
    CHECK(wer({"  a b c "}, {"a b c"}) == 0.0);
    CHECK(wer({"a b", ""}, {"a b c", "d"}) == doctest::Approx(2.0 / 4.0));
    CHECK_THROWS_AS(wer({"a"}, {"a", "b"}), std::invalid_argument);
    CHECK_THROWS_AS(wer({""}, {""}), std::invalid_argument);
}

TEST_CASE("wer equals corrupted words over reference words") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::string> hyps, refs;
        long corrupted = 0, total = 0;
        for (int s = 0; s < 3; ++s) {
            const int n = 3 + static_cast<int>(rng() % 6);
            std::string ref, hyp;
            for (int w = 0; w < n; ++w) {
                const std::string word = "w" + std::to_string(rng() % 50);
                const bool bad = rng() % 4 == 0;
                corrupted += bad;
                ref += (w ? " " : "") + word;
                hyp += (w ? " " : "") + (bad ? "ZZ" + std::to_string(w) : word);
            }
            total += n;
            refs.push_back(ref);
            hyps.push_back(hyp);
        }
        CHECK(wer(hyps, refs) == doctest::Approx(static_cast<double>(corrupted) / static_cast<double>(total)));
    }
}

TEST_CASE("id/ood split partitions by seen labels") {
    const std::vector<InstructionSample> samples = {
        slot_sample({{"person_name", "Matt"}}),
        slot_sample({{"person_name", "Matt"}, {"flight_number", "12"}}),
        slot_sample({}),
        slot_sample({{"Flight Number", "9"}}),
    };
    const SplitResult r = split_id_ood(samples, {"person_name"});
    CHECK(r.id_samples.size() == 2);
    CHECK(r.ood_samples.size() == 2);
    CHECK(r.overlap_fraction == doctest::Approx(0.5));
    const SplitResult all = split_id_ood(samples, {"person_name", "flight_number"});
    CHECK(all.ood_samples.empty());
    CHECK(gold_labels(samples[1]) == std::vector<std::string>{"person_name", "flight_number"});
}

TEST_CASE("end-to-end evaluation with oracle, garbage and half-oracle models") {
    std::vector<InstructionSample> eval;
    for (int i = 0; i < 20; ++i) eval.push_back(slot_sample({{"person_name", "name " + std::to_string(i)}}));

    const EvalRun oracle = evaluate_model(eval, [](const InstructionSample& s) { return s.response; });
    CHECK(oracle.report.f1 == 1.0);
    CHECK(oracle.outputs.size() == eval.size());

    const EvalRun garbage = evaluate_model(eval, [](const InstructionSample&) { return std::string("lorem ipsum"); });
    CHECK(garbage.report.f1 == 0.0);
    CHECK(garbage.report.parse_failures == static_cast<long>(eval.size()));

    int k = 0;
    const EvalRun half = evaluate_model(eval, [&](const InstructionSample& s) { return k++ % 2 ? std::string() : s.response; });
    CHECK(half.report.recall == doctest::Approx(0.5 * oracle.report.recall));
    CHECK(half.report.precision == 1.0);
}

TEST_CASE("table formatting lists every system") {
    EvalReport r;
    r.precision = 0.5;
    r.recall = 0.25;
    r.f1 = 1.0 / 3.0;
    const std::string t = format_table({{"alpha", r}, {"beta", EvalReport{}}});
    CHECK(t.find("System") != std::string::npos);
    CHECK(t.find("alpha") != std::string::npos);
    CHECK(t.find("beta") != std::string::npos);
    CHECK(t.find("0.5") != std::string::npos);
}
