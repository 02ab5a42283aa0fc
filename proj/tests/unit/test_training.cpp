// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include "slotllm/training.hpp"

#include <cmath>
#include <limits>
#include <numeric>

using namespace slotllm;

namespace {

ModelConfig tiny_config(int vocab) {
    ModelConfig c;
    c.frame_rate_per_char = 8;
    c.encoder.d_enc = 12;
    c.adapter.kind = AdapterKind::mlp;
    c.adapter.d_enc = 12;
    c.adapter.d_llm = 16;
    c.adapter.mlp_hidden = 16;
    c.lm.vocab = vocab;
    c.lm.d_model = 16;
    c.lm.layers = 1;
    c.lm.heads = 2;
    c.lm.d_ff = 16;
    return c;
}

/// Short turns, no context, all tasks present.
struct ToyData {
    AudioCatalog catalog;
    DataBundle bundle;

    ToyData() : catalog(settings()) {
        std::vector<Conversation> convs = gen_toy_corpus(12, 1);
        for (Conversation& c : convs) {
            c.turns.resize(std::min<std::size_t>(c.turns.size(), 4));
            c.annotations->resize(c.turns.size());
        }
        register_turns(catalog, convs);
        InstructionBuildConfig ic;
        ic.T_max = 0;
        ic.query_specific_slots = 0;
        const auto slot = build_slot_samples(convs, ic, label_inventory());
        const auto ast = build_ast_samples(convs);
        const auto cont =
            build_continuation_samples(convs, [](const std::string& t, int) { return t.substr(0, 6); }, 6).samples;
        auto split = [&](Task t, const std::vector<InstructionSample>& v) {
            const std::size_t k = v.size() * 3 / 4;
            bundle.train[t].assign(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k));
            bundle.eval[t].assign(v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
        };
        split(Task::SLOT, slot);
        split(Task::AST, ast);
        split(Task::CONT, cont);
        bundle.catalog = &catalog;
    }
    static AudioSettings settings() {
        AudioSettings s;
        s.frame_rate_per_char = 8;
        return s;
    }
};

CompositeModel tiny_model(std::uint64_t seed = 1) {
    const Tokenizer tok;
    return CompositeModel(tiny_config(tok.size()), tok, seed);
}

TrainConfig quick(long steps) {
    TrainConfig c;
    c.max_lr = 3e-3;
    c.steps = steps;
    c.effective_batch = 4;
    c.micro_batch = 2;
    return c;
}

Stage joint() { return StrategyPlan::preset(StrategyKind::single).stages.at(0); }

std::vector<Matrix> values(CompositeModel& m) { return m.snapshot(); }

}  // namespace

TEST_CASE("learning-rate schedule anchors") {
    const TrainConfig cfg;
    const long total = 1000;
    CHECK(lr_at(0, total, cfg) == 0.0);
    CHECK(std::abs(lr_at(0.2 * total, total, cfg) - 2e-4) <= 1e-9);
    CHECK(std::abs(lr_at(0.6 * total, total, cfg) - 1e-4) <= 1e-9);
    CHECK(std::abs(lr_at(total, total, cfg)) <= 1e-12);
    CHECK_THROWS_AS(lr_at(0, 0, cfg), std::invalid_argument);
}

TEST_CASE("learning rate rises through warm-up and falls afterwards") {
    const TrainConfig cfg;
    const long total = 777;
    double prev = -1;
    for (long s = 0; s <= total; ++s) {
        const double lr = lr_at(static_cast<double>(s), total, cfg);
        if (s <= static_cast<long>(0.2 * total)) CHECK(lr >= prev);
        if (s > static_cast<long>(0.2 * total) + 1) CHECK(lr <= prev);
        prev = lr;
    }
}

TEST_CASE("clipping an exploding gradient yields unit norm") {
    Parameter a("a", Matrix::Constant(3, 4, 0.0f));
    Parameter b("b", Matrix::Constant(1, 5, 0.0f));
    a.grad = Matrix::Constant(3, 4, 1e6f);
    b.grad = Matrix::Constant(1, 5, -3e5f);
    const std::vector<Parameter*> ps = {&a, &b};
    const double expected = std::sqrt(12 * 1e12 + 5 * 9e10);
    const double pre = clip_grad_norm(ps, 1.0);
    CHECK(pre == doctest::Approx(expected).epsilon(1e-6));
    CHECK(std::abs(global_grad_norm(ps) - 1.0) <= 1e-6);

    a.grad = Matrix::Constant(3, 4, 0.01f);
    b.grad = Matrix::Constant(1, 5, 0.0f);
    const Matrix before = a.grad;
    clip_grad_norm(ps, 1.0);
    CHECK(a.grad == before);
}

TEST_CASE("first adam step moves each weight by lr against its gradient sign") {
    Parameter p("p", Matrix::Constant(2, 2, 1.0f));
    p.grad.resize(2, 2);
    p.grad << 0.5f, -2.0f, 1e-3f, -7.0f;
    AdamW opt({&p});
    opt.step(0.1);
    CHECK(opt.steps() == 1);
    for (Index i = 0; i < 4; ++i) {
        const double g = p.grad.data()[i];
        const double expect = 1.0 - 0.1 * g / (std::abs(g) + 1e-8);
        CHECK(p.value.data()[i] == doctest::Approx(expect).epsilon(1e-6));
    }
}

TEST_CASE("train config validation names the field") {
    TrainConfig c;
    c.warmup_frac = 1.0;
    CHECK_THROWS_WITH(c.validate(), doctest::Contains("warmup_frac"));
    c = {};
    c.max_lr = 0;
    CHECK_THROWS_WITH(c.validate(), doctest::Contains("max_lr"));
    c = {};
    c.micro_batch = 3;
    c.effective_batch = 8;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    CHECK(c.steps_per_epoch(300) == 3);
    CHECK(c.total_steps(300) == 30);
}

TEST_CASE("epoch order is a deterministic permutation") {
    const auto a = epoch_order(50, 3, 0);
    std::vector<std::size_t> sorted = a;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> iota(50);
    std::iota(iota.begin(), iota.end(), 0);
    CHECK(sorted == iota);
    CHECK(epoch_order(50, 3, 0) == a);
    CHECK(epoch_order(50, 3, 1) != a);
}

TEST_CASE("learning curve csv round trip") {
    LearningCurve c;
    c.name = "x";
    c.points = {{1, 2.5, 3.25, 1e-4}, {2, 2.0, 3.0, 2e-4}};
    const LearningCurve back = LearningCurve::from_csv("x", c.to_csv());
    REQUIRE(back.points.size() == 2);
    CHECK(back.points[1].step == 2);
    CHECK(back.points[0].eval_loss == doctest::Approx(3.25));
    CHECK(c.to_csv().rfind("step,train_loss,eval_loss,lr\n", 0) == 0);
}

TEST_CASE("accumulating 4 x 8 equals one batch of 32") {
    ToyData d;
    TrainConfig a = quick(1);
    a.effective_batch = 32;
    a.micro_batch = 4;
    a.warmup_frac = 0.5;
    TrainConfig b = a;
    b.micro_batch = 32;
    b.grad_clip = a.grad_clip = 1e9;

    CompositeModel m1 = tiny_model(), m2 = tiny_model();
    m1.set_trainable({Module::adapter, Module::lm});
    m2.set_trainable({Module::adapter, Module::lm});
    const Stage s = joint();
    const Objective o1 = make_objective(m1, s, d.bundle, 0);
    const Objective o2 = make_objective(m2, s, d.bundle, 0);
    REQUIRE(o1.n_train >= 32);
    train_stage(m1, o1, a, 5);
    train_stage(m2, o2, b, 5);
    const auto v1 = values(m1), v2 = values(m2);
    double worst = 0;
    for (std::size_t i = 0; i < v1.size(); ++i) worst = std::max(worst, static_cast<double>((v1[i] - v2[i]).cwiseAbs().maxCoeff()));
    CHECK(worst <= 1e-5);
}

TEST_CASE("training lowers eval loss and restores the best checkpoint") {
    ToyData d;
    CompositeModel m = tiny_model();
    m.set_trainable({Module::adapter, Module::lm});
    const Objective o = make_objective(m, joint(), d.bundle, 0);
    const StageResult r = train_stage(m, o, quick(60), 2);
    REQUIRE(!r.curve.points.empty());
    CHECK(r.best_eval_loss < r.initial_eval_loss);
    double best = r.initial_eval_loss;
    for (std::size_t i = 0; i < r.curve.points.size(); ++i) {
        best = std::min(best, r.curve.points[i].eval_loss);
        if (i > 0) CHECK(r.curve.points[i].step > r.curve.points[i - 1].step);
    }
    CHECK(r.best_eval_loss == best);
    double restored = 0;
    for (std::size_t i = 0; i < o.n_eval; ++i) restored += o.eval_loss(i);
    CHECK(restored / static_cast<double>(o.n_eval) == doctest::Approx(r.best_eval_loss).epsilon(1e-9));
}

TEST_CASE("same seed reproduces the curve; another seed does not") {
    ToyData d;
    auto run = [&](std::uint64_t seed) {
        CompositeModel m = tiny_model();
        m.set_trainable({Module::adapter});
        return train_stage(m, make_objective(m, joint(), d.bundle, 0), quick(8), seed).curve.to_csv();
    };
    CHECK(run(1) == run(1));
    CHECK(run(1) != run(2));
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
    ToyData d;
    CompositeModel m = tiny_model();
    m.adapter().for_each_parameter([](Parameter& p) { p.value.setConstant(std::numeric_limits<Scalar>::quiet_NaN()); });
    m.set_trainable({Module::adapter});
    try {
        train_stage(m, make_objective(m, joint(), d.bundle, 0), quick(4), 1);
        FAIL("expected divergence");
    } catch (const TrainingDiverged& e) {
        const std::string what = e.what();
        CHECK(what.find("step") != std::string::npos);
        CHECK(what.find("lr") != std::string::npos);
    }
}

TEST_CASE("presets have the documented shapes") {
    const StrategyPlan single = StrategyPlan::preset(StrategyKind::single);
    REQUIRE(single.stages.size() == 1);
    CHECK(single.stages[0].trainable == ModuleSet{Module::adapter, Module::lm});
    CHECK(single.stages[0].lora);
    CHECK(StrategyPlan::preset(StrategyKind::A).stages.size() == 3);
    for (StrategyKind k : {StrategyKind::B, StrategyKind::C}) {
        const StrategyPlan p = StrategyPlan::preset(k);
        REQUIRE(p.stages.size() == 2);
        CHECK(p.stages[0].trainable == ModuleSet{Module::adapter});
        CHECK(p.stages[1].trainable == single.stages[0].trainable);
    }
    CHECK(StrategyPlan::preset(StrategyKind::C).stages[0].tasks == std::vector<Task>{Task::AST});
    CHECK(StrategyPlan::preset(StrategyKind::B).stages[0].tasks == std::vector<Task>{Task::CONT});
    CHECK_THROWS_AS(StrategyPlan::preset(StrategyKind::custom), std::invalid_argument);
    StrategyPlan bad = single;
    bad.stages[0].budget_frac = 0.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("every preset honours the freezing contract and threads checkpoints") {
    ToyData d;
    for (StrategyKind k : {StrategyKind::single, StrategyKind::A, StrategyKind::B, StrategyKind::C}) {
        CAPTURE(to_string(k));
        CompositeModel m = tiny_model(3);
        StrategyOptions opts;
        opts.train = quick(0);
        opts.lora.rank = 2;
        opts.lora.alpha = 8;
        opts.total_steps = 12;
        const StrategyResult r = run_strategy(m, StrategyPlan::preset(k), d.bundle, opts, 4);
        REQUIRE(r.stages.size() == StrategyPlan::preset(k).stages.size());
        for (std::size_t i = 0; i < r.stages.size(); ++i) {
            CHECK(freezing_contract_holds(r.stages[i]));
            if (i > 0) CHECK(r.stages[i].base_hash_before == r.stages[i - 1].base_hash_handoff);
        }
        const StageRecord& first = r.stages.front();
        for (Module mod : {Module::encoder, Module::adapter, Module::lm}) {
            const bool trained = first.trainable.count(mod) > 0;
            const bool changed = first.base_hash_before.at(mod) != first.base_hash_after.at(mod) ||
                                 first.lora_hash_before.at(mod) != first.lora_hash_after.at(mod);
            if (changed) CHECK(trained);
            if (k == StrategyKind::C && mod == Module::adapter) CHECK(changed);
        }
        CHECK(std::isfinite(r.final_eval_loss));
    }
}

TEST_CASE("stage errors carry the stage name") {
    ToyData d;
    d.bundle.train.erase(Task::AST);
    CompositeModel m = tiny_model();
    StrategyOptions opts;
    opts.train = quick(0);
    opts.total_steps = 4;
    CHECK_THROWS_WITH(run_strategy(m, StrategyPlan::preset(StrategyKind::C), d.bundle, opts, 1),
                      doctest::Contains("stage1-adapter-ast"));
}
