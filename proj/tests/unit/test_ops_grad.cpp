// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference checks of every differentiable op (double build).

#include "doctest.h"
#include "gradcheck.hpp"

#include "slotllm/nn.hpp"

using namespace slotllm;
using slotllm_test::grad_check;

namespace {

constexpr double kTol = 1e-6;

Parameter make(const char* name, Index r, Index c, std::mt19937_64& rng) {
    return Parameter(name, random_normal(r, c, 1.0, rng));
}

// Weighted sum keeps every output coordinate in play.
Var probe(Var out, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Matrix w = random_normal(out.rows(), out.cols(), 1.0, rng);
    return ops::sum(ops::mul(out, out.tape()->constant(w)));
}

}  // namespace

TEST_CASE("elementwise and affine ops match finite differences") {
    std::mt19937_64 rng(1);
    Parameter a = make("a", 3, 4, rng), b = make("b", 3, 4, rng), w = make("w", 4, 5, rng), bias = make("bias", 1, 5, rng);
    auto r = grad_check({&a, &b, &w, &bias}, [&](Tape& t) {
        Var x = ops::add(ops::mul(t.param(a), t.param(b)), ops::scale(ops::sub(t.param(a), t.param(b)), 0.5));
        Var y = ops::affine(ops::silu(x), t.param(w), t.param(bias));
        return probe(ops::add(ops::gelu(y), ops::relu(ops::add_row(y, t.param(bias)))), 2);
    }, 0, 3);
    CHECK(r.max_rel_error < kTol * 100);
}

TEST_CASE("normalizations match finite differences") {
    std::mt19937_64 rng(4);
    Parameter x = make("x", 5, 6, rng), g = make("g", 1, 6, rng), beta = make("beta", 1, 6, rng);
    auto r = grad_check({&x, &g, &beta}, [&](Tape& t) {
        return ops::add(probe(ops::rms_norm(t.param(x), t.param(g)), 5),
                        probe(ops::layer_norm(t.param(x), t.param(g), t.param(beta)), 6));
    }, 0, 7);
    CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("row plumbing ops match finite differences") {
    std::mt19937_64 rng(8);
    Parameter table = make("table", 7, 3, rng), x = make("x", 11, 3, rng);
    const std::vector<int> idx = {2, 0, 2, 6};
    auto r = grad_check({&table, &x}, [&](Tape& t) {
        Var g = ops::gather_rows(t.param(table), idx);
        std::vector<Var> parts = {g, ops::slice_rows(t.param(x), 3, 5)};
        Var c = ops::concat_rows(parts);
        Var s = ops::stack_frames(t.param(x), 4);
        Var u = ops::unfold_time(t.param(x), 3, 2, 1);
        return ops::add(ops::add(probe(c, 9), probe(s, 10)), probe(u, 11));
    }, 0, 12);
    CHECK(r.max_rel_error < kTol * 100);
}

TEST_CASE("attention matches finite differences, causal and bidirectional") {
    for (bool causal : {true, false}) {
        std::mt19937_64 rng(causal ? 13 : 14);
        Parameter q = make("q", 5, 8, rng), k = make("k", 5, 8, rng), v = make("v", 5, 8, rng);
        auto r = grad_check({&q, &k, &v}, [&](Tape& t) {
            return probe(ops::attention(t.param(q), t.param(k), t.param(v), 2, causal, true, 3), 15);
        }, 0, 16);
        CHECK(r.max_rel_error < 1e-4);
    }
}

TEST_CASE("cross-entropy and squared error match finite differences") {
    std::mt19937_64 rng(17);
    Parameter logits = make("logits", 4, 9, rng);
    const std::vector<int> targets = {3, -1, 8, 0};
    Matrix target = random_normal(4, 9, 1.0, rng);
    auto r = grad_check({&logits}, [&](Tape& t) {
        return ops::add(ops::cross_entropy(t.param(logits), targets, 0.25),
                        ops::squared_error(t.param(logits), target, 0.1));
    }, 0, 18);
    CHECK(r.max_rel_error < kTol * 100);
}

TEST_CASE("linear layer with LoRA matches finite differences") {
    std::mt19937_64 rng(19);
    Linear lin("lin", 6, 5, true, rng);
    lin.attach_lora(LoraSpec{2, 8.0, 0.0, 0.5}, rng);
    lin.lora_b()->value = random_normal(2, 5, 0.3, rng);
    Parameter x = make("x", 3, 6, rng);
    std::vector<Parameter*> ps = {&x};
    lin.for_each_parameter([&](Parameter& p) { ps.push_back(&p); });
    auto r = grad_check(ps, [&](Tape& t) { return probe(lin.forward(t, t.param(x), {}), 20); }, 0, 21);
    CHECK(r.max_rel_error < kTol * 100);
}
