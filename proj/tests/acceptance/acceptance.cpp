// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero when any selected criterion fails.
//
//   acceptance [--only 1,2,...] [--workdir DIR] [--config quickstart.yaml]

#include "criteria.hpp"
#include "scoring_oracle.hpp"

#include "slotllm/experiment.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <set>

using namespace slotllm;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets, one place.
constexpr std::int64_t kCnnParams = 3411456;
constexpr std::int64_t kLinearParams = 8390656;
constexpr std::int64_t kMlpParams = 20977664;
constexpr double kTransformerParams = 67.16e6;
constexpr double kTransformerRelTol = 0.002;
constexpr double kCountSeconds = 1.0;
constexpr int kScorerCases = 1000;
constexpr double kScorerSeconds = 30.0;
constexpr int kLoraInputs = 100;
constexpr double kLoraNoopTol = 1e-6;
constexpr double kLoraMergeTol = 1e-5;
constexpr double kLoraSeconds = 10.0;
constexpr int kGradCoordinates = 50;
constexpr double kGradRelTol = 1e-3;
constexpr std::int64_t kGradSliceLimit = 1000;
constexpr double kGradSeconds = 60.0;
constexpr double kSingleF1 = 0.80;
constexpr double kSingleCpuSeconds = 15 * 60.0;
constexpr double kNoiselessCascadeGap = 0.05;
constexpr int kBuilderSamples = 10000;
constexpr double kBinTol = 0.02;
constexpr double kLrTol = 1e-9;
constexpr double kClipTol = 1e-6;
const std::vector<std::uint64_t> kSeeds = {1, 2, 3};

struct Outcome {
    bool pass = false;
    std::string detail;
};

double wall_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}
double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string list(const std::vector<double>& v, const char* f = "%.4f") {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(f, v[i]);
    return s + "]";
}

ProgressFn logger(const std::string& tag) {
    const double t0 = wall_seconds();
    return [tag, t0](const std::string& m) { std::fprintf(stderr, "  [%7.1fs] %s: %s\n", wall_seconds() - t0, tag.c_str(), m.c_str()); };
}

// ---------------------------------------------------------------------------
// 1. Adapter parameter counts

Outcome c1_param_counts() {
    const double t0 = wall_seconds();
    std::map<AdapterKind, std::int64_t> n;
    for (AdapterKind k : {AdapterKind::cnn, AdapterKind::linear, AdapterKind::mlp, AdapterKind::transformer}) {
        AdapterConfig a;
        a.kind = k;
        a.d_enc = 512;
        a.d_llm = 2048;
        n[k] = count_params(*make_adapter(a, 0, AdapterInit::zeros));
    }
    const double dt = wall_seconds() - t0;
    const double tf_rel = std::abs(static_cast<double>(n[AdapterKind::transformer]) - kTransformerParams) / kTransformerParams;
    Outcome o;
    o.pass = n[AdapterKind::cnn] == kCnnParams && n[AdapterKind::linear] == kLinearParams &&
             n[AdapterKind::mlp] == kMlpParams && tf_rel <= kTransformerRelTol && dt < kCountSeconds;
    o.detail = "cnn=" + std::to_string(n[AdapterKind::cnn]) + " linear=" + std::to_string(n[AdapterKind::linear]) +
               " mlp=" + std::to_string(n[AdapterKind::mlp]) + " transformer=" +
               std::to_string(n[AdapterKind::transformer]) + " (" + fmt("%.3f%%", 100 * tf_rel) + " from 67.16M), " +
               fmt("%.2fs", dt);
    return o;
}

// ---------------------------------------------------------------------------
// 2. Scorer against the exhaustive oracle

Outcome c2_scorer_oracle() {
    const double t0 = wall_seconds();
    std::mt19937_64 rng(424242);
    int agree = 0;
    std::vector<std::optional<TurnSlots>> preds;
    std::vector<TurnSlots> golds;
    long oracle_credit = 0, pred_tokens = 0, gold_tokens = 0;
    for (int i = 0; i < kScorerCases; ++i) {
        const auto g = slotllm_test::random_pairs(rng, 5);
        const auto p = slotllm_test::random_pairs(rng, 5);
        TurnSlots tg, tp;
        for (const auto& [l, v] : g) tg.push_back({l, v});
        for (const auto& [l, v] : p) tp.push_back({l, v});
        const long want = slotllm_test::oracle_credit(p, g);
        agree += turn_credit(tp, tg) == want ? 1 : 0;
        oracle_credit += want;
        pred_tokens += slotllm_test::oracle_token_count(p);
        gold_tokens += slotllm_test::oracle_token_count(g);
        preds.emplace_back(tp);
        golds.push_back(tg);
    }
    // The aggregate report must use the same credit.
    const EvalReport r = score_slots(preds, golds);
    const double dt = wall_seconds() - t0;
    Outcome o;
    o.pass = agree == kScorerCases && r.credit == oracle_credit && r.pred_tokens == pred_tokens &&
             r.gold_tokens == gold_tokens && dt < kScorerSeconds;
    o.detail = std::to_string(agree) + "/" + std::to_string(kScorerCases) + " turns agree; report credit " +
               std::to_string(r.credit) + " vs oracle " + std::to_string(oracle_credit) + ", " + fmt("%.2fs", dt);
    return o;
}

// ---------------------------------------------------------------------------
// 3. LoRA no-op and merge equivalence

Outcome c3_lora() {
    const double t0 = wall_seconds();
    const Tokenizer tok;
    ModelConfig cfg;
    cfg.lm.vocab = tok.size();
    cfg.lm.d_model = 64;
    cfg.lm.layers = 2;
    cfg.lm.heads = 4;
    cfg.lm.d_ff = 128;
    cfg.adapter.d_llm = 64;
    CompositeModel m(cfg, tok, 7);
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> len(1, 40);
    std::vector<Matrix> inputs;
    for (int i = 0; i < kLoraInputs; ++i) inputs.push_back(random_normal(len(rng), cfg.lm.d_model, 1.0, rng));
    std::vector<Matrix> before;
    for (const Matrix& x : inputs) before.push_back(m.lm().forward_logits(x));

    LoraSpec spec;  // rank 32, alpha 128
    m.apply_lora(spec, false, 9);
    double noop = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        noop = std::max(noop, static_cast<double>((m.lm().forward_logits(inputs[i]) - before[i]).cwiseAbs().maxCoeff()));
    }
    m.for_each_lora(Module::lm, [&](Parameter& p) { p.value += random_normal(p.value.rows(), p.value.cols(), 0.02, rng); });
    std::vector<Matrix> with_lora;
    double moved = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        with_lora.push_back(m.lm().forward_logits(inputs[i]));
        moved = std::max(moved, static_cast<double>((with_lora.back() - before[i]).cwiseAbs().maxCoeff()));
    }
    m.merge_lora();
    double merged = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        merged = std::max(merged, static_cast<double>((m.lm().forward_logits(inputs[i]) - with_lora[i]).cwiseAbs().maxCoeff()));
    }
    const double dt = wall_seconds() - t0;
    Outcome o;
    o.pass = noop <= kLoraNoopTol && merged <= kLoraMergeTol && moved > 1e-3 && dt < kLoraSeconds;
    o.detail = "no-op max dev " + fmt("%.2e", noop) + ", merged max dev " + fmt("%.2e", merged) +
               " (LoRA shifted logits by up to " + fmt("%.3f", moved) + "), " + fmt("%.2fs", dt);
    return o;
}

// ---------------------------------------------------------------------------
// 4. Composite gradient check

Outcome c4_gradcheck() {
    const double t0 = wall_seconds();
    const acceptance::GradcheckOutcome g = acceptance::composite_gradcheck(kGradCoordinates, 11);
    const double dt = wall_seconds() - t0;
    Outcome o;
    o.pass = g.checked == kGradCoordinates && g.max_rel_error <= kGradRelTol && g.largest_slice <= kGradSliceLimit &&
             dt < kGradSeconds;
    o.detail = std::to_string(g.checked) + " coordinates, max rel error " + fmt("%.2e", g.max_rel_error) +
               ", largest tensor " + std::to_string(g.largest_slice) + " params, " + fmt("%.2fs", dt);
    return o;
}

// ---------------------------------------------------------------------------
// Shared data for the smoke-scale checks (5, 12).

fs::path g_source_dir = SLOTLLM_SOURCE_DIR;

ExperimentConfig smoke_config() { return load_experiment_config(g_source_dir / "configs" / "smoke.yaml"); }

/// Modules trainable in no stage must keep their base and LoRA hashes from
/// the first stage's start to the last stage's end.
bool never_trained_unchanged(const StrategyResult& r, std::string& why) {
    ModuleSet touched;
    for (const StageRecord& s : r.stages) touched.insert(s.trainable.begin(), s.trainable.end());
    for (Module m : {Module::encoder, Module::adapter, Module::lm}) {
        if (touched.count(m)) continue;
        if (r.stages.front().base_hash_before.at(m) != r.stages.back().base_hash_after.at(m)) {
            why = to_string(m) + " base weights changed although no stage trains it";
            return false;
        }
    }
    for (const StageRecord& s : r.stages) {
        if (!freezing_contract_holds(s)) {
            why = "stage " + s.name + " violated the freezing contract";
            return false;
        }
    }
    return true;
}

Outcome c5_freezing(const fs::path& work) {
    ExperimentConfig cfg = smoke_config();
    cfg.train.steps = 24;
    cfg.resolve();
    const fs::path run = work / "freezing";
    fs::remove_all(run);
    const CorpusSplits corpus = generate_corpus(cfg);
    const AudioCatalog catalog = make_catalog(cfg, corpus);
    Foundation f = run_foundation(run, cfg);
    const InstructionSets sets = build_instruction_sets(cfg, corpus, f, {Task::SLOT, Task::AST, Task::CONT});
    const DataBundle data = make_bundle(cfg, sets, catalog, {Task::SLOT, Task::AST, Task::CONT});
    Outcome o{true, ""};
    for (StrategyKind k : {StrategyKind::single, StrategyKind::A, StrategyKind::B, StrategyKind::C}) {
        CompositeModel model = assemble_model(cfg.model, f, cfg.seed);
        StrategyOptions opts = strategy_options(cfg, {});
        opts.reset_model = [&](CompositeModel& m) { m = assemble_model(cfg.model, f, cfg.seed); };
        const StrategyResult r = run_strategy(model, StrategyPlan::preset(k), data, opts, cfg.seed);
        std::string why;
        const bool ok = never_trained_unchanged(r, why);
        o.pass = o.pass && ok;
        o.detail += (o.detail.empty() ? "" : "; ") + to_string(k) + " " + std::to_string(r.stages.size()) +
                    " stage(s) " + (ok ? "ok" : why);
    }
    return o;
}

// ---------------------------------------------------------------------------
// 10. Instruction builder distributions

Outcome c10_builder() {
    InstructionBuildConfig cfg;
    cfg.seed = 5;
    std::vector<InstructionSample> samples;
    const auto inventory = label_inventory();
    int conv_seed = 0;
    // Generate conversations in chunks until enough turns exist. Sample
    // streams are keyed by conversation id, so ids must be unique.
    while (static_cast<int>(samples.size()) < kBuilderSamples) {
        CorpusConfig cc;
        cc.id_prefix = "dist" + std::to_string(conv_seed);
        for (const Conversation& c : gen_toy_corpus(200, 1000 + static_cast<std::uint64_t>(conv_seed++), cc)) {
            auto part = build_slot_samples(c, cfg, inventory);
            samples.insert(samples.end(), part.begin(), part.end());
        }
    }
    samples.resize(kBuilderSamples);

    std::map<int, int> t_bins, s_bins;
    int queried = 0, collisions = 0, bad_json = 0;
    for (const InstructionSample& s : samples) {
        ++t_bins[s.meta.context_T_drawn];
        const auto parsed = json::parse(s.response, nullptr, false);
        if (parsed.is_discarded() || !parsed.is_object()) ++bad_json;
        if (s.queried_labels.empty()) continue;
        ++queried;
        ++s_bins[s.meta.n_distractors];
        std::set<std::string> gold;
        if (parsed.is_object()) {
            for (const auto& [k, v] : parsed.items()) gold.insert(k);
        }
        // Queried = gold + distractors; any repeat or shortfall is a collision.
        const std::set<std::string> q(s.queried_labels.begin(), s.queried_labels.end());
        if (q.size() != s.queried_labels.size() ||
            q.size() != gold.size() + static_cast<std::size_t>(s.meta.n_distractors)) {
            ++collisions;
        }
        for (const std::string& g : gold) collisions += q.count(g) ? 0 : 1;
    }
    double worst_t = 0, worst_s = 0;
    for (int t = 0; t <= cfg.T_max; ++t) {
        worst_t = std::max(worst_t, std::abs(t_bins[t] / static_cast<double>(samples.size()) - 1.0 / (cfg.T_max + 1)));
    }
    for (int s = cfg.S_min; s <= cfg.S_max; ++s) {
        worst_s = std::max(worst_s, std::abs(s_bins[s] / static_cast<double>(queried) - 1.0 / (cfg.S_max - cfg.S_min + 1)));
    }
    const bool bins_in_range = t_bins.rbegin()->first <= cfg.T_max && s_bins.begin()->first >= cfg.S_min &&
                               s_bins.rbegin()->first <= cfg.S_max;
    Outcome o;
    o.pass = worst_t <= kBinTol && worst_s <= kBinTol && bins_in_range && collisions == 0 && bad_json == 0;
    o.detail = std::to_string(samples.size()) + " samples (" + std::to_string(queried) +
               " queried): worst T-bin deviation " + fmt("%.4f", worst_t) + ", worst S-bin deviation " +
               fmt("%.4f", worst_s) + ", collisions " + std::to_string(collisions) + ", unparseable responses " +
               std::to_string(bad_json);
    return o;
}

// ---------------------------------------------------------------------------
// 11. Schedule and clipping

Outcome c11_schedule() {
    const TrainConfig cfg;  // max_lr 2e-4, warm-up 20%
    const long total = 1000;
    const double at0 = lr_at(0, total, cfg);
    const double at_warm = lr_at(cfg.warmup_frac * total, total, cfg);
    const double at_mid = lr_at((cfg.warmup_frac + (1 - cfg.warmup_frac) / 2) * total, total, cfg);

    std::mt19937_64 rng(3);
    Parameter a("a", Matrix::Zero(64, 64)), b("b", Matrix::Zero(1, 64));
    a.grad = random_normal(64, 64, 1e4, rng);
    b.grad = random_normal(1, 64, 1e4, rng);
    const std::vector<Parameter*> ps = {&a, &b};
    const double pre = clip_grad_norm(ps, cfg.grad_clip);
    const double post = global_grad_norm(ps);

    Outcome o;
    o.pass = std::abs(at0) <= kLrTol && std::abs(at_warm - 2e-4) <= kLrTol && std::abs(at_mid - 1e-4) <= kLrTol &&
             std::abs(post - 1.0) <= kClipTol && pre > 1e5;
    o.detail = "lr(0)=" + fmt("%.3g", at0) + " lr(warm-up end)=" + fmt("%.12g", at_warm) +
               " lr(cosine midpoint)=" + fmt("%.12g", at_mid) + "; clip " + fmt("%.4g", pre) + " -> " +
               fmt("%.9f", post);
    return o;
}

// ---------------------------------------------------------------------------
// 12. Bitwise reproducibility of a full run

std::map<std::string, std::string> file_tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = read_file(e.path());
    }
    return out;
}

Outcome c12_determinism(const fs::path& work) {
    const ExperimentConfig cfg = smoke_config();
    const fs::path a = work / "determinism" / "a", b = work / "determinism" / "b";
    fs::remove_all(work / "determinism");
    run_experiment(a, cfg);
    run_experiment(b, cfg);
    const auto ta = file_tree(a), tb = file_tree(b);
    std::vector<std::string> differing;
    int data = 0, curves = 0, evals = 0;
    for (const auto& [name, bytes] : ta) {
        const auto it = tb.find(name);
        if (it == tb.end() || it->second != bytes) differing.push_back(name);
        data += name.rfind("corpus/", 0) == 0 || name.rfind("annotations/", 0) == 0 || name.rfind("instructions/", 0) == 0;
        curves += name.size() > 9 && name.substr(name.size() - 9) == "curve.csv";
        evals += name.size() > 9 && name.substr(name.size() - 9) == "eval.json";
    }
    for (const auto& [name, bytes] : tb) {
        if (!ta.count(name)) differing.push_back(name);
    }
    Outcome o;
    o.pass = differing.empty() && ta.size() == tb.size() && data > 0 && curves > 0 && evals > 0;
    o.detail = std::to_string(ta.size()) + " files compared (" + std::to_string(data) + " data, " +
               std::to_string(curves) + " curves, " + std::to_string(evals) + " eval reports), " +
               std::to_string(differing.size()) + " differ" + (differing.empty() ? "" : ": first " + differing[0]);
    return o;
}

// ---------------------------------------------------------------------------
// 6-9. Quickstart experiments, shared across criteria.

struct SeedResults {
    double single_f1 = 0, single_ood_f1 = 0, single_cpu = 0, single_loss = 0;
    double frozen_f1 = 0;
    double c_loss = 0;
    double mixed_ood_f1 = 0;
    double text_f1 = 0, cascade_f1 = 0, cascade_wer = 0, speech_f1 = 0;
    double noiseless_cascade_f1 = 0, noiseless_wer = 0;
    bool freezing_ok = true;
};

constexpr const char* kFrozen = "single-frozen-lm";
constexpr const char* kMixed = "single-slot-ast";

ExperimentConfig quickstart_config(const fs::path& path, std::uint64_t seed, const fs::path& work) {
    ExperimentConfig cfg = load_experiment_config(path);
    cfg.seed = seed;
    cfg.foundation_cache = (work / "foundation-cache").string();
    StrategyPlan single = StrategyPlan::preset(StrategyKind::single);
    StrategyPlan frozen = single;
    frozen.name = kFrozen;
    frozen.stages[0].lora = false;
    frozen.stages[0].trainable = {Module::adapter};
    StrategyPlan mixed = single;
    mixed.name = kMixed;
    mixed.stages[0].tasks = {Task::SLOT, Task::AST};
    cfg.strategies = {single, StrategyPlan::preset(StrategyKind::C), frozen, mixed};
    cfg.resolve();
    return cfg;
}

class Quickstart {
public:
    Quickstart(fs::path config, fs::path work) : config_(std::move(config)), work_(std::move(work)) {}

    const std::vector<SeedResults>& results() {
        if (results_.empty()) {
            for (std::uint64_t seed : kSeeds) results_.push_back(run_seed(seed));
        }
        return results_;
    }
    fs::path run_dir(std::uint64_t seed) const { return work_ / ("quickstart-seed" + std::to_string(seed)); }

private:
    SeedResults run_seed(std::uint64_t seed) {
        const ProgressFn log = logger("seed " + std::to_string(seed));
        const ExperimentConfig cfg = quickstart_config(config_, seed, work_);
        const fs::path run = run_dir(seed);
        fs::remove_all(run);
        echo_config(run, cfg);
        const CorpusSplits corpus = generate_corpus(cfg);
        write_corpus(run, cfg, corpus);
        const CorpusSplits annotated = annotate_run(run, cfg);
        const AudioCatalog catalog = make_catalog(cfg, annotated);
        Foundation f = run_foundation(run, cfg, log);
        const InstructionSets sets = build_instruction_sets(cfg, annotated, f, {Task::SLOT, Task::AST});
        write_instruction_sets(run, cfg, sets);
        const EvalSplits splits = eval_splits(sets, annotated.manifest);
        const DataBundle data = make_bundle(cfg, sets, catalog, {Task::SLOT, Task::AST});
        log("train " + std::to_string(data.train.at(Task::SLOT).size()) + " SLOT samples, eval " +
            std::to_string(splits.id.size()) + " ID / " + std::to_string(splits.ood.size()) + " OOD");

        SeedResults r;
        auto train = [&](const std::string& name) {
            const double c0 = cpu_seconds();
            const StrategyArtifacts a = train_strategy_run(run, cfg, name, f, data, log);
            const double cpu = cpu_seconds() - c0;
            std::string why;
            if (!never_trained_unchanged(a.result, why)) {
                r.freezing_ok = false;
                log(name + ": " + why);
            }
            const json e = evaluate_strategy_run(run, cfg, name, splits, catalog);
            log(name + ": train cpu " + fmt("%.0fs", cpu) + ", final eval loss " + fmt("%.5f", a.result.final_eval_loss) +
                ", ID F1 " + fmt("%.4f", e.at("id").at("f1").get<double>()) + ", OOD F1 " +
                fmt("%.4f", e.at("ood").at("f1").get<double>()));
            return std::make_tuple(a.result.final_eval_loss, e, cpu);
        };
        {
            const auto [loss, e, cpu] = train("single");
            r.single_loss = loss;
            r.single_cpu = cpu;
            r.single_f1 = e.at("id").at("f1").get<double>();
            r.single_ood_f1 = e.at("ood").at("f1").get<double>();
        }
        r.frozen_f1 = std::get<1>(train(kFrozen)).at("id").at("f1").get<double>();
        r.c_loss = std::get<0>(train("C"));
        r.mixed_ood_f1 = std::get<1>(train(kMixed)).at("ood").at("f1").get<double>();
        write_report(run);

        // Baselines share the text NLU.
        BaselineSetup setup;
        setup.foundation = &f;
        setup.model = cfg.model;
        setup.data = data;
        setup.train = strategy_options(cfg, log);
        setup.seed = cfg.seed;
        setup.max_new = cfg.max_new;
        TextBaseline text = run_text_baseline(setup);
        r.text_f1 = text.eval.report.f1;
        CascadeBaseline cascade = run_cascade(setup, text);
        r.cascade_f1 = cascade.run.eval.report.f1;
        r.cascade_wer = cascade.run.wer;
        SpeechLlmBaseline speech = run_speechllm_baseline(setup, text);
        r.speech_f1 = speech.eval.report.f1;

        AudioSettings clean = cfg.audio;
        clean.noise_sigma = 0;
        const AudioCatalog clean_catalog = catalog.with_settings(clean);
        BaselineSetup clean_setup = setup;
        clean_setup.data.catalog = &clean_catalog;
        CascadeBaseline clean_cascade = run_cascade(clean_setup, text);
        r.noiseless_cascade_f1 = clean_cascade.run.eval.report.f1;
        r.noiseless_wer = clean_cascade.run.wer;
        log("baselines: text F1 " + fmt("%.4f", r.text_f1) + ", cascade F1 " + fmt("%.4f", r.cascade_f1) + " (WER " +
            fmt("%.4f", r.cascade_wer) + "), frozen speechLLM F1 " + fmt("%.4f", r.speech_f1) +
            ", noiseless cascade F1 " + fmt("%.4f", r.noiseless_cascade_f1) + " (WER " + fmt("%.4f", r.noiseless_wer) + ")");
        return r;
    }

    fs::path config_;
    fs::path work_;
    std::vector<SeedResults> results_;
};

template <typename F>
std::vector<double> collect(const std::vector<SeedResults>& rs, F f) {
    std::vector<double> v;
    for (const SeedResults& r : rs) v.push_back(f(r));
    return v;
}

Outcome c6_learnability(Quickstart& q) {
    const auto& rs = q.results();
    const auto f1 = collect(rs, [](const SeedResults& r) { return r.single_f1; });
    const auto frozen = collect(rs, [](const SeedResults& r) { return r.frozen_f1; });
    const auto cpu = collect(rs, [](const SeedResults& r) { return r.single_cpu; });
    const double worst_cpu = *std::max_element(cpu.begin(), cpu.end());
    Outcome o;
    o.pass = median(f1) >= kSingleF1 && worst_cpu <= kSingleCpuSeconds && median(frozen) < median(f1);
    o.detail = "SINGLE F1 median " + fmt("%.4f", median(f1)) + " " + list(f1) + " (need >= 0.80), train CPU " +
               list(cpu, "%.0fs") + " (limit 900s); frozen-LM F1 median " + fmt("%.4f", median(frozen)) + " " +
               list(frozen);
    return o;
}

Outcome c7_multistage(Quickstart& q) {
    const auto& rs = q.results();
    const auto single = collect(rs, [](const SeedResults& r) { return r.single_loss; });
    const auto c = collect(rs, [](const SeedResults& r) { return r.c_loss; });
    const fs::path report = q.run_dir(kSeeds.front()) / "report";
    bool overlay = false;
    if (fs::exists(report / "report.json") && fs::exists(report / "curves.png")) {
        const json j = json::parse(read_file(report / "report.json"));
        if (j.contains("overlay")) {
            const auto s = j.at("overlay").at("series");
            overlay = std::find(s.begin(), s.end(), "single") != s.end() && std::find(s.begin(), s.end(), "C") != s.end();
        }
    }
    Outcome o;
    o.pass = median(c) <= median(single) && overlay;
    o.detail = "final eval loss median C " + fmt("%.5f", median(c)) + " " + list(c, "%.5f") + " vs SINGLE " +
               fmt("%.5f", median(single)) + " " + list(single, "%.5f") + "; overlay " +
               (overlay ? (report / "curves.png").string() : std::string("missing"));
    return o;
}

Outcome c8_baselines(Quickstart& q) {
    const auto& rs = q.results();
    const double text = median(collect(rs, [](const SeedResults& r) { return r.text_f1; }));
    const double cascade = median(collect(rs, [](const SeedResults& r) { return r.cascade_f1; }));
    const double speech = median(collect(rs, [](const SeedResults& r) { return r.speech_f1; }));
    const double clean = median(collect(rs, [](const SeedResults& r) { return r.noiseless_cascade_f1; }));
    const double wer = median(collect(rs, [](const SeedResults& r) { return r.cascade_wer; }));
    Outcome o;
    o.pass = text >= cascade && cascade >= speech && text - clean <= kNoiselessCascadeGap;
    o.detail = "median F1 text " + fmt("%.4f", text) + " >= cascade " + fmt("%.4f", cascade) + " (WER " +
               fmt("%.4f", wer) + ") >= frozen speechLLM " + fmt("%.4f", speech) + "; noiseless cascade " +
               fmt("%.4f", clean) + " (gap " + fmt("%.4f", text - clean) + ", limit 0.05)";
    return o;
}

Outcome c9_multitask(Quickstart& q) {
    const auto& rs = q.results();
    const auto mixed = collect(rs, [](const SeedResults& r) { return r.mixed_ood_f1; });
    const auto slot = collect(rs, [](const SeedResults& r) { return r.single_ood_f1; });
    Outcome o;
    o.pass = median(mixed) >= median(slot);
    o.detail = "OOD F1 median SLOT+AST " + fmt("%.4f", median(mixed)) + " " + list(mixed) + " vs SLOT-only " +
               fmt("%.4f", median(slot)) + " " + list(slot);
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"slotllm acceptance suite"};
    std::string only;
    fs::path work = "acceptance-work";
    fs::path config = g_source_dir / "configs" / "quickstart.yaml";
    app.add_option("--only", only, "comma-separated criterion numbers (default: all)");
    app.add_option("--workdir", work, "scratch directory (the foundation cache inside it is reused)");
    app.add_option("--config", config, "quickstart config for criteria 6-9")->check(CLI::ExistingFile);
    CLI11_PARSE(app, argc, argv);

    std::set<int> selected;
    for (int i = 1; i <= 12; ++i) selected.insert(i);
    if (!only.empty()) {
        selected.clear();
        std::stringstream ss(only);
        for (std::string tok; std::getline(ss, tok, ',');) selected.insert(std::stoi(tok));
    }
    fs::create_directories(work);
    Quickstart quickstart(config, work);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"adapter parameter counts at d_enc=512, d_llm=2048", c1_param_counts},
        {"scorer equals exhaustive optimal assignment", c2_scorer_oracle},
        {"LoRA no-op at injection and merge equivalence", c3_lora},
        {"composite gradient check", c4_gradcheck},
        {"freezing contract across preset stages", [&] { return c5_freezing(work); }},
        {"SINGLE learnability within budget; frozen LM lower", [&] { return c6_learnability(quickstart); }},
        {"multistage C eval loss <= SINGLE at equal budget", [&] { return c7_multistage(quickstart); }},
        {"baseline ordering text >= cascade >= frozen speechLLM", [&] { return c8_baselines(quickstart); }},
        {"SLOT+AST OOD F1 >= SLOT-only", [&] { return c9_multitask(quickstart); }},
        {"instruction builder distributions", c10_builder},
        {"learning-rate schedule and clipping", c11_schedule},
        {"bitwise-reproducible run", [&] { return c12_determinism(work); }},
    };

    int failures = 0;
    std::vector<std::string> lines;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.count(id)) continue;
        std::fprintf(stderr, "criterion %d: %s\n", id, criteria[i].first.c_str());
        const double t0 = wall_seconds();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        char head[160];
        std::snprintf(head, sizeof head, "[%s] %2d %s (%.1fs): ", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                      wall_seconds() - t0);
        lines.push_back(head + o.detail);
        std::printf("%s\n", lines.back().c_str());
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    std::printf("\n%zu criteria run, %d failed\n", lines.size(), failures);
    return failures == 0 ? 0 : 1;
}
