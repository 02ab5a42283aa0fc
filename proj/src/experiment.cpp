// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotllm/experiment.hpp"

#include <cstdio>

namespace slotllm::inline SLOTLLM_ABI {

namespace fs = std::filesystem;

namespace {

const char* kSplits[] = {"train", "eval", "ood"};

std::vector<Conversation>& split_ref(CorpusSplits& c, const std::string& s) {
    if (s == "train") return c.train;
    if (s == "eval") return c.eval;
    return c.ood;
}

const std::vector<Conversation>& split_ref(const CorpusSplits& c, const std::string& s) {
    return split_ref(const_cast<CorpusSplits&>(c), s);
}

void say(const ProgressFn& p, const std::string& m) {
    if (p) p(m);
}

std::vector<Conversation> strip_annotations(std::vector<Conversation> convs) {
    for (Conversation& c : convs) c.annotations.reset();
    return convs;
}

fs::path resolve_fixture_dir(const fs::path& run, const ClientConfig& c) {
    return c.fixture_dir.is_absolute() ? c.fixture_dir : run / "annotations" / c.fixture_dir;
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

TextBaseline text_baseline_for(const fs::path& run, const ExperimentConfig& cfg, const BaselineSetup& setup,
                               const EvalSplits& splits, const ProgressFn& progress);

}  // namespace

// ---------------------------------------------------------------------------
// Config echo

void echo_config(const fs::path& dir, const ExperimentConfig& cfg) {
    fs::create_directories(dir);
    const fs::path p = dir / "config.json";
    const std::string h = cfg.hash();
    if (fs::exists(p)) {
        const std::string have = recorded_config_hash(dir);
        if (have != h) {
            throw std::runtime_error(dir.string() + " holds artifacts of config " + have.substr(0, 12) +
                                     ", not " + h.substr(0, 12) + "; use a fresh directory");
        }
        return;
    }
    write_json(p, {{"config_hash", h}, {"config", cfg.to_json()}, {"resolved_model", cfg.model.to_json()}});
}

std::string recorded_config_hash(const fs::path& dir) {
    const fs::path p = dir / "config.json";
    if (!fs::exists(p)) throw std::runtime_error("missing " + p.string());
    return json::parse(read_file(p)).at("config_hash").get<std::string>();
}

// ---------------------------------------------------------------------------
// Corpus and annotation

CorpusSplits generate_corpus(const ExperimentConfig& cfg) {
    CorpusSplits out;
    CorpusConfig g = cfg.corpus.grammar;
    const std::uint64_t seed = cfg.corpus.grammar_seed;
    g.pool = LabelPool::seen;
    g.stream = 1;
    g.id_prefix = "train";
    out.train = gen_toy_corpus(cfg.corpus.train_conversations, seed, g);
    g.stream = 2;
    g.id_prefix = "eval";
    out.eval = gen_toy_corpus(cfg.corpus.eval_conversations, seed, g);
    if (cfg.corpus.ood_conversations > 0) {
        g.pool = LabelPool::shifted;
        g.stream = 3;
        g.id_prefix = "ood";
        out.ood = gen_toy_corpus(cfg.corpus.ood_conversations, seed, g);
    }
    out.manifest = make_manifest(seed, cfg.corpus.grammar);
    return out;
}

void write_corpus(const fs::path& run, const ExperimentConfig& cfg, const CorpusSplits& c) {
    const fs::path dir = run / "corpus";
    echo_config(dir, cfg);
    save_conversations(dir / "train.jsonl", c.train);
    save_conversations(dir / "eval.jsonl", c.eval);
    save_conversations(dir / "ood.jsonl", c.ood);
    write_json(dir / "manifest.json", to_json(c.manifest));
}

CorpusSplits read_corpus(const fs::path& dir) {
    CorpusSplits c;
    for (const char* s : kSplits) {
        const fs::path p = dir / (std::string(s) + ".jsonl");
        if (!fs::exists(p)) throw std::runtime_error("missing " + p.string());
        split_ref(c, s) = load_conversations(p);
    }
    const fs::path m = dir / "manifest.json";
    if (fs::exists(m)) {
        c.manifest = manifest_from_json(json::parse(read_file(m)));
    } else if (fs::exists(dir.parent_path() / "corpus" / "manifest.json")) {
        c.manifest = manifest_from_json(json::parse(read_file(dir.parent_path() / "corpus" / "manifest.json")));
    }
    return c;
}

CorpusSplits annotate_run(const fs::path& run, const ExperimentConfig& cfg, HttpTransport transport) {
    const CorpusSplits gold = read_corpus(run / "corpus");
    const fs::path dir = run / "annotations";
    echo_config(dir, cfg);
    ClientConfig cc = cfg.annotation;
    cc.fixture_dir = resolve_fixture_dir(run, cfg.annotation);
    if (cc.mode == ClientMode::fixture) {
        fs::create_directories(cc.fixture_dir);
        for (const char* s : kSplits) {
            for (const Conversation& conv : split_ref(gold, s)) {
                const AnnotationPrompt prompt = build_annotation_prompt(conv);
                if (!fs::exists(cc.fixture_dir / (prompt_hash(prompt) + ".json"))) {
                    write_gold_fixtures(cc.fixture_dir, {conv});
                }
            }
        }
    }
    auto client = transport ? make_client(cc, std::move(transport)) : make_client(cc);
    const RetryPolicy retry = RetryPolicy::from(cc);
    CorpusSplits out;
    out.manifest = gold.manifest;
    json failures = json::array();
    for (const char* s : kSplits) {
        BatchResult r = annotate_batch(strip_annotations(split_ref(gold, s)), *client, retry);
        for (const BatchFailure& f : r.failures) {
            failures.push_back({{"split", s}, {"conversation_id", f.conversation_id}, {"message", f.message}});
        }
        save_conversations(dir / (std::string(s) + ".jsonl"), r.annotated);
        split_ref(out, s) = std::move(r.annotated);
    }
    write_json(dir / "failures.json", failures);
    write_json(dir / "manifest.json", to_json(out.manifest));
    if (out.train.empty()) throw std::runtime_error("annotation produced no training conversations; see failures.json");
    return out;
}

AudioCatalog make_catalog(const ExperimentConfig& cfg, const CorpusSplits& c) {
    AudioCatalog cat(cfg.audio);
    register_turns(cat, c.train);
    register_turns(cat, c.eval);
    register_turns(cat, c.ood);
    return cat;
}

Foundation run_foundation(const fs::path& run, const ExperimentConfig& cfg, const ProgressFn& progress) {
    const fs::path cache = cfg.foundation_cache.empty() ? run / "foundation" : fs::path(cfg.foundation_cache);
    Foundation f = load_or_pretrain_foundation(cfg.model, cfg.audio, cfg.corpus.grammar_seed, cfg.foundation, cache, progress);
    fs::create_directories(run / "foundation");
    write_json(run / "foundation" / "info.json", f.info);
    return f;
}

// ---------------------------------------------------------------------------
// Instruction sets

InstructionSets build_instruction_sets(const ExperimentConfig& cfg, const CorpusSplits& annotated, Foundation& f,
                                       const std::set<Task>& tasks) {
    InstructionSets out;
    const auto& inventory = label_inventory();
    std::uint64_t k = 0;
    for (const char* s : kSplits) {
        InstructionBuildConfig ic = cfg.instructions.build;
        ic.seed = mix_seed(cfg.instructions.build.seed, ++k);
        out[{Task::SLOT, s}] = build_slot_samples(split_ref(annotated, s), ic, inventory);
    }
    if (tasks.count(Task::AST)) {
        out[{Task::AST, "train"}] = build_ast_samples(annotated.train);
        out[{Task::AST, "eval"}] = build_ast_samples(annotated.eval);
    }
    if (tasks.count(Task::CONT)) {
        CompositeModel lm = assemble_model(cfg.model, f, cfg.foundation.seed);
        const ContinuationFn cont = [&lm](const std::string& transcript, int max_new) {
            return lm.generate_text("", transcript, max_new, true);
        };
        out[{Task::CONT, "train"}] = build_continuation_samples(annotated.train, cont, cfg.instructions.cont_max_new).samples;
        out[{Task::CONT, "eval"}] = build_continuation_samples(annotated.eval, cont, cfg.instructions.cont_max_new).samples;
    }
    return out;
}

void write_instruction_sets(const fs::path& run, const ExperimentConfig& cfg, const InstructionSets& s) {
    const fs::path dir = run / "instructions";
    echo_config(dir, cfg);
    for (const auto& [key, samples] : s) save_samples(dir / (to_string(key.first) + "_" + key.second + ".jsonl"), samples);
    write_json(dir / "templates.json", template_registry());
}

InstructionSets read_instruction_sets(const fs::path& run) {
    const fs::path dir = run / "instructions";
    if (!fs::is_directory(dir)) throw std::runtime_error("missing " + dir.string() + " (run build-instructions first)");
    InstructionSets out;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".jsonl") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& p : files) {
        const std::string stem = p.stem().string();
        const auto us = stem.find('_');
        if (us == std::string::npos) continue;
        out[{task_from_string(stem.substr(0, us)), stem.substr(us + 1)}] = load_samples(p);
    }
    if (!out.count({Task::SLOT, "train"})) throw std::runtime_error("missing " + (dir / "SLOT_train.jsonl").string());
    return out;
}

DataBundle make_bundle(const ExperimentConfig& cfg, const InstructionSets& s, const AudioCatalog& catalog,
                       const std::set<Task>& tasks) {
    DataBundle b;
    b.catalog = &catalog;
    for (Task t : tasks) {
        const auto tr = s.find({t, "train"});
        const auto ev = s.find({t, "eval"});
        if (tr == s.end() || ev == s.end()) {
            throw std::runtime_error("no " + to_string(t) + " instruction samples (rebuild instructions with this config)");
        }
        const auto m = cfg.mix.find(t);
        if (m != cfg.mix.end() && m->second > 0) {
            MixSpec spec;
            spec.counts[t] = m->second;
            b.train[t] = mix_multitask({{t, tr->second}}, spec, mix_seed(cfg.seed, static_cast<std::uint64_t>(t))).samples;
        } else {
            b.train[t] = tr->second;
        }
        b.eval[t] = ev->second;
    }
    return b;
}

EvalSplits eval_splits(const InstructionSets& s, const LabelManifest& manifest) {
    EvalSplits e;
    e.id = s.at({Task::SLOT, "eval"});
    const auto ood = s.find({Task::SLOT, "ood"});
    if (ood != s.end()) {
        e.split = split_id_ood(ood->second, {manifest.seen_labels.begin(), manifest.seen_labels.end()});
        e.ood = e.split.ood_samples;
    }
    return e;
}

StrategyOptions strategy_options(const ExperimentConfig& cfg, const ProgressFn& progress) {
    StrategyOptions o;
    o.train = cfg.train;
    o.lora = cfg.lora;
    o.total_steps = cfg.train.steps;
    o.progress = progress;
    return o;
}

// ---------------------------------------------------------------------------
// Strategies

std::string strategy_curve_csv(const StrategyResult& r) {
    std::string out = "stage,step,train_loss,eval_loss,lr\n";
    char buf[256];
    for (const StageRecord& s : r.stages) {
        // The stage's starting point; no training loss exists yet.
        std::snprintf(buf, sizeof buf, "%s,%ld,nan,%.9g,0\n", s.name.c_str(), s.step_offset, s.result.initial_eval_loss);
        out += buf;
        for (const CurvePoint& p : s.result.curve.points) {
            std::snprintf(buf, sizeof buf, "%s,%ld,%.9g,%.9g,%.9g\n", s.name.c_str(), p.step + s.step_offset,
                          p.train_loss, p.eval_loss, p.lr);
            out += buf;
        }
    }
    return out;
}

namespace {

json hashes_json(const std::map<Module, std::string>& m) {
    json j = json::object();
    for (const auto& [mod, h] : m) j[to_string(mod)] = h;
    return j;
}

json stages_json(const StrategyResult& r) {
    json stages = json::array();
    for (const StageRecord& s : r.stages) {
        std::vector<std::string> trainable;
        for (Module m : s.trainable) trainable.push_back(to_string(m));
        stages.push_back({{"name", s.name},
                          {"step_offset", s.step_offset},
                          {"steps", s.result.steps},
                          {"initial_eval_loss", s.result.initial_eval_loss},
                          {"best_eval_loss", s.result.best_eval_loss},
                          {"best_step", s.result.best_step},
                          {"warnings", s.result.warnings},
                          {"trainable", trainable},
                          {"freezing_contract", freezing_contract_holds(s)},
                          {"base_hash_before", hashes_json(s.base_hash_before)},
                          {"base_hash_after", hashes_json(s.base_hash_after)},
                          {"base_hash_handoff", hashes_json(s.base_hash_handoff)},
                          {"lora_hash_before", hashes_json(s.lora_hash_before)},
                          {"lora_hash_after", hashes_json(s.lora_hash_after)}});
    }
    return {{"final_eval_loss", r.final_eval_loss}, {"stages", stages}};
}

json eval_json(const std::string& system, const std::string& kind, const std::string& config_hash, const EvalRun& id,
               const std::optional<EvalRun>& ood, const EvalSplits& splits) {
    json j = {{"system", system}, {"kind", kind}, {"config_hash", config_hash}, {"id", id.report.to_json()}};
    if (ood) {
        j["ood"] = ood->report.to_json();
        j["ood_overlap_fraction"] = splits.split.overlap_fraction;
    }
    return j;
}

}  // namespace

void write_jsonl_outputs(const fs::path& path, const std::vector<InstructionSample>& samples,
                         const std::vector<std::string>& outputs) {
    std::vector<json> rows;
    for (std::size_t i = 0; i < samples.size() && i < outputs.size(); ++i) {
        rows.push_back({{"audio_ref", samples[i].audio_ref},
                        {"instruction", samples[i].instruction},
                        {"gold", samples[i].response},
                        {"prediction", outputs[i]}});
    }
    write_jsonl(path, rows);
}

StrategyArtifacts train_strategy_run(const fs::path& run, const ExperimentConfig& cfg, const std::string& strategy,
                                     Foundation& f, const DataBundle& data, const ProgressFn& progress) {
    const StrategyPlan& plan = cfg.strategy(strategy);
    const fs::path dir = run / "strategies" / strategy;
    fs::remove_all(dir);
    echo_config(dir, cfg);
    CompositeModel model = assemble_model(cfg.model, f, cfg.seed);
    StrategyOptions opts = strategy_options(cfg, [&](const std::string& m) { say(progress, strategy + "/" + m); });
    opts.reset_model = [&](CompositeModel& m) { m = assemble_model(cfg.model, f, cfg.seed); };
    StrategyResult r = run_strategy(model, plan, data, opts, cfg.seed);
    write_file_atomic(dir / "curve.csv", strategy_curve_csv(r));
    write_json(dir / "stages.json", stages_json(r));
    model.save(dir / "model.ckpt");
    return {std::move(r), dir};
}

json evaluate_strategy_run(const fs::path& run, const ExperimentConfig& cfg, const std::string& strategy,
                           const EvalSplits& splits, const AudioCatalog& catalog) {
    const fs::path dir = run / "strategies" / strategy;
    echo_config(dir, cfg);
    CompositeModel model = CompositeModel::load(dir / "model.ckpt");
    auto gen = [&](const InstructionSample& s) { return model.generate(s, catalog, SpanMode::audio, cfg.max_new); };
    EvalRun id = evaluate_model(splits.id, gen);
    write_jsonl_outputs(dir / "outputs_id.jsonl", splits.id, id.outputs);
    std::optional<EvalRun> ood;
    if (!splits.ood.empty()) {
        ood = evaluate_model(splits.ood, gen);
        write_jsonl_outputs(dir / "outputs_ood.jsonl", splits.ood, ood->outputs);
    }
    json j = eval_json(strategy, "strategy", cfg.hash(), id, ood, splits);
    write_json(dir / "eval.json", j);
    return j;
}

// ---------------------------------------------------------------------------
// Baselines

namespace {

BaselineSetup baseline_setup(const ExperimentConfig& cfg, Foundation& f, const DataBundle& data, const ProgressFn& p) {
    BaselineSetup s;
    s.foundation = &f;
    s.model = cfg.model;
    s.data = data;
    s.train = strategy_options(cfg, p);
    s.seed = cfg.seed;
    s.max_new = cfg.max_new;
    return s;
}

TextBaseline text_baseline_for(const fs::path& run, const ExperimentConfig& cfg, const BaselineSetup& setup,
                               const EvalSplits& splits, const ProgressFn& progress) {
    const fs::path dir = run / "baselines" / "text";
    const fs::path ckpt = dir / "nlu.ckpt";
    if (fs::exists(ckpt) && fs::exists(dir / "config.json") && recorded_config_hash(dir) == cfg.hash()) {
        say(progress, "text baseline: reusing " + ckpt.string());
        CompositeModel m = CompositeModel::load(ckpt);
        std::string h = m.base_hash(Module::lm);
        return {std::move(m), {}, {}, std::move(h)};
    }
    fs::remove_all(dir);
    echo_config(dir, cfg);
    TextBaseline tb = run_text_baseline(setup);
    tb.model.save(ckpt);
    write_file_atomic(dir / "curve.csv", strategy_curve_csv(tb.training));
    write_jsonl_outputs(dir / "outputs_id.jsonl", splits.id, tb.eval.outputs);
    std::optional<EvalRun> ood;
    if (!splits.ood.empty()) {
        ood = evaluate_text(tb.model, splits.ood, *setup.data.catalog, setup.max_new);
        write_jsonl_outputs(dir / "outputs_ood.jsonl", splits.ood, ood->outputs);
    }
    json j = eval_json("text", "baseline", cfg.hash(), tb.eval, ood, splits);
    j["nlu_hash"] = tb.nlu_hash;
    write_json(dir / "eval.json", j);
    return tb;
}

}  // namespace

json run_baseline(const fs::path& run, const ExperimentConfig& cfg, const std::string& which, Foundation& f,
                  const DataBundle& data, const EvalSplits& splits, const ProgressFn& progress) {
    if (which != "text" && which != "cascade" && which != "speechllm") {
        throw std::invalid_argument("unknown baseline '" + which + "' (expected text|cascade|speechllm)");
    }
    const ProgressFn p = [&](const std::string& m) { say(progress, which + "/" + m); };
    const BaselineSetup setup = baseline_setup(cfg, f, data, p);
    TextBaseline text = text_baseline_for(run, cfg, setup, splits, p);
    const fs::path dir = run / "baselines" / which;
    if (which == "text") return json::parse(read_file(dir / "eval.json"));

    fs::remove_all(dir);
    echo_config(dir, cfg);
    json j;
    if (which == "cascade") {
        CascadeBaseline cb = run_cascade(setup, text);
        write_file_atomic(dir / "curve.csv", strategy_curve_csv(cb.system.asr_training));
        write_jsonl_outputs(dir / "outputs_id.jsonl", splits.id, cb.run.eval.outputs);
        std::optional<EvalRun> ood;
        if (!splits.ood.empty()) {
            CascadeRun r = evaluate_cascade(*cb.system.nlu, cb.system.transcriber(), splits.ood, *data.catalog, cfg.max_new);
            write_jsonl_outputs(dir / "outputs_ood.jsonl", splits.ood, r.eval.outputs);
            ood = std::move(r.eval);
        }
        j = eval_json("cascade", "baseline", cfg.hash(), cb.run.eval, ood, splits);
        j["asr_wer"] = cb.run.wer;
        j["nlu_hash"] = cb.system.nlu->base_hash(Module::lm);
    } else {
        SpeechLlmBaseline sb = run_speechllm_baseline(setup, text, false);
        write_file_atomic(dir / "curve.csv", strategy_curve_csv(sb.training));
        write_jsonl_outputs(dir / "outputs_id.jsonl", splits.id, sb.eval.outputs);
        std::optional<EvalRun> ood;
        if (!splits.ood.empty()) {
            ood = evaluate_model(splits.ood, [&](const InstructionSample& s) {
                return sb.model.generate(s, *data.catalog, SpanMode::audio, cfg.max_new);
            });
            write_jsonl_outputs(dir / "outputs_ood.jsonl", splits.ood, ood->outputs);
        }
        j = eval_json("speechllm", "baseline", cfg.hash(), sb.eval, ood, splits);
        j["frozen_hashes"] = stages_json(sb.training);
    }
    write_json(dir / "eval.json", j);
    return j;
}

// ---------------------------------------------------------------------------
// Full run

void run_experiment(const fs::path& run, const ExperimentConfig& cfg, const ProgressFn& progress) {
    fs::create_directories(run);
    fs::remove(run / kDoneMarker);
    fs::remove(run / kFailedMarker);
    try {
        echo_config(run, cfg);
        say(progress, "gen-corpus");
        write_corpus(run, cfg, generate_corpus(cfg));
        say(progress, "annotate");
        const CorpusSplits annotated = annotate_run(run, cfg);
        const AudioCatalog catalog = make_catalog(cfg, annotated);
        say(progress, "foundation");
        Foundation f = run_foundation(run, cfg, progress);
        say(progress, "build-instructions");
        const std::set<Task> tasks = cfg.required_tasks();
        write_instruction_sets(run, cfg, build_instruction_sets(cfg, annotated, f, tasks));
        const InstructionSets sets = read_instruction_sets(run);
        const DataBundle data = make_bundle(cfg, sets, catalog, tasks);
        const EvalSplits splits = eval_splits(sets, annotated.manifest);
        for (const StrategyPlan& p : cfg.strategies) {
            say(progress, "train " + p.name);
            train_strategy_run(run, cfg, p.name, f, data, progress);
            say(progress, "evaluate " + p.name);
            evaluate_strategy_run(run, cfg, p.name, splits, catalog);
        }
        for (const std::string& b : cfg.baselines) {
            say(progress, "baseline " + b);
            run_baseline(run, cfg, b, f, data, splits, progress);
        }
        say(progress, "report");
        write_report(run);
        write_file_atomic(run / kDoneMarker, cfg.hash() + "\n");
    } catch (const std::exception& e) {
        write_file_atomic(run / kFailedMarker, std::string(e.what()) + "\n");
        throw;
    }
}

}  // namespace slotllm
