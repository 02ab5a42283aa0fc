// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Exit codes: 0 success, 1 invalid input or
// configuration, 2 runtime failure.

#include "slotllm/adapters.hpp"
#include "slotllm/experiment.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdio>
#include <iostream>

using namespace slotllm;
namespace fs = std::filesystem;

namespace {

struct Context {
    fs::path config;
    fs::path run;
    std::string strategy;
    std::string which;
    std::string mode;
    bool quiet = false;
    bool as_json = false;
    int d_enc = 512;
    int d_llm = 2048;
};

ProgressFn progress(const Context& c) {
    if (c.quiet) return {};
    const auto t0 = std::chrono::steady_clock::now();
    return [t0](const std::string& m) {
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::fprintf(stderr, "[%7.1fs] %s\n", s, m.c_str());
    };
}

ExperimentConfig load(const Context& c) {
    ExperimentConfig cfg = load_experiment_config(c.config);
    echo_config(c.run, cfg);
    return cfg;
}

/// Loaded state shared by the stage commands that need trained inputs.
struct Prepared {
    ExperimentConfig cfg;
    CorpusSplits annotated;
    std::unique_ptr<AudioCatalog> catalog;
    InstructionSets sets;
};

Prepared prepare(const Context& c) {
    Prepared p{load(c), read_corpus(c.run / "annotations"), nullptr, {}};
    p.catalog = std::make_unique<AudioCatalog>(make_catalog(p.cfg, p.annotated));
    p.sets = read_instruction_sets(c.run);
    return p;
}

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

int cmd_gen_corpus(const Context& c) {
    const ExperimentConfig cfg = load(c);
    const CorpusSplits s = generate_corpus(cfg);
    write_corpus(c.run, cfg, s);
    std::cout << "wrote " << s.train.size() << "/" << s.eval.size() << "/" << s.ood.size()
              << " train/eval/ood conversations to " << (c.run / "corpus").string() << "\n";
    return 0;
}

int cmd_annotate(const Context& c) {
    ExperimentConfig cfg = load_experiment_config(c.config);
    if (!c.mode.empty()) {
        cfg.annotation.mode = client_mode_from_string(c.mode);
        cfg.resolve();
    }
    echo_config(c.run, cfg);
    const CorpusSplits a = annotate_run(c.run, cfg);
    const json failures = json::parse(read_file(c.run / "annotations" / "failures.json"));
    std::cout << "annotated " << a.train.size() + a.eval.size() + a.ood.size() << " conversations, "
              << failures.size() << " failure(s)\n";
    return 0;
}

int cmd_build_instructions(const Context& c) {
    const ExperimentConfig cfg = load(c);
    const CorpusSplits a = read_corpus(c.run / "annotations");
    Foundation f = run_foundation(c.run, cfg, progress(c));
    const InstructionSets s = build_instruction_sets(cfg, a, f, cfg.required_tasks());
    write_instruction_sets(c.run, cfg, s);
    for (const auto& [key, samples] : s) {
        std::cout << to_string(key.first) << "_" << key.second << ": " << samples.size() << " samples\n";
    }
    return 0;
}

int cmd_count_params(const Context& c) {
    json out = json::object();
    for (AdapterKind kind : {AdapterKind::cnn, AdapterKind::linear, AdapterKind::mlp, AdapterKind::transformer}) {
        AdapterConfig a;
        a.kind = kind;
        a.d_enc = c.d_enc;
        a.d_llm = c.d_llm;
        auto adapter = make_adapter(a, 0, AdapterInit::zeros);
        out[to_string(kind)] = count_params(*adapter);
    }
    if (c.as_json) {
        print_json(out);
    } else {
        for (const auto& [k, v] : out.items()) std::printf("%-12s %12lld\n", k.c_str(), v.get<long long>());
    }
    return 0;
}

std::vector<std::string> selected_strategies(const Context& c, const ExperimentConfig& cfg) {
    if (!c.strategy.empty()) {
        cfg.strategy(c.strategy);
        return {c.strategy};
    }
    std::vector<std::string> out;
    for (const StrategyPlan& p : cfg.strategies) out.push_back(p.name);
    return out;
}

int cmd_train(const Context& c) {
    Prepared p = prepare(c);
    Foundation f = run_foundation(c.run, p.cfg, progress(c));
    const DataBundle data = make_bundle(p.cfg, p.sets, *p.catalog, p.cfg.required_tasks());
    for (const std::string& name : selected_strategies(c, p.cfg)) {
        const StrategyArtifacts a = train_strategy_run(c.run, p.cfg, name, f, data, progress(c));
        std::cout << name << ": final eval loss " << a.result.final_eval_loss << " -> " << a.dir.string() << "\n";
    }
    return 0;
}

int cmd_evaluate(const Context& c) {
    Prepared p = prepare(c);
    const EvalSplits splits = eval_splits(p.sets, p.annotated.manifest);
    std::vector<std::pair<std::string, EvalReport>> rows;
    for (const std::string& name : selected_strategies(c, p.cfg)) {
        const json j = evaluate_strategy_run(c.run, p.cfg, name, splits, *p.catalog);
        EvalReport r;
        r.precision = j.at("id").at("precision");
        r.recall = j.at("id").at("recall");
        r.f1 = j.at("id").at("f1");
        rows.emplace_back(name, r);
    }
    std::cout << format_table(rows);
    return 0;
}

int cmd_baseline(const Context& c) {
    Prepared p = prepare(c);
    Foundation f = run_foundation(c.run, p.cfg, progress(c));
    std::set<Task> tasks = {Task::SLOT};
    if (c.which == "cascade") tasks.insert(Task::AST);
    const DataBundle data = make_bundle(p.cfg, p.sets, *p.catalog, tasks);
    const EvalSplits splits = eval_splits(p.sets, p.annotated.manifest);
    const json j = run_baseline(c.run, p.cfg, c.which, f, data, splits, progress(c));
    EvalReport r;
    r.precision = j.at("id").at("precision");
    r.recall = j.at("id").at("recall");
    r.f1 = j.at("id").at("f1");
    std::cout << format_table({{"baseline:" + c.which, r}});
    if (j.contains("asr_wer")) std::cout << "ASR WER: " << j.at("asr_wer").get<double>() << "\n";
    return 0;
}

int cmd_split(const Context& c) {
    Prepared p = prepare(c);
    const EvalSplits s = eval_splits(p.sets, p.annotated.manifest);
    const fs::path dir = c.run / "split";
    echo_config(dir, p.cfg);
    save_samples(dir / "id.jsonl", s.split.id_samples);
    save_samples(dir / "ood.jsonl", s.split.ood_samples);
    const json j = {{"id_samples", s.split.id_samples.size()},
                    {"ood_samples", s.split.ood_samples.size()},
                    {"overlap_fraction", s.split.overlap_fraction}};
    write_file_atomic(dir / "split.json", j.dump(2) + "\n");
    print_json(j);
    return 0;
}

int cmd_report(const Context& c) {
    const json r = write_report(c.run);
    std::cout << read_file(c.run / "report" / "tables.txt");
    if (r.contains("overlay")) std::cout << "curves: " << (c.run / "report" / "curves.png").string() << "\n";
    return 0;
}

int cmd_run(const Context& c) {
    const ExperimentConfig cfg = load_experiment_config(c.config);
    run_experiment(c.run, cfg, progress(c));
    std::cout << read_file(c.run / "report" / "tables.txt");
    return 0;
}

int cmd_schema(const Context&) {
    print_json(config_schema());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"slotllm: speech-LLM slot filling at desk scale"};
    app.require_subcommand(1);
    Context ctx;
    int (*handler)(const Context&) = nullptr;

    auto add = [&](const char* name, const char* help, int (*fn)(const Context&), bool config, bool run) {
        CLI::App* sub = app.add_subcommand(name, help);
        if (config) sub->add_option("-c,--config", ctx.config, "experiment config (YAML or JSON)")->required()->check(CLI::ExistingFile);
        if (run) sub->add_option("-r,--run,--out", ctx.run, "run directory")->required();
        sub->add_flag("-q,--quiet", ctx.quiet, "suppress progress messages");
        sub->callback([&handler, fn] { handler = fn; });
        return sub;
    };
    add("gen-corpus", "generate the toy corpus into <run>/corpus", cmd_gen_corpus, true, true);
    add("annotate", "annotate <run>/corpus into <run>/annotations (fixture or live client)", cmd_annotate, true, true)
        ->add_option("--mode", ctx.mode, "live | fixture (default: annotation.mode from the config)")
        ->check(CLI::IsMember({"live", "fixture"}));
    add("build-instructions", "build instruction sets into <run>/instructions", cmd_build_instructions, true, true);
    CLI::App* cp = add("count-params", "print adapter parameter counts", cmd_count_params, false, false);
    cp->add_option("--d-enc", ctx.d_enc, "encoder width")->check(CLI::PositiveNumber);
    cp->add_option("--d-llm", ctx.d_llm, "LM width")->check(CLI::PositiveNumber);
    cp->add_flag("--json", ctx.as_json, "print JSON");
    add("train", "train strategies into <run>/strategies", cmd_train, true, true)
        ->add_option("-s,--strategy", ctx.strategy, "strategy name (default: all configured)");
    add("evaluate", "evaluate trained strategies on the ID and OOD splits", cmd_evaluate, true, true)
        ->add_option("-s,--strategy", ctx.strategy, "strategy name (default: all configured)");
    add("baseline", "train and evaluate a baseline", cmd_baseline, true, true)
        ->add_option("-w,--which", ctx.which, "text | cascade | speechllm")
        ->required()
        ->check(CLI::IsMember({"text", "cascade", "speechllm"}));
    add("split", "write the ID/OOD split of the shifted-label eval set", cmd_split, true, true);
    CLI::App* rep = app.add_subcommand("report", "render tables and curves from a run directory");
    rep->add_option("-r,--run", ctx.run, "run directory")->required();
    rep->callback([&] { handler = cmd_report; });
    add("run", "full pipeline: corpus, annotation, instructions, training, evaluation, report", cmd_run, true, true);
    app.add_subcommand("config-schema", "print the config schema")->callback([&] { handler = cmd_schema; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }
    try {
        return handler(ctx);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
