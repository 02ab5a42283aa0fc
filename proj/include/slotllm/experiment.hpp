// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Declarative experiment configuration and the pipeline stages that turn it
// into a run directory:
//
//   <run>/config.json                resolved config + hash (echoed into every stage dir)
//   <run>/corpus/                    {train,eval,ood}.jsonl, manifest.json
//   <run>/annotations/               fixtures/, {train,eval,ood}.jsonl, failures.json
//   <run>/instructions/              <task>_<split>.jsonl, templates.json
//   <run>/strategies/<name>/         curve.csv, stages.json, model.ckpt, eval.json, outputs.jsonl
//   <run>/baselines/<which>/         eval.json, outputs.jsonl
//   <run>/report/                    tables.txt, report.json, curves.csv, curves.png
//   <run>/DONE | <run>/FAILED

#pragma once

#include "slotllm/annotator.hpp"
#include "slotllm/baselines.hpp"
#include "slotllm/evaluation.hpp"
#include "slotllm/foundation.hpp"
#include "slotllm/training.hpp"

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace slotllm::inline SLOTLLM_ABI {

/// Invalid configuration; what() lists every offending key.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

struct CorpusSection {
    int train_conversations = 330;
    int eval_conversations = 40;
    /// Drawn from the shifted label pool (ID/OOD split source).
    int ood_conversations = 60;
    std::uint64_t grammar_seed = 7;
    CorpusConfig grammar;
};

struct InstructionSection {
    InstructionBuildConfig build;
    /// Token budget of LM continuations for CONT samples.
    int cont_max_new = 24;
};

struct ExperimentConfig {
    std::string name = "experiment";
    std::uint64_t seed = 1;
    CorpusSection corpus;
    AudioSettings audio;
    ClientConfig annotation;
    InstructionSection instructions;
    /// Derived widths (d_audio, d_enc, d_llm, vocab, frame rate) are filled by resolve().
    ModelConfig model;
    FoundationConfig foundation;
    /// Empty: "<run>/foundation".
    std::string foundation_cache;
    LoraSpec lora;
    TrainConfig train;
    std::vector<StrategyPlan> strategies;
    /// Optional per-task training sample counts (0 keeps every sample).
    std::map<Task, int> mix;
    std::vector<std::string> baselines;
    int max_new = 96;

    ExperimentConfig();

    /// Fills derived fields and validates; throws ConfigError.
    void resolve();
    json to_json() const;
    /// Overlays `j` on the defaults. Unknown keys, type mismatches and range
    /// violations are all collected into one ConfigError.
    static ExperimentConfig from_json(const json& j);
    std::string hash() const;

    /// Tasks any configured strategy trains on.
    std::set<Task> required_tasks() const;
    const StrategyPlan& strategy(const std::string& name) const;
};

/// YAML (a JSON document is valid YAML) -> ExperimentConfig.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
json yaml_file_to_json(const std::filesystem::path& path);
/// Keys, types and defaults of every config field.
json config_schema();

/// Stage JSON, as used in custom strategy lists.
json stage_to_json(const Stage& s);
Stage stage_from_json(const json& j, const TrainConfig& base);

// ---------------------------------------------------------------------------
// Run directory

inline constexpr const char* kDoneMarker = "DONE";
inline constexpr const char* kFailedMarker = "FAILED";

/// Writes <dir>/config.json, or checks that an existing one has the same hash.
void echo_config(const std::filesystem::path& dir, const ExperimentConfig& cfg);
/// Config hash recorded in <dir>/config.json; throws when absent.
std::string recorded_config_hash(const std::filesystem::path& dir);

struct CorpusSplits {
    std::vector<Conversation> train, eval, ood;
    LabelManifest manifest;
};

CorpusSplits generate_corpus(const ExperimentConfig& cfg);
void write_corpus(const std::filesystem::path& run, const ExperimentConfig& cfg, const CorpusSplits& c);
CorpusSplits read_corpus(const std::filesystem::path& dir);

/// Annotates <run>/corpus into <run>/annotations. In fixture mode, missing
/// fixtures are first rendered from the generator's ground truth.
/// Conversations that fail are dropped and listed in failures.json.
CorpusSplits annotate_run(const std::filesystem::path& run, const ExperimentConfig& cfg,
                          HttpTransport transport = {});

/// Audio catalog covering every turn of the splits.
AudioCatalog make_catalog(const ExperimentConfig& cfg, const CorpusSplits& c);

Foundation run_foundation(const std::filesystem::path& run, const ExperimentConfig& cfg, const ProgressFn& progress = {});

/// Instruction sets keyed by (task, split) with split in {train, eval, ood}.
using InstructionSets = std::map<std::pair<Task, std::string>, std::vector<InstructionSample>>;

InstructionSets build_instruction_sets(const ExperimentConfig& cfg, const CorpusSplits& annotated, Foundation& f,
                                       const std::set<Task>& tasks);
void write_instruction_sets(const std::filesystem::path& run, const ExperimentConfig& cfg, const InstructionSets& s);
InstructionSets read_instruction_sets(const std::filesystem::path& run);

/// Training bundle (mix applied) plus SLOT/AST/CONT eval sets.
DataBundle make_bundle(const ExperimentConfig& cfg, const InstructionSets& s, const AudioCatalog& catalog,
                       const std::set<Task>& tasks);

struct EvalSplits {
    std::vector<InstructionSample> id;
    std::vector<InstructionSample> ood;
    SplitResult split;
};

/// ID = the seen-pool eval set; OOD = samples of the shifted-pool set with an unseen gold label.
EvalSplits eval_splits(const InstructionSets& s, const LabelManifest& manifest);

StrategyOptions strategy_options(const ExperimentConfig& cfg, const ProgressFn& progress);

struct StrategyArtifacts {
    StrategyResult result;
    std::filesystem::path dir;
};

/// Trains one configured strategy from the foundations and writes its artifacts.
StrategyArtifacts train_strategy_run(const std::filesystem::path& run, const ExperimentConfig& cfg,
                                     const std::string& strategy, Foundation& f, const DataBundle& data,
                                     const ProgressFn& progress = {});

/// Combined per-strategy curve: stage,step,train_loss,eval_loss,lr with global steps.
std::string strategy_curve_csv(const StrategyResult& r);

/// Evaluates a saved strategy model on the ID and OOD splits; writes eval.json and outputs.jsonl.
json evaluate_strategy_run(const std::filesystem::path& run, const ExperimentConfig& cfg, const std::string& strategy,
                           const EvalSplits& splits, const AudioCatalog& catalog);

/// Runs one baseline (text | cascade | speechllm); cascade and speechllm also
/// train the text baseline they depend on.
json run_baseline(const std::filesystem::path& run, const ExperimentConfig& cfg, const std::string& which,
                  Foundation& f, const DataBundle& data, const EvalSplits& splits, const ProgressFn& progress = {});

/// Tables and curves from whatever artifacts exist. Throws when none do,
/// listing the expected files; refuses artifacts with a different config hash.
json write_report(const std::filesystem::path& run);

/// Full pipeline; on failure leaves partial outputs and a FAILED marker, then rethrows.
void run_experiment(const std::filesystem::path& run, const ExperimentConfig& cfg, const ProgressFn& progress = {});

void write_jsonl_outputs(const std::filesystem::path& path, const std::vector<InstructionSample>& samples,
                         const std::vector<std::string>& outputs);

}  // namespace slotllm
