// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Optimizer, learning-rate schedule, single-stage training with best-eval
// checkpoint selection, and multistage strategy execution.

#pragma once

#include "slotllm/model.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace slotllm::inline SLOTLLM_ABI {

struct TrainConfig {
    double max_lr = 2e-4;
    double warmup_frac = 0.2;
    int epochs = 10;
    /// Optimizer steps; 0 derives epochs * ceil(n_train / effective_batch).
    long steps = 0;
    int effective_batch = 128;
    int micro_batch = 4;
    double grad_clip = 1.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    /// Eval loss above this multiple of the best so far triggers a warning.
    double divergence_ratio = 1.5;
    /// Cap on eval samples per evaluation (0 = all).
    int eval_samples = 0;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
    long steps_per_epoch(std::size_t n_train) const;
    long total_steps(std::size_t n_train) const;
};

/// Linear warm-up from 0 to max_lr over warmup_frac * total, then cosine decay to 0.
double lr_at(double step, long total_steps, const TrainConfig& cfg);

double global_grad_norm(const std::vector<Parameter*>& params);
/// Rescales gradients so the global norm is at most max_norm; returns the pre-clip norm.
double clip_grad_norm(const std::vector<Parameter*>& params, double max_norm);

/// Decoupled-weight-decay Adam.
class AdamW {
public:
    AdamW(std::vector<Parameter*> params, double beta1, double beta2, double eps, double weight_decay);
    explicit AdamW(std::vector<Parameter*> params, const TrainConfig& cfg = {})
        : AdamW(std::move(params), cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay) {}
    /// Applies one update from the current gradients (missing gradients count as zero).
    void step(double lr);
    long steps() const { return t_; }

private:
    std::vector<Parameter*> params_;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
    double beta1_, beta2_, eps_, wd_;
    long t_ = 0;
};

struct CurvePoint {
    long step = 0;
    double train_loss = 0;
    double eval_loss = 0;
    double lr = 0;
};

struct LearningCurve {
    std::string name;
    std::vector<CurvePoint> points;

    /// "step,train_loss,eval_loss,lr" with fixed formatting.
    std::string to_csv() const;
    static LearningCurve from_csv(const std::string& name, const std::string& csv);
};

/// A per-sample differentiable objective with a held-out evaluation set.
struct Objective {
    std::size_t n_train = 0;
    /// Loss of training item i, times weight, recorded on `tape`.
    std::function<Var(Tape& tape, std::size_t i, Scalar weight, const ForwardContext& ctx)> train_loss;
    std::size_t n_eval = 0;
    std::function<double(std::size_t i)> eval_loss;
};

/// Non-finite loss or gradient; carries the diagnostic state.
class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StageResult {
    LearningCurve curve;
    double initial_eval_loss = 0;
    double best_eval_loss = 0;
    long best_step = 0;
    long steps = 0;
    std::vector<std::string> warnings;
};

using ProgressFn = std::function<void(const std::string& message)>;

/// Trains the model's currently trainable parameters on `obj`. Gradients
/// accumulate over effective_batch samples (processed micro_batch at a time),
/// are clipped to grad_clip, and drive one AdamW step. Evaluation runs once
/// per epoch and after the final step; the parameters with the lowest eval
/// loss are restored before returning.
StageResult train_stage(CompositeModel& model, const Objective& obj, const TrainConfig& cfg, std::uint64_t seed,
                        const ProgressFn& progress = {});

/// Deterministic shuffled order of the items for one epoch.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, long epoch);

// ---------------------------------------------------------------------------
// Strategies

enum class StageObjectiveKind {
    /// Response cross-entropy over instruction samples.
    samples,
    /// Frame-level character classification through the encoder's head.
    asr_frames,
};

struct Stage {
    std::string name;
    std::vector<Task> tasks;
    SpanMode span = SpanMode::audio;
    StageObjectiveKind objective = StageObjectiveKind::samples;
    ModuleSet trainable;
    bool lora = false;
    bool lora_on_encoder = false;
    /// Fold LoRA factors into the dense weights when the stage ends.
    bool merge_lora_after = false;
    /// Fraction of the plan's total step budget.
    double budget_frac = 1.0;
    /// "fresh", "previous" or a checkpoint path.
    std::string init = "previous";
    std::optional<TrainConfig> overrides;

    void validate() const;
};

enum class StrategyKind { single, A, B, C, custom };

std::string to_string(StrategyKind k);
StrategyKind strategy_from_string(const std::string& s);

struct StrategyPlan {
    std::string name;
    std::vector<Stage> stages;

    static StrategyPlan preset(StrategyKind kind);
    void validate() const;
};

/// Train and eval samples per task, all resolvable in `catalog`.
struct DataBundle {
    std::map<Task, std::vector<InstructionSample>> train;
    std::map<Task, std::vector<InstructionSample>> eval;
    const AudioCatalog* catalog = nullptr;
};

struct StageRecord {
    std::string name;
    StageResult result;
    long step_offset = 0;
    std::map<Module, std::string> base_hash_before, base_hash_after;
    std::map<Module, std::string> lora_hash_before, lora_hash_after;
    /// Base hashes handed to the next stage (after any LoRA merge).
    std::map<Module, std::string> base_hash_handoff;
    ModuleSet trainable;
};

struct StrategyResult {
    std::vector<StageRecord> stages;
    /// Eval loss of the returned model on the final stage's eval data.
    double final_eval_loss = 0;
};

struct StrategyOptions {
    TrainConfig train;
    LoraSpec lora;
    long total_steps = 0;  // 0: derive from the final stage's data size and epochs
    /// Called with the model once a "fresh" stage needs re-initialization.
    std::function<void(CompositeModel&)> reset_model;
    ProgressFn progress;
};

/// Builds the objective of a stage from the bundle (mixing the selected tasks).
Objective make_objective(CompositeModel& model, const Stage& stage, const DataBundle& data, int eval_cap);

/// Runs the stages in order on `model`. Errors are re-thrown with the stage name.
StrategyResult run_strategy(CompositeModel& model, const StrategyPlan& plan, const DataBundle& data,
                            const StrategyOptions& opts, std::uint64_t seed);

/// True when every module outside the stage's trainable set kept its base and
/// LoRA hashes, and LoRA-carrying trainable modules kept their base hashes.
bool freezing_contract_holds(const StageRecord& record);

}  // namespace slotllm
