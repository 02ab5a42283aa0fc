// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotllm/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

namespace slotllm::inline SLOTLLM_ABI {

void TrainConfig::validate() const {
    if (!(max_lr > 0)) throw std::invalid_argument("train.max_lr must be > 0");
    if (!(warmup_frac > 0 && warmup_frac < 1)) throw std::invalid_argument("train.warmup_frac must be in (0, 1)");
    if (epochs < 1) throw std::invalid_argument("train.epochs must be >= 1");
    if (steps < 0) throw std::invalid_argument("train.steps must be >= 0");
    if (effective_batch < 1) throw std::invalid_argument("train.effective_batch must be >= 1");
    if (micro_batch < 1 || effective_batch % micro_batch != 0) {
        throw std::invalid_argument("train.micro_batch must be >= 1 and divide train.effective_batch");
    }
    if (!(grad_clip > 0)) throw std::invalid_argument("train.grad_clip must be > 0");
    if (!(beta1 >= 0 && beta1 < 1)) throw std::invalid_argument("train.beta1 must be in [0, 1)");
    if (!(beta2 >= 0 && beta2 < 1)) throw std::invalid_argument("train.beta2 must be in [0, 1)");
    if (!(eps > 0)) throw std::invalid_argument("train.eps must be > 0");
    if (weight_decay < 0) throw std::invalid_argument("train.weight_decay must be >= 0");
    if (!(divergence_ratio > 1)) throw std::invalid_argument("train.divergence_ratio must be > 1");
    if (eval_samples < 0) throw std::invalid_argument("train.eval_samples must be >= 0");
}

long TrainConfig::steps_per_epoch(std::size_t n_train) const {
    const auto b = static_cast<std::size_t>(effective_batch);
    return static_cast<long>(std::max<std::size_t>(1, (n_train + b - 1) / b));
}

long TrainConfig::total_steps(std::size_t n_train) const {
    return steps > 0 ? steps : static_cast<long>(epochs) * steps_per_epoch(n_train);
}

double lr_at(double step, long total_steps, const TrainConfig& cfg) {
    if (total_steps <= 0) throw std::invalid_argument("lr_at: total_steps must be > 0");
    const double total = static_cast<double>(total_steps);
    if (step < 0 || step > total) throw std::out_of_range("lr_at: step outside [0, total_steps]");
    const double warm = cfg.warmup_frac * total;
    if (step <= warm) return warm > 0 ? cfg.max_lr * step / warm : cfg.max_lr;
    const double progress = (step - warm) / (total - warm);
    return 0.5 * cfg.max_lr * (1.0 + std::cos(std::numbers::pi * progress));
}

double global_grad_norm(const std::vector<Parameter*>& params) {
    double sq = 0;
    for (const Parameter* p : params) {
        if (p->has_grad()) sq += p->grad.template cast<double>().squaredNorm();
    }
    return std::sqrt(sq);
}

double clip_grad_norm(const std::vector<Parameter*>& params, double max_norm) {
    const double norm = global_grad_norm(params);
    if (std::isfinite(norm) && norm > max_norm) {
        const auto s = static_cast<Scalar>(max_norm / norm);
        for (Parameter* p : params) {
            if (p->has_grad()) p->grad *= s;
        }
    }
    return norm;
}

AdamW::AdamW(std::vector<Parameter*> params, double beta1, double beta2, double eps, double weight_decay)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps), wd_(weight_decay) {
    for (const Parameter* p : params_) {
        m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
}

void AdamW::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const auto b1 = static_cast<Scalar>(beta1_);
    const auto b2 = static_cast<Scalar>(beta2_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Parameter& p = *params_[i];
        if (p.has_grad()) {
            m_[i] = b1 * m_[i] + (1 - b1) * p.grad;
            v_[i] = b2 * v_[i] + (1 - b2) * p.grad.cwiseAbs2();
        } else {
            m_[i] *= b1;
            v_[i] *= b2;
        }
        if (wd_ > 0) p.value *= static_cast<Scalar>(1.0 - lr * wd_);
        const auto step = static_cast<Scalar>(lr / bc1);
        const auto inv_bc2 = static_cast<Scalar>(1.0 / bc2);
        const auto eps = static_cast<Scalar>(eps_);
        p.value.array() -= step * m_[i].array() / ((v_[i].array() * inv_bc2).sqrt() + eps);
    }
}

std::string LearningCurve::to_csv() const {
    std::string out = "step,train_loss,eval_loss,lr\n";
    char line[160];
    for (const CurvePoint& p : points) {
        std::snprintf(line, sizeof line, "%ld,%.9g,%.9g,%.9g\n", p.step, p.train_loss, p.eval_loss, p.lr);
        out += line;
    }
    return out;
}

LearningCurve LearningCurve::from_csv(const std::string& name, const std::string& csv) {
    LearningCurve c;
    c.name = name;
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "step,train_loss,eval_loss,lr") {
        throw std::runtime_error("curve '" + name + "': missing header");
    }
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        CurvePoint p;
        if (std::sscanf(line.c_str(), "%ld,%lf,%lf,%lf", &p.step, &p.train_loss, &p.eval_loss, &p.lr) != 4) {
            throw std::runtime_error("curve '" + name + "': malformed row '" + line + "'");
        }
        c.points.push_back(p);
    }
    return c;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, long epoch) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

namespace {

std::string fmt(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.6g", v);
    return b;
}

double mean_eval(const Objective& obj, std::size_t cap) {
    const std::size_t n = cap ? std::min(cap, obj.n_eval) : obj.n_eval;
    if (n == 0) return 0.0;
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) total += obj.eval_loss(i);
    return total / static_cast<double>(n);
}

}  // namespace

StageResult train_stage(CompositeModel& model, const Objective& obj, const TrainConfig& cfg, std::uint64_t seed,
                        const ProgressFn& progress) {
    cfg.validate();
    if (obj.n_train == 0) throw std::invalid_argument("train_stage: no training data");
    std::vector<Parameter*> params = model.trainable_parameters();
    if (params.empty()) throw std::invalid_argument("nothing to train");
    AdamW opt(params, cfg);

    const long total = cfg.total_steps(obj.n_train);
    const long per_epoch = cfg.steps_per_epoch(obj.n_train);
    const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.effective_batch), obj.n_train);
    const auto eval_cap = static_cast<std::size_t>(cfg.eval_samples);

    StageResult r;
    r.initial_eval_loss = mean_eval(obj, eval_cap);
    r.best_eval_loss = r.initial_eval_loss;
    std::vector<Matrix> best = model.snapshot();

    std::mt19937_64 dropout_rng(mix_seed(seed, 0xd0d0));
    const ForwardContext ctx{true, &dropout_rng};
    long epoch = 0;
    std::vector<std::size_t> order = epoch_order(obj.n_train, seed, epoch);
    std::size_t cursor = 0;
    double window_loss = 0;
    long window_steps = 0;
    double last_norm = 0;

    for (long step = 0; step < total; ++step) {
        // The update of step k uses the schedule at the middle of its interval.
        const double lr = lr_at(static_cast<double>(step) + 0.5, total, cfg);
        for (Parameter* p : params) p->zero_grad();
        double batch_loss = 0;
        const auto weight = static_cast<Scalar>(1.0 / static_cast<double>(batch));
        for (std::size_t done = 0; done < batch;) {
            const std::size_t chunk = std::min<std::size_t>(static_cast<std::size_t>(cfg.micro_batch), batch - done);
            for (std::size_t j = 0; j < chunk; ++j) {
                if (cursor == order.size()) {
                    order = epoch_order(obj.n_train, seed, ++epoch);
                    cursor = 0;
                }
                const std::size_t item = order[cursor++];
                Tape tape;
                Var loss = obj.train_loss(tape, item, weight, ctx);
                const double lv = static_cast<double>(loss.value()(0, 0));
                if (!std::isfinite(lv)) {
                    throw TrainingDiverged("non-finite loss at step " + std::to_string(step) + " (lr " + fmt(lr) +
                                           ", last grad norm " + fmt(last_norm) + ", item " + std::to_string(item) +
                                           "); lower max_lr or raise warmup_frac");
                }
                batch_loss += lv;
                tape.backward(loss);
            }
            done += chunk;
        }
        last_norm = clip_grad_norm(params, cfg.grad_clip);
        if (!std::isfinite(last_norm)) {
            throw TrainingDiverged("non-finite gradient norm at step " + std::to_string(step) + " (lr " + fmt(lr) +
                                   ", batch loss " + fmt(batch_loss) + "); lower max_lr or raise warmup_frac");
        }
        opt.step(lr);
        window_loss += batch_loss;
        ++window_steps;

        const long done_steps = step + 1;
        if (done_steps % per_epoch == 0 || done_steps == total) {
            CurvePoint pt;
            pt.step = done_steps;
            pt.train_loss = window_loss / static_cast<double>(window_steps);
            pt.eval_loss = mean_eval(obj, eval_cap);
            pt.lr = lr;
            window_loss = 0;
            window_steps = 0;
            if (!std::isfinite(pt.eval_loss)) {
                throw TrainingDiverged("non-finite eval loss at step " + std::to_string(done_steps) + " (lr " +
                                       fmt(lr) + ", last grad norm " + fmt(last_norm) + ")");
            }
            if (pt.eval_loss > cfg.divergence_ratio * r.best_eval_loss) {
                r.warnings.push_back("eval loss " + fmt(pt.eval_loss) + " at step " + std::to_string(done_steps) +
                                     " exceeds " + fmt(cfg.divergence_ratio) + "x the best (" +
                                     fmt(r.best_eval_loss) + "); consider lowering max_lr or raising warmup_frac");
            }
            if (pt.eval_loss < r.best_eval_loss) {
                r.best_eval_loss = pt.eval_loss;
                r.best_step = done_steps;
                best = model.snapshot();
            }
            r.curve.points.push_back(pt);
            if (progress) {
                progress("step " + std::to_string(done_steps) + "/" + std::to_string(total) + " train " +
                         fmt(pt.train_loss) + " eval " + fmt(pt.eval_loss) + " lr " + fmt(lr));
            }
        }
    }
    model.restore(best);
    r.steps = total;
    return r;
}

// ---------------------------------------------------------------------------

void Stage::validate() const {
    if (name.empty()) throw std::invalid_argument("stage name is empty");
    if (tasks.empty()) throw std::invalid_argument("stage '" + name + "': dataset selector is empty");
    if (trainable.empty()) throw std::invalid_argument("stage '" + name + "': nothing to train");
    if (!(budget_frac > 0 && budget_frac <= 1)) throw std::invalid_argument("stage '" + name + "': budget_frac must be in (0, 1]");
    if (objective == StageObjectiveKind::asr_frames) {
        if (tasks != std::vector<Task>{Task::AST}) throw std::invalid_argument("stage '" + name + "': asr objective needs tasks [AST]");
        if (trainable != ModuleSet{Module::encoder}) throw std::invalid_argument("stage '" + name + "': asr objective trains the encoder only");
    }
    if (lora_on_encoder && !lora) throw std::invalid_argument("stage '" + name + "': lora_on_encoder requires lora");
    if (overrides) overrides->validate();
}

std::string to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::single: return "single";
        case StrategyKind::A: return "A";
        case StrategyKind::B: return "B";
        case StrategyKind::C: return "C";
        case StrategyKind::custom: return "custom";
    }
    return "unknown";
}

StrategyKind strategy_from_string(const std::string& s) {
    if (s == "single" || s == "SINGLE") return StrategyKind::single;
    if (s == "A" || s == "a") return StrategyKind::A;
    if (s == "B" || s == "b") return StrategyKind::B;
    if (s == "C" || s == "c") return StrategyKind::C;
    if (s == "custom") return StrategyKind::custom;
    throw std::invalid_argument("unknown strategy '" + s + "' (expected single|A|B|C|custom)");
}

namespace {

Stage joint_stage(const std::string& name, double budget) {
    Stage s;
    s.name = name;
    s.tasks = {Task::SLOT};
    s.trainable = {Module::adapter, Module::lm};
    s.lora = true;
    s.budget_frac = budget;
    return s;
}

Stage adapter_stage(const std::string& name, Task task, double budget) {
    Stage s;
    s.name = name;
    s.tasks = {task};
    s.trainable = {Module::adapter};
    s.budget_frac = budget;
    return s;
}

}  // namespace

StrategyPlan StrategyPlan::preset(StrategyKind kind) {
    StrategyPlan p;
    p.name = to_string(kind);
    switch (kind) {
        case StrategyKind::single:
            p.stages = {joint_stage("joint", 1.0)};
            break;
        case StrategyKind::A: {
            Stage enc;
            enc.name = "stage1a-encoder-asr";
            enc.tasks = {Task::AST};
            enc.objective = StageObjectiveKind::asr_frames;
            enc.trainable = {Module::encoder};
            enc.budget_frac = 0.15;
            Stage text;
            text.name = "stage1b-lm-text";
            text.tasks = {Task::SLOT};
            text.span = SpanMode::text;
            text.trainable = {Module::lm};
            text.lora = true;
            text.merge_lora_after = true;
            text.budget_frac = 0.15;
            p.stages = {enc, text, joint_stage("stage2-joint", 0.70)};
            break;
        }
        case StrategyKind::B:
            p.stages = {adapter_stage("stage1-adapter-cont", Task::CONT, 0.25), joint_stage("stage2-joint", 0.75)};
            break;
        case StrategyKind::C:
            p.stages = {adapter_stage("stage1-adapter-ast", Task::AST, 0.25), joint_stage("stage2-joint", 0.75)};
            break;
        case StrategyKind::custom:
            throw std::invalid_argument("custom strategies have no preset; list the stages explicitly");
    }
    return p;
}

void StrategyPlan::validate() const {
    if (stages.empty()) throw std::invalid_argument("strategy '" + name + "' has no stages");
    double total = 0;
    for (const Stage& s : stages) {
        s.validate();
        total += s.budget_frac;
    }
    if (std::abs(total - 1.0) > 1e-6) throw std::invalid_argument("strategy '" + name + "': stage budget_frac values must sum to 1");
}

Objective make_objective(CompositeModel& model, const Stage& stage, const DataBundle& data, int eval_cap) {
    if (data.catalog == nullptr) throw std::invalid_argument("data bundle has no audio catalog");
    auto train = std::make_shared<std::vector<const InstructionSample*>>();
    auto eval = std::make_shared<std::vector<const InstructionSample*>>();
    for (Task t : stage.tasks) {
        const auto it = data.train.find(t);
        if (it == data.train.end() || it->second.empty()) {
            throw std::invalid_argument("stage '" + stage.name + "': no " + to_string(t) + " training data");
        }
        for (const InstructionSample& s : it->second) train->push_back(&s);
        const auto ev = data.eval.find(t);
        if (ev != data.eval.end()) {
            for (const InstructionSample& s : ev->second) eval->push_back(&s);
        }
    }
    // Interleave tasks in the eval subset so a cap keeps every task represented.
    if (eval_cap > 0 && static_cast<int>(eval->size()) > eval_cap) {
        std::vector<const InstructionSample*> picked;
        const double stride = static_cast<double>(eval->size()) / eval_cap;
        for (int i = 0; i < eval_cap; ++i) picked.push_back((*eval)[static_cast<std::size_t>(i * stride)]);
        *eval = std::move(picked);
    }
    const AudioCatalog& cat = *data.catalog;
    Objective o;
    o.n_train = train->size();
    o.n_eval = eval->size();
    if (stage.objective == StageObjectiveKind::asr_frames) {
        FrameAsr& asr = model.encoder_asr();
        o.train_loss = [train, &cat, &asr](Tape& tape, std::size_t i, Scalar w, const ForwardContext& ctx) {
            const InstructionSample& s = *(*train)[i];
            const Matrix frames = cat.audio(s.audio_ref).frames;
            return asr.loss(tape, frames, cat.text(s.audio_ref), w / static_cast<Scalar>(frames.rows()), ctx);
        };
        o.eval_loss = [eval, &cat, &asr](std::size_t i) {
            const InstructionSample& s = *(*eval)[i];
            return asr.frame_loss(cat.audio(s.audio_ref).frames, cat.text(s.audio_ref));
        };
    } else {
        const SpanMode mode = stage.span;
        o.train_loss = [train, &cat, &model, mode](Tape& tape, std::size_t i, Scalar w, const ForwardContext& ctx) {
            return model.loss(tape, *(*train)[i], cat, mode, w, ctx);
        };
        o.eval_loss = [eval, &cat, &model, mode](std::size_t i) { return model.eval_loss(*(*eval)[i], cat, mode); };
    }
    return o;
}

namespace {

void record_hashes(CompositeModel& model, std::map<Module, std::string>& base, std::map<Module, std::string>& lora) {
    for (Module m : {Module::encoder, Module::adapter, Module::lm}) {
        base[m] = model.base_hash(m);
        lora[m] = model.lora_hash(m);
    }
}

}  // namespace

StrategyResult run_strategy(CompositeModel& model, const StrategyPlan& plan, const DataBundle& data,
                            const StrategyOptions& opts, std::uint64_t seed) {
    plan.validate();
    opts.train.validate();
    long total = opts.total_steps;
    if (total <= 0) {
        const Stage& last = plan.stages.back();
        std::size_t n = 0;
        for (Task t : last.tasks) {
            const auto it = data.train.find(t);
            if (it != data.train.end()) n += it->second.size();
        }
        total = (last.overrides ? *last.overrides : opts.train).total_steps(n);
    }
    StrategyResult out;
    long offset = 0;
    for (std::size_t k = 0; k < plan.stages.size(); ++k) {
        const Stage& stage = plan.stages[k];
        try {
            if (stage.init == "fresh") {
                if (!opts.reset_model) throw std::invalid_argument("stage init 'fresh' needs a model factory");
                opts.reset_model(model);
            } else if (stage.init != "previous") {
                model = CompositeModel::load(stage.init);
            }
            if (stage.lora && !model.has_lora()) {
                model.apply_lora(opts.lora, stage.lora_on_encoder, mix_seed(seed, 0x10a0 + k));
            }
            model.set_trainable(stage.trainable);
            StageRecord rec;
            rec.name = stage.name;
            rec.trainable = stage.trainable;
            rec.step_offset = offset;
            record_hashes(model, rec.base_hash_before, rec.lora_hash_before);
            TrainConfig cfg = stage.overrides ? *stage.overrides : opts.train;
            cfg.steps = std::max<long>(1, std::lround(static_cast<double>(total) * stage.budget_frac));
            const Objective obj = make_objective(model, stage, data, cfg.eval_samples);
            ProgressFn progress;
            if (opts.progress) {
                progress = [&](const std::string& msg) { opts.progress(stage.name + ": " + msg); };
            }
            rec.result = train_stage(model, obj, cfg, mix_seed(seed, k), progress);
            rec.result.curve.name = stage.name;
            record_hashes(model, rec.base_hash_after, rec.lora_hash_after);
            if (stage.merge_lora_after) model.merge_lora();
            for (Module m : {Module::encoder, Module::adapter, Module::lm}) rec.base_hash_handoff[m] = model.base_hash(m);
            offset += rec.result.steps;
            out.final_eval_loss = rec.result.best_eval_loss;
            out.stages.push_back(std::move(rec));
        } catch (const std::exception& e) {
            throw std::runtime_error("stage '" + stage.name + "': " + e.what());
        }
    }
    return out;
}

bool freezing_contract_holds(const StageRecord& r) {
    for (Module m : {Module::encoder, Module::adapter, Module::lm}) {
        const bool trained = r.trainable.count(m) != 0;
        const bool has_lora = r.lora_hash_before.at(m) != sha256_hex("");
        if (!trained) {
            if (r.base_hash_before.at(m) != r.base_hash_after.at(m)) return false;
            if (r.lora_hash_before.at(m) != r.lora_hash_after.at(m)) return false;
        } else if (has_lora && r.base_hash_before.at(m) != r.base_hash_after.at(m)) {
            return false;
        }
    }
    return true;
}

}  // namespace slotllm
