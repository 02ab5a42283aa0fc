// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotllm/foundation.hpp"

#include <cctype>
#include <set>
#include <stdexcept>

namespace slotllm::inline SLOTLLM_ABI {

void FoundationConfig::validate() const {
    if (conversations < 1) throw std::invalid_argument("foundation.conversations must be >= 1");
    if (instruction_items < 0) throw std::invalid_argument("foundation.instruction_items must be >= 0");
    if (lm_steps < 1 || encoder_steps < 1) throw std::invalid_argument("foundation step counts must be >= 1");
    if (lm_batch < 1 || encoder_batch < 1) throw std::invalid_argument("foundation batch sizes must be >= 1");
    if (!(lm_lr > 0) || !(encoder_lr > 0)) throw std::invalid_argument("foundation learning rates must be > 0");
}

json FoundationConfig::to_json() const {
    return {{"seed", seed},
            {"conversations", conversations},
            {"instruction_items", instruction_items},
            {"lm_steps", lm_steps},
            {"lm_batch", lm_batch},
            {"lm_lr", lm_lr},
            {"encoder_steps", encoder_steps},
            {"encoder_batch", encoder_batch},
            {"encoder_lr", encoder_lr}};
}

Tokenizer build_shared_tokenizer() {
    std::vector<std::string> texts;
    for (const std::string& t : prompt_templates()) texts.push_back(t);
    for (const std::string& l : label_inventory()) texts.push_back(l);
    texts.emplace_back(kTranscribeInstruction);
    texts.emplace_back("all slot types");
    Conversation c;
    c.id = "vocab";
    c.turns.push_back({Speaker::agent, "hello", "vocab/t0"});
    for (const TextTriplet& t : local_instruction_triplets({c}, 0, 50)) {
        if (!t.instruction.empty()) texts.push_back(t.instruction);
    }
    // Slot values stay spelled out so they can be copied character by character.
    const std::vector<std::string> values = value_lexicon();
    const std::set<std::string> excluded(values.begin(), values.end());
    std::vector<std::string> words;
    for (const std::string& t : texts) {
        std::string cleaned = t;
        for (char& ch : cleaned) {
            if (!std::isalpha(static_cast<unsigned char>(ch))) ch = ' ';
        }
        for (std::string& w : split_whitespace(cleaned)) {
            if (!excluded.count(to_lower(w))) words.push_back(std::move(w));
        }
    }
    return Tokenizer::build(words);
}

namespace {

TrainConfig pretrain_cfg(long steps, int batch, double lr) {
    TrainConfig t;
    t.steps = steps;
    t.effective_batch = batch;
    t.micro_batch = 1;
    t.max_lr = lr;
    t.warmup_frac = 0.05;
    t.divergence_ratio = 1e9;
    return t;
}

}  // namespace

Foundation pretrain_foundation(const ModelConfig& model_cfg, const AudioSettings& audio, std::uint64_t grammar_seed,
                               const FoundationConfig& cfg, const ProgressFn& progress) {
    cfg.validate();
    Foundation f;
    f.tokenizer = build_shared_tokenizer();
    ModelConfig mc = model_cfg;
    mc.lm.vocab = f.tokenizer.size();
    mc.frame_rate_per_char = audio.frame_rate_per_char;
    CompositeModel model(mc, f.tokenizer, cfg.seed);

    CorpusConfig cc;
    cc.pool = LabelPool::all;
    cc.stream = mix_seed(cfg.seed, 0x9e7);
    cc.id_prefix = "pre";
    const std::vector<Conversation> convs = gen_toy_corpus(cfg.conversations, grammar_seed, cc);
    AudioCatalog catalog(audio);
    register_turns(catalog, convs);

    // LM: dialogue documents, instruction triplets (text layout) and copying.
    std::vector<InstructionSample> lm_items;
    for (const Conversation& c : convs) {
        std::vector<std::string> lines;
        for (const Turn& t : c.turns) lines.push_back(t.text);
        InstructionSample s;
        s.task = Task::CONT;
        s.response = join(lines, "\n");
        lm_items.push_back(std::move(s));
    }
    const std::vector<TextTriplet> triplets = local_instruction_triplets(convs, cfg.seed, cfg.instruction_items / 2);
    for (std::size_t i = 0; i < triplets.size(); ++i) {
        InstructionSample s;
        s.task = triplets[i].instruction.empty() ? Task::SQIT : Task::SIT;
        s.audio_ref = "pre/triplet/" + std::to_string(i);
        catalog.add(s.audio_ref, triplets[i].input);
        s.instruction = triplets[i].instruction;
        s.response = triplets[i].output;
        lm_items.push_back(std::move(s));
    }
    for (const InstructionSample& s : build_ast_samples(convs)) lm_items.push_back(s);
    std::mt19937_64 rng(mix_seed(cfg.seed, 0x5u));
    std::shuffle(lm_items.begin(), lm_items.end(), rng);
    const std::size_t n_eval = std::max<std::size_t>(1, lm_items.size() / 20);
    const std::vector<InstructionSample> lm_eval(lm_items.begin(), lm_items.begin() + static_cast<long>(n_eval));
    const std::vector<InstructionSample> lm_train(lm_items.begin() + static_cast<long>(n_eval), lm_items.end());

    Objective lm_obj;
    lm_obj.n_train = lm_train.size();
    lm_obj.n_eval = std::min<std::size_t>(lm_eval.size(), 100);
    lm_obj.train_loss = [&](Tape& tape, std::size_t i, Scalar w, const ForwardContext& ctx) {
        return model.loss(tape, lm_train[i], catalog, SpanMode::text, w, ctx);
    };
    lm_obj.eval_loss = [&](std::size_t i) { return model.eval_loss(lm_eval[i], catalog, SpanMode::text); };
    model.set_trainable({Module::lm});
    ProgressFn lm_progress;
    if (progress) lm_progress = [&](const std::string& m) { progress("foundation lm: " + m); };
    const StageResult lm_res =
        train_stage(model, lm_obj, pretrain_cfg(cfg.lm_steps, cfg.lm_batch, cfg.lm_lr), mix_seed(cfg.seed, 1), lm_progress);

    // Encoder: frame-level character recognition on the same utterances.
    std::vector<std::string> refs;
    for (const Conversation& c : convs) {
        for (const Turn& t : c.turns) refs.push_back(t.audio_ref);
    }
    const std::size_t enc_eval = std::max<std::size_t>(1, refs.size() / 20);
    FrameAsr& asr = model.encoder_asr();
    Objective enc_obj;
    enc_obj.n_train = refs.size() - enc_eval;
    enc_obj.n_eval = enc_eval;
    enc_obj.train_loss = [&](Tape& tape, std::size_t i, Scalar w, const ForwardContext& ctx) {
        const std::string& ref = refs[enc_eval + i];
        const Matrix frames = catalog.audio(ref).frames;
        return asr.loss(tape, frames, catalog.text(ref), w / static_cast<Scalar>(frames.rows()), ctx);
    };
    enc_obj.eval_loss = [&](std::size_t i) { return asr.frame_loss(catalog.audio(refs[i]).frames, catalog.text(refs[i])); };
    model.set_trainable({Module::encoder});
    ProgressFn enc_progress;
    if (progress) enc_progress = [&](const std::string& m) { progress("foundation encoder: " + m); };
    const StageResult enc_res = train_stage(model, enc_obj, pretrain_cfg(cfg.encoder_steps, cfg.encoder_batch, cfg.encoder_lr),
                                            mix_seed(cfg.seed, 2), enc_progress);

    const CheckpointData all = model.to_checkpoint();
    f.encoder.meta = {{"kind", "foundation-encoder"}, {"encoder", mc.encoder.to_json()}};
    f.lm.meta = {{"kind", "foundation-lm"}, {"lm", mc.lm.to_json()}, {"tokenizer", f.tokenizer.to_json()}};
    for (const NamedTensor& t : all.tensors) {
        if (starts_with(t.name, "asr.")) f.encoder.tensors.push_back(t);
        if (starts_with(t.name, "lm.")) f.lm.tensors.push_back(t);
    }
    f.info = {{"lm_eval_loss", lm_res.best_eval_loss}, {"encoder_eval_loss", enc_res.best_eval_loss}};
    return f;
}

Foundation load_or_pretrain_foundation(const ModelConfig& model_cfg, const AudioSettings& audio,
                                       std::uint64_t grammar_seed, const FoundationConfig& cfg,
                                       const std::filesystem::path& cache_dir, const ProgressFn& progress) {
    ModelConfig mc = model_cfg;
    mc.lm.vocab = 0;
    const json key_src = {{"format", 1},
                          {"encoder", mc.encoder.to_json()},
                          {"lm", mc.lm.to_json()},
                          {"audio",
                           {{"F", audio.frame_rate_per_char},
                            {"sigma", audio.noise_sigma},
                            {"noise_seed", audio.noise_seed},
                            {"d_audio", audio.d_audio},
                            {"codebook_seed", audio.codebook_seed}}},
                          {"grammar_seed", grammar_seed},
                          {"foundation", cfg.to_json()},
                          {"scalar_bytes", sizeof(Scalar)},
                          {"tokenizer", sha256_hex(build_shared_tokenizer().to_json().dump())}};
    const std::string key = sha256_hex(key_src.dump()).substr(0, 16);
    const auto enc_path = cache_dir / ("foundation-" + key + ".encoder.ckpt");
    const auto lm_path = cache_dir / ("foundation-" + key + ".lm.ckpt");
    if (!cache_dir.empty() && std::filesystem::exists(enc_path) && std::filesystem::exists(lm_path)) {
        Foundation f;
        f.encoder = load_checkpoint(enc_path);
        f.lm = load_checkpoint(lm_path);
        f.tokenizer = Tokenizer::from_json(f.lm.meta.at("tokenizer"));
        f.info = f.lm.meta.value("info", json::object());
        f.info["cache_key"] = key;
        return f;
    }
    Foundation f = pretrain_foundation(model_cfg, audio, grammar_seed, cfg, progress);
    f.info["cache_key"] = key;
    if (!cache_dir.empty()) {
        std::filesystem::create_directories(cache_dir);
        f.lm.meta["info"] = f.info;
        save_checkpoint(enc_path, f.encoder);
        save_checkpoint(lm_path, f.lm);
    }
    return f;
}

CompositeModel assemble_model(const ModelConfig& model_cfg, const Foundation& f, std::uint64_t seed) {
    ModelConfig mc = model_cfg;
    mc.lm.vocab = f.tokenizer.size();
    CompositeModel model(mc, f.tokenizer, seed);
    model.load_module(Module::encoder, f.encoder);
    model.load_module(Module::lm, f.lm);
    return model;
}

}  // namespace slotllm
