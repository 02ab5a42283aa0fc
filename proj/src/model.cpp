// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotllm/model.hpp"

#include <cstring>
#include <stdexcept>

namespace slotllm::inline SLOTLLM_ABI {

std::string to_string(Module m) {
    switch (m) {
        case Module::encoder: return "encoder";
        case Module::adapter: return "adapter";
        case Module::lm: return "lm";
    }
    return "unknown";
}

Module module_from_string(const std::string& s) {
    if (s == "encoder") return Module::encoder;
    if (s == "adapter") return Module::adapter;
    if (s == "lm") return Module::lm;
    throw std::invalid_argument("unknown module '" + s + "' (expected encoder|adapter|lm)");
}

void ModelConfig::validate() const {
    encoder.validate();
    adapter.validate();
    lm.validate();
    if (frame_rate_per_char < 1) throw std::invalid_argument("audio.frame_rate_per_char must be >= 1");
    if (adapter.d_enc != encoder.d_enc) throw std::invalid_argument("adapter.d_enc must equal encoder.d_enc");
    if (adapter.d_llm != lm.d_model) throw std::invalid_argument("adapter.d_llm must equal lm.d_model");
}

json ModelConfig::to_json() const {
    const AdapterConfig& a = adapter;
    return {{"encoder", encoder.to_json()},
            {"adapter",
             {{"kind", to_string(a.kind)}, {"d_enc", a.d_enc}, {"d_llm", a.d_llm}, {"subsample", a.subsample},
              {"bias", a.bias}, {"cnn_layers", a.cnn_layers}, {"cnn_kernel", a.cnn_kernel},
              {"cnn_stride", a.cnn_stride}, {"cnn_channels", a.cnn_channels}, {"stack", a.stack},
              {"mlp_hidden", a.mlp_hidden}, {"tf_d_model", a.tf_d_model}, {"tf_layers", a.tf_layers},
              {"tf_heads", a.tf_heads}, {"tf_d_ff", a.tf_d_ff}}},
            {"lm", lm.to_json()},
            {"frame_rate_per_char", frame_rate_per_char}};
}

ModelConfig ModelConfig::from_json(const json& j) {
    ModelConfig c;
    c.encoder = EncoderConfig::from_json(j.at("encoder"));
    const json& a = j.at("adapter");
    c.adapter.kind = adapter_kind_from_string(a.at("kind").get<std::string>());
    c.adapter.d_enc = a.at("d_enc").get<int>();
    c.adapter.d_llm = a.at("d_llm").get<int>();
    c.adapter.subsample = a.at("subsample").get<int>();
    c.adapter.bias = a.at("bias").get<bool>();
    c.adapter.cnn_layers = a.at("cnn_layers").get<int>();
    c.adapter.cnn_kernel = a.at("cnn_kernel").get<int>();
    c.adapter.cnn_stride = a.at("cnn_stride").get<int>();
    c.adapter.cnn_channels = a.at("cnn_channels").get<int>();
    c.adapter.stack = a.at("stack").get<int>();
    c.adapter.mlp_hidden = a.at("mlp_hidden").get<int>();
    c.adapter.tf_d_model = a.at("tf_d_model").get<int>();
    c.adapter.tf_layers = a.at("tf_layers").get<int>();
    c.adapter.tf_heads = a.at("tf_heads").get<int>();
    c.adapter.tf_d_ff = a.at("tf_d_ff").get<int>();
    c.lm = LmConfig::from_json(j.at("lm"));
    c.frame_rate_per_char = j.at("frame_rate_per_char").get<int>();
    return c;
}

namespace {

const ModelConfig& checked(const ModelConfig& cfg, const Tokenizer& tok) {
    cfg.validate();
    if (cfg.lm.vocab != tok.size()) {
        throw std::invalid_argument("lm.vocab (" + std::to_string(cfg.lm.vocab) + ") != tokenizer size (" +
                                    std::to_string(tok.size()) + ")");
    }
    return cfg;
}

void hash_parameter(std::string& buf, const Parameter& p) {
    buf += p.name;
    buf += '\0';
    const std::int64_t shape[2] = {p.value.rows(), p.value.cols()};
    buf.append(reinterpret_cast<const char*>(shape), sizeof shape);
    for (Index i = 0; i < p.value.size(); ++i) {
        const float f = static_cast<float>(p.value.data()[i]);
        buf.append(reinterpret_cast<const char*>(&f), sizeof f);
    }
}

}  // namespace

CompositeModel::CompositeModel(const ModelConfig& cfg, Tokenizer tokenizer, std::uint64_t seed)
    : cfg_(checked(cfg, tokenizer)),
      tokenizer_(std::move(tokenizer)),
      asr_(cfg_.encoder, cfg_.frame_rate_per_char, mix_seed(seed, 0xe1)),
      adapter_(make_adapter(cfg_.adapter, mix_seed(seed, 0xad))),
      lm_(cfg_.lm, mix_seed(seed, 0x11)),
      newline_(tokenizer_.encode("\n")) {}

std::vector<int> CompositeModel::instruction_tokens(const std::string& instruction) const {
    std::vector<int> ids{Tokenizer::kBos};
    if (!instruction.empty()) {
        const std::vector<int> body = tokenizer_.encode(instruction);
        ids.insert(ids.end(), body.begin(), body.end());
        ids.insert(ids.end(), newline_.begin(), newline_.end());
    }
    return ids;
}

std::vector<int> CompositeModel::span_tokens(const std::string& transcript) const {
    std::vector<int> ids = tokenizer_.encode(transcript);
    ids.insert(ids.end(), newline_.begin(), newline_.end());
    return ids;
}

std::vector<int> CompositeModel::response_tokens(const std::string& response) const {
    std::vector<int> ids = tokenizer_.encode(response);
    ids.push_back(Tokenizer::kEos);
    return ids;
}

Var CompositeModel::speech_embeddings(Tape& tape, const Matrix& frames, const ForwardContext& ctx) {
    Var enc = asr_.encoder().forward(tape, tape.constant(frames), ctx);
    return adapter_->forward(tape, enc, ctx);
}

FusedSequence CompositeModel::fuse(Tape& tape, const InstructionSample& sample, const AudioCatalog& catalog,
                                   SpanMode mode, const ForwardContext& ctx) {
    FusedSequence f;
    const std::vector<int> instr = instruction_tokens(sample.instruction);
    const std::vector<int> resp = response_tokens(sample.response);
    std::vector<Var> parts{lm_.embed(tape, instr)};
    f.tokens = instr;
    if (sample.has_audio()) {
        if (mode == SpanMode::audio) {
            Var speech = speech_embeddings(tape, catalog.audio(sample.audio_ref).frames, ctx);
            parts.push_back(speech);
            f.span_len = speech.rows();
            f.tokens.insert(f.tokens.end(), static_cast<std::size_t>(f.span_len), -1);
        } else {
            const std::vector<int> span = span_tokens(catalog.text(sample.audio_ref));
            parts.push_back(lm_.embed(tape, span));
            f.span_len = static_cast<Index>(span.size());
            f.tokens.insert(f.tokens.end(), span.begin(), span.end());
        }
    }
    parts.push_back(lm_.embed(tape, resp));
    f.tokens.insert(f.tokens.end(), resp.begin(), resp.end());
    f.instruction_len = static_cast<Index>(instr.size());
    f.response_len = static_cast<Index>(resp.size());
    f.embeddings = ops::concat_rows(parts);
    f.loss_mask.assign(f.tokens.size(), false);
    for (Index i = f.instruction_len + f.span_len; i < f.length(); ++i) f.loss_mask[static_cast<std::size_t>(i)] = true;
    return f;
}

Var CompositeModel::loss(Tape& tape, const InstructionSample& sample, const AudioCatalog& catalog, SpanMode mode,
                         Scalar weight, const ForwardContext& ctx) {
    const FusedSequence f = fuse(tape, sample, catalog, mode, ctx);
    // Position p is predicted from the hidden state at p - 1.
    std::vector<int> rows;
    std::vector<int> targets;
    for (std::size_t p = 1; p < f.tokens.size(); ++p) {
        if (!f.loss_mask[p]) continue;
        rows.push_back(static_cast<int>(p - 1));
        targets.push_back(f.tokens[p]);
    }
    Var h = lm_.hidden(tape, f.embeddings, ctx);
    Var logits = lm_.logits(tape, ops::gather_rows(h, rows), ctx);
    return ops::cross_entropy(logits, targets, weight / static_cast<Scalar>(targets.size()));
}

double CompositeModel::eval_loss(const InstructionSample& sample, const AudioCatalog& catalog, SpanMode mode) {
    Tape tape(false);
    return static_cast<double>(loss(tape, sample, catalog, mode, 1, ForwardContext{}).value()(0, 0));
}

std::string CompositeModel::decode_response(const std::vector<int>& ids) const { return tokenizer_.decode(ids); }

std::string CompositeModel::generate(const std::string& instruction, const Matrix& frames, int max_new) {
    Tape tape(false);
    const ForwardContext ctx;
    const Matrix speech = speech_embeddings(tape, frames, ctx).value();
    const Matrix instr = lm_.embed_rows(instruction_tokens(instruction));
    Matrix prefix(instr.rows() + speech.rows(), cfg_.lm.d_model);
    prefix << instr, speech;
    const int stop[] = {Tokenizer::kEos};
    return decode_response(lm_.greedy(prefix, max_new, stop));
}

std::string CompositeModel::generate_text(const std::string& instruction, const std::string& transcript, int max_new,
                                          bool stop_at_newline) {
    std::vector<int> ids = instruction_tokens(instruction);
    if (!transcript.empty()) {
        const std::vector<int> span = span_tokens(transcript);
        ids.insert(ids.end(), span.begin(), span.end());
    }
    std::vector<int> stop{Tokenizer::kEos};
    if (stop_at_newline) stop.insert(stop.end(), newline_.begin(), newline_.end());
    return decode_response(lm_.greedy(lm_.embed_rows(ids), max_new, stop));
}

std::string CompositeModel::generate(const InstructionSample& sample, const AudioCatalog& catalog, SpanMode mode,
                                     int max_new) {
    if (!sample.has_audio()) return generate_text(sample.instruction, "", max_new);
    if (mode == SpanMode::text) return generate_text(sample.instruction, catalog.text(sample.audio_ref), max_new);
    return generate(sample.instruction, catalog.audio(sample.audio_ref).frames, max_new);
}

void CompositeModel::apply_lora(const LoraSpec& spec, bool include_encoder, std::uint64_t seed) {
    spec.validate();
    if (lora_) throw std::logic_error("apply_lora: LoRA already attached; merge first");
    std::mt19937_64 rng(seed);
    lm_.attach_lora(spec, rng);
    if (include_encoder) asr_.encoder().attach_lora(spec, rng);
    lora_ = spec;
    lora_on_encoder_ = include_encoder;
}

void CompositeModel::merge_lora() {
    if (!lora_) return;
    lm_.merge_lora();
    if (lora_on_encoder_) asr_.encoder().merge_lora();
    lora_.reset();
    lora_on_encoder_ = false;
}

void CompositeModel::for_each_base(Module m, const ParameterVisitor& fn) {
    switch (m) {
        case Module::encoder: asr_.for_each_base(fn); break;
        case Module::adapter: adapter_->for_each_parameter(fn); break;
        case Module::lm: lm_.for_each_base(fn); break;
    }
}

void CompositeModel::for_each_lora(Module m, const ParameterVisitor& fn) {
    switch (m) {
        case Module::encoder: asr_.for_each_lora(fn); break;
        case Module::adapter: break;
        case Module::lm: lm_.for_each_lora(fn); break;
    }
}

void CompositeModel::for_each_parameter(const ParameterVisitor& fn) {
    for (Module m : {Module::encoder, Module::adapter, Module::lm}) {
        for_each_base(m, fn);
        for_each_lora(m, fn);
    }
}

std::int64_t CompositeModel::parameter_count(Module m) {
    std::int64_t n = 0;
    for_each_base(m, [&](Parameter& p) { n += p.size(); });
    for_each_lora(m, [&](Parameter& p) { n += p.size(); });
    return n;
}

void CompositeModel::set_trainable(const ModuleSet& modules) {
    if (modules.empty()) throw std::invalid_argument("nothing to train");
    for (Module m : {Module::encoder, Module::adapter, Module::lm}) {
        const bool on = modules.count(m) != 0;
        bool has_lora = false;
        for_each_lora(m, [&](Parameter& p) {
            has_lora = true;
            p.trainable = on;
        });
        for_each_base(m, [&](Parameter& p) { p.trainable = on && !has_lora; });
    }
}

std::vector<Parameter*> CompositeModel::trainable_parameters() {
    std::vector<Parameter*> out;
    for_each_parameter([&](Parameter& p) {
        if (p.trainable) out.push_back(&p);
    });
    return out;
}

std::string CompositeModel::base_hash(Module m) {
    std::string buf;
    for_each_base(m, [&](Parameter& p) { hash_parameter(buf, p); });
    return sha256_hex(buf);
}

std::string CompositeModel::lora_hash(Module m) {
    std::string buf;
    for_each_lora(m, [&](Parameter& p) { hash_parameter(buf, p); });
    return sha256_hex(buf);
}

std::vector<Matrix> CompositeModel::snapshot() {
    std::vector<Matrix> out;
    for_each_parameter([&](Parameter& p) { out.push_back(p.value); });
    return out;
}

void CompositeModel::restore(const std::vector<Matrix>& values) {
    std::size_t i = 0;
    for_each_parameter([&](Parameter& p) {
        if (i >= values.size() || values[i].rows() != p.value.rows() || values[i].cols() != p.value.cols()) {
            throw std::invalid_argument("restore: snapshot does not match the model structure");
        }
        p.value = values[i++];
    });
    if (i != values.size()) throw std::invalid_argument("restore: snapshot does not match the model structure");
}

CheckpointData CompositeModel::to_checkpoint() {
    CheckpointData d;
    d.meta = {{"kind", "composite"}, {"config", cfg_.to_json()}, {"tokenizer", tokenizer_.to_json()}};
    if (lora_) {
        d.meta["lora"] = {{"rank", lora_->rank},
                          {"alpha", lora_->alpha},
                          {"dropout", lora_->dropout},
                          {"init_std", lora_->init_std},
                          {"encoder", lora_on_encoder_}};
    }
    for (Module m : {Module::encoder, Module::adapter, Module::lm}) {
        for_each_base(m, [&](Parameter& p) { d.tensors.push_back({p.name, "base", p.value}); });
        for_each_lora(m, [&](Parameter& p) { d.tensors.push_back({p.name, "lora", p.value}); });
    }
    return d;
}

CompositeModel CompositeModel::from_checkpoint(const CheckpointData& data) {
    if (data.meta.value("kind", "") != "composite") throw std::runtime_error("checkpoint is not a composite model");
    CompositeModel model(ModelConfig::from_json(data.meta.at("config")),
                         Tokenizer::from_json(data.meta.at("tokenizer")), 0);
    if (data.meta.contains("lora")) {
        const json& l = data.meta.at("lora");
        LoraSpec spec;
        spec.rank = l.at("rank").get<int>();
        spec.alpha = l.at("alpha").get<double>();
        spec.dropout = l.at("dropout").get<double>();
        spec.init_std = l.at("init_std").get<double>();
        model.apply_lora(spec, l.at("encoder").get<bool>(), 0);
    }
    model.for_each_parameter([&](Parameter& p) {
        const NamedTensor& t = data.at(p.name);
        if (t.value.rows() != p.value.rows() || t.value.cols() != p.value.cols()) {
            throw std::runtime_error("checkpoint tensor '" + p.name + "' has the wrong shape");
        }
        p.value = t.value;
    });
    return model;
}

void CompositeModel::save(const std::filesystem::path& path) { save_checkpoint(path, to_checkpoint()); }

CompositeModel CompositeModel::load(const std::filesystem::path& path) {
    return from_checkpoint(load_checkpoint(path));
}

void CompositeModel::load_module(Module m, const CheckpointData& data) {
    for_each_base(m, [&](Parameter& p) {
        const NamedTensor& t = data.at(p.name);
        if (t.value.rows() != p.value.rows() || t.value.cols() != p.value.cols()) {
            throw std::runtime_error("tensor '" + p.name + "' has the wrong shape");
        }
        p.value = t.value;
    });
}

}  // namespace slotllm
