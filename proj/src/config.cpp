// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotllm/experiment.hpp"

#include <yaml-cpp/yaml.h>

#include <limits>
#include <type_traits>

namespace slotllm::inline SLOTLLM_ABI {

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
    std::string s = "invalid config:";
    for (const std::string& p : problems) s += "\n  - " + p;
    return s;
}

template <class T>
const char* type_name() {
    if constexpr (std::is_same_v<T, bool>) return "a boolean";
    else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) return "a non-negative integer";
    else if constexpr (std::is_integral_v<T>) return "an integer";
    else if constexpr (std::is_floating_point_v<T>) return "a number";
    else if constexpr (std::is_same_v<T, std::string>) return "a string";
    else return "a list of strings";
}

template <class T>
bool json_matches(const json& j) {
    if constexpr (std::is_same_v<T, bool>) return j.is_boolean();
    else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) return j.is_number_unsigned();
    else if constexpr (std::is_integral_v<T>) {
        if (!j.is_number_integer()) return false;
        if (j.is_number_unsigned()) return j.get<std::uint64_t>() <= static_cast<std::uint64_t>(std::numeric_limits<T>::max());
        const auto v = j.get<std::int64_t>();
        return v >= std::numeric_limits<T>::min() && v <= std::numeric_limits<T>::max();
    } else if constexpr (std::is_floating_point_v<T>) return j.is_number();
    else if constexpr (std::is_same_v<T, std::string>) return j.is_string();
    else {
        if (!j.is_array()) return false;
        for (const json& e : j) {
            if (!e.is_string()) return false;
        }
        return true;
    }
}

/// Serializes visited fields.
class Writer {
public:
    json out = json::object();

    template <class T>
    void operator()(const char* key, T& value) {
        out[key] = value;
    }
    template <class E, class ToS, class FromS>
    void convert(const char* key, E& value, ToS to_s, FromS) {
        out[key] = to_s(value);
    }
    template <class F>
    void section(const char* key, F&& fn) {
        Writer w;
        fn(w);
        out[key] = std::move(w.out);
    }
};

/// Reads visited fields from an overlay, recording problems by dotted key.
class Reader {
public:
    Reader(const json& j, std::string prefix, std::vector<std::string>& problems)
        : j_(j), prefix_(std::move(prefix)), problems_(problems) {}

    template <class T>
    void operator()(const char* key, T& value) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        const json& v = j_.at(key);
        if (!json_matches<T>(v)) {
            problems_.push_back(prefix_ + key + ": expected " + type_name<T>() + ", got " + v.dump());
            return;
        }
        value = v.get<T>();
    }
    template <class E, class ToS, class FromS>
    void convert(const char* key, E& value, ToS, FromS from_s) {
        std::string s;
        seen_.insert(key);
        if (!j_.contains(key)) return;
        if (!j_.at(key).is_string()) {
            problems_.push_back(prefix_ + key + ": expected a string, got " + j_.at(key).dump());
            return;
        }
        try {
            value = from_s(j_.at(key).get<std::string>());
        } catch (const std::exception& e) {
            problems_.push_back(prefix_ + key + ": " + e.what());
        }
    }
    template <class F>
    void section(const char* key, F&& fn) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        if (!j_.at(key).is_object()) {
            problems_.push_back(prefix_ + key + ": expected a mapping");
            return;
        }
        Reader r(j_.at(key), prefix_ + key + ".", problems_);
        fn(r);
        r.finish();
    }
    void ignore(const char* key) { seen_.insert(key); }
    void finish() {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.count(k)) problems_.push_back(prefix_ + k + ": unknown key");
        }
    }
    const std::string& prefix() const { return prefix_; }

private:
    const json& j_;
    std::string prefix_;
    std::vector<std::string>& problems_;
    std::set<std::string> seen_;
};

std::string path_to_s(const std::filesystem::path& p) { return p.string(); }
std::filesystem::path path_from_s(const std::string& s) { return s; }

template <class V>
void visit_corpus(V& v, CorpusSection& c) {
    v("train_conversations", c.train_conversations);
    v("eval_conversations", c.eval_conversations);
    v("ood_conversations", c.ood_conversations);
    v("grammar_seed", c.grammar_seed);
    v("n_seen_labels", c.grammar.n_seen_labels);
    v("shifted_seen_labels", c.grammar.shifted_seen_labels);
    v("slot_turn_rate", c.grammar.slot_turn_rate);
    v("two_slot_rate", c.grammar.two_slot_rate);
    v("min_turns", c.grammar.min_turns);
    v("max_turns", c.grammar.max_turns);
}

template <class V>
void visit_audio(V& v, AudioSettings& a) {
    v("frame_rate_per_char", a.frame_rate_per_char);
    v("noise_sigma", a.noise_sigma);
    v("noise_seed", a.noise_seed);
    v("d_audio", a.d_audio);
    v("codebook_seed", a.codebook_seed);
}

template <class V>
void visit_annotation(V& v, ClientConfig& c) {
    v.convert("mode", c.mode, [](ClientMode m) { return to_string(m); }, client_mode_from_string);
    v("base_url", c.base_url);
    v("model", c.model);
    v("api_key_env", c.api_key_env);
    v("timeout_seconds", c.timeout_seconds);
    v("max_retries", c.max_retries);
    v("backoff_initial_seconds", c.backoff_initial_seconds);
    v("temperature", c.temperature);
    v.convert("fixture_dir", c.fixture_dir, path_to_s, path_from_s);
}

template <class V>
void visit_instructions(V& v, InstructionSection& s) {
    v("T_max", s.build.T_max);
    v("S_min", s.build.S_min);
    v("S_max", s.build.S_max);
    v("n_templates", s.build.n_templates);
    v("query_specific_slots", s.build.query_specific_slots);
    v("seed", s.build.seed);
    v("cont_max_new", s.cont_max_new);
}

template <class V>
void visit_model(V& v, ModelConfig& m) {
    v.section("encoder", [&](auto& e) {
        e("d_enc", m.encoder.d_enc);
        e("layers", m.encoder.layers);
        e("kernel", m.encoder.kernel);
    });
    v.section("adapter", [&](auto& a) {
        AdapterConfig& c = m.adapter;
        a.convert("kind", c.kind, [](AdapterKind k) { return to_string(k); }, adapter_kind_from_string);
        a("subsample", c.subsample);
        a("bias", c.bias);
        a("cnn_layers", c.cnn_layers);
        a("cnn_kernel", c.cnn_kernel);
        a("cnn_stride", c.cnn_stride);
        a("cnn_channels", c.cnn_channels);
        a("stack", c.stack);
        a("mlp_hidden", c.mlp_hidden);
        a("tf_d_model", c.tf_d_model);
        a("tf_layers", c.tf_layers);
        a("tf_heads", c.tf_heads);
        a("tf_d_ff", c.tf_d_ff);
    });
    v.section("lm", [&](auto& l) {
        l("d_model", m.lm.d_model);
        l("layers", m.lm.layers);
        l("heads", m.lm.heads);
        l("d_ff", m.lm.d_ff);
    });
}

template <class V>
void visit_foundation(V& v, FoundationConfig& f, std::string& cache) {
    v("seed", f.seed);
    v("conversations", f.conversations);
    v("instruction_items", f.instruction_items);
    v("lm_steps", f.lm_steps);
    v("lm_batch", f.lm_batch);
    v("lm_lr", f.lm_lr);
    v("encoder_steps", f.encoder_steps);
    v("encoder_batch", f.encoder_batch);
    v("encoder_lr", f.encoder_lr);
    v("cache_dir", cache);
}

template <class V>
void visit_lora(V& v, LoraSpec& l) {
    v("rank", l.rank);
    v("alpha", l.alpha);
    v("dropout", l.dropout);
    v("init_std", l.init_std);
}

template <class V>
void visit_train(V& v, TrainConfig& t) {
    v("max_lr", t.max_lr);
    v("warmup_frac", t.warmup_frac);
    v("epochs", t.epochs);
    v("steps", t.steps);
    v("effective_batch", t.effective_batch);
    v("micro_batch", t.micro_batch);
    v("grad_clip", t.grad_clip);
    v("beta1", t.beta1);
    v("beta2", t.beta2);
    v("eps", t.eps);
    v("weight_decay", t.weight_decay);
    v("divergence_ratio", t.divergence_ratio);
    v("eval_samples", t.eval_samples);
}

std::string span_to_s(SpanMode m) { return m == SpanMode::audio ? "audio" : "text"; }
SpanMode span_from_s(const std::string& s) {
    if (s == "audio") return SpanMode::audio;
    if (s == "text") return SpanMode::text;
    throw std::invalid_argument("unknown span mode '" + s + "' (expected audio|text)");
}
std::string objective_to_s(StageObjectiveKind k) { return k == StageObjectiveKind::samples ? "samples" : "asr_frames"; }
StageObjectiveKind objective_from_s(const std::string& s) {
    if (s == "samples") return StageObjectiveKind::samples;
    if (s == "asr_frames") return StageObjectiveKind::asr_frames;
    throw std::invalid_argument("unknown objective '" + s + "' (expected samples|asr_frames)");
}

std::vector<std::string> task_names(const std::vector<Task>& ts) {
    std::vector<std::string> out;
    for (Task t : ts) out.push_back(to_string(t));
    return out;
}

std::vector<std::string> module_names(const ModuleSet& ms) {
    std::vector<std::string> out;
    for (Module m : ms) out.push_back(to_string(m));
    return out;
}

Stage read_stage(const json& j, const TrainConfig& base, const std::string& prefix, std::vector<std::string>& problems) {
    Stage s;
    s.tasks.clear();
    if (!j.is_object()) {
        problems.push_back(prefix + ": expected a mapping");
        return s;
    }
    Reader r(j, prefix + ".", problems);
    r("name", s.name);
    std::vector<std::string> tasks = {"SLOT"}, trainable;
    r("tasks", tasks);
    for (const std::string& t : tasks) {
        try {
            s.tasks.push_back(task_from_string(t));
        } catch (const std::exception& e) {
            problems.push_back(prefix + ".tasks: " + e.what());
        }
    }
    r("trainable", trainable);
    for (const std::string& m : trainable) {
        try {
            s.trainable.insert(module_from_string(m));
        } catch (const std::exception& e) {
            problems.push_back(prefix + ".trainable: " + e.what());
        }
    }
    r.convert("span", s.span, span_to_s, span_from_s);
    r.convert("objective", s.objective, objective_to_s, objective_from_s);
    r("lora", s.lora);
    r("lora_on_encoder", s.lora_on_encoder);
    r("merge_lora_after", s.merge_lora_after);
    r("budget_frac", s.budget_frac);
    r("init", s.init);
    r.ignore("overrides");
    if (j.contains("overrides")) {
        TrainConfig t = base;
        if (j.at("overrides").is_object()) {
            Reader o(j.at("overrides"), prefix + ".overrides.", problems);
            visit_train(o, t);
            o.finish();
        } else {
            problems.push_back(prefix + ".overrides: expected a mapping");
        }
        s.overrides = t;
    }
    r.finish();
    return s;
}

json to_json_value(const YAML::Node& n, const std::string& where) {
    switch (n.Type()) {
        case YAML::NodeType::Null:
        case YAML::NodeType::Undefined:
            return nullptr;
        case YAML::NodeType::Sequence: {
            json a = json::array();
            for (std::size_t i = 0; i < n.size(); ++i) a.push_back(to_json_value(n[i], where + "[" + std::to_string(i) + "]"));
            return a;
        }
        case YAML::NodeType::Map: {
            json o = json::object();
            for (const auto& kv : n) {
                const std::string key = kv.first.as<std::string>();
                if (o.contains(key)) throw ConfigError({where + key + ": duplicate key"});
                o[key] = to_json_value(kv.second, where + key + ".");
            }
            return o;
        }
        case YAML::NodeType::Scalar: {
            const std::string s = n.Scalar();
            // Quoted scalars carry the "!" tag and stay strings.
            if (n.Tag() == "!") return s;
            if (s == "~" || s == "null" || s == "Null" || s == "NULL") return nullptr;
            if (s == "true" || s == "True" || s == "TRUE") return true;
            if (s == "false" || s == "False" || s == "FALSE") return false;
            try {
                std::size_t used = 0;
                if (!s.empty() && s[0] != '+' && s.find_first_of(".eE") == std::string::npos) {
                    if (s[0] == '-') {
                        const long long v = std::stoll(s, &used);
                        if (used == s.size()) return v;
                    } else {
                        const unsigned long long v = std::stoull(s, &used);
                        if (used == s.size()) return v;
                    }
                }
                const double d = std::stod(s, &used);
                if (used == s.size()) return d;
            } catch (const std::exception&) {
            }
            return s;
        }
    }
    return nullptr;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::invalid_argument(join_problems(problems)), problems_(std::move(problems)) {}

ExperimentConfig::ExperimentConfig() {
    // Desk-scale defaults: a small model trained with an accelerated schedule.
    model.adapter.mlp_hidden = 256;
    model.adapter.cnn_channels = 128;
    model.adapter.tf_d_model = 128;
    model.adapter.tf_d_ff = 256;
    model.adapter.tf_heads = 4;
    audio.frame_rate_per_char = 8;
    train.max_lr = 2e-3;
    train.effective_batch = 16;
    train.micro_batch = 4;
    train.eval_samples = 100;
    strategies = {StrategyPlan::preset(StrategyKind::single)};
}

void ExperimentConfig::resolve() {
    std::vector<std::string> problems;
    auto check = [&](auto&& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            problems.push_back(e.what());
        }
    };
    model.encoder.d_audio = audio.d_audio;
    model.adapter.d_enc = model.encoder.d_enc;
    model.adapter.d_llm = model.lm.d_model;
    model.frame_rate_per_char = audio.frame_rate_per_char;
    model.lm.vocab = build_shared_tokenizer().size();

    if (name.empty()) problems.push_back("name: must be non-empty");
    if (corpus.train_conversations < 1) problems.push_back("corpus.train_conversations: must be >= 1");
    if (corpus.eval_conversations < 1) problems.push_back("corpus.eval_conversations: must be >= 1");
    if (corpus.ood_conversations < 0) problems.push_back("corpus.ood_conversations: must be >= 0");
    if (corpus.grammar.min_turns < 1 || corpus.grammar.max_turns < corpus.grammar.min_turns) {
        problems.push_back("corpus.min_turns/max_turns: must satisfy 1 <= min_turns <= max_turns");
    }
    check([&] { corpus.grammar.validate(); });
    check([&] { audio.validate(); });
    check([&] { annotation.validate(); });
    check([&] { instructions.build.validate(); });
    if (instructions.cont_max_new < 1) problems.push_back("instructions.cont_max_new: must be >= 1");
    check([&] { model.validate(); });
    check([&] { foundation.validate(); });
    check([&] { lora.validate(); });
    check([&] { train.validate(); });
    if (strategies.empty()) problems.push_back("strategies: at least one strategy is required");
    std::set<std::string> names;
    for (const StrategyPlan& p : strategies) {
        if (!names.insert(p.name).second) problems.push_back("strategies: duplicate name '" + p.name + "'");
        check([&] { p.validate(); });
        for (const Stage& s : p.stages) {
            for (Task t : s.tasks) {
                if (t != Task::SLOT && t != Task::AST && t != Task::CONT) {
                    problems.push_back("strategies." + p.name + "." + s.name + ".tasks: " + to_string(t) +
                                       " is a pretraining-only task");
                }
            }
        }
    }
    for (const auto& [t, n] : mix) {
        if (n < 0) problems.push_back("mix." + to_string(t) + ": must be >= 0");
    }
    for (const std::string& b : baselines) {
        if (b != "text" && b != "cascade" && b != "speechllm") {
            problems.push_back("baselines: unknown baseline '" + b + "' (expected text|cascade|speechllm)");
        }
    }
    if (max_new < 1) problems.push_back("evaluation.max_new: must be >= 1");
    if (!problems.empty()) throw ConfigError(problems);
}

json ExperimentConfig::to_json() const {
    ExperimentConfig c = *this;
    Writer w;
    w("name", c.name);
    w("seed", c.seed);
    w.section("corpus", [&](auto& v) { visit_corpus(v, c.corpus); });
    w.section("audio", [&](auto& v) { visit_audio(v, c.audio); });
    w.section("annotation", [&](auto& v) { visit_annotation(v, c.annotation); });
    w.section("instructions", [&](auto& v) { visit_instructions(v, c.instructions); });
    w.section("model", [&](auto& v) { visit_model(v, c.model); });
    w.section("foundation", [&](auto& v) { visit_foundation(v, c.foundation, c.foundation_cache); });
    w.section("lora", [&](auto& v) { visit_lora(v, c.lora); });
    w.section("train", [&](auto& v) { visit_train(v, c.train); });
    json strategies_j = json::array();
    for (const StrategyPlan& p : strategies) {
        json stages = json::array();
        for (const Stage& s : p.stages) stages.push_back(stage_to_json(s));
        strategies_j.push_back({{"name", p.name}, {"stages", std::move(stages)}});
    }
    w.out["strategies"] = std::move(strategies_j);
    json mix_j = json::object();
    for (const auto& [t, n] : mix) mix_j[to_string(t)] = n;
    w.out["mix"] = std::move(mix_j);
    w.out["baselines"] = baselines;
    w.out["evaluation"] = {{"max_new", max_new}};
    return w.out;
}

json stage_to_json(const Stage& s) {
    json j = {{"name", s.name},
              {"tasks", task_names(s.tasks)},
              {"span", span_to_s(s.span)},
              {"objective", objective_to_s(s.objective)},
              {"trainable", module_names(s.trainable)},
              {"lora", s.lora},
              {"lora_on_encoder", s.lora_on_encoder},
              {"merge_lora_after", s.merge_lora_after},
              {"budget_frac", s.budget_frac},
              {"init", s.init}};
    if (s.overrides) {
        TrainConfig t = *s.overrides;
        Writer w;
        visit_train(w, t);
        j["overrides"] = std::move(w.out);
    }
    return j;
}

Stage stage_from_json(const json& j, const TrainConfig& base) {
    std::vector<std::string> problems;
    Stage s = read_stage(j, base, "stage", problems);
    if (!problems.empty()) throw ConfigError(problems);
    return s;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c;
    std::vector<std::string> problems;
    if (!j.is_object()) throw ConfigError({"<root>: expected a mapping"});
    Reader r(j, "", problems);
    r("name", c.name);
    r("seed", c.seed);
    r.section("corpus", [&](auto& v) { visit_corpus(v, c.corpus); });
    r.section("audio", [&](auto& v) { visit_audio(v, c.audio); });
    r.section("annotation", [&](auto& v) { visit_annotation(v, c.annotation); });
    r.section("instructions", [&](auto& v) { visit_instructions(v, c.instructions); });
    r.section("model", [&](auto& v) { visit_model(v, c.model); });
    r.section("foundation", [&](auto& v) { visit_foundation(v, c.foundation, c.foundation_cache); });
    r.section("lora", [&](auto& v) { visit_lora(v, c.lora); });
    r.section("train", [&](auto& v) { visit_train(v, c.train); });
    r.section("evaluation", [&](auto& v) { v("max_new", c.max_new); });
    r("baselines", c.baselines);

    r.ignore("mix");
    if (j.contains("mix")) {
        if (!j.at("mix").is_object()) {
            problems.push_back("mix: expected a mapping of task to count");
        } else {
            for (const auto& [k, v] : j.at("mix").items()) {
                try {
                    const Task t = task_from_string(k);
                    if (!v.is_number_integer()) throw std::invalid_argument("expected an integer count");
                    c.mix[t] = v.get<int>();
                } catch (const std::exception& e) {
                    problems.push_back("mix." + k + ": " + e.what());
                }
            }
        }
    }

    r.ignore("strategies");
    if (j.contains("strategies")) {
        c.strategies.clear();
        const json& list = j.at("strategies");
        if (!list.is_array()) {
            problems.push_back("strategies: expected a list");
        } else {
            for (std::size_t i = 0; i < list.size(); ++i) {
                const std::string where = "strategies[" + std::to_string(i) + "]";
                const json& e = list[i];
                if (e.is_string()) {
                    try {
                        c.strategies.push_back(StrategyPlan::preset(strategy_from_string(e.get<std::string>())));
                    } catch (const std::exception& ex) {
                        problems.push_back(where + ": " + ex.what());
                    }
                    continue;
                }
                if (!e.is_object()) {
                    problems.push_back(where + ": expected a preset name or a mapping");
                    continue;
                }
                StrategyPlan p;
                Reader pr(e, where + ".", problems);
                pr("name", p.name);
                pr.ignore("stages");
                if (!e.contains("stages") || !e.at("stages").is_array()) {
                    problems.push_back(where + ".stages: expected a list");
                } else {
                    for (std::size_t k = 0; k < e.at("stages").size(); ++k) {
                        p.stages.push_back(read_stage(e.at("stages")[k], c.train,
                                                      where + ".stages[" + std::to_string(k) + "]", problems));
                    }
                }
                pr.finish();
                c.strategies.push_back(std::move(p));
            }
        }
    }
    r.finish();
    try {
        c.resolve();
    } catch (const ConfigError& e) {
        problems.insert(problems.end(), e.problems().begin(), e.problems().end());
    }
    if (!problems.empty()) throw ConfigError(problems);
    return c;
}

std::string ExperimentConfig::hash() const { return sha256_hex(to_json().dump()); }

std::set<Task> ExperimentConfig::required_tasks() const {
    std::set<Task> out = {Task::SLOT};
    for (const StrategyPlan& p : strategies) {
        for (const Stage& s : p.stages) out.insert(s.tasks.begin(), s.tasks.end());
    }
    for (const auto& [t, n] : mix) out.insert(t);
    for (const std::string& b : baselines) {
        if (b == "cascade") out.insert(Task::AST);
    }
    return out;
}

const StrategyPlan& ExperimentConfig::strategy(const std::string& n) const {
    for (const StrategyPlan& p : strategies) {
        if (p.name == n) return p;
    }
    std::string known;
    for (const StrategyPlan& p : strategies) known += (known.empty() ? "" : ", ") + p.name;
    throw std::invalid_argument("no strategy named '" + n + "' in the config (have: " + known + ")");
}

json yaml_file_to_json(const std::filesystem::path& path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path.string());
    } catch (const YAML::BadFile&) {
        throw std::runtime_error("cannot read config " + path.string());
    } catch (const YAML::Exception& e) {
        throw ConfigError({path.string() + ": " + e.what()});
    }
    if (root.IsNull()) return json::object();
    return to_json_value(root, "");
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    return ExperimentConfig::from_json(yaml_file_to_json(path));
}

json config_schema() {
    ExperimentConfig c;
    c.resolve();
    const json defaults = c.to_json();
    std::function<json(const json&)> describe = [&](const json& v) -> json {
        if (v.is_object()) {
            json props = json::object();
            for (const auto& [k, sub] : v.items()) props[k] = describe(sub);
            return {{"type", "object"}, {"additionalProperties", false}, {"properties", props}};
        }
        json d;
        if (v.is_boolean()) d["type"] = "boolean";
        else if (v.is_number_integer()) d["type"] = "integer";
        else if (v.is_number()) d["type"] = "number";
        else if (v.is_string()) d["type"] = "string";
        else if (v.is_array()) d["type"] = "array";
        d["default"] = v;
        return d;
    };
    json schema = describe(defaults);
    schema["properties"]["strategies"]["description"] =
        "preset names (single, A, B, C) or {name, stages: [{name, tasks, span, objective, trainable, lora, "
        "lora_on_encoder, merge_lora_after, budget_frac, init, overrides}]}";
    schema["properties"]["mix"] = {{"type", "object"},
                                   {"description", "per-task training sample counts; 0 keeps every sample"},
                                   {"additionalProperties", {{"type", "integer"}, {"minimum", 0}}}};
    schema["properties"]["baselines"]["items"] = {{"enum", {"text", "cascade", "speechllm"}}};
    return schema;
}

}  // namespace slotllm
