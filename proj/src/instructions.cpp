// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotllm/instructions.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <stdexcept>

namespace slotllm::inline SLOTLLM_ABI {

std::string to_string(Task t) {
    switch (t) {
        case Task::SLOT: return "SLOT";
        case Task::AST: return "AST";
        case Task::SIT: return "SIT";
        case Task::SQIT: return "SQIT";
        case Task::CONT: return "CONT";
    }
    return "SLOT";
}

Task task_from_string(const std::string& s) {
    const std::string u = [&] {
        std::string r = s;
        for (char& c : r) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        return r;
    }();
    if (u == "SLOT") return Task::SLOT;
    if (u == "AST") return Task::AST;
    if (u == "SIT") return Task::SIT;
    if (u == "SQIT") return Task::SQIT;
    if (u == "CONT") return Task::CONT;
    throw std::invalid_argument("unknown task '" + s + "' (expected SLOT|AST|SIT|SQIT|CONT)");
}

json to_json(const InstructionSample& s) {
    json j = {{"audio_ref", s.audio_ref.empty() ? json(nullptr) : json(s.audio_ref)},
              {"instruction", s.instruction},
              {"response", s.response},
              {"task", to_string(s.task)},
              {"meta",
               {{"context_T", s.meta.context_T},
                {"context_T_drawn", s.meta.context_T_drawn},
                {"n_distractors", s.meta.n_distractors},
                {"template_id", s.meta.template_id}}}};
    if (!s.queried_labels.empty()) j["queried_labels"] = s.queried_labels;
    return j;
}

InstructionSample instruction_sample_from_json(const json& j) {
    InstructionSample s;
    if (j.contains("audio_ref") && j.at("audio_ref").is_string()) s.audio_ref = j.at("audio_ref").get<std::string>();
    s.instruction = j.at("instruction").get<std::string>();
    s.response = j.at("response").get<std::string>();
    s.task = task_from_string(j.at("task").get<std::string>());
    const json& m = j.at("meta");
    s.meta.context_T = m.value("context_T", 0);
    s.meta.context_T_drawn = m.value("context_T_drawn", s.meta.context_T);
    s.meta.n_distractors = m.value("n_distractors", 0);
    s.meta.template_id = m.value("template_id", -1);
    if (j.contains("queried_labels")) s.queried_labels = j.at("queried_labels").get<std::vector<std::string>>();
    return s;
}

void save_samples(const std::filesystem::path& path, const std::vector<InstructionSample>& samples) {
    std::vector<json> rows;
    rows.reserve(samples.size());
    for (const auto& s : samples) rows.push_back(to_json(s));
    write_jsonl(path, rows);
}

std::vector<InstructionSample> load_samples(const std::filesystem::path& path) {
    std::vector<InstructionSample> out;
    std::size_t line = 0;
    for (const json& j : read_jsonl(path)) {
        ++line;
        try {
            out.push_back(instruction_sample_from_json(j));
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + ": line " + std::to_string(line) + ": " + e.what());
        }
    }
    return out;
}

void InstructionBuildConfig::validate() const {
    if (T_max < 0) throw std::invalid_argument("instructions.T_max must be >= 0");
    if (S_min < 1 || S_max < S_min) throw std::invalid_argument("instructions.S_min/S_max must satisfy 1 <= S_min <= S_max");
    if (n_templates < 1 || n_templates > static_cast<int>(prompt_templates().size())) {
        throw std::invalid_argument("instructions.n_templates must be in [1, " +
                                    std::to_string(prompt_templates().size()) + "]");
    }
    if (query_specific_slots < 0.0 || query_specific_slots > 1.0) {
        throw std::invalid_argument("instructions.query_specific_slots must be in [0, 1]");
    }
}

const std::vector<std::string>& prompt_templates() {
    static const std::vector<std::string> templates = {
        "Using the previous context, identify and extract slot values from {slots} in the current utterance. Do not "
        "extract slot values from the context itself. Output should be in JSON format. Context: ``` {context} ```",
        "Based on the previous context, find slot values for {slots} in the current speech. Ensure that slot "
        "extraction is only from the current utterance, not the context. Output in JSON. Previous context: ``` "
        "{context} ```",
        "Refer to the previous context to help identify slot values from {slots} in the current audio. Slots should "
        "be extracted from the current utterance only. Output must be in JSON format. Context: ``` {context} ```",
        "Utilize the previous context to extract slot values from {slots} in the current utterance. Do not consider "
        "the context for slot extraction. Format output as JSON. Context: ``` {context} ```",
        "Identify slot values for {slots} in the current speech, using the previous context for guidance. Slot "
        "values should not be taken from the context itself. Output in JSON format. Context: ``` {context} ```",
        "Extract the values of {slots} from the current utterance, treating the earlier turns as background only. "
        "Return JSON. Context: ``` {context} ```",
        "Given the conversation so far, list slot values for {slots} mentioned in the current speech. Ignore values "
        "that appear only in the context. Answer in JSON. Context: ``` {context} ```",
        "Find {slots} in the current audio and return their values as JSON. The previous turns are context only. "
        "Context: ``` {context} ```",
        "Listen to the current utterance and fill the slots {slots}. Do not copy values from the context. Respond "
        "with JSON. Context: ``` {context} ```",
        "With the help of the previous context, extract values for {slots} from the current turn only. Output JSON. "
        "Previous context: ``` {context} ```",
    };
    return templates;
}

json template_registry() {
    json arr = json::array();
    const auto& t = prompt_templates();
    for (std::size_t i = 0; i < t.size(); ++i) arr.push_back({{"id", i}, {"text", t[i]}});
    return {{"version", 1}, {"templates", std::move(arr)}};
}

std::string render_prompt(int template_id, const std::vector<std::string>& slots,
                          const std::vector<std::string>& context) {
    const auto& t = prompt_templates();
    if (template_id < 0 || template_id >= static_cast<int>(t.size())) {
        throw std::out_of_range("unknown template_id " + std::to_string(template_id));
    }
    std::string out = t[static_cast<std::size_t>(template_id)];
    const std::string slot_text = slots.empty() ? "all slot types" : "[" + join(slots, ", ") + "]";
    const std::string ctx_text = join(context, "\n");
    auto replace = [&](const std::string& key, const std::string& value) {
        const auto at = out.find(key);
        if (at != std::string::npos) out.replace(at, key.size(), value);
    };
    replace("{slots}", slot_text);
    replace("{context}", ctx_text);
    return out;
}

std::string canonical_slot_json(const SlotMap& slots) { return slots_to_json(slots).dump(); }

std::vector<InstructionSample> build_slot_samples(const Conversation& conv, const InstructionBuildConfig& cfg,
                                                  const std::vector<std::string>& label_inventory) {
    cfg.validate();
    if (!conv.annotations) throw std::invalid_argument("build_slot_samples: conversation '" + conv.id + "' is unannotated");
    conv.validate();
    std::mt19937_64 rng(mix_seed(cfg.seed, fnv1a64(conv.id)));
    std::uniform_int_distribution<int> draw_T(0, cfg.T_max);
    std::uniform_int_distribution<int> draw_S(cfg.S_min, cfg.S_max);
    std::uniform_int_distribution<int> draw_template(0, cfg.n_templates - 1);
    std::bernoulli_distribution query(cfg.query_specific_slots);

    std::vector<InstructionSample> out;
    for (std::size_t i = 0; i < conv.turns.size(); ++i) {
        const TurnAnnotation& ann = (*conv.annotations)[i];
        InstructionSample s;
        s.task = Task::SLOT;
        s.audio_ref = conv.turns[i].audio_ref;
        s.meta.context_T_drawn = draw_T(rng);
        s.meta.context_T = std::min<int>(s.meta.context_T_drawn, static_cast<int>(i));
        std::vector<std::string> context;
        for (std::size_t k = i - static_cast<std::size_t>(s.meta.context_T); k < i; ++k) {
            context.push_back(conv.turns[k].text);
        }
        s.meta.template_id = draw_template(rng);
        if (query(rng)) {
            std::vector<std::string> gold;
            for (const auto& [label, value] : ann.slots) gold.push_back(label);
            std::vector<std::string> candidates;
            for (const std::string& l : label_inventory) {
                if (std::find(gold.begin(), gold.end(), l) == gold.end()) candidates.push_back(l);
            }
            std::shuffle(candidates.begin(), candidates.end(), rng);
            const int S = std::min<int>(draw_S(rng), static_cast<int>(candidates.size()));
            s.meta.n_distractors = S;
            s.queried_labels = gold;
            s.queried_labels.insert(s.queried_labels.end(), candidates.begin(), candidates.begin() + S);
            std::shuffle(s.queried_labels.begin(), s.queried_labels.end(), rng);
        }
        s.instruction = render_prompt(s.meta.template_id, s.queried_labels, context);
        // Every gold label is queried, so restricting the response to queried labels keeps all of them.
        s.response = canonical_slot_json(ann.slots);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<InstructionSample> build_slot_samples(const std::vector<Conversation>& convs,
                                                  const InstructionBuildConfig& cfg,
                                                  const std::vector<std::string>& label_inventory) {
    std::vector<InstructionSample> out;
    for (const Conversation& c : convs) {
        auto part = build_slot_samples(c, cfg, label_inventory);
        out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return out;
}

std::vector<InstructionSample> build_ast_samples(const std::vector<Conversation>& convs) {
    std::vector<InstructionSample> out;
    for (const Conversation& c : convs) {
        for (const Turn& t : c.turns) {
            InstructionSample s;
            s.task = Task::AST;
            s.audio_ref = t.audio_ref;
            s.instruction = kTranscribeInstruction;
            s.response = t.text;
            out.push_back(std::move(s));
        }
    }
    return out;
}

ContinuationBuild build_continuation_samples(const std::vector<Conversation>& convs, const ContinuationFn& lm,
                                             int max_new) {
    if (max_new < 1) throw std::invalid_argument("build_continuation_samples: max_new must be >= 1");
    ContinuationBuild r;
    for (const Conversation& c : convs) {
        for (const Turn& t : c.turns) {
            try {
                std::string cont = trim(lm(t.text, max_new));
                if (cont.empty()) {
                    r.skipped.push_back(t.audio_ref + ": empty continuation");
                    continue;
                }
                InstructionSample s;
                s.task = Task::CONT;
                s.audio_ref = t.audio_ref;
                s.response = std::move(cont);
                r.samples.push_back(std::move(s));
            } catch (const std::exception& e) {
                r.skipped.push_back(t.audio_ref + ": " + e.what());
            }
        }
    }
    return r;
}

namespace {

const std::vector<std::string> kQueryWords = {"anna", "boston", "laptop", "river", "green", "monday", "coffee",
                                              "window", "garden", "music", "paper", "orange", "tiger", "silver"};

struct SitFamily {
    const char* instruction;
    std::string (*answer)(const std::vector<std::string>& words);
};

const std::vector<SitFamily>& sit_families() {
    static const std::vector<SitFamily> families = {
        {"Repeat what was said.", [](const std::vector<std::string>& w) { return join(w, " "); }},
        {"What is the first word?", [](const std::vector<std::string>& w) { return w.front(); }},
        {"What is the last word?", [](const std::vector<std::string>& w) { return w.back(); }},
        {"How many words were spoken?", [](const std::vector<std::string>& w) { return std::to_string(w.size()); }},
        {"Say the words in reverse order.",
         [](const std::vector<std::string>& w) {
             std::vector<std::string> r(w.rbegin(), w.rend());
             return join(r, " ");
         }},
    };
    return families;
}

std::vector<const Turn*> all_turns(const std::vector<Conversation>& convs) {
    std::vector<const Turn*> turns;
    for (const Conversation& c : convs) {
        for (const Turn& t : c.turns) turns.push_back(&t);
    }
    return turns;
}

// A self-contained spoken query and its answer.
std::pair<std::string, std::string> sqit_item(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> family(0, 4);
    std::uniform_int_distribution<int> small(1, 20);
    const std::string& word = kQueryWords[std::uniform_int_distribution<std::size_t>(0, kQueryWords.size() - 1)(rng)];
    switch (family(rng)) {
        case 0: {
            const int a = small(rng), b = small(rng);
            return {"what is " + std::to_string(a) + " plus " + std::to_string(b), std::to_string(a + b)};
        }
        case 1: return {"repeat the word " + word, word};
        case 2: {
            const int n = small(rng);
            return {"what number comes after " + std::to_string(n), std::to_string(n + 1)};
        }
        case 3: {
            std::string spelled;
            for (char c : word) {
                if (!spelled.empty()) spelled += ' ';
                spelled += c;
            }
            return {"spell the word " + word, spelled};
        }
        default: return {"say hello to " + word, "hello " + word};
    }
}

}  // namespace

std::vector<InstructionSample> build_sit_samples(const std::vector<Conversation>& convs, std::uint64_t seed,
                                                 int count) {
    const auto turns = all_turns(convs);
    if (turns.empty() || count <= 0) return {};
    std::mt19937_64 rng(mix_seed(seed, 0x517ULL));
    std::uniform_int_distribution<std::size_t> pick_turn(0, turns.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_family(0, sit_families().size() - 1);
    std::vector<InstructionSample> out;
    for (int i = 0; i < count; ++i) {
        const Turn& t = *turns[pick_turn(rng)];
        const SitFamily& f = sit_families()[pick_family(rng)];
        InstructionSample s;
        s.task = Task::SIT;
        s.audio_ref = t.audio_ref;
        s.instruction = f.instruction;
        s.response = f.answer(split_whitespace(t.text));
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<InstructionSample> build_sqit_samples(int count, std::uint64_t seed, AudioCatalog& catalog) {
    std::mt19937_64 rng(mix_seed(seed, 0x5917ULL));
    std::vector<InstructionSample> out;
    for (int i = 0; i < count; ++i) {
        auto [query, answer] = sqit_item(rng);
        InstructionSample s;
        s.task = Task::SQIT;
        s.audio_ref = "sqit/" + std::to_string(seed) + "/" + std::to_string(i);
        catalog.add(s.audio_ref, query);
        s.response = answer;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<TextTriplet> local_instruction_triplets(const std::vector<Conversation>& convs, std::uint64_t seed,
                                                    int count) {
    std::vector<TextTriplet> out;
    AudioCatalog scratch;
    register_turns(scratch, convs);
    for (const InstructionSample& s : build_sit_samples(convs, seed, count)) {
        out.push_back({s.instruction, scratch.text(s.audio_ref), s.response});
    }
    for (const InstructionSample& s : build_sqit_samples(count, seed, scratch)) {
        out.push_back({"", scratch.text(s.audio_ref), s.response});
    }
    return out;
}

void MixSpec::validate() const {
    bool any = false;
    for (const auto& [task, n] : counts) {
        if (n < 0) throw std::invalid_argument("mix: count for " + to_string(task) + " must be >= 0");
        any = any || n > 0;
    }
    if (!any) throw std::invalid_argument("mix: empty spec (no task has a positive count)");
}

MixResult mix_multitask(const std::map<Task, std::vector<InstructionSample>>& datasets, const MixSpec& spec,
                        std::uint64_t seed) {
    spec.validate();
    MixResult r;
    std::mt19937_64 rng(mix_seed(seed, 0x313ULL));
    for (const auto& [task, n] : spec.counts) {
        if (n == 0) continue;
        auto it = datasets.find(task);
        if (it == datasets.end() || it->second.empty()) {
            throw std::invalid_argument("mix: no samples available for task " + to_string(task));
        }
        const auto& pool = it->second;
        if (static_cast<std::size_t>(n) <= pool.size()) {
            std::vector<std::size_t> idx(pool.size());
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
            std::shuffle(idx.begin(), idx.end(), rng);
            for (int i = 0; i < n; ++i) r.samples.push_back(pool[idx[static_cast<std::size_t>(i)]]);
        } else {
            r.with_replacement.push_back(task);
            std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
            for (int i = 0; i < n; ++i) r.samples.push_back(pool[pick(rng)]);
        }
    }
    std::shuffle(r.samples.begin(), r.samples.end(), rng);
    return r;
}

void register_turns(AudioCatalog& catalog, const std::vector<Conversation>& convs) {
    for (const Conversation& c : convs) {
        for (const Turn& t : c.turns) catalog.add(t.audio_ref, t.text);
    }
}

}  // namespace slotllm
