// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotllm/annotator.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace slotllm::inline SLOTLLM_ABI {

namespace {

constexpr const char* kSystemPrompt = "You are an expert in Natural Language Processing.";

constexpr const char* kUserPrompt =
    "Your task is to identify all slots with their types and values in the given dialogue text between an agent "
    "and the customer turn by turn. The agent starts the dialogue. Return the output in a json format for every "
    "turn in the order given below between 'dialogue starts' and 'dialogue ends' where key names "
    "\"normalized_text\" for a turn line and \"slots\" for slot types and value as {slot_type: slot_value} "
    "dictionary items. If there are no slot types in the line, return NA. For \"normalized-text\", DON'T change the "
    "content by rephrasing, auto-correcting, splitting, combining and skipping words. Punctuate by adding all the "
    "required punctuation marks, then capitalize appropriately, and then apply all the text normalization rules "
    "such as numbers to digits, currencies to symbols, dates and times to readable form of the given text. Slots "
    "will ONLY be for very SPECIFIC mentions of things in real world, entities, named entities, events by customer "
    "and agent. Avoid abstract, description like mentions. Slot values should be normalized too. Don't skip any "
    "line. Output only the JSON format\n"
    "Dialogue starts:\n"
    "{dialog_transcript}\n"
    "Dialogue ends:";

constexpr const char* kPlaceholder = "{dialog_transcript}";

std::string one_line(const std::string& s) {
    std::string out = s;
    for (char& c : out) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    return trim(out);
}

std::string truncate(const std::string& s, std::size_t n) { return s.size() <= n ? s : s.substr(0, n) + "..."; }

}  // namespace

PromptTemplate PromptTemplate::standard() { return {kSystemPrompt, kUserPrompt}; }

AnnotationPrompt build_annotation_prompt(const Conversation& conv, const PromptTemplate& tmpl) {
    if (conv.turns.empty()) throw std::invalid_argument("build_annotation_prompt: conversation '" + conv.id + "' has no turns");
    const auto at = tmpl.user.find(kPlaceholder);
    if (at == std::string::npos) throw std::invalid_argument("annotation template lacks {dialog_transcript}");
    std::string transcript;
    for (std::size_t i = 0; i < conv.turns.size(); ++i) {
        if (i) transcript += '\n';
        transcript += conv.turns[i].speaker == Speaker::agent ? "Agent: " : "Customer: ";
        transcript += one_line(conv.turns[i].text);
    }
    std::string user = tmpl.user;
    user.replace(at, std::string(kPlaceholder).size(), transcript);
    return {tmpl.system, user};
}

std::string prompt_hash(const AnnotationPrompt& prompt) { return sha256_hex(prompt.system + '\x1f' + prompt.user); }

std::vector<TurnAnnotation> parse_annotation_response(const std::string& raw, int expected_turns) {
    if (expected_turns < 1) throw std::invalid_argument("parse_annotation_response: expected_turns must be >= 1");
    // Drop fence lines such as ```json and ```.
    std::string body;
    std::size_t pos = 0;
    while (pos <= raw.size()) {
        std::size_t end = raw.find('\n', pos);
        if (end == std::string::npos) end = raw.size();
        const std::string line = raw.substr(pos, end - pos);
        if (!starts_with(trim(line), "```")) {
            body += line;
            body += '\n';
        }
        pos = end + 1;
    }
    const auto open = body.find('[');
    const auto close = body.rfind(']');
    if (open == std::string::npos || close == std::string::npos || close < open) {
        throw AnnotationParseError("unparseable annotation response (no JSON array): " + truncate(raw, 400), raw);
    }
    json arr;
    try {
        arr = json::parse(body.substr(open, close - open + 1));
    } catch (const json::parse_error& e) {
        throw AnnotationParseError(std::string("unparseable annotation response (") + e.what() +
                                       "): " + truncate(raw, 400),
                                   raw);
    }
    std::vector<TurnAnnotation> out;
    for (const json& item : arr) {
        if (!item.is_object()) throw AnnotationParseError("annotation entry is not an object: " + truncate(raw, 400), raw);
        TurnAnnotation a;
        const char* text_key = item.contains("normalized_text") ? "normalized_text" : "normalized-text";
        if (item.contains(text_key) && item.at(text_key).is_string()) a.normalized_text = item.at(text_key).get<std::string>();
        try {
            a.slots = item.contains("slots") ? slots_from_json(item.at("slots")) : SlotMap{};
        } catch (const std::exception& e) {
            throw AnnotationParseError(std::string("bad slots entry: ") + e.what(), raw);
        }
        out.push_back(std::move(a));
    }
    if (static_cast<int>(out.size()) != expected_turns) {
        throw AnnotationParseError("annotation count " + std::to_string(out.size()) + " != turns " +
                                       std::to_string(expected_turns),
                                   raw);
    }
    return out;
}

std::string render_annotations(const std::vector<TurnAnnotation>& anns) {
    json arr = json::array();
    for (const TurnAnnotation& a : anns) {
        json slots = a.slots.empty() ? json("NA") : slots_to_json(a.slots);
        arr.push_back({{"normalized_text", a.normalized_text}, {"slots", std::move(slots)}});
    }
    return "```json\n" + arr.dump(2) + "\n```";
}

std::string to_string(ClientMode m) { return m == ClientMode::live ? "live" : "fixture"; }

ClientMode client_mode_from_string(const std::string& s) {
    if (s == "live") return ClientMode::live;
    if (s == "fixture") return ClientMode::fixture;
    throw std::invalid_argument("unknown annotation mode '" + s + "' (expected live|fixture)");
}

void ClientConfig::validate() const {
    if (timeout_seconds <= 0) throw std::invalid_argument("annotation.timeout_seconds must be > 0");
    if (max_retries < 0) throw std::invalid_argument("annotation.max_retries must be >= 0");
    if (backoff_initial_seconds < 0) throw std::invalid_argument("annotation.backoff_initial_seconds must be >= 0");
    if (temperature < 0) throw std::invalid_argument("annotation.temperature must be >= 0");
    if (mode == ClientMode::live && base_url.empty()) throw std::invalid_argument("annotation.base_url is empty");
}

std::string FixtureClient::complete(const AnnotationPrompt& prompt) {
    const auto path = dir_ / (prompt_hash(prompt) + ".json");
    if (!std::filesystem::exists(path)) throw std::runtime_error("no fixture for prompt: " + path.string());
    json j;
    try {
        j = json::parse(read_file(path));
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw AnnotationParseError("malformed fixture " + path.string() + ": " + e.what(), read_file(path));
    }
}

LiveClient::LiveClient(ClientConfig cfg, HttpTransport transport) : cfg_(std::move(cfg)), transport_(std::move(transport)) {
    cfg_.validate();
}

std::string LiveClient::complete(const AnnotationPrompt& prompt) {
    const char* key = std::getenv(cfg_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') throw std::runtime_error("environment variable " + cfg_.api_key_env + " is not set");
    json req = {{"model", cfg_.model},
                {"temperature", cfg_.temperature},
                {"messages", json::array({{{"role", "system"}, {"content", prompt.system}},
                                          {{"role", "user"}, {"content", prompt.user}}})}};
    std::string url = cfg_.base_url;
    if (!url.empty() && url.back() == '/') url.pop_back();
    url += "/chat/completions";
    const HttpResponse res =
        transport_(url, req.dump(), {{"Authorization", std::string("Bearer ") + key}}, cfg_.timeout_seconds);
    if (res.status == 429 || res.status >= 500) {
        throw TransportError("HTTP " + std::to_string(res.status) + ": " + truncate(res.body, 200));
    }
    if (res.status != 200) throw std::runtime_error("HTTP " + std::to_string(res.status) + ": " + truncate(res.body, 400));
    try {
        return json::parse(res.body).at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw AnnotationParseError(std::string("malformed chat-completion response: ") + e.what(), res.body);
    }
}

std::unique_ptr<ChatClient> make_client(const ClientConfig& cfg, HttpTransport transport) {
    cfg.validate();
    if (cfg.mode == ClientMode::fixture) return std::make_unique<FixtureClient>(cfg.fixture_dir);
    return std::make_unique<LiveClient>(cfg, std::move(transport));
}

void write_fixture(const std::filesystem::path& dir, const AnnotationPrompt& prompt, const std::string& content) {
    json j = {{"object", "chat.completion"},
              {"choices", json::array({{{"index", 0},
                                        {"message", {{"role", "assistant"}, {"content", content}}},
                                        {"finish_reason", "stop"}}})}};
    write_file_atomic(dir / (prompt_hash(prompt) + ".json"), j.dump(2) + "\n");
}

void write_gold_fixtures(const std::filesystem::path& dir, const std::vector<Conversation>& convs,
                         const PromptTemplate& tmpl) {
    for (const Conversation& c : convs) {
        if (!c.annotations) throw std::invalid_argument("write_gold_fixtures: conversation '" + c.id + "' is unannotated");
        write_fixture(dir, build_annotation_prompt(c, tmpl), render_annotations(*c.annotations));
    }
}

RetryPolicy RetryPolicy::from(const ClientConfig& cfg) {
    RetryPolicy p;
    // Fixture replay is deterministic, so retrying cannot change the outcome.
    p.max_retries = cfg.mode == ClientMode::fixture ? 0 : cfg.max_retries;
    p.backoff_initial_seconds = cfg.backoff_initial_seconds;
    return p;
}

Conversation annotate_conversation(const Conversation& conv, ChatClient& client, const RetryPolicy& retry,
                                   const PromptTemplate& tmpl) {
    const AnnotationPrompt prompt = build_annotation_prompt(conv, tmpl);
    const int n = static_cast<int>(conv.turns.size());
    std::string last_error;
    for (int attempt = 0; attempt <= retry.max_retries; ++attempt) {
        try {
            Conversation out = conv;
            out.annotations = parse_annotation_response(client.complete(prompt), n);
            return out;
        } catch (const TransportError& e) {
            last_error = std::string("transport error: ") + e.what();
        } catch (const AnnotationParseError& e) {
            last_error = std::string("parse failure: ") + e.what();
        } catch (const std::exception& e) {
            throw std::runtime_error("conversation " + conv.id + ": " + e.what());
        }
        if (attempt < retry.max_retries) {
            const double wait = retry.backoff_initial_seconds * std::pow(2.0, attempt);
            if (retry.sleep) {
                retry.sleep(wait);
            } else if (wait > 0) {
                std::this_thread::sleep_for(std::chrono::duration<double>(wait));
            }
        }
    }
    throw std::runtime_error("conversation " + conv.id + ": annotation failed after " +
                             std::to_string(retry.max_retries + 1) + " attempt(s): " + last_error);
}

BatchResult annotate_batch(const std::vector<Conversation>& convs, ChatClient& client, const RetryPolicy& retry,
                           const PromptTemplate& tmpl) {
    BatchResult r;
    for (const Conversation& c : convs) {
        try {
            r.annotated.push_back(annotate_conversation(c, client, retry, tmpl));
        } catch (const std::exception& e) {
            r.failures.push_back({c.id, e.what()});
        }
    }
    return r;
}

}  // namespace slotllm
