// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotllm/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <random>
#include <set>
#include <stdexcept>

namespace slotllm::inline SLOTLLM_ABI {

std::string to_string(Speaker s) { return s == Speaker::agent ? "agent" : "customer"; }

Speaker speaker_from_string(const std::string& s) {
    if (s == "agent") return Speaker::agent;
    if (s == "customer") return Speaker::customer;
    throw std::invalid_argument("unknown speaker '" + s + "'");
}

void Conversation::validate() const {
    for (std::size_t i = 0; i < turns.size(); ++i) {
        if (trim(turns[i].text).empty()) {
            throw std::invalid_argument(id + ": turn " + std::to_string(i) + " has empty text");
        }
    }
    if (annotations && annotations->size() != turns.size()) {
        throw std::invalid_argument(id + ": annotation count " + std::to_string(annotations->size()) +
                                    " != turns " + std::to_string(turns.size()));
    }
}

json slots_to_json(const SlotMap& slots) {
    json j = json::object();
    for (const auto& [label, value] : slots) j[label] = value;
    return j;
}

SlotMap slots_from_json(const json& j) {
    SlotMap out;
    if (j.is_null()) return out;
    if (j.is_string()) {
        const std::string s = trim(j.get<std::string>());
        if (s.empty() || s == "NA" || s == "N/A") return out;
        throw std::invalid_argument("slots: unexpected string '" + s + "'");
    }
    if (!j.is_object()) throw std::invalid_argument("slots: expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        std::string value;
        if (it.value().is_string()) {
            value = it.value().get<std::string>();
        } else if (it.value().is_number() || it.value().is_boolean()) {
            value = it.value().dump();
        } else if (it.value().is_null()) {
            continue;
        } else {
            throw std::invalid_argument("slots: value of '" + it.key() + "' is not a scalar");
        }
        if (trim(it.key()).empty() || trim(value).empty()) continue;
        out.emplace_back(it.key(), value);
    }
    return out;
}

json to_json(const Conversation& c) {
    json turns = json::array();
    for (const Turn& t : c.turns) {
        turns.push_back({{"speaker", to_string(t.speaker)}, {"text", t.text}, {"audio_ref", t.audio_ref}});
    }
    json j = {{"id", c.id}, {"turns", std::move(turns)}, {"annotations", nullptr}};
    if (c.annotations) {
        json anns = json::array();
        for (const TurnAnnotation& a : *c.annotations) {
            anns.push_back({{"normalized_text", a.normalized_text}, {"slots", slots_to_json(a.slots)}});
        }
        j["annotations"] = std::move(anns);
    }
    return j;
}

Conversation conversation_from_json(const json& j) {
    Conversation c;
    c.id = j.at("id").get<std::string>();
    for (const json& t : j.at("turns")) {
        c.turns.push_back({speaker_from_string(t.at("speaker").get<std::string>()), t.at("text").get<std::string>(),
                           t.at("audio_ref").get<std::string>()});
    }
    if (j.contains("annotations") && !j.at("annotations").is_null()) {
        std::vector<TurnAnnotation> anns;
        for (const json& a : j.at("annotations")) {
            anns.push_back({a.at("normalized_text").get<std::string>(), slots_from_json(a.at("slots"))});
        }
        c.annotations = std::move(anns);
    }
    c.validate();
    return c;
}

void save_conversations(const std::filesystem::path& path, const std::vector<Conversation>& convs) {
    std::vector<json> rows;
    rows.reserve(convs.size());
    for (const Conversation& c : convs) rows.push_back(to_json(c));
    write_jsonl(path, rows);
}

std::vector<Conversation> load_conversations(const std::filesystem::path& path) {
    std::vector<Conversation> out;
    std::size_t line = 0;
    for (const json& j : read_jsonl(path)) {
        ++line;
        try {
            out.push_back(conversation_from_json(j));
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + ": record " + std::to_string(line) + ": " + e.what());
        }
    }
    return out;
}

std::string to_string(LabelPool p) {
    switch (p) {
        case LabelPool::seen: return "seen";
        case LabelPool::shifted: return "shifted";
        case LabelPool::all: return "all";
    }
    return "seen";
}

LabelPool label_pool_from_string(const std::string& s) {
    if (s == "seen") return LabelPool::seen;
    if (s == "shifted") return LabelPool::shifted;
    if (s == "all") return LabelPool::all;
    throw std::invalid_argument("unknown label pool '" + s + "' (expected seen|shifted|all)");
}

json to_json(const LabelManifest& m) {
    return {{"seen_labels", m.seen_labels}, {"unseen_labels", m.unseen_labels}, {"grammar_seed", m.grammar_seed}};
}

LabelManifest manifest_from_json(const json& j) {
    LabelManifest m;
    m.seen_labels = j.at("seen_labels").get<std::vector<std::string>>();
    m.unseen_labels = j.at("unseen_labels").get<std::vector<std::string>>();
    m.grammar_seed = j.at("grammar_seed").get<std::uint64_t>();
    return m;
}

namespace {

enum class ValueKind { first_name, city, company, bank, store, date, time, amount, digits3, digits4, digits5,
                       product, plan, card, car, color, street };

struct SlotType {
    const char* label;
    ValueKind kind;
    std::vector<const char*> carriers;  // "{v}" marks the value
};

const std::vector<SlotType>& slot_types() {
    static const std::vector<SlotType> types = {
        {"person_name", ValueKind::first_name, {"my name is {v}", "this is {v} calling", "you can call me {v}"}},
        {"agent_name", ValueKind::first_name,
         {"this is {v} from customer care", "you are speaking with {v} today", "the agent name is {v}"}},
        {"location", ValueKind::city, {"i am calling from {v}", "i live in {v}", "the location is {v}"}},
        {"company_name", ValueKind::company,
         {"thank you for calling {v}", "welcome to {v}", "the company name is {v}"}},
        {"date", ValueKind::date, {"can we do it on {v}", "call me on {v}", "the date is {v}"}},
        {"time", ValueKind::time, {"let us say {v}", "i can come at {v}", "the time is {v}"}},
        {"amount", ValueKind::amount,
         {"the bill is {v} dollars", "i was charged {v} dollars", "the amount is {v} dollars"}},
        {"account_number", ValueKind::digits4, {"my account number is {v}", "the account number is {v}"}},
        {"phone_number", ValueKind::digits5, {"my phone number is {v}", "call me back at {v}"}},
        {"zip_code", ValueKind::digits5, {"my zip code is {v}", "the zip code is {v}"}},
        {"order_number", ValueKind::digits4, {"my order number is {v}", "the order number is {v}"}},
        {"product", ValueKind::product,
         {"i want to return my {v}", "my {v} is not working", "the product is a {v}"}},
        {"plan_name", ValueKind::plan, {"i am on the {v}", "i want to switch to the {v}", "my plan name is {v}"}},
        {"card_type", ValueKind::card, {"i will pay with my {v} card", "the card type is {v}"}},
        {"bank_name", ValueKind::bank, {"my bank is {v}", "the bank name is {v}"}},
        {"policy_number", ValueKind::digits4, {"my policy number is {v}", "the policy number is {v}"}},
        {"claim_number", ValueKind::digits4, {"the claim number is {v}", "i filed claim {v}"}},
        {"ticket_number", ValueKind::digits4, {"my ticket number is {v}", "the ticket number is {v}"}},
        {"room_number", ValueKind::digits3, {"i am in room {v}", "the room number is {v}"}},
        {"flight_number", ValueKind::digits3, {"my flight number is {v}", "the flight number is {v}"}},
        {"pet_name", ValueKind::first_name, {"my dog is called {v}", "the pet name is {v}"}},
        {"car_model", ValueKind::car, {"i drive a {v}", "the car model is a {v}"}},
        {"street_name", ValueKind::street, {"i live on {v}", "the street name is {v}"}},
        {"store_name", ValueKind::store, {"i bought it at {v}", "the store name is {v}"}},
        {"delivery_date", ValueKind::date, {"it should arrive on {v}", "the delivery date is {v}"}},
        {"birth_date", ValueKind::date, {"my birth date is {v}", "i was born on {v}"}},
        {"meeting_time", ValueKind::time, {"the meeting time is {v}", "we can meet at {v}"}},
        {"color", ValueKind::color, {"i want it in {v}", "the color is {v}"}},
    };
    return types;
}

const std::vector<std::string> kFirstNames = {"anna", "ben",  "carla", "david", "emma",   "frank", "grace", "henry",
                                              "iris", "jack", "kate",  "liam",  "maria",  "nick",  "olivia", "peter",
                                              "rosa", "sam",  "tina",  "victor", "wendy", "zoe",   "matt",  "heaven"};
const std::vector<std::string> kCities = {"boston",  "denver",  "austin",  "phoenix",    "seattle", "dallas",
                                          "miami",   "chicago", "portland", "atlanta",   "detroit", "houston",
                                          "orlando", "tampa",   "memphis", "harrisburg", "san diego", "new york"};
const std::vector<std::string> kCompanies = {"acme",  "globex",   "initech",   "hooli",   "vandelay",
                                             "wetsuits", "blue sky", "northwind", "contoso"};
const std::vector<std::string> kBanks = {"first union", "river bank", "metro trust", "pine credit", "harbor bank"};
const std::vector<std::string> kStores = {"bestmart", "shopwell", "corner store", "megamart", "city mall", "quickbuy"};
const std::vector<std::string> kMonths = {"january", "february", "march",     "april",   "may",      "june",
                                          "july",    "august",   "september", "october", "november", "december"};
const std::vector<std::string> kProducts = {"laptop", "router", "tablet",  "printer", "camera",
                                            "headset", "modem", "speaker", "monitor", "phone"};
const std::vector<std::string> kPlans = {"gold plan", "basic plan", "family plan", "silver plan", "student plan"};
const std::vector<std::string> kCards = {"visa", "mastercard", "amex", "discover"};
const std::vector<std::string> kCars = {"civic", "corolla", "camry", "accord", "mustang", "outback", "jetta"};
const std::vector<std::string> kColors = {"red", "blue", "green", "black", "white", "silver"};
const std::vector<std::string> kStreets = {"oak street", "maple street", "pine street", "cedar street",
                                           "elm street", "main street",  "lake street"};

const std::vector<std::string> kAgentFillers = {
    "how can i help you today", "let me check that for you", "one moment please",
    "is there anything else i can do", "thank you for waiting", "i can help with that",
    "can you confirm that for me", "i have updated your records", "have a great day"};
const std::vector<std::string> kCustomerFillers = {
    "yes please", "i have a question about my bill", "thank you so much", "that sounds good",
    "no that is all", "i need some help", "okay great", "can you check my account", "sure no problem"};
const std::vector<std::string> kPrefixes = {"yes ", "okay ", "sure ", "so "};
const std::vector<std::string> kSuffixes = {" please", " thanks"};

template <typename T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

std::string digits(int n, std::mt19937_64& rng) {
    std::string s;
    std::uniform_int_distribution<int> d(0, 9);
    s.push_back(static_cast<char>('1' + std::uniform_int_distribution<int>(0, 8)(rng)));
    for (int i = 1; i < n; ++i) s.push_back(static_cast<char>('0' + d(rng)));
    return s;
}

std::string sample_value(ValueKind kind, std::mt19937_64& rng) {
    switch (kind) {
        case ValueKind::first_name: return pick(kFirstNames, rng);
        case ValueKind::city: return pick(kCities, rng);
        case ValueKind::company: return pick(kCompanies, rng);
        case ValueKind::bank: return pick(kBanks, rng);
        case ValueKind::store: return pick(kStores, rng);
        case ValueKind::date:
            return pick(kMonths, rng) + " " + std::to_string(std::uniform_int_distribution<int>(1, 28)(rng));
        case ValueKind::time:
            return std::to_string(std::uniform_int_distribution<int>(1, 12)(rng)) +
                   (std::uniform_int_distribution<int>(0, 1)(rng) ? " pm" : " am");
        case ValueKind::amount: return std::to_string(std::uniform_int_distribution<int>(10, 999)(rng));
        case ValueKind::digits3: return digits(3, rng);
        case ValueKind::digits4: return digits(4, rng);
        case ValueKind::digits5: return digits(5, rng);
        case ValueKind::product: return pick(kProducts, rng);
        case ValueKind::plan: return pick(kPlans, rng);
        case ValueKind::card: return pick(kCards, rng);
        case ValueKind::car: return pick(kCars, rng);
        case ValueKind::color: return pick(kColors, rng);
        case ValueKind::street: return pick(kStreets, rng);
    }
    return "";
}

const SlotType& slot_type(const std::string& label) {
    for (const SlotType& t : slot_types()) {
        if (label == t.label) return t;
    }
    throw std::invalid_argument("unknown slot label '" + label + "'");
}

std::string fill(const char* carrier, const std::string& value) {
    std::string s(carrier);
    const auto at = s.find("{v}");
    return s.replace(at, 3, value);
}

Turn make_turn(Speaker speaker, const std::vector<std::string>& labels, const CorpusConfig& cfg,
               std::mt19937_64& rng, TurnAnnotation& ann) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::string text;
    if (u(rng) < cfg.slot_turn_rate) {
        const int n_slots = (labels.size() > 1 && u(rng) < cfg.two_slot_rate) ? 2 : 1;
        std::vector<std::string> chosen = {pick(labels, rng)};
        while (static_cast<int>(chosen.size()) < n_slots) {
            const std::string& l = pick(labels, rng);
            if (std::find(chosen.begin(), chosen.end(), l) == chosen.end()) chosen.push_back(l);
        }
        std::vector<std::string> clauses;
        for (const std::string& label : chosen) {
            const SlotType& t = slot_type(label);
            std::string value = sample_value(t.kind, rng);
            clauses.push_back(fill(pick(t.carriers, rng), value));
            ann.slots.emplace_back(label, std::move(value));
        }
        text = join(clauses, " and ");
        if (u(rng) < 0.3) text = pick(kPrefixes, rng) + text;
        if (u(rng) < 0.2) text += pick(kSuffixes, rng);
    } else {
        text = pick(speaker == Speaker::agent ? kAgentFillers : kCustomerFillers, rng);
    }
    ann.normalized_text = normalize_transcript(text);
    return {speaker, text, ""};
}

}  // namespace

void CorpusConfig::validate() const {
    const int inventory = static_cast<int>(slot_types().size());
    if (n_seen_labels < 1 || n_seen_labels >= inventory) {
        throw std::invalid_argument("corpus.n_seen_labels must be in [1, " + std::to_string(inventory - 1) + "]");
    }
    if (shifted_seen_labels < 0 || shifted_seen_labels > n_seen_labels) {
        throw std::invalid_argument("corpus.shifted_seen_labels must be in [0, n_seen_labels]");
    }
    if (slot_turn_rate < 0.0 || slot_turn_rate > 1.0) {
        throw std::invalid_argument("corpus.slot_turn_rate must be in [0, 1]");
    }
    if (two_slot_rate < 0.0 || two_slot_rate > 1.0) {
        throw std::invalid_argument("corpus.two_slot_rate must be in [0, 1]");
    }
    if (min_turns < 1 || max_turns < min_turns) {
        throw std::invalid_argument("corpus.min_turns/max_turns must satisfy 1 <= min_turns <= max_turns");
    }
}

const std::vector<std::string>& label_inventory() {
    static const std::vector<std::string> labels = [] {
        std::vector<std::string> out;
        for (const SlotType& t : slot_types()) out.emplace_back(t.label);
        return out;
    }();
    return labels;
}

LabelManifest make_manifest(std::uint64_t grammar_seed, const CorpusConfig& cfg) {
    cfg.validate();
    std::vector<std::string> labels = label_inventory();
    std::mt19937_64 rng(mix_seed(grammar_seed, 0x1abe15eedULL));
    std::shuffle(labels.begin(), labels.end(), rng);
    LabelManifest m;
    m.grammar_seed = grammar_seed;
    m.seen_labels.assign(labels.begin(), labels.begin() + cfg.n_seen_labels);
    m.unseen_labels.assign(labels.begin() + cfg.n_seen_labels, labels.end());
    return m;
}

std::vector<std::string> pool_labels(const LabelManifest& m, LabelPool pool, const CorpusConfig& cfg) {
    switch (pool) {
        case LabelPool::seen: return m.seen_labels;
        case LabelPool::shifted: {
            std::vector<std::string> out(m.seen_labels.begin(),
                                         m.seen_labels.begin() + std::min<std::size_t>(cfg.shifted_seen_labels,
                                                                                       m.seen_labels.size()));
            out.insert(out.end(), m.unseen_labels.begin(), m.unseen_labels.end());
            return out;
        }
        case LabelPool::all: {
            std::vector<std::string> out = m.seen_labels;
            out.insert(out.end(), m.unseen_labels.begin(), m.unseen_labels.end());
            return out;
        }
    }
    return m.seen_labels;
}

std::vector<Conversation> gen_toy_corpus(int n_conversations, std::uint64_t grammar_seed, const CorpusConfig& cfg) {
    if (n_conversations < 1) throw std::invalid_argument("gen_toy_corpus: n_conversations must be >= 1");
    const LabelManifest manifest = make_manifest(grammar_seed, cfg);
    const std::vector<std::string> labels = pool_labels(manifest, cfg.pool, cfg);
    const std::uint64_t base = mix_seed(grammar_seed, mix_seed(cfg.stream, static_cast<std::uint64_t>(cfg.pool)));
    std::vector<Conversation> out;
    out.reserve(static_cast<std::size_t>(n_conversations));
    for (int i = 0; i < n_conversations; ++i) {
        std::mt19937_64 rng(mix_seed(base, static_cast<std::uint64_t>(i)));
        Conversation c;
        char id[32];
        std::snprintf(id, sizeof id, "%06d", i);
        c.id = cfg.id_prefix + "-" + id;
        const int n_turns = std::uniform_int_distribution<int>(cfg.min_turns, cfg.max_turns)(rng);
        std::vector<TurnAnnotation> anns;
        Speaker speaker = Speaker::agent;
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int t = 0; t < n_turns; ++t) {
            TurnAnnotation ann;
            Turn turn = make_turn(speaker, labels, cfg, rng, ann);
            turn.audio_ref = c.id + "/t" + std::to_string(t);
            c.turns.push_back(std::move(turn));
            anns.push_back(std::move(ann));
            // Speakers usually alternate but occasionally hold the floor.
            if (u(rng) >= 0.1) speaker = speaker == Speaker::agent ? Speaker::customer : Speaker::agent;
        }
        c.annotations = std::move(anns);
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<std::string> grammar_lexicon() {
    std::set<std::string> words;
    auto add_phrase = [&](const std::string& s) {
        for (std::string& w : split_whitespace(s)) words.insert(std::move(w));
    };
    for (const SlotType& t : slot_types()) {
        for (const char* c : t.carriers) add_phrase(fill(c, ""));
        std::string label = t.label;
        std::replace(label.begin(), label.end(), '_', ' ');
        add_phrase(label);
    }
    for (const auto* list : {&kFirstNames, &kCities, &kCompanies, &kBanks, &kStores, &kMonths, &kProducts, &kPlans,
                             &kCards, &kCars, &kColors, &kStreets, &kAgentFillers, &kCustomerFillers, &kPrefixes,
                             &kSuffixes}) {
        for (const std::string& s : *list) add_phrase(s);
    }
    add_phrase("am pm and dollars card");
    return {words.begin(), words.end()};
}

std::vector<std::string> value_lexicon() {
    std::set<std::string> words;
    for (const auto* list : {&kFirstNames, &kCities, &kCompanies, &kBanks, &kStores, &kMonths, &kProducts, &kPlans,
                             &kCards, &kCars, &kColors, &kStreets}) {
        for (const std::string& s : *list) {
            for (std::string& w : split_whitespace(s)) words.insert(std::move(w));
        }
    }
    return {words.begin(), words.end()};
}

std::string normalize_transcript(const std::string& text) {
    std::string out = trim(text);
    if (out.empty()) return out;
    out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
    if (std::ispunct(static_cast<unsigned char>(out.back())) == 0) out.push_back('.');
    return out;
}

}  // namespace slotllm
