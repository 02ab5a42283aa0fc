// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotllm/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <stdexcept>

namespace slotllm::inline SLOTLLM_ABI {

std::string normalize_label(std::string_view label) {
    const std::string t = to_lower(trim(label));
    std::string out;
    bool pending = false;
    for (char c : t) {
        if (std::isspace(static_cast<unsigned char>(c)) || c == '_' || c == '-') {
            pending = true;
            continue;
        }
        if (pending && !out.empty()) out += '_';
        pending = false;
        out += c;
    }
    return out;
}

std::vector<std::string> value_tokens(std::string_view value) {
    std::string cleaned;
    for (char c : value) {
        if (std::ispunct(static_cast<unsigned char>(c))) continue;
        cleaned += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return split_whitespace(cleaned);
}

TurnSlots to_slot_pairs(const SlotMap& slots) {
    TurnSlots out;
    for (const auto& [label, value] : slots) out.push_back({label, value});
    return out;
}

std::optional<TurnSlots> parse_slot_json(const std::string& text) {
    const auto open = text.find('{');
    const auto close = text.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open) return std::nullopt;
    json j;
    try {
        j = json::parse(text.substr(open, close - open + 1));
    } catch (const json::exception&) {
        return std::nullopt;
    }
    if (!j.is_object()) return std::nullopt;
    TurnSlots out;
    for (const auto& [k, v] : j.items()) {
        std::string value;
        if (v.is_string()) {
            value = v.get<std::string>();
        } else if (v.is_number() || v.is_boolean()) {
            value = v.dump();
        } else if (v.is_null()) {
            continue;
        } else {
            return std::nullopt;
        }
        if (trim(k).empty() || trim(value).empty() || trim(value) == "NA") continue;
        out.push_back({k, value});
    }
    return out;
}

namespace {

struct Prepared {
    std::string label;
    std::vector<std::string> tokens;  // sorted
};

std::vector<Prepared> prepare(const TurnSlots& pairs) {
    std::vector<Prepared> out;
    for (const SlotPair& p : pairs) {
        Prepared q{normalize_label(p.label), value_tokens(p.value)};
        std::sort(q.tokens.begin(), q.tokens.end());
        out.push_back(std::move(q));
    }
    return out;
}

long intersection(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    long n = 0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] == b[j]) {
            ++n;
            ++i;
            ++j;
        } else if (a[i] < b[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    return n;
}

double pair_f1(long credit, std::size_t np, std::size_t ng) {
    if (credit == 0 || np == 0 || ng == 0) return 0.0;
    const double p = static_cast<double>(credit) / static_cast<double>(np);
    const double r = static_cast<double>(credit) / static_cast<double>(ng);
    return 2 * p * r / (p + r);
}

/// Greedy matching of the given pred/gold index lists (same label).
long greedy_group(const std::vector<Prepared>& P, const std::vector<Prepared>& G, const std::vector<int>& pi,
                  const std::vector<int>& gi) {
    struct Cand {
        double f1;
        long credit;
        int p, g;
    };
    std::vector<Cand> c;
    for (int p : pi) {
        for (int g : gi) {
            const long cr = intersection(P[static_cast<std::size_t>(p)].tokens, G[static_cast<std::size_t>(g)].tokens);
            c.push_back({pair_f1(cr, P[static_cast<std::size_t>(p)].tokens.size(), G[static_cast<std::size_t>(g)].tokens.size()), cr, p, g});
        }
    }
    std::stable_sort(c.begin(), c.end(), [](const Cand& a, const Cand& b) {
        if (a.f1 != b.f1) return a.f1 > b.f1;
        return a.credit > b.credit;
    });
    std::set<int> used_p, used_g;
    long total = 0;
    for (const Cand& x : c) {
        if (used_p.count(x.p) || used_g.count(x.g)) continue;
        used_p.insert(x.p);
        used_g.insert(x.g);
        total += x.credit;
    }
    return total;
}

/// Exact maximum-credit assignment by DP over subsets of gold pairs.
long exact_group(const std::vector<Prepared>& P, const std::vector<Prepared>& G, const std::vector<int>& pi,
                 const std::vector<int>& gi) {
    const std::size_t ng = gi.size();
    const std::size_t full = std::size_t{1} << ng;
    std::vector<long> best(full, -1);
    best[0] = 0;
    for (int p : pi) {
        std::vector<long> next = best;
        for (std::size_t mask = 0; mask < full; ++mask) {
            if (best[mask] < 0) continue;
            for (std::size_t j = 0; j < ng; ++j) {
                if (mask & (std::size_t{1} << j)) continue;
                const long cr = intersection(P[static_cast<std::size_t>(p)].tokens, G[static_cast<std::size_t>(gi[j])].tokens);
                const std::size_t m2 = mask | (std::size_t{1} << j);
                next[m2] = std::max(next[m2], best[mask] + cr);
            }
        }
        best = std::move(next);
    }
    return *std::max_element(best.begin(), best.end());
}

template <typename GroupFn>
long match(const TurnSlots& pred, const TurnSlots& gold, GroupFn&& fn,
           std::map<std::string, long>* per_label = nullptr) {
    const std::vector<Prepared> P = prepare(pred);
    const std::vector<Prepared> G = prepare(gold);
    std::map<std::string, std::pair<std::vector<int>, std::vector<int>>> groups;
    for (std::size_t i = 0; i < P.size(); ++i) groups[P[i].label].first.push_back(static_cast<int>(i));
    for (std::size_t j = 0; j < G.size(); ++j) groups[G[j].label].second.push_back(static_cast<int>(j));
    long total = 0;
    for (const auto& [label, g] : groups) {
        if (g.first.empty() || g.second.empty()) continue;
        const long c = fn(P, G, g.first, g.second);
        if (per_label) (*per_label)[label] += c;
        total += c;
    }
    return total;
}

long best_group(const std::vector<Prepared>& P, const std::vector<Prepared>& G, const std::vector<int>& pi,
                const std::vector<int>& gi) {
    if (static_cast<int>(gi.size()) <= kExactGroupLimit) return exact_group(P, G, pi, gi);
    return greedy_group(P, G, pi, gi);
}

}  // namespace

long turn_credit(const TurnSlots& pred, const TurnSlots& gold) { return match(pred, gold, best_group); }

long greedy_credit(const TurnSlots& pred, const TurnSlots& gold) { return match(pred, gold, greedy_group); }

double LabelStats::precision() const { return pred_tokens ? static_cast<double>(credit) / pred_tokens : 0.0; }
double LabelStats::recall() const { return gold_tokens ? static_cast<double>(credit) / gold_tokens : 0.0; }
double LabelStats::f1() const {
    const double p = precision(), r = recall();
    return p > 0 && r > 0 ? 2 * p * r / (p + r) : 0.0;
}

json EvalReport::to_json() const {
    json labels = json::object();
    for (const auto& [l, s] : per_label) {
        labels[l] = {{"precision", s.precision()}, {"recall", s.recall()}, {"f1", s.f1()},
                     {"credit", s.credit},        {"pred_tokens", s.pred_tokens}, {"gold_tokens", s.gold_tokens},
                     {"pred_pairs", s.pred_pairs}, {"gold_pairs", s.gold_pairs}};
    }
    json j = {{"precision", precision},
              {"recall", recall},
              {"f1", f1},
              {"counts",
               {{"turns", turns},
                {"gold_pairs", gold_pairs},
                {"pred_pairs", pred_pairs},
                {"parse_failures", parse_failures},
                {"credit", credit},
                {"pred_tokens", pred_tokens},
                {"gold_tokens", gold_tokens}}},
              {"parse_failure_rate", turns ? static_cast<double>(parse_failures) / turns : 0.0},
              {"per_label", std::move(labels)}};
    if (wer) j["wer"] = *wer;
    return j;
}

EvalReport score_slots(const std::vector<std::optional<TurnSlots>>& predictions,
                       const std::vector<TurnSlots>& references) {
    if (predictions.size() != references.size()) {
        throw std::invalid_argument("score_slots: " + std::to_string(predictions.size()) + " predictions vs " +
                                    std::to_string(references.size()) + " references");
    }
    EvalReport r;
    r.turns = static_cast<long>(references.size());
    for (std::size_t t = 0; t < references.size(); ++t) {
        static const TurnSlots kNone;
        if (!predictions[t]) ++r.parse_failures;
        const TurnSlots& pred = predictions[t] ? *predictions[t] : kNone;
        const TurnSlots& gold = references[t];
        std::map<std::string, long> credit_by_label;
        r.credit += match(pred, gold, best_group, &credit_by_label);
        for (const auto& [l, c] : credit_by_label) r.per_label[l].credit += c;
        for (const SlotPair& p : pred) {
            const long n = static_cast<long>(value_tokens(p.value).size());
            LabelStats& s = r.per_label[normalize_label(p.label)];
            s.pred_tokens += n;
            ++s.pred_pairs;
            r.pred_tokens += n;
        }
        for (const SlotPair& g : gold) {
            const long n = static_cast<long>(value_tokens(g.value).size());
            LabelStats& s = r.per_label[normalize_label(g.label)];
            s.gold_tokens += n;
            ++s.gold_pairs;
            r.gold_tokens += n;
        }
        r.pred_pairs += static_cast<long>(pred.size());
        r.gold_pairs += static_cast<long>(gold.size());
    }
    r.precision = r.pred_tokens ? static_cast<double>(r.credit) / r.pred_tokens : 0.0;
    r.recall = r.gold_tokens ? static_cast<double>(r.credit) / r.gold_tokens : 0.0;
    r.f1 = r.precision > 0 && r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
}

long word_edit_distance(const std::vector<std::string>& hyp, const std::vector<std::string>& ref) {
    std::vector<long> prev(ref.size() + 1), cur(ref.size() + 1);
    for (std::size_t j = 0; j <= ref.size(); ++j) prev[j] = static_cast<long>(j);
    for (std::size_t i = 1; i <= hyp.size(); ++i) {
        cur[0] = static_cast<long>(i);
        for (std::size_t j = 1; j <= ref.size(); ++j) {
            const long sub = prev[j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
            cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
        }
        std::swap(prev, cur);
    }
    return prev[ref.size()];
}

double wer(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references) {
    if (hypotheses.size() != references.size()) throw std::invalid_argument("wer: hypothesis/reference count mismatch");
    long edits = 0, words = 0;
    for (std::size_t i = 0; i < references.size(); ++i) {
        const std::vector<std::string> ref = split_whitespace(references[i]);
        edits += word_edit_distance(split_whitespace(hypotheses[i]), ref);
        words += static_cast<long>(ref.size());
    }
    if (words == 0) throw std::invalid_argument("wer: empty reference corpus");
    return static_cast<double>(edits) / static_cast<double>(words);
}

std::vector<std::string> gold_labels(const InstructionSample& sample) {
    const std::optional<TurnSlots> gold = parse_slot_json(sample.response);
    if (!gold) throw std::invalid_argument("sample response is not slot JSON: " + sample.response);
    std::vector<std::string> out;
    for (const SlotPair& p : *gold) out.push_back(normalize_label(p.label));
    return out;
}

SplitResult split_id_ood(const std::vector<InstructionSample>& samples, const std::set<std::string>& seen_labels) {
    std::set<std::string> seen;
    for (const std::string& l : seen_labels) seen.insert(normalize_label(l));
    SplitResult r;
    std::set<std::string> all;
    for (const InstructionSample& s : samples) {
        bool id = true;
        for (const std::string& l : gold_labels(s)) {
            all.insert(l);
            if (!seen.count(l)) id = false;
        }
        (id ? r.id_samples : r.ood_samples).push_back(s);
    }
    long overlap = 0;
    for (const std::string& l : all) overlap += seen.count(l) ? 1 : 0;
    r.overlap_fraction = all.empty() ? 1.0 : static_cast<double>(overlap) / static_cast<double>(all.size());
    return r;
}

EvalRun evaluate_model(const std::vector<InstructionSample>& eval_set, const ResponseGenerator& generate) {
    EvalRun run;
    std::vector<std::optional<TurnSlots>> preds;
    std::vector<TurnSlots> refs;
    for (const InstructionSample& s : eval_set) {
        const std::optional<TurnSlots> gold = parse_slot_json(s.response);
        if (!gold) throw std::invalid_argument("eval sample has a non-JSON gold response: " + s.response);
        std::string out = generate(s);
        preds.push_back(parse_slot_json(out));
        refs.push_back(*gold);
        run.outputs.push_back(std::move(out));
    }
    run.report = score_slots(preds, refs);
    return run;
}

std::string format_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
    std::size_t w = 6;
    for (const auto& [name, r] : rows) w = std::max(w, name.size());
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-*s  %8s  %8s  %8s\n", static_cast<int>(w), "System", "Prec", "Recall", "F1");
    std::string out = buf;
    for (const auto& [name, r] : rows) {
        std::snprintf(buf, sizeof buf, "%-*s  %8.4f  %8.4f  %8.4f\n", static_cast<int>(w), name.c_str(), r.precision,
                      r.recall, r.f1);
        out += buf;
    }
    return out;
}

}  // namespace slotllm
