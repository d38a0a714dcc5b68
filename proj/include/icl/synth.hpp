#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "icl/backend.hpp"
#include "icl/corpus.hpp"
#include "icl/errors.hpp"
#include "icl/rng.hpp"

namespace icl {
namespace synth {

// A labeling rule the pipeline is asked to recover: each article carries
// exactly one keyword, and the keyword determines the label (up to noise).
// Filler words are shared across all articles so retrieval signal comes from
// the keywords alone.
struct HiddenRule {
    std::vector<std::pair<std::string, std::string>> keyword_map;  // keyword -> label
    double noise_rate = 0.0;
    std::vector<std::string> vocabulary;  // filler words, disjoint from keywords
    uint64_t seed = 0;

    void check(Task task) const {
        if (noise_rate < 0.0 || noise_rate >= 1.0) {
            throw ValidationError("hidden rule: noise_rate must be in [0,1)");
        }
        if (keyword_map.empty()) throw ValidationError("hidden rule: empty keyword map");
        std::unordered_set<std::string> covered;
        std::unordered_set<std::string> keywords;
        for (const auto& [kw, label] : keyword_map) {
            if (!is_known_label(task, label)) {
                throw ValidationError("hidden rule: keyword '" + kw + "' maps to unknown " +
                                      task_name(task) + " label '" + label + "'");
            }
            if (!keywords.insert(kw).second) {
                throw ValidationError("hidden rule: duplicate keyword '" + kw + "'");
            }
            covered.insert(label);
        }
        for (const auto& label : task_labels(task)) {
            if (!covered.count(label)) {
                throw ValidationError("hidden rule: no keyword maps to label '" + label + "'");
            }
        }
        for (const auto& w : vocabulary) {
            if (keywords.count(w)) {
                throw ValidationError("hidden rule: keyword '" + w +
                                      "' also appears in the filler vocabulary");
            }
        }
    }
};

// Small shared filler vocabulary: nearly every article contains every filler
// word, which drives their idf (and hence their retrieval weight) toward
// zero and leaves the keyword as the dominant match signal.
inline HiddenRule default_rule(Task task, uint64_t seed = 0, double noise_rate = 0.0) {
    HiddenRule rule;
    rule.seed = seed;
    rule.noise_rate = noise_rate;
    rule.vocabulary = {"market", "company", "report", "sector",
                       "policy", "growth", "index", "board"};
    if (task == Task::impact_type) {
        rule.keyword_map = {
            {"upswing", "Opportunity"},    {"tailwind", "Opportunity"},
            {"downturn", "Risk"},          {"lawsuit", "Risk"},
            {"puzzle", "Cannot Distinguish"}, {"vague", "Cannot Distinguish"},
        };
    } else {
        rule.keyword_map = {
            {"sprint", "Less than 2 years"},   {"shortrun", "Less than 2 years"},
            {"midterm", "2 to 5 years"},       {"rollout", "2 to 5 years"},
            {"decade", "More than 5 years"},   {"legacy", "More than 5 years"},
        };
    }
    return rule;
}

namespace detail {

inline std::string pick_other_label(const std::vector<std::string>& labels,
                                    const std::string& current, Rng& rng) {
    std::vector<std::string> others;
    for (const auto& l : labels) {
        if (l != current) others.push_back(l);
    }
    return others[rng.uniform_below(others.size())];
}

}  // namespace detail

// Deterministic corpus generation. Bodies are 20-40 filler words with the
// keyword spliced in at a random position; labels follow the rule, flipped to
// a uniformly random other label with probability noise_rate. Keywords are
// assigned round-robin so the label marginals stay near-balanced.
inline Dataset generate(const HiddenRule& rule, int n_train, int n_test, Task task) {
    rule.check(task);
    if (n_train < 0 || n_test < 0 || n_train + n_test == 0) {
        throw ValidationError("generate: need a positive article count");
    }
    if (rule.vocabulary.empty()) {
        throw ValidationError("generate: empty filler vocabulary");
    }
    // distinct-body capacity: 20 filler draws from the vocabulary, times the
    // keyword choice and its position
    double capacity_log = 20.0 * std::log(static_cast<double>(rule.vocabulary.size()));
    if (capacity_log < std::log(static_cast<double>(n_train + n_test))) {
        throw ValidationError("generate: vocabulary too small to produce " +
                              std::to_string(n_train + n_test) + " distinct bodies");
    }

    Rng rng(rule.seed ^ 0x1CEB00DA12345678ULL);
    const auto& labels = task_labels(task);
    const auto& cats = categories();

    Dataset ds;
    ds.name = "synthetic";
    std::unordered_set<std::string> seen_bodies;

    int total = n_train + n_test;
    for (int i = 0; i < total; ++i) {
        bool is_train = i < n_train;
        const auto& [keyword, rule_label] = rule.keyword_map[i % rule.keyword_map.size()];

        Article a;
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "synth-%s-%04d", is_train ? "train" : "test",
                      is_train ? i : i - n_train);
        a.id = idbuf;
        a.split = is_train ? "train" : "test";
        // block-cycled so categories decorrelate from the keyword round-robin
        a.category = cats[(static_cast<size_t>(i) / rule.keyword_map.size()) % cats.size()];

        a.title = rule.vocabulary[rng.uniform_below(rule.vocabulary.size())] + " " +
                  rule.vocabulary[rng.uniform_below(rule.vocabulary.size())] + " brief";

        std::string body;
        for (int attempt = 0;; ++attempt) {
            if (attempt >= 100) {
                throw ValidationError("generate: vocabulary too small to produce " +
                                      std::to_string(total) + " distinct bodies");
            }
            size_t n_words = 20 + rng.uniform_below(21);  // 20..40
            size_t kw_pos = rng.uniform_below(n_words + 1);
            body.clear();
            for (size_t w = 0; w <= n_words; ++w) {
                if (!body.empty()) body += ' ';
                if (w == kw_pos) {
                    body += keyword;
                } else {
                    body += rule.vocabulary[rng.uniform_below(rule.vocabulary.size())];
                }
            }
            if (seen_bodies.insert(body).second) break;
        }
        a.body = std::move(body);

        std::string label = rule_label;
        if (rule.noise_rate > 0.0 && rng.uniform01() < rule.noise_rate) {
            label = detail::pick_other_label(labels, label, rng);
        }
        a.label(task) = label;

        ds.articles.push_back(std::move(a));
    }
    return ds;
}

// The model-free backend used to close the loop in end-to-end tests: it votes
// with the gold labels visible in the prompt's exemplar blocks. The train
// dataset itself is not needed; the prompt already carries the evidence.
inline std::unique_ptr<ModelBackend> oracle_backend(const Dataset& /*train*/) {
    return std::make_unique<ExemplarOracleBackend>();
}

}  // namespace synth
}  // namespace icl
