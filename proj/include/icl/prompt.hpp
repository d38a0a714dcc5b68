#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "icl/bm25.hpp"
#include "icl/corpus.hpp"
#include "icl/errors.hpp"

namespace icl {

// Continuation boundary for likelihood scoring. The scorer conditions on this
// exact literal, trailing space included, and exemplar answers are emitted
// right after it so the query continuation is format-consistent.
inline constexpr std::string_view kAnswerPrefix = "The answer is ";

inline constexpr std::string_view kReasoningInstruction =
    "Think step by step, then state the answer.";

enum class ExemplarOrder { similar_first, similar_last };
enum class GuidelineMode { msci, standard };
enum class InferenceMode { likelihood, generation };

inline std::string order_name(ExemplarOrder o) {
    return o == ExemplarOrder::similar_first ? "standard_order" : "reverse_order";
}
inline std::string guideline_name(GuidelineMode g) {
    return g == GuidelineMode::msci ? "msci" : "standard";
}
inline std::string mode_name(InferenceMode m) {
    return m == InferenceMode::likelihood ? "likelihood" : "generation";
}
inline InferenceMode parse_mode(std::string_view name) {
    if (name == "likelihood") return InferenceMode::likelihood;
    if (name == "generation") return InferenceMode::generation;
    throw ValidationError("unknown inference mode: '" + std::string(name) + "'");
}

// One cell of the prompt grid: shot count, exemplar order, guideline flag.
struct PromptConfig {
    int shots = 5;
    ExemplarOrder order = ExemplarOrder::similar_first;
    GuidelineMode guideline = GuidelineMode::standard;

    std::string name() const {
        return std::to_string(shots) + "-shot-" + order_name(order) + "-" +
               guideline_name(guideline);
    }

    bool operator==(const PromptConfig&) const = default;
};

// The ten canonical configurations, in grid order. There is no 1-shot
// reverse-order cell: with a single exemplar both orders are the same prompt.
inline const std::vector<PromptConfig>& grid() {
    static const std::vector<PromptConfig> configs = {
        {1, ExemplarOrder::similar_first, GuidelineMode::msci},
        {1, ExemplarOrder::similar_first, GuidelineMode::standard},
        {3, ExemplarOrder::similar_last, GuidelineMode::msci},
        {3, ExemplarOrder::similar_last, GuidelineMode::standard},
        {3, ExemplarOrder::similar_first, GuidelineMode::msci},
        {3, ExemplarOrder::similar_first, GuidelineMode::standard},
        {5, ExemplarOrder::similar_last, GuidelineMode::msci},
        {5, ExemplarOrder::similar_last, GuidelineMode::standard},
        {5, ExemplarOrder::similar_first, GuidelineMode::msci},
        {5, ExemplarOrder::similar_first, GuidelineMode::standard},
    };
    return configs;
}

// Inverse of PromptConfig::name(). "msci_simple" is accepted as an alias of
// "msci" (both spellings appear in run logs in the wild).
inline PromptConfig parse_config_name(std::string_view name) {
    auto fail = [&] {
        throw ValidationError("unrecognized prompt config name: '" + std::string(name) + "'");
    };

    size_t dash1 = name.find('-');
    if (dash1 == std::string_view::npos) fail();
    PromptConfig cfg;
    std::string shots_str(name.substr(0, dash1));
    if (shots_str == "1") cfg.shots = 1;
    else if (shots_str == "3") cfg.shots = 3;
    else if (shots_str == "5") cfg.shots = 5;
    else fail();

    std::string_view rest = name.substr(dash1 + 1);
    if (rest.rfind("shot-", 0) != 0) fail();
    rest = rest.substr(5);

    if (rest.rfind("standard_order-", 0) == 0) {
        cfg.order = ExemplarOrder::similar_first;
        rest = rest.substr(15);
    } else if (rest.rfind("reverse_order-", 0) == 0) {
        cfg.order = ExemplarOrder::similar_last;
        rest = rest.substr(14);
    } else {
        fail();
    }

    if (rest == "msci" || rest == "msci_simple") cfg.guideline = GuidelineMode::msci;
    else if (rest == "standard") cfg.guideline = GuidelineMode::standard;
    else fail();

    if (cfg.shots == 1 && cfg.order == ExemplarOrder::similar_last) {
        throw ValidationError("prompt config '" + std::string(name) +
                              "' is not a grid member (no 1-shot reverse order)");
    }
    return cfg;
}

// Retrieval hands over best-first results. similar_first keeps that order
// (most similar exemplar earliest in the prompt); similar_last reverses it,
// putting the most similar exemplar adjacent to the query.
inline std::vector<std::string> order_exemplars(const std::vector<RetrievalResult>& results,
                                                ExemplarOrder order) {
    std::vector<std::string> ids;
    ids.reserve(results.size());
    for (const auto& r : results) ids.push_back(r.doc_id);
    if (order == ExemplarOrder::similar_last) {
        std::reverse(ids.begin(), ids.end());
    }
    return ids;
}

struct GuidelineText {
    std::string body;
};

struct PromptInstance {
    std::string text;
    std::vector<std::string> exemplar_ids;
    std::vector<std::string> option_strings;
    std::string config_name;
    std::string query_id;
    InferenceMode mode = InferenceMode::likelihood;
    std::vector<std::string> warnings;
};

namespace detail {

inline void append_article_block(std::string& out, const Article& a) {
    out += "Article:\n";
    out += a.title;
    out += '\n';
    out += a.body;
    out += '\n';
}

}  // namespace detail

// Deterministic prompt assembly: optional guideline block, one block per
// exemplar (article, answer prefix, gold label), then the query block ending
// at the answer prefix. Exemplars must arrive already ordered.
inline PromptInstance assemble(const PromptConfig& config, const Article& query,
                               const std::vector<Article>& exemplars, Task task,
                               InferenceMode mode, const GuidelineText& guideline) {
    PromptInstance pi;
    pi.config_name = config.name();
    pi.query_id = query.id;
    pi.mode = mode;
    pi.option_strings = task_labels(task);

    if (config.guideline == GuidelineMode::msci && guideline.body.empty()) {
        throw ValidationError("assemble: config '" + pi.config_name +
                              "' needs a non-empty guideline text");
    }

    size_t take = std::min(exemplars.size(), static_cast<size_t>(config.shots));
    if (take < static_cast<size_t>(config.shots)) {
        pi.warnings.push_back("exemplar pool exhausted: wanted " +
                              std::to_string(config.shots) + ", got " + std::to_string(take));
    }

    if (config.guideline == GuidelineMode::msci) {
        pi.text += guideline.body;
        pi.text += "\n\n";
    }

    for (size_t i = 0; i < take; ++i) {
        const Article& ex = exemplars[i];
        const auto& gold = ex.label(task);
        if (!gold) {
            throw ValidationError("assemble: exemplar '" + ex.id + "' has no " +
                                  task_name(task) + " label");
        }
        detail::append_article_block(pi.text, ex);
        pi.text += kAnswerPrefix;
        pi.text += *gold;
        pi.text += "\n\n";
        pi.exemplar_ids.push_back(ex.id);
    }

    detail::append_article_block(pi.text, query);
    if (mode == InferenceMode::generation) {
        pi.text += kReasoningInstruction;
        pi.text += '\n';
    }
    pi.text += kAnswerPrefix;
    return pi;
}

}  // namespace icl
