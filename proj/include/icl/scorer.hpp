#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "icl/backend.hpp"
#include "icl/cache.hpp"
#include "icl/errors.hpp"
#include "icl/hash.hpp"
#include "icl/prompt.hpp"
#include "icl/unicode.hpp"

namespace icl {

struct OptionScore {
    std::string option;
    double logprob = 0.0;  // sum of continuation token log-probabilities
    double prob = 0.0;     // softmax over the option set
};

struct Prediction {
    std::string query_id;
    std::string predicted;
    double confidence = 0.0;
    std::optional<std::string> gold;
    std::optional<double> gold_prob;
    InferenceMode mode = InferenceMode::likelihood;
    bool extraction_failed = false;

    bool correct() const { return gold && !extraction_failed && *gold == predicted; }
};

// Numerically stable softmax; max subtraction keeps the result invariant
// under a common additive shift of the inputs.
inline std::vector<double> softmax(const std::vector<double>& logits) {
    std::vector<double> probs(logits.size(), 0.0);
    if (logits.empty()) return probs;
    double max_logit = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - max_logit);
        sum += probs[i];
    }
    for (double& p : probs) p /= sum;
    return probs;
}

// Cache identity of one scoring call: prompt text, option set, mode and
// model. Deliberately independent of the endpoint URL so a relocated
// deployment of the same model replays its cache.
inline std::string cache_key(const PromptInstance& prompt, const BackendConfig& backend) {
    std::string material = "icl-cache-v1\n";
    material += mode_name(prompt.mode);
    material += '\n';
    material += backend.model_name;
    material += '\n';
    for (const auto& opt : prompt.option_strings) {
        material += opt;
        material += '\x1f';
    }
    material += '\n';
    material += prompt.text;
    return sha256_hex(material);
}

inline std::string cache_key(const PromptInstance& prompt, const ModelBackend& backend) {
    BackendConfig cfg;
    cfg.model_name = backend.model_name();
    return cache_key(prompt, cfg);
}

// Turns assembled prompts into predictions against one backend, with
// optional response caching and length normalization.
class Scorer {
public:
    Scorer(ModelBackend& backend, ResponseCache* cache = nullptr, bool length_normalize = false,
           int max_generation_tokens = 512)
        : backend_(backend),
          cache_(cache),
          length_normalize_(length_normalize),
          max_generation_tokens_(max_generation_tokens) {}

    // One score per option: raw summed continuation logprob (optionally
    // divided by token count) and the softmax probability over the set.
    std::vector<OptionScore> score_options(const PromptInstance& prompt) {
        if (prompt.mode != InferenceMode::likelihood) {
            throw ValidationError("score_options: prompt is not in likelihood mode");
        }
        if (prompt.option_strings.empty()) {
            throw ValidationError("score_options: empty option set");
        }

        std::vector<ContinuationScore> raw = scored_continuations(prompt);

        std::vector<double> logits(raw.size());
        for (size_t i = 0; i < raw.size(); ++i) {
            logits[i] = raw[i].logprob;
            if (length_normalize_ && raw[i].token_count > 0) {
                logits[i] /= static_cast<double>(raw[i].token_count);
            }
        }
        std::vector<double> probs = softmax(logits);

        std::vector<OptionScore> out(raw.size());
        for (size_t i = 0; i < raw.size(); ++i) {
            out[i] = {prompt.option_strings[i], logits[i], probs[i]};
        }
        return out;
    }

    // Free generation followed by answer extraction. The first label after
    // the last answer prefix wins; failing that, the label mentioned last
    // anywhere; failing that, the prediction falls back to the first option
    // with chance-level confidence and is flagged (and scored) as incorrect.
    Prediction generate_and_extract(const PromptInstance& prompt,
                                    const std::vector<std::string>& labels) {
        if (prompt.mode != InferenceMode::generation) {
            throw ValidationError("generate_and_extract: prompt is not in generation mode");
        }
        if (labels.empty()) throw ValidationError("generate_and_extract: empty label set");

        std::string completion = generate(prompt);

        Prediction pred;
        pred.query_id = prompt.query_id;
        pred.mode = InferenceMode::generation;

        std::string hay = lower_ascii(nfc(completion));
        std::string prefix = lower_ascii(std::string(kAnswerPrefix));
        while (!prefix.empty() && prefix.back() == ' ') prefix.pop_back();

        size_t anchor = hay.rfind(prefix);
        std::optional<size_t> best_pos;
        std::string best_label;

        if (anchor != std::string::npos) {
            size_t from = anchor + prefix.size();
            for (const auto& label : labels) {
                size_t pos = hay.find(lower_ascii(nfc(label)), from);
                if (pos == std::string::npos) continue;
                if (!best_pos || pos < *best_pos) {
                    best_pos = pos;
                    best_label = label;
                }
            }
        }
        if (!best_pos) {
            // last mention anywhere
            for (const auto& label : labels) {
                size_t pos = hay.rfind(lower_ascii(nfc(label)));
                if (pos == std::string::npos) continue;
                if (!best_pos || pos > *best_pos) {
                    best_pos = pos;
                    best_label = label;
                }
            }
        }

        if (best_pos) {
            pred.predicted = best_label;
            pred.confidence = 1.0;
        } else {
            pred.extraction_failed = true;
            pred.predicted = labels.front();
            pred.confidence = 1.0 / static_cast<double>(labels.size());
        }
        return pred;
    }

private:
    std::vector<ContinuationScore> scored_continuations(const PromptInstance& prompt) {
        std::string key = cache_key(prompt, backend_);
        if (cache_ != nullptr) {
            if (auto hit = cache_->lookup(key)) {
                return parse_score_response(*hit, prompt.option_strings.size());
            }
        }

        std::vector<ContinuationScore> raw;
        raw.reserve(prompt.option_strings.size());
        for (const auto& option : prompt.option_strings) {
            raw.push_back(backend_.score_continuation(prompt.text, option));
        }

        if (cache_ != nullptr) {
            nlohmann::ordered_json request{{"type", "score_options"},
                                           {"model", backend_.model_name()},
                                           {"options", prompt.option_strings},
                                           {"prompt_sha256", sha256_hex(prompt.text)}};
            auto scored = nlohmann::json::array();
            for (const auto& cs : raw) {
                scored.push_back({{"logprob", cs.logprob}, {"tokens", cs.token_count}});
            }
            cache_->store(key, request, nlohmann::json{{"type", "score_options"},
                                                       {"scored", scored}});
        }
        return raw;
    }

    std::string generate(const PromptInstance& prompt) {
        std::string key = cache_key(prompt, backend_);
        if (cache_ != nullptr) {
            if (auto hit = cache_->lookup(key)) {
                return hit->at("text").get<std::string>();
            }
        }
        std::string completion = backend_.complete(prompt.text, max_generation_tokens_);
        if (cache_ != nullptr) {
            nlohmann::ordered_json request{{"type", "generation"},
                                           {"model", backend_.model_name()},
                                           {"prompt_sha256", sha256_hex(prompt.text)}};
            cache_->store(key, request,
                          nlohmann::json{{"type", "generation"}, {"text", completion}});
        }
        return completion;
    }

    static std::vector<ContinuationScore> parse_score_response(const nlohmann::json& response,
                                                               size_t expected) {
        std::vector<ContinuationScore> raw;
        for (const auto& s : response.at("scored")) {
            raw.push_back({s.at("logprob").get<double>(), s.at("tokens").get<int>()});
        }
        if (raw.size() != expected) {
            throw BackendError("cache entry option count mismatch (stale cache?)");
        }
        return raw;
    }

    ModelBackend& backend_;
    ResponseCache* cache_;
    bool length_normalize_;
    int max_generation_tokens_;
};

// Argmax over option probabilities. Exact ties go to the option listed
// first; the gold option's probability is recorded whenever gold is known.
inline Prediction predict(const std::vector<OptionScore>& scores,
                          const std::optional<std::string>& gold = std::nullopt) {
    if (scores.empty()) throw ValidationError("predict: empty score list");
    size_t best = 0;
    for (size_t i = 1; i < scores.size(); ++i) {
        if (scores[i].prob > scores[best].prob) best = i;
    }
    Prediction pred;
    pred.predicted = scores[best].option;
    pred.confidence = scores[best].prob;
    pred.mode = InferenceMode::likelihood;
    if (gold) {
        pred.gold = gold;
        for (const auto& s : scores) {
            if (s.option == *gold) {
                pred.gold_prob = s.prob;
                break;
            }
        }
    }
    return pred;
}

}  // namespace icl
