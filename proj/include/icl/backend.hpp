#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "icl/errors.hpp"
#include "icl/hash.hpp"
#include "icl/prompt.hpp"
#include "icl/rng.hpp"

namespace icl {

struct BackendConfig {
    std::string kind = "mock";  // mock | exemplar_oracle | remote
    std::string endpoint;       // remote only, e.g. http://host:port
    std::string model_name = "mock-lm";
    double request_timeout_s = 60.0;
    int max_retries = 5;
    int retry_base_ms = 1000;
    uint64_t seed = 0;          // mock only
    int max_in_flight = 4;
    double requests_per_second = 0.0;  // 0 = unlimited
    bool length_normalize = false;
    int max_generation_tokens = 512;
    std::string api_key_env = "ICL_LAB_API_KEY";

    void check() const {
        if (kind != "mock" && kind != "exemplar_oracle" && kind != "remote") {
            throw ValidationError("backend.kind must be mock, exemplar_oracle or remote");
        }
        if (kind == "remote" && endpoint.empty()) {
            throw ValidationError("backend.kind=remote requires backend.endpoint");
        }
        if (max_retries < 0) throw ValidationError("backend.max_retries must be >= 0");
        if (max_in_flight < 1) throw ValidationError("backend.max_in_flight must be >= 1");
    }
};

struct ContinuationScore {
    double logprob = 0.0;  // sum of continuation token log-probabilities
    int token_count = 0;
};

// A model reachable through two capabilities: scoring a supplied continuation
// and free generation. Implementations must be safe to call concurrently.
class ModelBackend {
public:
    virtual ~ModelBackend() = default;

    virtual ContinuationScore score_continuation(const std::string& prompt,
                                                 const std::string& continuation) = 0;
    virtual std::string complete(const std::string& prompt, int max_tokens) = 0;
    virtual const std::string& model_name() const = 0;

    // Raised at startup when the backend cannot return continuation
    // log-probabilities (likelihood mode is then impossible).
    virtual void verify_scoring_support() {}

    long calls() const { return calls_.load(); }
    void reset_calls() { calls_.store(0); }

protected:
    void count_call() { calls_.fetch_add(1); }

private:
    std::atomic<long> calls_{0};
};

namespace detail {

inline int count_ws_tokens(std::string_view s) {
    int n = 0;
    bool in_tok = false;
    for (char c : s) {
        bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r';
        if (!ws && !in_tok) ++n;
        in_tok = !ws;
    }
    return n == 0 ? 1 : n;
}

}  // namespace detail

// Deterministic stand-in model: log-probabilities are a pure function of
// (seed, prompt, continuation), identical across platforms and runs.
class MockBackend : public ModelBackend {
public:
    explicit MockBackend(const BackendConfig& config)
        : model_(config.model_name), seed_(config.seed) {}

    ContinuationScore score_continuation(const std::string& prompt,
                                         const std::string& continuation) override {
        count_call();
        uint64_t h = fnv1a64(continuation, fnv1a64(prompt, seed_ ^ 0x9E3779B97F4A7C15ULL));
        Rng rng(h);
        ContinuationScore cs;
        cs.token_count = detail::count_ws_tokens(continuation);
        cs.logprob = -8.0 * rng.uniform01() * cs.token_count;
        return cs;
    }

    std::string complete(const std::string& prompt, int /*max_tokens*/) override {
        count_call();
        // echo back one word of the prompt, prefixed like a real answer
        uint64_t h = fnv1a64(prompt, seed_);
        std::vector<std::string> words;
        size_t start = std::string::npos;
        for (size_t i = 0; i <= prompt.size(); ++i) {
            bool ws = i == prompt.size() || prompt[i] == ' ' || prompt[i] == '\n';
            if (!ws && start == std::string::npos) start = i;
            if (ws && start != std::string::npos) {
                words.push_back(prompt.substr(start, i - start));
                start = std::string::npos;
            }
        }
        if (words.empty()) return std::string(kAnswerPrefix) + "unknown";
        return std::string(kAnswerPrefix) + words[h % words.size()];
    }

    const std::string& model_name() const override { return model_; }

private:
    std::string model_;
    uint64_t seed_;
};

// Model-free oracle for end-to-end tests: reads the gold answers present in
// the prompt's exemplar blocks and scores each option by its add-one count,
// logprob = ln(count + 1). Softmax over the options then yields Laplace
// frequencies: majority label highest, ties equal, uniform with no exemplars.
// Counting the prompt text itself (not metadata) keeps the oracle checkable
// by construction and insensitive to exemplar order.
class ExemplarOracleBackend : public ModelBackend {
public:
    explicit ExemplarOracleBackend(std::string model_name = "exemplar-oracle")
        : model_(std::move(model_name)) {}

    static int count_answer_lines(const std::string& prompt, const std::string& option) {
        std::string needle = std::string(kAnswerPrefix) + option + "\n";
        int count = 0;
        size_t pos = 0;
        while ((pos = prompt.find(needle, pos)) != std::string::npos) {
            ++count;
            pos += needle.size();
        }
        return count;
    }

    ContinuationScore score_continuation(const std::string& prompt,
                                         const std::string& continuation) override {
        count_call();
        int c = count_answer_lines(prompt, continuation);
        return {std::log(static_cast<double>(c) + 1.0), 1};
    }

    std::string complete(const std::string& prompt, int /*max_tokens*/) override {
        count_call();
        // majority answer among the exemplar blocks, if any
        std::string prefix(kAnswerPrefix);
        std::unordered_map<std::string, int> counts;
        size_t pos = 0;
        while ((pos = prompt.find(prefix, pos)) != std::string::npos) {
            size_t start = pos + prefix.size();
            size_t end = prompt.find('\n', start);
            if (end != std::string::npos && end > start) {
                ++counts[prompt.substr(start, end - start)];
            }
            pos = start;
        }
        std::string best;
        int best_count = 0;
        for (const auto& [answer, count] : counts) {
            if (count > best_count || (count == best_count && answer < best)) {
                best = answer;
                best_count = count;
            }
        }
        if (best.empty()) return "no exemplars to vote with";
        return prefix + best;
    }

    const std::string& model_name() const override { return model_; }

private:
    std::string model_;
};

// Completion-style HTTP backend. Scoring sends prompt+continuation with
// echoed token logprobs and sums the tokens whose offsets fall inside the
// continuation; generation asks for plain completion text. Transient
// failures (transport, 408/429/5xx) retry with exponential backoff and
// jitter. The API credential is read from the configured env var and is
// never logged.
class RemoteBackend : public ModelBackend {
public:
    explicit RemoteBackend(const BackendConfig& config) : config_(config) {
        config_.check();
        const char* key = config_.api_key_env.empty() ? nullptr
                                                      : std::getenv(config_.api_key_env.c_str());
        if (key != nullptr) api_key_ = key;
    }

    ContinuationScore score_continuation(const std::string& prompt,
                                         const std::string& continuation) override {
        count_call();
        nlohmann::json req{{"model", config_.model_name},
                           {"prompt", prompt + continuation},
                           {"max_tokens", 0},
                           {"echo", true},
                           {"logprobs", 0}};
        nlohmann::json resp = post_with_retries("/v1/completions", req);
        return sum_continuation_logprobs(resp, prompt.size());
    }

    std::string complete(const std::string& prompt, int max_tokens) override {
        count_call();
        nlohmann::json req{{"model", config_.model_name},
                           {"prompt", prompt},
                           {"max_tokens", max_tokens}};
        nlohmann::json resp = post_with_retries("/v1/completions", req);
        try {
            return resp.at("choices").at(0).at("text").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            throw BackendError("remote backend: completion response has no choices[0].text");
        }
    }

    const std::string& model_name() const override { return config_.model_name; }

    void verify_scoring_support() override {
        try {
            score_continuation("capability probe: the answer is", " yes");
        } catch (const BackendError& e) {
            throw ValidationError(std::string("backend '") + config_.model_name +
                                  "' cannot score continuations (" + e.what() +
                                  "); likelihood mode needs echoed token logprobs");
        }
    }

private:
    static ContinuationScore sum_continuation_logprobs(const nlohmann::json& resp,
                                                       size_t prompt_bytes) {
        const nlohmann::json* lp = nullptr;
        try {
            lp = &resp.at("choices").at(0).at("logprobs");
        } catch (const nlohmann::json::exception&) {
            throw BackendError("remote backend: response carries no logprobs block");
        }
        if (!lp->contains("token_logprobs") || !lp->contains("text_offset")) {
            throw BackendError("remote backend: logprobs block lacks token_logprobs/text_offset");
        }
        const auto& lps = (*lp)["token_logprobs"];
        const auto& offs = (*lp)["text_offset"];
        if (lps.size() != offs.size()) {
            throw BackendError("remote backend: token_logprobs/text_offset length mismatch");
        }
        ContinuationScore cs;
        for (size_t i = 0; i < lps.size(); ++i) {
            if (offs[i].get<size_t>() < prompt_bytes) continue;
            if (lps[i].is_null()) {
                throw BackendError("remote backend: null logprob inside the continuation");
            }
            cs.logprob += lps[i].get<double>();
            ++cs.token_count;
        }
        if (cs.token_count == 0) {
            throw BackendError("remote backend: no tokens fell inside the continuation");
        }
        return cs;
    }

    nlohmann::json post_with_retries(const std::string& path, const nlohmann::json& body) {
        std::string payload = body.dump();
        int attempts = config_.max_retries + 1;
        std::string last_error;

        for (int attempt = 1; attempt <= attempts; ++attempt) {
            if (attempt > 1) back_off(attempt - 1);

            httplib::Client client(config_.endpoint);
            client.set_connection_timeout(std::chrono::duration<double>(config_.request_timeout_s));
            client.set_read_timeout(std::chrono::duration<double>(config_.request_timeout_s));
            httplib::Headers headers;
            if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

            auto res = client.Post(path, headers, payload, "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 429 || res->status == 408 || res->status >= 500) {
                last_error = "http status " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200) {
                throw BackendError("remote backend: http status " + std::to_string(res->status) +
                                   " from " + path);
            }
            try {
                return nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::parse_error& e) {
                throw BackendError(std::string("remote backend: invalid JSON response: ") +
                                   e.what());
            }
        }
        throw BackendError("remote backend: request failed after " + std::to_string(attempts) +
                           " attempts (" + last_error + ")");
    }

    void back_off(int retry_number) {
        // base * 2^(n-1), +/-50% jitter
        double base = static_cast<double>(config_.retry_base_ms) *
                      std::pow(2.0, static_cast<double>(retry_number - 1));
        uint64_t nonce = jitter_nonce_.fetch_add(1);
        Rng rng(fnv1a64(config_.model_name, 0x6a09e667f3bcc908ULL ^ nonce));
        double jitter = 0.5 + rng.uniform01();
        auto delay = std::chrono::duration<double, std::milli>(base * jitter);
        std::this_thread::sleep_for(delay);
    }

    BackendConfig config_;
    std::string api_key_;
    std::atomic<uint64_t> jitter_nonce_{0};
};

inline std::unique_ptr<ModelBackend> make_backend(const BackendConfig& config) {
    config.check();
    if (config.kind == "mock") return std::make_unique<MockBackend>(config);
    if (config.kind == "exemplar_oracle") {
        return std::make_unique<ExemplarOracleBackend>(config.model_name);
    }
    return std::make_unique<RemoteBackend>(config);
}

}  // namespace icl
