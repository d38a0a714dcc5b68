#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "icl/backend.hpp"
#include "icl/bm25.hpp"
#include "icl/corpus.hpp"
#include "icl/errors.hpp"
#include "icl/hash.hpp"
#include "icl/prompt.hpp"
#include "icl/tokenizer.hpp"

namespace icl {

inline void detail_check_keys(const nlohmann::json& obj, const std::string& where,
                              std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
        bool known = false;
        for (const char* a : allowed) {
            if (key == a) known = true;
        }
        if (!known) {
            throw ValidationError(where + ": unknown key '" + key + "'");
        }
    }
}

// A reviewable, version-controllable description of one run or sweep.
// JSON on disk; CLI flags override individual keys after loading.
struct RunConfigFile {
    // data.path for a single file carrying both splits, or data.train/data.test
    std::string data_path;
    std::string train_path;
    std::string test_path;

    Task task = Task::impact_type;
    InferenceMode mode = InferenceMode::likelihood;
    std::vector<std::string> prompts;  // empty = all grid members

    TokenizerConfig tokenizer;
    Bm25Params bm25;
    BackendConfig backend;

    std::string guideline_path;
    std::string cache_path;
    std::string output_dir = "runs";
    std::string eval_split = "test";
    uint64_t seed = 0;
    bool strict = false;

    static RunConfigFile load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ValidationError("cannot open config file: " + path.string());
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationError("config file " + path.string() + ": invalid JSON: " + e.what());
        }
        return from_json(j, path.string());
    }

    static RunConfigFile from_json(const nlohmann::json& j, const std::string& where) {
        if (!j.is_object()) throw ValidationError(where + ": config must be a JSON object");
        RunConfigFile cfg;

        // typos fail loudly instead of silently running with defaults
        detail_check_keys(j, where,
                          {"data", "task", "mode", "prompts", "tokenizer", "bm25", "backend",
                           "guideline_path", "cache_path", "output_dir", "eval_split", "seed",
                           "strict"});

        if (auto it = j.find("data"); it != j.end()) {
            detail_check_keys(*it, where + ": data", {"path", "train", "test"});
            cfg.data_path = it->value("path", "");
            cfg.train_path = it->value("train", "");
            cfg.test_path = it->value("test", "");
        }
        if (auto it = j.find("task"); it != j.end()) cfg.task = parse_task(it->get<std::string>());
        if (auto it = j.find("mode"); it != j.end()) cfg.mode = parse_mode(it->get<std::string>());

        if (auto it = j.find("prompts"); it != j.end()) {
            if (it->is_string()) {
                if (*it != "all") {
                    throw ValidationError(where + ": prompts must be \"all\" or a name list");
                }
            } else if (it->is_array()) {
                for (const auto& name : *it) cfg.prompts.push_back(name.get<std::string>());
            } else {
                throw ValidationError(where + ": prompts must be \"all\" or a name list");
            }
        }

        if (auto it = j.find("tokenizer"); it != j.end()) {
            detail_check_keys(*it, where + ": tokenizer",
                              {"mode", "ngram_size", "lowercase_latin"});
            cfg.tokenizer.mode = parse_tokenizer_mode(it->value("mode", "hybrid"));
            cfg.tokenizer.ngram_size = it->value("ngram_size", 2);
            cfg.tokenizer.lowercase_latin = it->value("lowercase_latin", true);
        }
        if (auto it = j.find("bm25"); it != j.end()) {
            detail_check_keys(*it, where + ": bm25", {"k1", "b"});
            cfg.bm25.k1 = it->value("k1", 1.2);
            cfg.bm25.b = it->value("b", 0.75);
        }
        if (auto it = j.find("backend"); it != j.end()) {
            detail_check_keys(*it, where + ": backend",
                              {"kind", "endpoint", "model_name", "request_timeout",
                               "max_retries", "retry_base_ms", "seed", "max_in_flight",
                               "requests_per_second", "length_normalize",
                               "max_generation_tokens", "api_key_env"});
            cfg.backend.kind = it->value("kind", "mock");
            cfg.backend.endpoint = it->value("endpoint", "");
            cfg.backend.model_name = it->value("model_name", "mock-lm");
            cfg.backend.request_timeout_s = it->value("request_timeout", 60.0);
            cfg.backend.max_retries = it->value("max_retries", 5);
            cfg.backend.retry_base_ms = it->value("retry_base_ms", 1000);
            cfg.backend.seed = it->value("seed", 0ULL);
            cfg.backend.max_in_flight = it->value("max_in_flight", 4);
            cfg.backend.requests_per_second = it->value("requests_per_second", 0.0);
            cfg.backend.length_normalize = it->value("length_normalize", false);
            cfg.backend.max_generation_tokens = it->value("max_generation_tokens", 512);
            cfg.backend.api_key_env = it->value("api_key_env", "ICL_LAB_API_KEY");
        }

        cfg.guideline_path = j.value("guideline_path", "");
        cfg.cache_path = j.value("cache_path", "");
        cfg.output_dir = j.value("output_dir", "runs");
        cfg.eval_split = j.value("eval_split", "test");
        cfg.seed = j.value("seed", 0ULL);
        cfg.strict = j.value("strict", false);
        return cfg;
    }

    // The prompt configs this file selects, grid order preserved.
    std::vector<PromptConfig> selected_prompts() const {
        if (prompts.empty()) return grid();
        std::vector<PromptConfig> out;
        for (const auto& name : prompts) {
            PromptConfig cfg = parse_config_name(name);
            bool in_grid = false;
            for (const auto& g : grid()) {
                if (g == cfg) in_grid = true;
            }
            if (!in_grid) {
                throw ValidationError("prompt '" + name + "' is not a grid member");
            }
            out.push_back(cfg);
        }
        return out;
    }

    bool needs_guideline() const {
        for (const auto& p : selected_prompts()) {
            if (p.guideline == GuidelineMode::msci) return true;
        }
        return false;
    }

    // Launch-time validation: referenced paths must exist, prompt names must
    // be grid members, the backend block must be coherent.
    void validate() const {
        namespace fs = std::filesystem;
        if (data_path.empty() && (train_path.empty() || test_path.empty())) {
            throw ValidationError("config: set data.path, or both data.train and data.test");
        }
        for (const std::string& p : {data_path, train_path, test_path}) {
            if (!p.empty() && !fs::exists(p)) {
                throw ValidationError("config: data file does not exist: " + p);
            }
        }
        tokenizer.check();
        bm25.check();
        backend.check();
        selected_prompts();
        if (needs_guideline()) {
            if (guideline_path.empty()) {
                throw ValidationError("config: msci prompts selected but no guideline_path set");
            }
            if (!fs::exists(guideline_path)) {
                throw ValidationError("config: guideline file does not exist: " + guideline_path);
            }
        }
        if (eval_split != "train" && eval_split != "test") {
            throw ValidationError("config: eval_split must be train or test");
        }
    }

    // Canonical resolved form; its hash is embedded in every artifact the
    // run produces.
    nlohmann::ordered_json resolved() const {
        nlohmann::ordered_json j;
        j["data"] = {{"path", data_path}, {"train", train_path}, {"test", test_path}};
        j["task"] = task_name(task);
        j["mode"] = mode_name(mode);
        auto names = nlohmann::ordered_json::array();
        for (const auto& p : selected_prompts()) names.push_back(p.name());
        j["prompts"] = std::move(names);
        j["tokenizer"] = {{"mode", tokenizer_mode_name(tokenizer.mode)},
                          {"ngram_size", tokenizer.ngram_size},
                          {"lowercase_latin", tokenizer.lowercase_latin}};
        j["bm25"] = {{"k1", bm25.k1}, {"b", bm25.b}};
        j["backend"] = {{"kind", backend.kind},
                        {"endpoint", backend.endpoint},
                        {"model_name", backend.model_name},
                        {"request_timeout", backend.request_timeout_s},
                        {"max_retries", backend.max_retries},
                        {"seed", backend.seed},
                        {"max_in_flight", backend.max_in_flight},
                        {"requests_per_second", backend.requests_per_second},
                        {"length_normalize", backend.length_normalize},
                        {"max_generation_tokens", backend.max_generation_tokens}};
        j["guideline_path"] = guideline_path;
        j["cache_path"] = cache_path;
        j["output_dir"] = output_dir;
        j["eval_split"] = eval_split;
        j["seed"] = seed;
        j["strict"] = strict;
        return j;
    }

    // Experiment identity: only keys that can change the run's results.
    // File locations and transport knobs (endpoint, retries, concurrency) are
    // excluded, so the same experiment re-run elsewhere resumes and replays;
    // the guideline enters by content, the dataset via its own hash.
    nlohmann::ordered_json experiment() const {
        nlohmann::ordered_json j;
        j["task"] = task_name(task);
        j["mode"] = mode_name(mode);
        auto names = nlohmann::ordered_json::array();
        for (const auto& p : selected_prompts()) names.push_back(p.name());
        j["prompts"] = std::move(names);
        j["tokenizer"] = {{"mode", tokenizer_mode_name(tokenizer.mode)},
                          {"ngram_size", tokenizer.ngram_size},
                          {"lowercase_latin", tokenizer.lowercase_latin}};
        j["bm25"] = {{"k1", bm25.k1}, {"b", bm25.b}};
        j["backend"] = {{"kind", backend.kind},
                        {"model_name", backend.model_name},
                        {"seed", backend.seed},
                        {"length_normalize", backend.length_normalize},
                        {"max_generation_tokens", backend.max_generation_tokens}};
        j["guideline_sha256"] = guideline_content_hash();
        j["eval_split"] = eval_split;
        j["seed"] = seed;
        j["strict"] = strict;
        return j;
    }

    std::string config_hash() const { return sha256_hex(experiment().dump()); }

private:
    std::string guideline_content_hash() const {
        if (guideline_path.empty() || !needs_guideline()) return "";
        std::ifstream in(guideline_path, std::ios::binary);
        if (!in) throw ValidationError("cannot open guideline file: " + guideline_path);
        std::string body((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
        return sha256_hex(body);
    }
};

}  // namespace icl
