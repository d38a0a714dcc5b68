#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "icl/cache.hpp"
#include "icl/rng.hpp"
#include "icl/scorer.hpp"

using namespace icl;
namespace fs = std::filesystem;

namespace {

// scripted backend: fixed logprobs per option and a fixed completion
class ScriptedBackend : public ModelBackend {
public:
    std::unordered_map<std::string, double> logprobs;
    std::string completion;
    std::string model = "scripted";

    ContinuationScore score_continuation(const std::string&, const std::string& cont) override {
        count_call();
        return {logprobs.at(cont), 1};
    }
    std::string complete(const std::string&, int) override {
        count_call();
        return completion;
    }
    const std::string& model_name() const override { return model; }
};

PromptInstance type_prompt(InferenceMode mode = InferenceMode::likelihood) {
    PromptInstance pi;
    pi.text = "Article:\nt\nb\nThe answer is ";
    pi.option_strings = task_labels(Task::impact_type);
    pi.config_name = "test";
    pi.query_id = "q1";
    pi.mode = mode;
    return pi;
}

fs::path temp_cache_path(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("icl_cache_" + name + ".jsonl");
    fs::remove(p);
    return p;
}

}  // namespace

TEST_CASE("equal logprobs give uniform probabilities", "[scorer]") {
    ScriptedBackend backend;
    backend.logprobs = {{"Opportunity", -2.0}, {"Risk", -2.0}, {"Cannot Distinguish", -2.0}};
    Scorer scorer(backend);
    auto scores = scorer.score_options(type_prompt());
    REQUIRE(scores.size() == 3);
    for (const auto& s : scores) {
        CHECK_THAT(s.prob, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-15));
    }
}

TEST_CASE("softmax matches the numeric oracle for (-1,-2,-3)", "[scorer]") {
    ScriptedBackend backend;
    backend.logprobs = {{"Opportunity", -1.0}, {"Risk", -2.0}, {"Cannot Distinguish", -3.0}};
    Scorer scorer(backend);
    auto scores = scorer.score_options(type_prompt());
    CHECK_THAT(scores[0].prob, Catch::Matchers::WithinAbs(0.66524, 1e-5));
    CHECK_THAT(scores[1].prob, Catch::Matchers::WithinAbs(0.24473, 1e-5));
    CHECK_THAT(scores[2].prob, Catch::Matchers::WithinAbs(0.09003, 1e-5));
}

TEST_CASE("mock backend scores the same prompt identically twice", "[scorer]") {
    BackendConfig cfg;
    cfg.kind = "mock";
    cfg.seed = 7;
    auto backend = make_backend(cfg);
    Scorer scorer(*backend);
    auto a = scorer.score_options(type_prompt());
    auto b = scorer.score_options(type_prompt());
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].logprob == b[i].logprob);
        CHECK(a[i].prob == b[i].prob);
    }
}

TEST_CASE("softmax properties over random logprob triples", "[scorer]") {
    Rng rng(8899);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> lps = {-20.0 * rng.uniform01(), -20.0 * rng.uniform01(),
                                   -20.0 * rng.uniform01()};
        auto probs = softmax(lps);
        double sum = probs[0] + probs[1] + probs[2];
        CHECK_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-12));

        // additive shift leaves the argmax unchanged
        double shift = (rng.uniform01() - 0.5) * 100.0;
        std::vector<double> shifted = {lps[0] + shift, lps[1] + shift, lps[2] + shift};
        auto probs2 = softmax(shifted);
        size_t arg1 = std::max_element(probs.begin(), probs.end()) - probs.begin();
        size_t arg2 = std::max_element(probs2.begin(), probs2.end()) - probs2.begin();
        CHECK(arg1 == arg2);
    }
}

TEST_CASE("predict takes the argmax with its probability", "[scorer]") {
    std::vector<OptionScore> scores = {
        {"Opportunity", -1.0, 0.7}, {"Risk", -2.0, 0.2}, {"Cannot Distinguish", -3.0, 0.1}};
    Prediction p = predict(scores);
    CHECK(p.predicted == "Opportunity");
    CHECK(p.confidence == 0.7);
    CHECK_FALSE(p.gold.has_value());
}

TEST_CASE("exact ties go to the first-listed option", "[scorer]") {
    std::vector<OptionScore> scores = {
        {"Opportunity", -1.0, 0.5}, {"Risk", -1.0, 0.5}, {"Cannot Distinguish", -50.0, 0.0}};
    CHECK(predict(scores).predicted == "Opportunity");

    std::vector<OptionScore> reversed = {
        {"Risk", -1.0, 0.5}, {"Opportunity", -1.0, 0.5}, {"Cannot Distinguish", -50.0, 0.0}};
    CHECK(predict(reversed).predicted == "Risk");
}

TEST_CASE("gold probability is recorded when gold is present", "[scorer]") {
    std::vector<OptionScore> scores = {
        {"Opportunity", -1.0, 0.7}, {"Risk", -2.0, 0.2}, {"Cannot Distinguish", -3.0, 0.1}};
    Prediction p = predict(scores, std::optional<std::string>{"Risk"});
    REQUIRE(p.gold_prob.has_value());
    CHECK(*p.gold_prob == 0.2);
    CHECK_FALSE(p.correct());
}

TEST_CASE("generation extraction: answer after the suffix", "[scorer]") {
    ScriptedBackend backend;
    backend.completion = "따라서 The answer is Opportunity.";
    Scorer scorer(backend);
    Prediction p = scorer.generate_and_extract(type_prompt(InferenceMode::generation),
                                               task_labels(Task::impact_type));
    CHECK(p.predicted == "Opportunity");
    CHECK_FALSE(p.extraction_failed);
}

TEST_CASE("generation extraction: last mention wins without a suffix", "[scorer]") {
    ScriptedBackend backend;
    backend.completion = "Risk seems possible but ultimately Opportunity";
    Scorer scorer(backend);
    Prediction p = scorer.generate_and_extract(type_prompt(InferenceMode::generation),
                                               task_labels(Task::impact_type));
    CHECK(p.predicted == "Opportunity");
    CHECK_FALSE(p.extraction_failed);
}

TEST_CASE("generation extraction: case and width insensitive", "[scorer]") {
    ScriptedBackend backend;
    backend.completion = "the answer is RISK";
    Scorer scorer(backend);
    Prediction p = scorer.generate_and_extract(type_prompt(InferenceMode::generation),
                                               task_labels(Task::impact_type));
    CHECK(p.predicted == "Risk");
}

TEST_CASE("generation extraction: no label at all fails soft", "[scorer]") {
    ScriptedBackend backend;
    backend.completion = "I really cannot say anything useful.";
    Scorer scorer(backend);
    Prediction p = scorer.generate_and_extract(type_prompt(InferenceMode::generation),
                                               task_labels(Task::impact_type));
    CHECK(p.extraction_failed);
    CHECK(p.predicted == "Opportunity");  // first-listed fallback
    CHECK_THAT(p.confidence, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-15));
    p.gold = "Opportunity";
    CHECK_FALSE(p.correct());  // failed extraction counts as incorrect
}

TEST_CASE("cache keys are stable and sensitive", "[scorer]") {
    PromptInstance pi = type_prompt();
    BackendConfig backend;
    backend.model_name = "model-a";
    backend.endpoint = "http://host-1:8000";

    std::string k1 = cache_key(pi, backend);
    CHECK(k1 == cache_key(pi, backend));

    // one byte of prompt text changes the key
    PromptInstance pi2 = pi;
    pi2.text.back() = '!';
    CHECK(cache_key(pi2, backend) != k1);

    // a different model changes the key
    BackendConfig other_model = backend;
    other_model.model_name = "model-b";
    CHECK(cache_key(pi, other_model) != k1);

    // the endpoint does not participate in the key
    BackendConfig moved = backend;
    moved.endpoint = "http://host-2:9999";
    CHECK(cache_key(pi, moved) == k1);

    // mode participates
    PromptInstance gen = pi;
    gen.mode = InferenceMode::generation;
    CHECK(cache_key(gen, backend) != k1);
}

TEST_CASE("warm cache replays without touching the backend", "[scorer]") {
    auto path = temp_cache_path("replay");

    ScriptedBackend backend;
    backend.logprobs = {{"Opportunity", -1.0}, {"Risk", -2.5}, {"Cannot Distinguish", -4.0}};

    std::vector<OptionScore> cold;
    {
        ResponseCache cache(path);
        Scorer scorer(backend, &cache);
        cold = scorer.score_options(type_prompt());
        CHECK(backend.calls() == 3);  // one request per option
    }
    {
        ResponseCache cache(path);  // reopened from disk
        backend.reset_calls();
        Scorer scorer(backend, &cache);
        auto warm = scorer.score_options(type_prompt());
        CHECK(backend.calls() == 0);
        REQUIRE(warm.size() == cold.size());
        for (size_t i = 0; i < warm.size(); ++i) {
            CHECK(warm[i].logprob == cold[i].logprob);
            CHECK(warm[i].prob == cold[i].prob);
        }
    }
    fs::remove(path);
}

TEST_CASE("length normalization divides by token count", "[scorer]") {
    // same summed logprob, different token counts
    class LengthBackend : public ModelBackend {
    public:
        ContinuationScore score_continuation(const std::string&,
                                             const std::string& cont) override {
            count_call();
            if (cont == "Less than 2 years") return {-4.0, 4};
            if (cont == "2 to 5 years") return {-4.0, 4};
            return {-4.5, 4};  // "More than 5 years"
        }
        std::string complete(const std::string&, int) override { return ""; }
        const std::string& model_name() const override { return model_; }

    private:
        std::string model_ = "len";
    } backend;

    PromptInstance pi;
    pi.text = "p";
    pi.option_strings = task_labels(Task::impact_duration);
    pi.mode = InferenceMode::likelihood;

    Scorer raw(backend, nullptr, false);
    Scorer normalized(backend, nullptr, true);
    auto a = raw.score_options(pi);
    auto b = normalized.score_options(pi);
    CHECK(a[0].logprob == -4.0);
    CHECK(b[0].logprob == -1.0);
    // probabilities shift but ordering of equal-length options is unchanged
    CHECK(a[0].prob == a[1].prob);
    CHECK(b[0].prob == b[1].prob);
}

TEST_CASE("score_options rejects generation prompts and empty options", "[scorer]") {
    ScriptedBackend backend;
    Scorer scorer(backend);
    CHECK_THROWS_AS(scorer.score_options(type_prompt(InferenceMode::generation)),
                    ValidationError);
    PromptInstance pi = type_prompt();
    pi.option_strings.clear();
    CHECK_THROWS_AS(scorer.score_options(pi), ValidationError);
}
