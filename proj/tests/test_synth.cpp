#include <catch2/catch_amalgamated.hpp>

#include <unordered_map>

#include "icl/dataset_io.hpp"
#include "icl/eval.hpp"
#include "icl/synth.hpp"
#include "icl/tokenizer.hpp"

using namespace icl;

namespace {

// which keyword does this article carry? (exactly one, by construction)
std::string find_keyword(const Article& a, const synth::HiddenRule& rule) {
    TokenizerConfig ws;
    ws.mode = TokenizerMode::whitespace;
    std::string found;
    for (const auto& tok : tokenize(a.body, ws)) {
        for (const auto& [kw, label] : rule.keyword_map) {
            if (tok == kw) {
                REQUIRE(found.empty());
                found = kw;
            }
        }
    }
    REQUIRE_FALSE(found.empty());
    return found;
}

std::string rule_label(const synth::HiddenRule& rule, const std::string& keyword) {
    for (const auto& [kw, label] : rule.keyword_map) {
        if (kw == keyword) return label;
    }
    FAIL("unknown keyword");
    return {};
}

}  // namespace

TEST_CASE("noiseless generation follows the keyword map exactly", "[synth]") {
    auto rule = synth::default_rule(Task::impact_type, 99);
    Dataset ds = synth::generate(rule, 80, 20, Task::impact_type);
    REQUIRE(ds.articles.size() == 100);
    for (const auto& a : ds.articles) {
        std::string kw = find_keyword(a, rule);
        REQUIRE(a.impact_type.has_value());
        CHECK(*a.impact_type == rule_label(rule, kw));
    }
}

TEST_CASE("generated corpora pass dataset validation", "[synth]") {
    auto rule = synth::default_rule(Task::impact_duration, 4, 0.2);
    Dataset ds = synth::generate(rule, 50, 25, Task::impact_duration);
    CHECK(validate(ds).empty());
    CHECK(ds.split_view("train").size() == 50);
    CHECK(ds.split_view("test").size() == 25);
}

TEST_CASE("the same seed reproduces the dataset byte for byte", "[synth]") {
    auto rule = synth::default_rule(Task::impact_type, 1234, 0.15);
    Dataset a = synth::generate(rule, 100, 30, Task::impact_type);
    Dataset b = synth::generate(rule, 100, 30, Task::impact_type);
    CHECK(a == b);
    CHECK(to_jsonl(a) == to_jsonl(b));

    auto other_rule = synth::default_rule(Task::impact_type, 1235, 0.15);
    Dataset c = synth::generate(other_rule, 100, 30, Task::impact_type);
    CHECK_FALSE(a == c);
}

TEST_CASE("noise flips roughly the configured fraction of labels", "[synth]") {
    auto rule = synth::default_rule(Task::impact_type, 31415, 0.1);
    Dataset ds = synth::generate(rule, 1000, 0, Task::impact_type);

    long flipped = 0;
    for (const auto& a : ds.articles) {
        if (*a.impact_type != rule_label(rule, find_keyword(a, rule))) ++flipped;
    }
    double fraction = static_cast<double>(flipped) / 1000.0;
    CHECK(fraction > 0.07);  // 0.1 +- 0.03 binomial bound
    CHECK(fraction < 0.13);
}

TEST_CASE("bodies use 20-40 filler words plus the keyword", "[synth]") {
    auto rule = synth::default_rule(Task::impact_type, 2);
    Dataset ds = synth::generate(rule, 50, 0, Task::impact_type);
    TokenizerConfig ws;
    ws.mode = TokenizerMode::whitespace;
    for (const auto& a : ds.articles) {
        size_t words = tokenize(a.body, ws).size();
        CHECK(words >= 21);
        CHECK(words <= 41);
    }
}

TEST_CASE("a single-word vocabulary cannot make many distinct bodies", "[synth]") {
    synth::HiddenRule rule = synth::default_rule(Task::impact_type, 1);
    rule.vocabulary = {"only"};
    CHECK_THROWS_AS(synth::generate(rule, 5000, 0, Task::impact_type), ValidationError);
}

TEST_CASE("rule invariants are enforced", "[synth]") {
    auto rule = synth::default_rule(Task::impact_type, 1);
    rule.keyword_map.pop_back();
    rule.keyword_map.pop_back();  // drops both Cannot Distinguish keywords
    CHECK_THROWS_AS(synth::generate(rule, 10, 5, Task::impact_type), ValidationError);

    auto overlap = synth::default_rule(Task::impact_type, 1);
    overlap.vocabulary.push_back("upswing");  // keyword leaks into filler
    CHECK_THROWS_AS(synth::generate(overlap, 10, 5, Task::impact_type), ValidationError);

    auto bad_noise = synth::default_rule(Task::impact_type, 1, 0.0);
    bad_noise.noise_rate = 1.0;
    CHECK_THROWS_AS(synth::generate(bad_noise, 10, 5, Task::impact_type), ValidationError);
}

TEST_CASE("labels are near-balanced by round-robin keyword assignment", "[synth]") {
    auto rule = synth::default_rule(Task::impact_type, 8);
    Dataset ds = synth::generate(rule, 300, 0, Task::impact_type);
    std::unordered_map<std::string, int> counts;
    for (const auto& a : ds.articles) ++counts[*a.impact_type];
    for (const auto& label : task_labels(Task::impact_type)) {
        CHECK(counts[label] == 100);
    }
}

TEST_CASE("label noise degrades accuracy but stays above chance", "[synth]") {
    PromptConfig cfg{5, ExemplarOrder::similar_first, GuidelineMode::standard};

    auto clean_rule = synth::default_rule(Task::impact_type, 61);
    Dataset clean = synth::generate(clean_rule, 300, 80, Task::impact_type);
    auto backend = synth::oracle_backend(clean);
    RunResult base = run(clean, cfg, *backend, Task::impact_type, InferenceMode::likelihood, {});

    auto noisy_rule = synth::default_rule(Task::impact_type, 61, 0.3);
    Dataset noisy = synth::generate(noisy_rule, 300, 80, Task::impact_type);
    RunResult degraded =
        run(noisy, cfg, *backend, Task::impact_type, InferenceMode::likelihood, {});

    CHECK(degraded.accuracy < base.accuracy);
    CHECK(degraded.accuracy > 1.0 / 3.0 + 0.1);  // clearly above the chance baseline
}

TEST_CASE("oracle predictions ignore exemplar order", "[synth]") {
    auto rule = synth::default_rule(Task::impact_type, 777);
    Dataset ds = synth::generate(rule, 90, 25, Task::impact_type);
    auto backend = synth::oracle_backend(ds);

    RunOptions options;
    PromptConfig forward{5, ExemplarOrder::similar_first, GuidelineMode::standard};
    PromptConfig reverse{5, ExemplarOrder::similar_last, GuidelineMode::standard};

    RunResult a = run(ds, forward, *backend, Task::impact_type, InferenceMode::likelihood,
                      options);
    RunResult b = run(ds, reverse, *backend, Task::impact_type, InferenceMode::likelihood,
                      options);

    REQUIRE(a.predictions.size() == b.predictions.size());
    for (size_t i = 0; i < a.predictions.size(); ++i) {
        CHECK(a.predictions[i].predicted == b.predictions[i].predicted);
        CHECK(a.predictions[i].confidence == b.predictions[i].confidence);
    }
}

TEST_CASE("generation mode also closes the loop with the oracle", "[synth]") {
    auto rule = synth::default_rule(Task::impact_type, 555);
    Dataset ds = synth::generate(rule, 90, 20, Task::impact_type);
    auto backend = synth::oracle_backend(ds);
    PromptConfig cfg{5, ExemplarOrder::similar_first, GuidelineMode::standard};

    RunResult r = run(ds, cfg, *backend, Task::impact_type, InferenceMode::generation, {});
    CHECK(r.predictions.size() == 20);
    long failed = 0;
    for (const auto& p : r.predictions) {
        if (p.extraction_failed) ++failed;
    }
    CHECK(failed == 0);
    CHECK(r.accuracy >= 0.8);  // majority vote over retrieved same-keyword exemplars
}
