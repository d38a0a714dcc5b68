#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "icl/corpus.hpp"
#include "icl/dataset_io.hpp"
#include "icl/rng.hpp"
#include "support/table_fixture.hpp"

using namespace icl;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& content, const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("icl_corpus_" + name);
    std::ofstream out(p, std::ios::binary);
    out << content;
    return p;
}

Article basic_article(const std::string& id) {
    Article a;
    a.id = id;
    a.title = "title " + id;
    a.body = "body " + id;
    a.category = "Opinion";
    a.impact_type = "Risk";
    a.split = "train";
    return a;
}

}  // namespace

TEST_CASE("jsonl loading preserves file order", "[corpus]") {
    std::string jsonl =
        R"({"id":"a3","title":"t","body":"b","category":"Opinion","impact_type":"Risk","split":"train"})"
        "\n"
        R"({"id":"a1","title":"t","body":"b","category":"ESG Life","impact_type":"Opportunity","split":"train"})"
        "\n"
        R"({"id":"a2","title":"t","body":"b","category":"Opinion","split":"test"})"
        "\n";
    auto path = write_temp(jsonl, "order.jsonl");
    Dataset ds = load_dataset(path, DatasetFormat::jsonl);

    REQUIRE(ds.articles.size() == 3);
    CHECK(ds.articles[0].id == "a3");
    CHECK(ds.articles[1].id == "a1");
    CHECK(ds.articles[2].id == "a2");
    CHECK_FALSE(ds.articles[2].impact_type.has_value());  // absent label is allowed
}

TEST_CASE("unknown category fails naming the field and line", "[corpus]") {
    std::string jsonl =
        R"({"id":"a1","title":"t","body":"b","category":"Opinion","split":"train"})"
        "\n"
        R"({"id":"a2","title":"t","body":"b","category":"Opinions","split":"train"})"
        "\n";
    auto path = write_temp(jsonl, "badcat.jsonl");
    try {
        load_dataset(path, DatasetFormat::jsonl);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        std::string msg = e.what();
        CHECK(msg.find("category") != std::string::npos);
        CHECK(msg.find(":2") != std::string::npos);
    }
}

TEST_CASE("duplicate id error names both lines", "[corpus]") {
    std::string jsonl =
        R"({"id":"a1","title":"t","body":"b","category":"Opinion","split":"train"})"
        "\n"
        R"({"id":"a1","title":"t","body":"b","category":"Opinion","split":"train"})"
        "\n";
    auto path = write_temp(jsonl, "dup.jsonl");
    try {
        load_dataset(path, DatasetFormat::jsonl);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        std::string msg = e.what();
        CHECK(msg.find(":1") != std::string::npos);
        CHECK(msg.find(":2") != std::string::npos);
        CHECK(msg.find("a1") != std::string::npos);
    }
}

TEST_CASE("malformed json reports the line number", "[corpus]") {
    auto path = write_temp("{\"id\": \"a1\",\n", "badjson.jsonl");
    try {
        load_dataset(path, DatasetFormat::jsonl);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find(":1") != std::string::npos);
    }
}

TEST_CASE("csv round trip equals jsonl view of the same records", "[corpus]") {
    Dataset ds;
    ds.articles = {basic_article("c1"), basic_article("c2")};
    ds.articles[1].body = "line with, comma and \"quotes\"\nand newline";
    ds.articles[1].impact_duration = "2 to 5 years";

    auto path = write_temp(to_csv(ds), "roundtrip.csv");
    Dataset reloaded = load_dataset(path, DatasetFormat::csv);
    REQUIRE(reloaded.articles.size() == 2);
    CHECK(reloaded.articles[0] == ds.articles[0]);
    CHECK(reloaded.articles[1] == ds.articles[1]);
}

TEST_CASE("table fixture reproduces published marginals", "[corpus]") {
    Dataset ds = testsupport::make_table_fixture();
    REQUIRE(ds.articles.size() == 800);
    CHECK(validate(ds).empty());

    DatasetStats type_stats = stats(ds, Task::impact_type);
    CHECK(type_stats.col_totals == std::vector<long>{462, 229, 109});
    CHECK(type_stats.row_totals == std::vector<long>{258, 205, 156, 153, 20, 8});
    CHECK(type_stats.grand_total == 800);
    CHECK(type_stats.unlabeled == 0);

    DatasetStats dur_stats = stats(ds, Task::impact_duration);
    CHECK(dur_stats.col_totals == std::vector<long>{446, 212, 142});
    CHECK(dur_stats.grand_total == 800);
}

TEST_CASE("bundled fixture file matches the generator byte for byte", "[corpus]") {
    fs::path bundled = fs::path(ICL_DATA_DIR) / "fixtures" / "esg_train_fixture.jsonl";
    REQUIRE(fs::exists(bundled));
    std::ifstream in(bundled, std::ios::binary);
    std::string on_disk((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(on_disk == to_jsonl(testsupport::make_table_fixture()));
}

TEST_CASE("stats on an empty dataset is all zero", "[corpus]") {
    Dataset ds;
    DatasetStats s = stats(ds, Task::impact_type);
    CHECK(s.grand_total == 0);
    CHECK(s.unlabeled == 0);
    for (const auto& row : s.counts) {
        for (long c : row) CHECK(c == 0);
    }
}

TEST_CASE("stats counts partition labeled articles", "[corpus]") {
    Dataset ds;
    ds.articles = {basic_article("a1"), basic_article("a2"), basic_article("a3")};
    ds.articles[1].impact_type.reset();  // unlabeled
    DatasetStats s = stats(ds, Task::impact_type);
    CHECK(s.grand_total == 2);
    CHECK(s.unlabeled == 1);

    long cells = 0;
    for (const auto& row : s.counts) {
        for (long c : row) cells += c;
    }
    CHECK(cells == s.grand_total);
}

TEST_CASE("validate reports duplicate ids", "[corpus]") {
    Dataset ds;
    ds.articles = {basic_article("a1"), basic_article("a1")};
    auto violations = validate(ds);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].field == "id");
    CHECK(violations[0].message.find("a1") != std::string::npos);
}

TEST_CASE("validate flags exact-membership label mismatches", "[corpus]") {
    Dataset ds;
    ds.articles = {basic_article("a1")};
    ds.articles[0].impact_type = "Opportunity ";  // trailing space

    // independent oracle: exact string membership in the closed set
    const auto& labels = task_labels(Task::impact_type);
    bool member = std::find(labels.begin(), labels.end(), "Opportunity ") != labels.end();
    REQUIRE_FALSE(member);

    auto violations = validate(ds);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].field == "impact_type");
}

TEST_CASE("validate is empty exactly when every invariant holds", "[corpus]") {
    // property: injecting each violation class makes validate non-empty,
    // and undoing it restores emptiness
    Rng rng(20240809);
    for (int trial = 0; trial < 50; ++trial) {
        Dataset ds;
        for (int i = 0; i < 5; ++i) {
            ds.articles.push_back(basic_article("p" + std::to_string(i)));
        }
        REQUIRE(validate(ds).empty());

        size_t victim = rng.uniform_below(ds.articles.size());
        switch (rng.uniform_below(5)) {
            case 0: ds.articles[victim].id = ds.articles[(victim + 1) % 5].id; break;
            case 1: ds.articles[victim].body.clear(); break;
            case 2: ds.articles[victim].category = "Misc"; break;
            case 3: ds.articles[victim].impact_type = "RISK"; break;
            case 4: ds.articles[victim].split = "validation"; break;
        }
        CHECK_FALSE(validate(ds).empty());
    }
}

TEST_CASE("jsonl round trip yields an identical dataset", "[corpus]") {
    Rng rng(77);
    const auto& types = task_labels(Task::impact_type);
    const auto& durations = task_labels(Task::impact_duration);

    Dataset ds;
    for (int i = 0; i < 40; ++i) {
        Article a = basic_article("rt" + std::to_string(i));
        a.category = categories()[rng.uniform_below(categories().size())];
        a.title = "제목 " + std::to_string(rng.next_u64() % 1000);
        a.body = "본문, with \"punctuation\" and\nnewlines " + std::to_string(i);
        if (rng.uniform01() < 0.7) a.impact_type = types[rng.uniform_below(3)];
        else a.impact_type.reset();
        if (rng.uniform01() < 0.7) a.impact_duration = durations[rng.uniform_below(3)];
        a.split = rng.uniform01() < 0.5 ? "train" : "test";
        ds.articles.push_back(std::move(a));
    }

    auto path = write_temp(to_jsonl(ds), "roundtrip.jsonl");
    Dataset reloaded = load_dataset(path, DatasetFormat::jsonl);
    reloaded.name = ds.name;
    CHECK(reloaded == ds);

    // serialize -> load -> serialize is a fixed point
    CHECK(to_jsonl(reloaded) == to_jsonl(ds));
}

TEST_CASE("labels match after NFC normalization of decomposed input", "[corpus]") {
    // decomposed Hangul in body/title must compose on load
    std::string decomposed_title = "경영";  // 경영, NFD
    std::string composed_title = "경영";
    nlohmann::ordered_json obj;
    obj["id"] = "nfc-1";
    obj["title"] = decomposed_title;
    obj["body"] = "b";
    obj["category"] = "Opinion";
    obj["split"] = "train";
    auto path = write_temp(obj.dump() + "\n", "nfc.jsonl");

    Dataset ds = load_dataset(path, DatasetFormat::jsonl);
    REQUIRE(ds.articles.size() == 1);
    CHECK(ds.articles[0].title == composed_title);
}
