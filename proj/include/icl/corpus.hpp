#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "icl/errors.hpp"
#include "icl/unicode.hpp"

namespace icl {

enum class Task { impact_type, impact_duration };

inline const std::vector<std::string>& task_labels(Task task) {
    static const std::vector<std::string> type_labels = {
        "Opportunity", "Risk", "Cannot Distinguish"};
    static const std::vector<std::string> duration_labels = {
        "Less than 2 years", "2 to 5 years", "More than 5 years"};
    return task == Task::impact_type ? type_labels : duration_labels;
}

inline std::string task_name(Task task) {
    return task == Task::impact_type ? "impact_type" : "impact_duration";
}

// Display form used in report CSVs.
inline std::string task_display(Task task) {
    return task == Task::impact_type ? "Impact Type" : "Impact Duration";
}

inline Task parse_task(std::string_view name) {
    if (name == "impact_type" || name == "Impact Type") return Task::impact_type;
    if (name == "impact_duration" || name == "Impact Duration") return Task::impact_duration;
    throw ValidationError("unknown task: '" + std::string(name) +
                          "' (expected impact_type or impact_duration)");
}

inline const std::vector<std::string>& categories() {
    static const std::vector<std::string> cats = {
        "Sustainable Economics", "Corporate Governance", "Environment & Society",
        "Disclosure & Evaluation", "ESG Life", "Opinion"};
    return cats;
}

inline bool is_known_category(const std::string& category) {
    const auto& cats = categories();
    return std::find(cats.begin(), cats.end(), category) != cats.end();
}

inline bool is_known_label(Task task, const std::string& label) {
    const auto& labels = task_labels(task);
    return std::find(labels.begin(), labels.end(), label) != labels.end();
}

// One labeled news document. Label fields are absent (not sentinel strings)
// for unlabeled data; `split` assigns the document to train or test.
struct Article {
    std::string id;
    std::string title;
    std::string body;
    std::string category;
    std::optional<std::string> impact_type;
    std::optional<std::string> impact_duration;
    std::string split = "train";

    const std::optional<std::string>& label(Task task) const {
        return task == Task::impact_type ? impact_type : impact_duration;
    }
    std::optional<std::string>& label(Task task) {
        return task == Task::impact_type ? impact_type : impact_duration;
    }

    bool operator==(const Article&) const = default;
};

struct Dataset {
    std::string name;
    std::vector<Article> articles;

    bool operator==(const Dataset&) const = default;

    std::vector<const Article*> split_view(std::string_view split) const {
        std::vector<const Article*> out;
        for (const auto& a : articles) {
            if (a.split == split) out.push_back(&a);
        }
        return out;
    }

    const Article* find(const std::string& id) const {
        for (const auto& a : articles) {
            if (a.id == id) return &a;
        }
        return nullptr;
    }
};

struct Violation {
    std::string article_id;
    std::string field;
    std::string message;
};

// Reports every invariant violation in the dataset: duplicate ids, empty
// ids/bodies, unknown categories, labels or splits. Empty result == valid.
inline std::vector<Violation> validate(const Dataset& dataset) {
    std::vector<Violation> out;
    std::unordered_map<std::string, size_t> seen;
    for (const auto& a : dataset.articles) {
        if (a.id.empty()) {
            out.push_back({a.id, "id", "id is empty"});
        } else {
            auto [it, inserted] = seen.emplace(a.id, out.size());
            if (!inserted) {
                out.push_back({a.id, "id", "duplicate id '" + a.id + "'"});
            }
        }
        if (a.body.empty()) {
            out.push_back({a.id, "body", "body is empty"});
        }
        if (!is_known_category(a.category)) {
            out.push_back({a.id, "category", "unknown category '" + a.category + "'"});
        }
        if (a.impact_type && !is_known_label(Task::impact_type, *a.impact_type)) {
            out.push_back({a.id, "impact_type", "unknown label '" + *a.impact_type + "'"});
        }
        if (a.impact_duration && !is_known_label(Task::impact_duration, *a.impact_duration)) {
            out.push_back({a.id, "impact_duration", "unknown label '" + *a.impact_duration + "'"});
        }
        if (a.split != "train" && a.split != "test") {
            out.push_back({a.id, "split", "unknown split '" + a.split + "'"});
        }
    }
    return out;
}

// category x label contingency table for one task, with marginals. Articles
// without a label for the task are excluded and surfaced via `unlabeled`.
struct DatasetStats {
    Task task;
    std::vector<std::string> category_names;   // row order
    std::vector<std::string> label_names;      // column order
    std::vector<std::vector<long>> counts;     // [category][label]
    std::vector<long> row_totals;
    std::vector<long> col_totals;
    long grand_total = 0;
    long unlabeled = 0;
};

inline DatasetStats stats(const Dataset& dataset, Task task) {
    DatasetStats s;
    s.task = task;
    s.category_names = categories();
    s.label_names = task_labels(task);
    s.counts.assign(s.category_names.size(), std::vector<long>(s.label_names.size(), 0));
    s.row_totals.assign(s.category_names.size(), 0);
    s.col_totals.assign(s.label_names.size(), 0);

    std::unordered_map<std::string, size_t> cat_index, label_index;
    for (size_t i = 0; i < s.category_names.size(); ++i) cat_index[s.category_names[i]] = i;
    for (size_t j = 0; j < s.label_names.size(); ++j) label_index[s.label_names[j]] = j;

    for (const auto& a : dataset.articles) {
        const auto& label = a.label(task);
        if (!label) {
            ++s.unlabeled;
            continue;
        }
        auto ci = cat_index.find(a.category);
        auto li = label_index.find(*label);
        if (ci == cat_index.end()) {
            throw ValidationError("stats: article '" + a.id + "' has unknown category '" +
                                  a.category + "'");
        }
        if (li == label_index.end()) {
            throw ValidationError("stats: article '" + a.id + "' has unknown " +
                                  task_name(task) + " label '" + *label + "'");
        }
        ++s.counts[ci->second][li->second];
        ++s.row_totals[ci->second];
        ++s.col_totals[li->second];
        ++s.grand_total;
    }
    return s;
}

}  // namespace icl
