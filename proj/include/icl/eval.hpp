#pragma once

#include <atomic>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "icl/bm25.hpp"
#include "icl/concurrency.hpp"
#include "icl/corpus.hpp"
#include "icl/dataset_io.hpp"
#include "icl/errors.hpp"
#include "icl/prompt.hpp"
#include "icl/scorer.hpp"

namespace icl {

// Display rounding: percent, one decimal, half away from zero. Applied to the
// double value as computed, which is what per-prompt accuracy tables use.
inline double round_half_up_1dp(double x) {
    return std::floor(x * 10.0 + 0.5) / 10.0;
}

inline double to_percent_1dp(double fraction) {
    return round_half_up_1dp(fraction * 100.0);
}

// All predictions of one (dataset, prompt config, backend, task) run plus the
// aggregate metrics. Accuracy is taken over gold-labeled predictions and is
// NaN when the evaluation split is unlabeled.
struct RunResult {
    std::string config_name;
    Task task = Task::impact_type;
    std::string model_name;
    InferenceMode mode = InferenceMode::likelihood;
    std::vector<Prediction> predictions;
    double accuracy = std::numeric_limits<double>::quiet_NaN();
    double mean_confidence = 0.0;
    long item_errors = 0;       // backend failures tolerated in non-strict runs
    long degraded_prompts = 0;  // prompts assembled with fewer exemplars than shots
    std::string dataset_hash;
    std::string config_hash;
};

inline void finalize_metrics(RunResult& result) {
    long labeled = 0, correct = 0;
    double conf_sum = 0.0;
    for (const auto& p : result.predictions) {
        conf_sum += p.confidence;
        if (p.gold) {
            ++labeled;
            if (p.correct()) ++correct;
        }
    }
    result.mean_confidence =
        result.predictions.empty() ? 0.0 : conf_sum / static_cast<double>(result.predictions.size());
    result.accuracy = labeled == 0 ? std::numeric_limits<double>::quiet_NaN()
                                   : static_cast<double>(correct) / static_cast<double>(labeled);
}

struct RunOptions {
    TokenizerConfig tokenizer;
    Bm25Params bm25;
    GuidelineText guideline;
    ResponseCache* cache = nullptr;
    bool strict = false;
    bool length_normalize = false;
    int max_generation_tokens = 512;
    std::string eval_split = "test";
    int max_in_flight = 1;
    double requests_per_second = 0.0;
};

inline std::string retrieval_query_text(const Article& a) {
    return a.title + "\n" + a.body;
}

namespace detail {

// Applies the token bucket at the request level, so an item that scores
// three options consumes three tokens and cache hits consume none.
class PacedBackend : public ModelBackend {
public:
    PacedBackend(ModelBackend& inner, TokenBucket& bucket) : inner_(inner), bucket_(bucket) {}

    ContinuationScore score_continuation(const std::string& prompt,
                                         const std::string& continuation) override {
        bucket_.acquire();
        return inner_.score_continuation(prompt, continuation);
    }
    std::string complete(const std::string& prompt, int max_tokens) override {
        bucket_.acquire();
        return inner_.complete(prompt, max_tokens);
    }
    const std::string& model_name() const override { return inner_.model_name(); }

private:
    ModelBackend& inner_;
    TokenBucket& bucket_;
};

}  // namespace detail

inline Index build_train_index(const Dataset& dataset, const RunOptions& options) {
    std::vector<std::pair<std::string, std::string>> docs;
    for (const Article* a : dataset.split_view("train")) {
        docs.emplace_back(a->id, retrieval_query_text(*a));
    }
    return build_index(std::move(docs), options.bm25, options.tokenizer);
}

// One evaluation run: for every article in the evaluation split, retrieve the
// config's shot count of exemplars from the train split (never the query
// itself), order them, assemble the prompt and score it. Backend failures
// abort when strict, otherwise the item is dropped from the denominator and
// counted in item_errors.
inline RunResult run(const Dataset& dataset, const Index& train_index, const PromptConfig& config,
                     ModelBackend& backend, Task task, InferenceMode mode,
                     const RunOptions& options) {
    auto eval_items = dataset.split_view(options.eval_split);
    if (eval_items.empty()) {
        throw ValidationError("run: no evaluation items in split '" + options.eval_split + "'");
    }

    std::unordered_map<std::string, const Article*> by_id;
    by_id.reserve(dataset.articles.size());
    for (const auto& a : dataset.articles) by_id.emplace(a.id, &a);

    RunResult result;
    result.config_name = config.name();
    result.task = task;
    result.model_name = backend.model_name();
    result.mode = mode;
    result.dataset_hash = dataset_hash(dataset);

    TokenBucket bucket(options.requests_per_second, options.requests_per_second);
    detail::PacedBackend paced(backend, bucket);
    ModelBackend& effective =
        options.requests_per_second > 0.0 ? static_cast<ModelBackend&>(paced) : backend;
    Scorer scorer(effective, options.cache, options.length_normalize,
                  options.max_generation_tokens);

    std::vector<std::optional<Prediction>> slots(eval_items.size());
    std::vector<char> degraded(eval_items.size(), 0);
    std::atomic<long> errors{0};

    parallel_for(eval_items.size(), options.max_in_flight, [&](size_t i) {
        const Article& query = *eval_items[i];

        auto hits = train_index.top_k(retrieval_query_text(query), config.shots, {query.id});
        auto exemplar_ids = order_exemplars(hits, config.order);
        std::vector<Article> exemplars;
        exemplars.reserve(exemplar_ids.size());
        for (const auto& id : exemplar_ids) {
            auto it = by_id.find(id);
            if (it == by_id.end()) throw Error("run: retrieved id '" + id + "' not in dataset");
            exemplars.push_back(*it->second);
        }

        PromptInstance pi = assemble(config, query, exemplars, task, mode, options.guideline);
        if (!pi.warnings.empty()) degraded[i] = 1;

        try {
            Prediction pred;
            if (mode == InferenceMode::likelihood) {
                pred = predict(scorer.score_options(pi), query.label(task));
            } else {
                pred = scorer.generate_and_extract(pi, pi.option_strings);
                pred.gold = query.label(task);
            }
            pred.query_id = query.id;
            slots[i] = std::move(pred);
        } catch (const BackendError&) {
            if (options.strict) throw;
            errors.fetch_add(1);
        }
    });

    for (size_t i = 0; i < slots.size(); ++i) {
        if (slots[i]) result.predictions.push_back(std::move(*slots[i]));
        if (degraded[i]) ++result.degraded_prompts;
    }
    result.item_errors = errors.load();
    finalize_metrics(result);
    return result;
}

inline RunResult run(const Dataset& dataset, const PromptConfig& config, ModelBackend& backend,
                     Task task, InferenceMode mode, const RunOptions& options) {
    Index index = build_train_index(dataset, options);
    return run(dataset, index, config, backend, task, mode, options);
}

// gold x predicted counts over the task's label set.
struct ConfusionMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<long>> cells;  // [gold][predicted]
    long total = 0;

    long diagonal() const {
        long d = 0;
        for (size_t i = 0; i < labels.size(); ++i) d += cells[i][i];
        return d;
    }
};

inline ConfusionMatrix confusion(const RunResult& result) {
    ConfusionMatrix cm;
    cm.labels = task_labels(result.task);
    cm.cells.assign(cm.labels.size(), std::vector<long>(cm.labels.size(), 0));

    auto index_of = [&](const std::string& label, const char* what) {
        for (size_t i = 0; i < cm.labels.size(); ++i) {
            if (cm.labels[i] == label) return i;
        }
        throw ValidationError(std::string("confusion: unknown ") + what + " label '" + label +
                              "'");
    };

    for (const auto& p : result.predictions) {
        if (!p.gold) {
            throw ValidationError("confusion: prediction for '" + p.query_id +
                                  "' has no gold label");
        }
        ++cm.cells[index_of(*p.gold, "gold")][index_of(p.predicted, "predicted")];
        ++cm.total;
    }
    return cm;
}

// Min/max/mean/delta of per-run accuracy over one prompt sweep, in display
// percent. Delta is taken on the rounded endpoints, matching how summary
// tables are derived from per-prompt tables.
struct SweepSummary {
    Task task = Task::impact_type;
    std::string model_name;
    double min_pct = 0.0;
    double max_pct = 0.0;
    double mean_pct = 0.0;
    double delta_pct = 0.0;
    size_t runs = 0;
};

inline SweepSummary sweep_summary(const std::vector<RunResult>& results) {
    if (results.empty()) throw ValidationError("sweep_summary: no runs");
    SweepSummary s;
    s.task = results.front().task;
    s.model_name = results.front().model_name;
    s.runs = results.size();

    double min_acc = std::numeric_limits<double>::infinity();
    double max_acc = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (const auto& r : results) {
        if (r.task != s.task || r.model_name != s.model_name) {
            throw ValidationError("sweep_summary: mixed task or model in input runs");
        }
        if (std::isnan(r.accuracy)) {
            throw ValidationError("sweep_summary: run '" + r.config_name +
                                  "' has no accuracy (unlabeled split?)");
        }
        min_acc = std::min(min_acc, r.accuracy);
        max_acc = std::max(max_acc, r.accuracy);
        sum += r.accuracy;
    }
    s.min_pct = to_percent_1dp(min_acc);
    s.max_pct = to_percent_1dp(max_acc);
    s.mean_pct = to_percent_1dp(sum / static_cast<double>(results.size()));
    s.delta_pct = s.max_pct - s.min_pct;
    return s;
}

// OLS of accuracy on mean confidence over per-run points.
struct CalibrationFit {
    std::vector<std::pair<double, double>> points;  // (confidence, accuracy)
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

inline CalibrationFit calibration_fit(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 2) {
        throw ValidationError("calibration_fit: need at least 2 points");
    }
    double n = static_cast<double>(points.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const auto& [x, y] : points) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    double denom = n * sxx - sx * sx;
    if (denom == 0.0 || !std::isfinite(1.0 / denom)) {
        throw ValidationError("calibration_fit: degenerate regression (zero confidence variance)");
    }

    CalibrationFit fit;
    fit.points = points;
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;

    double ybar = sy / n;
    double ss_tot = 0.0, ss_res = 0.0;
    for (const auto& [x, y] : points) {
        double resid = y - (fit.slope * x + fit.intercept);
        ss_tot += (y - ybar) * (y - ybar);
        ss_res += resid * resid;
    }
    fit.r2 = ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
    return fit;
}

inline CalibrationFit calibration_fit(const std::vector<RunResult>& results) {
    std::vector<std::pair<double, double>> points;
    points.reserve(results.size());
    for (const auto& r : results) {
        if (std::isnan(r.accuracy)) {
            throw ValidationError("calibration_fit: run '" + r.config_name + "' has no accuracy");
        }
        points.emplace_back(r.mean_confidence, r.accuracy);
    }
    return calibration_fit(points);
}

// Expected calibration error over equal-width confidence bins.
inline double ece(const RunResult& result, int bins) {
    if (bins < 1) throw ValidationError("ece: bins must be >= 1");
    std::vector<long> n_b(static_cast<size_t>(bins), 0);
    std::vector<long> correct_b(static_cast<size_t>(bins), 0);
    std::vector<double> conf_b(static_cast<size_t>(bins), 0.0);

    long total = 0;
    for (const auto& p : result.predictions) {
        if (!p.gold) throw ValidationError("ece: prediction for '" + p.query_id +
                                           "' has no gold label");
        int b = std::min(static_cast<int>(p.confidence * bins), bins - 1);
        if (b < 0) b = 0;
        ++n_b[b];
        conf_b[b] += p.confidence;
        if (p.correct()) ++correct_b[b];
        ++total;
    }
    if (total == 0) return 0.0;

    double e = 0.0;
    for (int b = 0; b < bins; ++b) {
        if (n_b[b] == 0) continue;
        double acc = static_cast<double>(correct_b[b]) / static_cast<double>(n_b[b]);
        double conf = conf_b[b] / static_cast<double>(n_b[b]);
        e += static_cast<double>(n_b[b]) / static_cast<double>(total) * std::abs(acc - conf);
    }
    return e;
}

}  // namespace icl
