#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "icl/corpus.hpp"
#include "icl/dataset_io.hpp"
#include "icl/errors.hpp"
#include "icl/eval.hpp"

namespace icl {

namespace detail {

inline std::string sanitize_component(std::string s) {
    for (char& c : s) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                  c == '-' || c == '.' || c == '_';
        if (!ok) c = '_';
    }
    return s;
}

inline std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

}  // namespace detail

// Immutable per-run artifact name: keyed by dataset, task, model and prompt
// config so re-running a sweep can resume past completed runs.
inline std::string run_report_filename(const std::string& dataset_hash, Task task,
                                       const std::string& model_name,
                                       const std::string& config_name) {
    return "run-" + dataset_hash.substr(0, 12) + "-" + task_name(task) + "-" +
           detail::sanitize_component(model_name) + "-" +
           detail::sanitize_component(config_name) + ".json";
}

// Run reports carry no timestamps: two runs of the same inputs must be
// byte-identical.
inline nlohmann::ordered_json run_report_json(const RunResult& result) {
    nlohmann::ordered_json j;
    j["schema"] = "icl-lab/run-v1";
    j["config_name"] = result.config_name;
    j["task"] = task_name(result.task);
    j["model"] = result.model_name;
    j["mode"] = mode_name(result.mode);
    j["dataset_hash"] = result.dataset_hash;
    j["config_hash"] = result.config_hash;
    j["n_predictions"] = result.predictions.size();
    j["item_errors"] = result.item_errors;
    j["degraded_prompts"] = result.degraded_prompts;
    if (std::isnan(result.accuracy)) {
        j["accuracy"] = nullptr;
    } else {
        j["accuracy"] = result.accuracy;
    }
    j["mean_confidence"] = result.mean_confidence;

    bool all_gold = !result.predictions.empty();
    for (const auto& p : result.predictions) {
        if (!p.gold) all_gold = false;
    }
    if (all_gold) {
        ConfusionMatrix cm = confusion(result);
        j["confusion"] = {{"labels", cm.labels}, {"cells", cm.cells}};
        j["ece_10bin"] = ece(result, 10);
    }

    auto preds = nlohmann::ordered_json::array();
    for (const auto& p : result.predictions) {
        nlohmann::ordered_json pj;
        pj["query_id"] = p.query_id;
        pj["predicted"] = p.predicted;
        pj["confidence"] = p.confidence;
        if (p.gold) pj["gold"] = *p.gold;
        if (p.gold_prob) pj["gold_prob"] = *p.gold_prob;
        if (p.extraction_failed) pj["extraction_failed"] = true;
        preds.push_back(std::move(pj));
    }
    j["predictions"] = std::move(preds);
    return j;
}

inline void write_run_report(const RunResult& result, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write run report: " + path.string());
    out << run_report_json(result).dump(2) << '\n';
}

inline RunResult read_run_report(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open run report: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("run report " + path.string() + ": invalid JSON: " + e.what());
    }
    if (j.value("schema", "") != "icl-lab/run-v1") {
        throw ValidationError("run report " + path.string() + ": unrecognized schema");
    }

    RunResult r;
    r.config_name = j.at("config_name").get<std::string>();
    r.task = parse_task(j.at("task").get<std::string>());
    r.model_name = j.at("model").get<std::string>();
    r.mode = parse_mode(j.at("mode").get<std::string>());
    r.dataset_hash = j.value("dataset_hash", "");
    r.config_hash = j.value("config_hash", "");
    r.item_errors = j.value("item_errors", 0L);
    r.degraded_prompts = j.value("degraded_prompts", 0L);
    r.accuracy = j.at("accuracy").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                            : j.at("accuracy").get<double>();
    r.mean_confidence = j.at("mean_confidence").get<double>();
    for (const auto& pj : j.at("predictions")) {
        Prediction p;
        p.query_id = pj.at("query_id").get<std::string>();
        p.predicted = pj.at("predicted").get<std::string>();
        p.confidence = pj.at("confidence").get<double>();
        if (pj.contains("gold")) p.gold = pj.at("gold").get<std::string>();
        if (pj.contains("gold_prob")) p.gold_prob = pj.at("gold_prob").get<double>();
        p.extraction_failed = pj.value("extraction_failed", false);
        p.mode = r.mode;
        r.predictions.push_back(std::move(p));
    }
    return r;
}

// Per-prompt rows, one per run: Prompt,Accuracy,Confidence,Model,Task.
inline std::string sweep_csv(const std::vector<RunResult>& results) {
    std::string out = "Prompt,Accuracy,Confidence,Model,Task\n";
    for (const auto& r : results) {
        out += detail::csv_escape(r.config_name) + "," + detail::fmt("%.6g", r.accuracy) + "," +
               detail::fmt("%.6f", r.mean_confidence) + "," + detail::csv_escape(r.model_name) +
               "," + task_display(r.task) + "\n";
    }
    return out;
}

// (confidence, accuracy) scatter rows for external plotting.
inline std::string scatter_csv(const std::vector<RunResult>& results) {
    std::string out = "confidence,accuracy,model,task\n";
    for (const auto& r : results) {
        out += detail::fmt("%.6f", r.mean_confidence) + "," + detail::fmt("%.6g", r.accuracy) +
               "," + detail::csv_escape(r.model_name) + "," + task_display(r.task) + "\n";
    }
    return out;
}

inline void write_text_file(const std::string& content, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path.string());
    out << content;
}

// Loads per-prompt (accuracy, confidence) rows from a CSV with the header
// Prompt,Accuracy,Confidence,Model,Task — the same shape sweep reports use.
// Rows become prediction-less RunResults, enough for summaries and fits.
inline std::vector<RunResult> load_prompt_runs_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open prompt-runs CSV: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();

    std::vector<size_t> line_of_row;
    auto rows = detail::parse_csv(buf.str(), line_of_row);
    static const std::vector<std::string> header = {"Prompt", "Accuracy", "Confidence", "Model",
                                                    "Task"};
    if (rows.empty() || rows[0] != header) {
        throw ValidationError(path.string() +
                              ": expected header Prompt,Accuracy,Confidence,Model,Task");
    }

    std::vector<RunResult> out;
    for (size_t i = 1; i < rows.size(); ++i) {
        const auto& cells = rows[i];
        if (cells.size() == 1 && cells[0].empty()) continue;
        if (cells.size() != header.size()) {
            throw ValidationError(path.string() + ":" + std::to_string(line_of_row[i]) +
                                  ": expected 5 cells");
        }
        RunResult r;
        r.config_name = cells[0];
        try {
            r.accuracy = std::stod(cells[1]);
            r.mean_confidence = std::stod(cells[2]);
        } catch (const std::exception&) {
            throw ValidationError(path.string() + ":" + std::to_string(line_of_row[i]) +
                                  ": non-numeric accuracy/confidence");
        }
        r.model_name = cells[3];
        r.task = parse_task(cells[4]);
        out.push_back(std::move(r));
    }
    return out;
}

// Groups runs by (model, task) preserving input order within each group.
inline std::vector<std::vector<RunResult>> group_runs(const std::vector<RunResult>& runs) {
    std::vector<std::vector<RunResult>> groups;
    std::map<std::pair<std::string, std::string>, size_t> index;
    for (const auto& r : runs) {
        auto key = std::make_pair(r.model_name, task_name(r.task));
        auto it = index.find(key);
        if (it == index.end()) {
            index.emplace(key, groups.size());
            groups.emplace_back();
            groups.back().push_back(r);
        } else {
            groups[it->second].push_back(r);
        }
    }
    return groups;
}

// Aggregates the run reports in a directory. Refuses to pool runs produced
// from different datasets.
inline std::vector<RunResult> collect_run_reports(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) {
        throw ValidationError("not a directory: " + dir.string());
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (entry.is_regular_file() && name.rfind("run-", 0) == 0 &&
            entry.path().extension() == ".json") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());

    std::vector<RunResult> runs;
    for (const auto& f : files) runs.push_back(read_run_report(f));
    for (const auto& r : runs) {
        if (r.dataset_hash != runs.front().dataset_hash) {
            throw ValidationError("report: run '" + r.config_name + "' (" + r.model_name +
                                  ") was produced from a different dataset; refusing to aggregate");
        }
    }
    return runs;
}

}  // namespace icl
