// icl-lab: retrieval-augmented in-context-learning classification harness.
// Subcommands: stats, index, grid, synth, run, sweep, report.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "icl/icl.hpp"

namespace fs = std::filesystem;

namespace {

void log_line(const std::string& msg) {
    std::cerr << "[icl-lab] " << msg << "\n";
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw icl::ValidationError("cannot open file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

icl::Dataset load_config_dataset(const icl::RunConfigFile& cfg) {
    if (!cfg.data_path.empty()) {
        return icl::load_dataset(cfg.data_path);
    }
    if (cfg.train_path == cfg.test_path) {
        return icl::load_dataset(cfg.train_path);
    }
    icl::Dataset train = icl::load_dataset(cfg.train_path);
    icl::Dataset test = icl::load_dataset(cfg.test_path);
    for (const auto& a : train.articles) {
        if (a.split != "train") {
            throw icl::ValidationError("data.train record '" + a.id + "' has split '" + a.split +
                                       "'");
        }
    }
    for (const auto& a : test.articles) {
        if (a.split != "test") {
            throw icl::ValidationError("data.test record '" + a.id + "' has split '" + a.split +
                                       "'");
        }
    }
    icl::Dataset merged;
    merged.name = train.name + "+" + test.name;
    merged.articles = std::move(train.articles);
    merged.articles.insert(merged.articles.end(),
                           std::make_move_iterator(test.articles.begin()),
                           std::make_move_iterator(test.articles.end()));
    auto violations = icl::validate(merged);
    if (!violations.empty()) {
        throw icl::ValidationError("merged train/test data invalid: " + violations.front().message);
    }
    return merged;
}

void print_stats_table(const icl::DatasetStats& s) {
    size_t cat_w = std::string("Category").size();
    for (const auto& c : s.category_names) cat_w = std::max(cat_w, c.size());
    std::vector<size_t> col_w;
    for (const auto& l : s.label_names) col_w.push_back(std::max<size_t>(l.size(), 5));

    auto pad = [](const std::string& str, size_t w) {
        return str + std::string(w > str.size() ? w - str.size() : 0, ' ');
    };
    auto rpad = [](const std::string& str, size_t w) {
        return std::string(w > str.size() ? w - str.size() : 0, ' ') + str;
    };

    std::string header = pad("Category", cat_w);
    for (size_t j = 0; j < s.label_names.size(); ++j) {
        header += "  " + rpad(s.label_names[j], col_w[j]);
    }
    header += "  " + rpad("Total", 6);
    std::cout << header << "\n";

    for (size_t i = 0; i < s.category_names.size(); ++i) {
        std::string row = pad(s.category_names[i], cat_w);
        for (size_t j = 0; j < s.label_names.size(); ++j) {
            row += "  " + rpad(std::to_string(s.counts[i][j]), col_w[j]);
        }
        row += "  " + rpad(std::to_string(s.row_totals[i]), 6);
        std::cout << row << "\n";
    }
    std::string total = pad("Total", cat_w);
    for (size_t j = 0; j < s.label_names.size(); ++j) {
        total += "  " + rpad(std::to_string(s.col_totals[j]), col_w[j]);
    }
    total += "  " + rpad(std::to_string(s.grand_total), 6);
    std::cout << total << "\n";
    if (s.unlabeled > 0) {
        std::cout << "(unlabeled articles excluded: " << s.unlabeled << ")\n";
    }
}

struct SweepOutcome {
    std::vector<icl::RunResult> results;
    long backend_calls = 0;
};

// Shared by `run` and `sweep`: executes the selected prompt configs against
// the config's dataset/backend, reusing existing run artifacts when their
// provenance hashes match.
SweepOutcome execute(const icl::RunConfigFile& cfg, const std::vector<icl::PromptConfig>& prompts) {
    icl::Dataset dataset = load_config_dataset(cfg);
    std::string ds_hash = icl::dataset_hash(dataset);
    std::string cfg_hash = cfg.config_hash();

    log_line("dataset " + dataset.name + " (" + std::to_string(dataset.articles.size()) +
             " articles), hash " + ds_hash.substr(0, 12));
    log_line("config hash " + cfg_hash.substr(0, 12));
    log_line("resolved config: " + cfg.resolved().dump());

    icl::RunOptions options;
    options.tokenizer = cfg.tokenizer;
    options.bm25 = cfg.bm25;
    options.strict = cfg.strict;
    options.length_normalize = cfg.backend.length_normalize;
    options.max_generation_tokens = cfg.backend.max_generation_tokens;
    options.eval_split = cfg.eval_split;
    options.max_in_flight = cfg.backend.max_in_flight;
    options.requests_per_second = cfg.backend.requests_per_second;
    if (!cfg.guideline_path.empty()) {
        options.guideline.body = icl::nfc(read_text_file(cfg.guideline_path));
    }

    std::unique_ptr<icl::ResponseCache> cache;
    if (!cfg.cache_path.empty()) {
        cache = std::make_unique<icl::ResponseCache>(cfg.cache_path);
        options.cache = cache.get();
        log_line("cache " + cfg.cache_path + " (" + std::to_string(cache->size()) + " entries)");
    }

    auto backend = icl::make_backend(cfg.backend);
    if (cfg.mode == icl::InferenceMode::likelihood) {
        backend->verify_scoring_support();
    }

    fs::create_directories(cfg.output_dir);
    icl::Index index = icl::build_train_index(dataset, options);
    log_line("train index: " + std::to_string(index.doc_count()) + " docs, content hash " +
             index.content_hash().substr(0, 12));

    SweepOutcome outcome;
    for (const auto& prompt : prompts) {
        fs::path report_path =
            fs::path(cfg.output_dir) /
            icl::run_report_filename(ds_hash, cfg.task, cfg.backend.model_name, prompt.name());

        if (fs::exists(report_path)) {
            icl::RunResult prior = icl::read_run_report(report_path);
            if (prior.dataset_hash == ds_hash && prior.config_hash == cfg_hash) {
                log_line("resume: " + report_path.filename().string());
                outcome.results.push_back(std::move(prior));
                continue;
            }
            throw icl::ValidationError("artifact " + report_path.string() +
                                       " exists with different provenance; refusing to overwrite");
        }

        icl::RunResult result =
            icl::run(dataset, index, prompt, *backend, cfg.task, cfg.mode, options);
        result.config_hash = cfg_hash;
        icl::write_run_report(result, report_path);
        log_line("run " + prompt.name() + ": accuracy " +
                 (std::isnan(result.accuracy) ? std::string("n/a")
                                              : std::to_string(result.accuracy)) +
                 ", mean confidence " + std::to_string(result.mean_confidence));
        outcome.results.push_back(std::move(result));
    }
    outcome.backend_calls = backend->calls();
    log_line("backend calls: " + std::to_string(outcome.backend_calls));
    return outcome;
}

void emit_sweep_files(const std::vector<icl::RunResult>& results, const fs::path& dir) {
    icl::write_text_file(icl::sweep_csv(results), dir / "sweep.csv");
    icl::write_text_file(icl::scatter_csv(results), dir / "scatter.csv");
}

void print_summaries(const std::vector<icl::RunResult>& results) {
    for (const auto& group : icl::group_runs(results)) {
        icl::SweepSummary s = icl::sweep_summary(group);
        std::printf("%s  %s  min %.1f  max %.1f  mean %.1f  delta %.1f  (%zu runs)\n",
                    icl::task_display(s.task).c_str(), s.model_name.c_str(), s.min_pct, s.max_pct,
                    s.mean_pct, s.delta_pct, s.runs);
    }
    if (results.size() >= 2) {
        try {
            icl::CalibrationFit fit = icl::calibration_fit(results);
            std::printf("calibration: slope %.4f  intercept %.4f  r2 %.4f  (%zu points)\n",
                        fit.slope, fit.intercept, fit.r2, fit.points.size());
        } catch (const icl::ValidationError&) {
            // degenerate regression (e.g. identical confidences): no fit line
        }
    }
}

int dispatch(int argc, char** argv) {
    CLI::App app{"retrieval-augmented in-context-learning lab"};
    app.set_version_flag("--version", std::string("icl-lab ") + ICL_LAB_VERSION +
                                          " (compiled with " + __VERSION__ + ")");
    app.require_subcommand(1);

    // stats
    auto* cmd_stats = app.add_subcommand("stats", "print the category x label matrix");
    std::string stats_data, stats_task_name = "impact_type", stats_format;
    cmd_stats->add_option("--data", stats_data, "dataset file (jsonl or csv)")->required();
    cmd_stats->add_option("--task", stats_task_name, "impact_type or impact_duration");
    cmd_stats->add_option("--format", stats_format, "override format sniffing (jsonl|csv)");

    // index
    auto* cmd_index = app.add_subcommand("index", "build and persist a bm25 index");
    std::string index_data, index_out, index_split = "train", index_tok_mode = "hybrid";
    double index_k1 = 1.2, index_b = 0.75;
    int index_ngram = 2;
    bool index_keep_case = false;
    cmd_index->add_option("--data", index_data, "dataset file")->required();
    cmd_index->add_option("--out", index_out, "output index path")->required();
    cmd_index->add_option("--split", index_split, "split to index (train|test|all)");
    cmd_index->add_option("--k1", index_k1, "bm25 k1");
    cmd_index->add_option("--b", index_b, "bm25 b");
    cmd_index->add_option("--tokenizer-mode", index_tok_mode, "whitespace|char_ngram|hybrid");
    cmd_index->add_option("--ngram-size", index_ngram, "character n-gram size");
    cmd_index->add_flag("--keep-latin-case", index_keep_case, "disable latin lowercasing");

    // grid
    auto* cmd_grid = app.add_subcommand("grid", "print the canonical prompt grid");

    // synth
    auto* cmd_synth = app.add_subcommand("synth", "generate a hidden-rule synthetic corpus");
    uint64_t synth_seed = 0;
    int synth_train = 400, synth_test = 100;
    double synth_noise = 0.0;
    std::string synth_out, synth_task_name = "impact_type";
    cmd_synth->add_option("--seed", synth_seed, "generator seed");
    cmd_synth->add_option("--train", synth_train, "train article count");
    cmd_synth->add_option("--test", synth_test, "test article count");
    cmd_synth->add_option("--noise", synth_noise, "label flip probability in [0,1)");
    cmd_synth->add_option("--out", synth_out, "output jsonl path")->required();
    cmd_synth->add_option("--task", synth_task_name, "task to label");

    // run / sweep; flags override the corresponding config file keys
    std::string run_prompt, ov_output_dir, ov_cache_path, ov_mode, ov_task, ov_eval_split;
    bool ov_strict = false;

    auto add_override_flags = [&](CLI::App* cmd) {
        cmd->add_option("--output-dir", ov_output_dir, "override output_dir");
        cmd->add_option("--cache-path", ov_cache_path, "override cache_path");
        cmd->add_option("--mode", ov_mode, "override mode (likelihood|generation)");
        cmd->add_option("--task", ov_task, "override task");
        cmd->add_option("--eval-split", ov_eval_split, "override eval_split");
        cmd->add_flag("--strict", ov_strict, "abort on the first backend failure");
    };

    auto* cmd_run = app.add_subcommand("run", "execute a single prompt config");
    std::string run_config_path;
    cmd_run->add_option("--config", run_config_path, "run config file (json)")->required();
    cmd_run->add_option("--prompt", run_prompt, "prompt config name (overrides config)");
    add_override_flags(cmd_run);

    auto* cmd_sweep = app.add_subcommand("sweep", "execute every selected prompt config");
    std::string sweep_config_path;
    cmd_sweep->add_option("--config", sweep_config_path, "run config file (json)")->required();
    add_override_flags(cmd_sweep);

    // report
    auto* cmd_report = app.add_subcommand("report", "aggregate run reports in a directory");
    std::string report_dir;
    cmd_report->add_option("--runs", report_dir, "directory of run-*.json artifacts")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);  // prints help/version, or the usage error to stderr
        return code == 0 ? 0 : 1;
    }

    if (cmd_stats->parsed()) {
        icl::Dataset ds = stats_format.empty()
                              ? icl::load_dataset(stats_data)
                              : icl::load_dataset(stats_data,
                                                  icl::parse_dataset_format(stats_format));
        print_stats_table(icl::stats(ds, icl::parse_task(stats_task_name)));
        return 0;
    }

    if (cmd_index->parsed()) {
        if (index_split != "train" && index_split != "test" && index_split != "all") {
            throw icl::ValidationError("--split must be train, test or all");
        }
        icl::Dataset ds = icl::load_dataset(index_data);
        std::vector<std::pair<std::string, std::string>> docs;
        for (const auto& a : ds.articles) {
            if (index_split != "all" && a.split != index_split) continue;
            docs.emplace_back(a.id, icl::retrieval_query_text(a));
        }
        icl::TokenizerConfig tok{icl::parse_tokenizer_mode(index_tok_mode), index_ngram,
                                 !index_keep_case};
        icl::Index index = icl::build_index(std::move(docs), {index_k1, index_b}, tok);
        index.save(index_out);
        log_line("indexed " + std::to_string(index.doc_count()) + " docs -> " + index_out +
                 " (content hash " + index.content_hash().substr(0, 12) + ")");
        return 0;
    }

    if (cmd_grid->parsed()) {
        for (const auto& cfg : icl::grid()) std::cout << cfg.name() << "\n";
        return 0;
    }

    if (cmd_synth->parsed()) {
        icl::Task task = icl::parse_task(synth_task_name);
        icl::synth::HiddenRule rule = icl::synth::default_rule(task, synth_seed, synth_noise);
        icl::Dataset ds = icl::synth::generate(rule, synth_train, synth_test, task);
        icl::save_jsonl(ds, synth_out);
        log_line("wrote " + std::to_string(ds.articles.size()) + " articles -> " + synth_out +
                 " (dataset hash " + icl::dataset_hash(ds).substr(0, 12) + ")");
        return 0;
    }

    if (cmd_run->parsed() || cmd_sweep->parsed()) {
        bool is_run = cmd_run->parsed();
        icl::RunConfigFile cfg =
            icl::RunConfigFile::load(is_run ? run_config_path : sweep_config_path);
        if (is_run && !run_prompt.empty()) {
            cfg.prompts = {run_prompt};
        }
        if (!ov_output_dir.empty()) cfg.output_dir = ov_output_dir;
        if (!ov_cache_path.empty()) cfg.cache_path = ov_cache_path;
        if (!ov_mode.empty()) cfg.mode = icl::parse_mode(ov_mode);
        if (!ov_task.empty()) cfg.task = icl::parse_task(ov_task);
        if (!ov_eval_split.empty()) cfg.eval_split = ov_eval_split;
        if (ov_strict) cfg.strict = true;
        cfg.validate();

        std::vector<icl::PromptConfig> prompts = cfg.selected_prompts();
        if (is_run && prompts.size() != 1) {
            throw icl::ValidationError(
                "run executes exactly one prompt config; pass --prompt or narrow the config's "
                "prompts list (got " +
                std::to_string(prompts.size()) + ")");
        }

        SweepOutcome outcome = execute(cfg, prompts);
        if (!is_run) emit_sweep_files(outcome.results, cfg.output_dir);
        print_summaries(outcome.results);
        return 0;
    }

    if (cmd_report->parsed()) {
        std::vector<icl::RunResult> runs = icl::collect_run_reports(report_dir);
        if (runs.empty()) throw icl::ValidationError("no run-*.json artifacts in " + report_dir);
        emit_sweep_files(runs, report_dir);
        print_summaries(runs);
        log_line("aggregated " + std::to_string(runs.size()) + " runs from " + report_dir);
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const icl::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const icl::BackendError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
