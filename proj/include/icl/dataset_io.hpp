#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "icl/corpus.hpp"
#include "icl/errors.hpp"
#include "icl/hash.hpp"
#include "icl/unicode.hpp"

namespace icl {

enum class DatasetFormat { jsonl, csv };

inline DatasetFormat parse_dataset_format(std::string_view name) {
    if (name == "jsonl") return DatasetFormat::jsonl;
    if (name == "csv") return DatasetFormat::csv;
    throw ValidationError("unknown dataset format: '" + std::string(name) + "'");
}

// Infers format from the extension, defaulting to jsonl.
inline DatasetFormat sniff_format(const std::filesystem::path& path) {
    return path.extension() == ".csv" ? DatasetFormat::csv : DatasetFormat::jsonl;
}

namespace detail {

inline std::string loc(const std::filesystem::path& path, size_t line) {
    return path.string() + ":" + std::to_string(line);
}

// All incoming text is NFC-composed before any matching happens.
inline void normalize_article(Article& a) {
    a.id = nfc(a.id);
    a.title = nfc(a.title);
    a.body = nfc(a.body);
    a.category = nfc(a.category);
    if (a.impact_type) a.impact_type = nfc(*a.impact_type);
    if (a.impact_duration) a.impact_duration = nfc(*a.impact_duration);
    a.split = nfc(a.split);
}

inline void check_article(const Article& a, const std::filesystem::path& path, size_t line) {
    if (a.id.empty()) {
        throw ValidationError(loc(path, line) + ": field 'id' is empty");
    }
    if (a.body.empty()) {
        throw ValidationError(loc(path, line) + ": field 'body' is empty (article '" +
                              a.id + "')");
    }
    if (!is_known_category(a.category)) {
        throw ValidationError(loc(path, line) + ": field 'category' has unknown value '" +
                              a.category + "' (article '" + a.id + "')");
    }
    if (a.impact_type && !is_known_label(Task::impact_type, *a.impact_type)) {
        throw ValidationError(loc(path, line) + ": field 'impact_type' has unknown value '" +
                              *a.impact_type + "' (article '" + a.id + "')");
    }
    if (a.impact_duration && !is_known_label(Task::impact_duration, *a.impact_duration)) {
        throw ValidationError(loc(path, line) +
                              ": field 'impact_duration' has unknown value '" +
                              *a.impact_duration + "' (article '" + a.id + "')");
    }
    if (a.split != "train" && a.split != "test") {
        throw ValidationError(loc(path, line) + ": field 'split' has unknown value '" +
                              a.split + "' (article '" + a.id + "')");
    }
}

inline std::string require_string(const nlohmann::json& obj, const char* key,
                                  const std::filesystem::path& path, size_t line) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw ValidationError(loc(path, line) + ": missing field '" + key + "'");
    }
    if (!it->is_string()) {
        throw ValidationError(loc(path, line) + ": field '" + key + "' is not a string");
    }
    return it->get<std::string>();
}

inline std::optional<std::string> optional_string(const nlohmann::json& obj, const char* key,
                                                  const std::filesystem::path& path,
                                                  size_t line) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) {
        throw ValidationError(loc(path, line) + ": field '" + key + "' is not a string");
    }
    return it->get<std::string>();
}

// RFC 4180 flavored: quoted fields may contain commas, quotes ("") and
// newlines. Returns rows of cells; `line_of_row` maps rows back to the
// 1-based physical line where each record started, for error messages.
inline std::vector<std::vector<std::string>> parse_csv(const std::string& content,
                                                       std::vector<size_t>& line_of_row) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    bool in_quotes = false;
    bool row_started = false;
    size_t line = 1, row_start_line = 1;

    auto end_cell = [&] { row.push_back(std::move(cell)); cell.clear(); };
    auto end_row = [&] {
        end_cell();
        rows.push_back(std::move(row));
        line_of_row.push_back(row_start_line);
        row.clear();
        row_started = false;
    };

    for (size_t i = 0; i < content.size(); ++i) {
        char c = content[i];
        if (!row_started) {
            row_start_line = line;
            row_started = true;
        }
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    cell.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                cell.push_back(c);
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            end_cell();
        } else if (c == '\r') {
            // swallowed; \r\n handled at the \n
        } else if (c == '\n') {
            end_row();
            ++line;
        } else {
            cell.push_back(c);
        }
    }
    if (row_started || !cell.empty()) end_row();
    return rows;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

}  // namespace detail

// One JSON object per line: id, title, body, category, impact_type?,
// impact_duration?, split. Errors carry the file:line location and the
// offending field; a duplicate id names both lines involved.
inline Dataset load_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open dataset file: " + path.string());

    Dataset ds;
    ds.name = path.filename().string();
    std::unordered_map<std::string, size_t> first_line_of_id;

    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationError(detail::loc(path, line_no) + ": invalid JSON: " + e.what());
        }
        if (!obj.is_object()) {
            throw ValidationError(detail::loc(path, line_no) + ": record is not a JSON object");
        }

        Article a;
        a.id = detail::require_string(obj, "id", path, line_no);
        a.title = detail::require_string(obj, "title", path, line_no);
        a.body = detail::require_string(obj, "body", path, line_no);
        a.category = detail::require_string(obj, "category", path, line_no);
        a.impact_type = detail::optional_string(obj, "impact_type", path, line_no);
        a.impact_duration = detail::optional_string(obj, "impact_duration", path, line_no);
        a.split = detail::require_string(obj, "split", path, line_no);

        detail::normalize_article(a);
        detail::check_article(a, path, line_no);

        auto [it, inserted] = first_line_of_id.emplace(a.id, line_no);
        if (!inserted) {
            throw ValidationError(detail::loc(path, line_no) + ": duplicate id '" + a.id +
                                  "' (first seen at " + detail::loc(path, it->second) + ")");
        }
        ds.articles.push_back(std::move(a));
    }
    return ds;
}

// CSV with the exact JSONL field names as headers. An empty cell in a label
// column means the label is absent.
inline Dataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open dataset file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();

    std::vector<size_t> line_of_row;
    auto rows = detail::parse_csv(buf.str(), line_of_row);
    if (rows.empty()) {
        Dataset empty;
        empty.name = path.filename().string();
        return empty;
    }

    static const std::vector<std::string> expected = {
        "id", "title", "body", "category", "impact_type", "impact_duration", "split"};
    if (rows[0] != expected) {
        throw ValidationError(detail::loc(path, 1) +
                              ": CSV header must be id,title,body,category,"
                              "impact_type,impact_duration,split");
    }

    Dataset ds;
    ds.name = path.filename().string();
    std::unordered_map<std::string, size_t> first_line_of_id;

    for (size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        size_t line_no = line_of_row[r];
        if (row.size() == 1 && row[0].empty()) continue;  // trailing blank line
        if (row.size() != expected.size()) {
            throw ValidationError(detail::loc(path, line_no) + ": expected " +
                                  std::to_string(expected.size()) + " cells, got " +
                                  std::to_string(row.size()));
        }
        Article a;
        a.id = row[0];
        a.title = row[1];
        a.body = row[2];
        a.category = row[3];
        if (!row[4].empty()) a.impact_type = row[4];
        if (!row[5].empty()) a.impact_duration = row[5];
        a.split = row[6];

        detail::normalize_article(a);
        detail::check_article(a, path, line_no);

        auto [it, inserted] = first_line_of_id.emplace(a.id, line_no);
        if (!inserted) {
            throw ValidationError(detail::loc(path, line_no) + ": duplicate id '" + a.id +
                                  "' (first seen at " + detail::loc(path, it->second) + ")");
        }
        ds.articles.push_back(std::move(a));
    }
    return ds;
}

inline Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
    return format == DatasetFormat::jsonl ? load_jsonl(path) : load_csv(path);
}

inline Dataset load_dataset(const std::filesystem::path& path) {
    return load_dataset(path, sniff_format(path));
}

// Canonical single-line serialization; field order is fixed so that equal
// datasets serialize to identical bytes.
inline std::string to_jsonl_line(const Article& a) {
    nlohmann::ordered_json obj;
    obj["id"] = a.id;
    obj["title"] = a.title;
    obj["body"] = a.body;
    obj["category"] = a.category;
    if (a.impact_type) obj["impact_type"] = *a.impact_type;
    if (a.impact_duration) obj["impact_duration"] = *a.impact_duration;
    obj["split"] = a.split;
    return obj.dump();
}

inline std::string to_jsonl(const Dataset& ds) {
    std::string out;
    for (const auto& a : ds.articles) {
        out += to_jsonl_line(a);
        out += '\n';
    }
    return out;
}

inline void save_jsonl(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write dataset file: " + path.string());
    out << to_jsonl(ds);
}

inline std::string to_csv(const Dataset& ds) {
    std::string out = "id,title,body,category,impact_type,impact_duration,split\n";
    for (const auto& a : ds.articles) {
        out += detail::csv_escape(a.id) + ',' + detail::csv_escape(a.title) + ',' +
               detail::csv_escape(a.body) + ',' + detail::csv_escape(a.category) + ',' +
               detail::csv_escape(a.impact_type.value_or("")) + ',' +
               detail::csv_escape(a.impact_duration.value_or("")) + ',' +
               detail::csv_escape(a.split) + '\n';
    }
    return out;
}

// Content identity of a dataset: hash of its canonical JSONL form. Run
// artifacts embed this so reports from different corpora cannot be pooled.
inline std::string dataset_hash(const Dataset& ds) {
    return sha256_hex(to_jsonl(ds));
}

}  // namespace icl
