#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "icl/errors.hpp"

namespace icl {

// Append-only response cache: one JSONL line per backend call, keyed by the
// scorer's content hash. A warm cache replays a whole sweep without touching
// the backend. Writes are serialized; the newest entry for a key wins.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
        std::ifstream in(path_, std::ios::binary);
        if (!in) return;  // no file yet: empty cache
        std::string line;
        size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            nlohmann::json entry;
            try {
                entry = nlohmann::json::parse(line);
            } catch (const nlohmann::json::parse_error& e) {
                throw ValidationError(path_.string() + ":" + std::to_string(line_no) +
                                      ": invalid cache line: " + e.what());
            }
            entries_[entry.at("key").get<std::string>()] = entry.at("response");
        }
    }

    std::optional<nlohmann::json> lookup(const std::string& key) const {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        return std::optional<nlohmann::json>{std::in_place, it->second};
    }

    void store(const std::string& key, const nlohmann::json& request,
               const nlohmann::json& response) {
        std::lock_guard<std::mutex> lock(mutex_);
        entries_[key] = response;
        std::ofstream out(path_, std::ios::binary | std::ios::app);
        if (!out) throw Error("cannot append to cache file: " + path_.string());
        nlohmann::ordered_json entry;
        entry["key"] = key;
        entry["request"] = request;
        entry["response"] = response;
        entry["timestamp"] = now_iso8601();
        out << entry.dump() << '\n';
    }

    size_t size() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return entries_.size();
    }

    const std::filesystem::path& path() const { return path_; }

private:
    static std::string now_iso8601() {
        auto now = std::chrono::system_clock::now();
        std::time_t t = std::chrono::system_clock::to_time_t(now);
        char buf[32];
        std::tm tm{};
        gmtime_r(&t, &tm);
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
        return buf;
    }

    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, nlohmann::json> entries_;
};

}  // namespace icl
