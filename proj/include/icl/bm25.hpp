#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "icl/errors.hpp"
#include "icl/hash.hpp"
#include "icl/tokenizer.hpp"

namespace icl {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;

    void check() const {
        if (k1 < 0.0) throw ValidationError("bm25 k1 must be >= 0");
        if (b < 0.0 || b > 1.0) throw ValidationError("bm25 b must be in [0,1]");
    }
};

struct RetrievalResult {
    std::string doc_id;
    double score = 0.0;
};

struct Posting {
    int doc = 0;  // dense index into doc tables
    int tf = 0;
};

// Immutable inverted index over (doc id, text) pairs. Scores are Okapi BM25
// with the smoothed idf ln(1 + (N - df + 0.5)/(df + 0.5)); query-side term
// frequency is not saturated (each query token occurrence contributes its
// own term score).
class Index {
public:
    Index() = default;

    Index(std::vector<std::pair<std::string, std::string>> docs, Bm25Params params,
          TokenizerConfig tokenizer)
        : params_(params), tokenizer_(tokenizer) {
        params_.check();
        tokenizer_.check();
        doc_ids_.reserve(docs.size());
        doc_lengths_.reserve(docs.size());

        long total_len = 0;
        for (const auto& [id, text] : docs) {
            auto [it, inserted] = doc_index_.emplace(id, static_cast<int>(doc_ids_.size()));
            if (!inserted) throw ValidationError("build_index: duplicate doc id '" + id + "'");
            int doc = it->second;
            doc_ids_.push_back(id);

            auto tokens = tokenize(text, tokenizer_);
            doc_lengths_.push_back(static_cast<int>(tokens.size()));
            total_len += static_cast<long>(tokens.size());

            std::unordered_map<std::string, int> tf;
            for (auto& t : tokens) ++tf[t];
            for (auto& [term, freq] : tf) {
                postings_[term].push_back({doc, freq});
            }
        }
        // postings are accumulated in doc order already; keep that invariant
        // explicit for deserialized indexes too
        for (auto& [term, plist] : postings_) {
            std::sort(plist.begin(), plist.end(),
                      [](const Posting& a, const Posting& b) { return a.doc < b.doc; });
        }
        avg_doc_length_ = doc_ids_.empty()
                              ? 0.0
                              : static_cast<double>(total_len) / static_cast<double>(doc_ids_.size());
    }

    int doc_count() const { return static_cast<int>(doc_ids_.size()); }
    double avg_doc_length() const { return avg_doc_length_; }
    const Bm25Params& params() const { return params_; }
    const TokenizerConfig& tokenizer() const { return tokenizer_; }
    const std::vector<std::string>& doc_ids() const { return doc_ids_; }
    const std::vector<int>& doc_lengths() const { return doc_lengths_; }
    const std::unordered_map<std::string, std::vector<Posting>>& postings() const {
        return postings_;
    }

    bool contains(const std::string& doc_id) const { return doc_index_.count(doc_id) > 0; }

    double idf(const std::string& term) const {
        auto it = postings_.find(term);
        double df = it == postings_.end() ? 0.0 : static_cast<double>(it->second.size());
        double n = static_cast<double>(doc_count());
        return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    }

    // BM25 score of one document for an already-tokenized query.
    double score(const std::vector<std::string>& query_tokens, const std::string& doc_id) const {
        auto it = doc_index_.find(doc_id);
        if (it == doc_index_.end()) {
            throw ValidationError("bm25_score: unknown doc id '" + doc_id + "'");
        }
        int doc = it->second;
        double total = 0.0;
        for (const auto& term : query_tokens) {
            total += term_score(term, doc);
        }
        return total;
    }

    // Top-k by (score desc, doc id asc). Every non-excluded document is a
    // candidate, zero-score ones included, so k results come back whenever
    // the pool is large enough.
    std::vector<RetrievalResult> top_k(std::string_view query_text, int k,
                                       const std::unordered_set<std::string>& exclude_ids = {}) const {
        if (k < 1) throw ValidationError("top_k: k must be >= 1");
        std::vector<RetrievalResult> out;
        if (doc_ids_.empty()) return out;

        auto query_tokens = tokenize(query_text, tokenizer_);
        std::vector<double> scores(doc_ids_.size(), 0.0);

        // term-at-a-time accumulation; query multiplicity scales each term's
        // contribution linearly
        std::unordered_map<std::string, int> query_tf;
        for (const auto& t : query_tokens) ++query_tf[t];
        for (const auto& [term, qf] : query_tf) {
            auto it = postings_.find(term);
            if (it == postings_.end()) continue;
            double idf_t = idf(term);
            for (const Posting& p : it->second) {
                scores[p.doc] += qf * idf_t * saturation(p.tf, doc_lengths_[p.doc]);
            }
        }

        out.reserve(doc_ids_.size());
        for (size_t d = 0; d < doc_ids_.size(); ++d) {
            if (exclude_ids.count(doc_ids_[d])) continue;
            out.push_back({doc_ids_[d], scores[d]});
        }
        std::sort(out.begin(), out.end(), [](const RetrievalResult& a, const RetrievalResult& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.doc_id < b.doc_id;
        });
        if (out.size() > static_cast<size_t>(k)) out.resize(static_cast<size_t>(k));
        return out;
    }

    // Keys the index to its inputs: corpus, tokenizer and parameters.
    std::string content_hash() const {
        std::string material = "icl-index-v1\n";
        material += "k1=" + std::to_string(params_.k1) + " b=" + std::to_string(params_.b) + "\n";
        material += "mode=" + tokenizer_mode_name(tokenizer_.mode) +
                    " n=" + std::to_string(tokenizer_.ngram_size) +
                    " lc=" + std::to_string(tokenizer_.lowercase_latin) + "\n";
        for (size_t d = 0; d < doc_ids_.size(); ++d) {
            material += doc_ids_[d] + "\x1f" + std::to_string(doc_lengths_[d]) + "\n";
        }
        // postings in sorted term order so the hash is representation-stable
        std::map<std::string_view, const std::vector<Posting>*> sorted;
        for (const auto& [term, plist] : postings_) sorted.emplace(term, &plist);
        for (const auto& [term, plist] : sorted) {
            material += std::string(term);
            for (const Posting& p : *plist) {
                material += " " + std::to_string(p.doc) + ":" + std::to_string(p.tf);
            }
            material += "\n";
        }
        return sha256_hex(material);
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["schema"] = "icl-lab/index-v1";
        j["content_hash"] = content_hash();
        j["params"] = {{"k1", params_.k1}, {"b", params_.b}};
        j["tokenizer"] = {{"mode", tokenizer_mode_name(tokenizer_.mode)},
                          {"ngram_size", tokenizer_.ngram_size},
                          {"lowercase_latin", tokenizer_.lowercase_latin}};
        j["doc_count"] = doc_count();
        j["avg_doc_length"] = avg_doc_length_;
        auto docs = nlohmann::ordered_json::array();
        for (size_t d = 0; d < doc_ids_.size(); ++d) {
            docs.push_back({{"id", doc_ids_[d]}, {"len", doc_lengths_[d]}});
        }
        j["docs"] = std::move(docs);
        std::map<std::string, const std::vector<Posting>*> sorted;
        for (const auto& [term, plist] : postings_) sorted.emplace(term, &plist);
        auto postings = nlohmann::ordered_json::object();
        for (const auto& [term, plist] : sorted) {
            auto arr = nlohmann::ordered_json::array();
            for (const Posting& p : *plist) arr.push_back({p.doc, p.tf});
            postings[term] = std::move(arr);
        }
        j["postings"] = std::move(postings);
        return j;
    }

    static Index from_json(const nlohmann::json& j) {
        if (!j.is_object() || j.value("schema", "") != "icl-lab/index-v1") {
            throw ValidationError("index file: unrecognized schema");
        }
        Index idx;
        idx.params_.k1 = j.at("params").at("k1").get<double>();
        idx.params_.b = j.at("params").at("b").get<double>();
        idx.tokenizer_.mode = parse_tokenizer_mode(j.at("tokenizer").at("mode").get<std::string>());
        idx.tokenizer_.ngram_size = j.at("tokenizer").at("ngram_size").get<int>();
        idx.tokenizer_.lowercase_latin = j.at("tokenizer").at("lowercase_latin").get<bool>();
        long total_len = 0;
        for (const auto& d : j.at("docs")) {
            std::string id = d.at("id").get<std::string>();
            int len = d.at("len").get<int>();
            idx.doc_index_.emplace(id, static_cast<int>(idx.doc_ids_.size()));
            idx.doc_ids_.push_back(std::move(id));
            idx.doc_lengths_.push_back(len);
            total_len += len;
        }
        idx.avg_doc_length_ =
            idx.doc_ids_.empty() ? 0.0
                                 : static_cast<double>(total_len) /
                                       static_cast<double>(idx.doc_ids_.size());
        for (const auto& [term, arr] : j.at("postings").items()) {
            auto& plist = idx.postings_[term];
            for (const auto& pair : arr) {
                plist.push_back({pair.at(0).get<int>(), pair.at(1).get<int>()});
            }
        }
        std::string expect = j.value("content_hash", "");
        if (!expect.empty() && expect != idx.content_hash()) {
            throw ValidationError("index file: content hash mismatch (stale or corrupted)");
        }
        return idx;
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot write index file: " + path.string());
        out << to_json().dump(2) << '\n';
    }

    static Index load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ValidationError("cannot open index file: " + path.string());
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationError("index file " + path.string() + ": invalid JSON: " + e.what());
        }
        return from_json(j);
    }

private:
    double saturation(int tf, int len) const {
        double norm = 1.0 - params_.b + params_.b * static_cast<double>(len) / avg_doc_length_;
        double f = static_cast<double>(tf);
        return f * (params_.k1 + 1.0) / (f + params_.k1 * norm);
    }

    double term_score(const std::string& term, int doc) const {
        auto it = postings_.find(term);
        if (it == postings_.end()) return 0.0;
        const auto& plist = it->second;
        auto pit = std::lower_bound(plist.begin(), plist.end(), doc,
                                    [](const Posting& p, int d) { return p.doc < d; });
        if (pit == plist.end() || pit->doc != doc) return 0.0;
        return idf(term) * saturation(pit->tf, doc_lengths_[doc]);
    }

    Bm25Params params_;
    TokenizerConfig tokenizer_;
    std::vector<std::string> doc_ids_;
    std::vector<int> doc_lengths_;
    std::unordered_map<std::string, int> doc_index_;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    double avg_doc_length_ = 0.0;
};

inline Index build_index(std::vector<std::pair<std::string, std::string>> docs,
                         Bm25Params params = {}, TokenizerConfig tokenizer = {}) {
    return Index(std::move(docs), params, tokenizer);
}

inline double bm25_score(const Index& index, const std::vector<std::string>& query_tokens,
                         const std::string& doc_id) {
    return index.score(query_tokens, doc_id);
}

inline std::vector<RetrievalResult> top_k(const Index& index, std::string_view query_text, int k,
                                          const std::unordered_set<std::string>& exclude_ids = {}) {
    return index.top_k(query_text, k, exclude_ids);
}

}  // namespace icl
