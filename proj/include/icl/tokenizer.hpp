#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "icl/errors.hpp"
#include "icl/unicode.hpp"

namespace icl {

enum class TokenizerMode { whitespace, char_ngram, hybrid };

inline std::string tokenizer_mode_name(TokenizerMode mode) {
    switch (mode) {
        case TokenizerMode::whitespace: return "whitespace";
        case TokenizerMode::char_ngram: return "char_ngram";
        case TokenizerMode::hybrid: return "hybrid";
    }
    return "?";
}

inline TokenizerMode parse_tokenizer_mode(std::string_view name) {
    if (name == "whitespace") return TokenizerMode::whitespace;
    if (name == "char_ngram") return TokenizerMode::char_ngram;
    if (name == "hybrid") return TokenizerMode::hybrid;
    throw ValidationError("unknown tokenizer mode: '" + std::string(name) + "'");
}

// The default (`hybrid`) keeps whole whitespace-delimited tokens — eojeol for
// Korean — and adds character n-grams of each token so sub-eojeol matches
// still count. No morphological analysis.
struct TokenizerConfig {
    TokenizerMode mode = TokenizerMode::hybrid;
    int ngram_size = 2;
    bool lowercase_latin = true;

    void check() const {
        if (ngram_size < 1) throw ValidationError("tokenizer ngram_size must be >= 1");
    }
};

namespace detail {

// Character n-grams by codepoint; a token shorter than n yields itself.
inline void append_ngrams(const std::vector<char32_t>& cps, size_t begin, size_t end,
                          size_t n, std::vector<std::string>& out) {
    size_t len = end - begin;
    if (len <= n) {
        out.push_back(encode_utf8(cps.data() + begin, len));
        return;
    }
    for (size_t i = begin; i + n <= end; ++i) {
        out.push_back(encode_utf8(cps.data() + i, n));
    }
}

}  // namespace detail

inline std::vector<std::string> tokenize(std::string_view text, const TokenizerConfig& config) {
    config.check();
    std::vector<std::string> tokens;
    if (text.empty()) return tokens;

    std::string prepared = nfc(text);
    if (config.lowercase_latin) prepared = lower_ascii(prepared);

    std::vector<char32_t> cps = decode_utf8(prepared);
    size_t n = static_cast<size_t>(config.ngram_size);

    size_t i = 0;
    while (i < cps.size()) {
        while (i < cps.size() && is_space_cp(cps[i])) ++i;
        size_t begin = i;
        while (i < cps.size() && !is_space_cp(cps[i])) ++i;
        if (i == begin) continue;

        switch (config.mode) {
            case TokenizerMode::whitespace:
                tokens.push_back(encode_utf8(cps.data() + begin, i - begin));
                break;
            case TokenizerMode::char_ngram:
                detail::append_ngrams(cps, begin, i, n, tokens);
                break;
            case TokenizerMode::hybrid:
                tokens.push_back(encode_utf8(cps.data() + begin, i - begin));
                detail::append_ngrams(cps, begin, i, n, tokens);
                break;
        }
    }
    return tokens;
}

}  // namespace icl
