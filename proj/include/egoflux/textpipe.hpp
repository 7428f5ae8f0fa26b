#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "egoflux/corpus.hpp"
#include "egoflux/error.hpp"
#include "egoflux/stopwords.hpp"

namespace egoflux {

/// Cleaned, tokenized, phrase-merged representation of one post.
struct TokenDoc {
    std::string post_id;
    std::vector<std::string> tokens;

    bool empty() const { return tokens.empty(); }
    friend bool operator==(const TokenDoc&, const TokenDoc&) = default;
};

namespace detail {

inline bool starts_with_ci(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        char c = s[i];
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        if (c != prefix[i]) return false;
    }
    return true;
}

inline bool is_apostrophe(UChar32 c) { return c == U'\'' || c == 0x2019 || c == 0x02BC; }

inline const icu::Normalizer2& nfc() {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status) || n == nullptr) throw Error("ICU NFC normalizer unavailable");
    return *n;
}

inline icu::UnicodeString normalize_nfc(const icu::UnicodeString& s) {
    UErrorCode status = U_ZERO_ERROR;
    icu::UnicodeString out = nfc().normalize(s, status);
    if (U_FAILURE(status)) throw Error("ICU normalization failed");
    return out;
}

// Lowercased alphanumeric words of one raw whitespace-delimited chunk.
inline std::vector<std::string> normalize_chunk(std::string_view chunk) {
    icu::UnicodeString text = normalize_nfc(icu::UnicodeString::fromUTF8(
        icu::StringPiece(chunk.data(), static_cast<std::int32_t>(chunk.size()))));
    icu::UnicodeString kept;
    for (std::int32_t i = 0; i < text.length();) {
        const UChar32 c = text.char32At(i);
        i += U16_LENGTH(c);
        if (is_apostrophe(c)) continue;
        kept.append(u_isalnum(c) ? c : static_cast<UChar32>(U' '));
    }
    kept.toLower("");
    kept = normalize_nfc(kept);

    std::string utf8;
    kept.toUTF8String(utf8);
    std::vector<std::string> words;
    std::size_t pos = 0;
    while (pos < utf8.size()) {
        const auto b = utf8.find_first_not_of(' ', pos);
        if (b == std::string::npos) break;
        auto e = utf8.find(' ', b);
        if (e == std::string::npos) e = utf8.size();
        words.push_back(utf8.substr(b, e - b));
        pos = e;
    }
    return words;
}

inline std::size_t codepoint_length(std::string_view s) {
    std::size_t n = 0;
    for (unsigned char c : s) n += (c & 0xC0) != 0x80 ? 1 : 0;
    return n;
}

}  // namespace detail

/// Strips URLs, @mentions, standalone "RT", punctuation, and symbols; applies
/// NFC and lowercasing; collapses whitespace. Hashtags keep their word.
/// Apostrophes are removed without splitting the word. Idempotent.
inline std::string clean(std::string_view text) {
    std::string out;
    std::size_t pos = 0;
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
    while (pos < text.size()) {
        while (pos < text.size() && is_space(text[pos])) ++pos;
        const std::size_t b = pos;
        while (pos < text.size() && !is_space(text[pos])) ++pos;
        if (b == pos) break;
        std::string_view chunk = text.substr(b, pos - b);
        std::string_view head = chunk;
        while (!head.empty() && std::string_view("\"'([{<.,;:!?").find(head.front()) != std::string_view::npos) {
            head.remove_prefix(1);
        }
        if (head.starts_with('@') || detail::starts_with_ci(head, "http://") ||
            detail::starts_with_ci(head, "https://") || detail::starts_with_ci(head, "www.")) {
            continue;
        }
        for (auto& word : detail::normalize_chunk(chunk)) {
            if (word == "rt") continue;
            if (!out.empty()) out.push_back(' ');
            out += word;
        }
    }
    return out;
}

/// Whitespace split of cleaned text, dropping tokens shorter than two
/// characters and tokens made only of digits.
inline std::vector<std::string> tokenize(std::string_view cleaned) {
    std::vector<std::string> tokens;
    std::size_t pos = 0;
    while (pos < cleaned.size()) {
        const auto b = cleaned.find_first_not_of(" \t\r\n", pos);
        if (b == std::string_view::npos) break;
        auto e = cleaned.find_first_of(" \t\r\n", b);
        if (e == std::string_view::npos) e = cleaned.size();
        std::string_view tok = cleaned.substr(b, e - b);
        pos = e;
        if (detail::codepoint_length(tok) < 2) continue;
        if (std::all_of(tok.begin(), tok.end(), [](char c) { return c >= '0' && c <= '9'; })) continue;
        tokens.emplace_back(tok);
    }
    return tokens;
}

/// Counts for one merging pass. A pair (a, b) merges when
/// (count(a,b) - min_count) * total_tokens / (count(a) * count(b)) > threshold.
struct PhraseLayer {
    std::map<std::string, std::uint64_t> vocab;
    std::map<std::pair<std::string, std::string>, std::uint64_t> pairs;
    std::uint64_t total_tokens = 0;

    std::uint64_t count(const std::string& token) const {
        auto it = vocab.find(token);
        return it == vocab.end() ? 0 : it->second;
    }

    std::uint64_t pair_count(const std::string& a, const std::string& b) const {
        auto it = pairs.find({a, b});
        return it == pairs.end() ? 0 : it->second;
    }

    double score(const std::string& a, const std::string& b, std::uint64_t min_count) const {
        const double ca = static_cast<double>(count(a));
        const double cb = static_cast<double>(count(b));
        if (ca == 0.0 || cb == 0.0) return -1.0;
        const double joint = static_cast<double>(pair_count(a, b));
        return (joint - static_cast<double>(min_count)) * static_cast<double>(total_tokens) / (ca * cb);
    }

    friend bool operator==(const PhraseLayer&, const PhraseLayer&) = default;
};

/// Bigram/trigram detector: one layer per merging pass (two passes by default,
/// so a merged bigram can join a following token).
struct PhraseModel {
    std::uint64_t min_count = 5;
    double threshold = 10.0;
    std::vector<PhraseLayer> layers;

    bool qualifies(const PhraseLayer& layer, const std::string& a, const std::string& b) const {
        return layer.score(a, b, min_count) > threshold;
    }

    friend bool operator==(const PhraseModel&, const PhraseModel&) = default;
};

inline std::vector<std::string> apply_phrase_layer(const PhraseModel& model, const PhraseLayer& layer,
                                                   const std::vector<std::string>& tokens) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i + 1 < tokens.size() && model.qualifies(layer, tokens[i], tokens[i + 1])) {
            out.push_back(tokens[i] + "_" + tokens[i + 1]);
            ++i;
        } else {
            out.push_back(tokens[i]);
        }
    }
    return out;
}

/// Applies every layer in order; each layer is one greedy left-to-right pass.
inline std::vector<std::string> apply_phrases(const PhraseModel& model, std::vector<std::string> tokens) {
    for (const auto& layer : model.layers) tokens = apply_phrase_layer(model, layer, tokens);
    return tokens;
}

inline PhraseLayer count_phrase_layer(const std::vector<std::vector<std::string>>& docs) {
    PhraseLayer layer;
    for (const auto& doc : docs) {
        for (std::size_t i = 0; i < doc.size(); ++i) {
            ++layer.vocab[doc[i]];
            if (i + 1 < doc.size()) ++layer.pairs[{doc[i], doc[i + 1]}];
        }
        layer.total_tokens += doc.size();
    }
    return layer;
}

inline PhraseModel fit_phrases(const std::vector<std::vector<std::string>>& docs, std::uint64_t min_count = 5,
                               double threshold = 10.0, int passes = 2) {
    if (min_count < 1) throw InvalidArgument("fit_phrases: min_count must be >= 1");
    if (!(threshold > 0.0)) throw InvalidArgument("fit_phrases: threshold must be > 0");
    if (passes < 1) throw InvalidArgument("fit_phrases: passes must be >= 1");
    if (std::all_of(docs.begin(), docs.end(), [](const auto& d) { return d.empty(); })) {
        throw InvalidArgument("fit_phrases: all documents are empty");
    }
    PhraseModel model;
    model.min_count = min_count;
    model.threshold = threshold;
    std::vector<std::vector<std::string>> current = docs;
    for (int p = 0; p < passes; ++p) {
        model.layers.push_back(count_phrase_layer(current));
        if (p + 1 < passes) {
            for (auto& doc : current) doc = apply_phrase_layer(model, model.layers.back(), doc);
        }
    }
    return model;
}

inline constexpr int kPhraseModelVersion = 1;

/// Pairs with count <= min_count can never merge and are not written.
inline nlohmann::json phrase_model_to_json(const PhraseModel& model) {
    nlohmann::json j;
    j["format"] = "egoflux.phrase_model";
    j["version"] = kPhraseModelVersion;
    j["min_count"] = model.min_count;
    j["threshold"] = model.threshold;
    j["layers"] = nlohmann::json::array();
    for (const auto& layer : model.layers) {
        nlohmann::json l;
        l["total_tokens"] = layer.total_tokens;
        l["vocab"] = layer.vocab;
        nlohmann::json pairs = nlohmann::json::array();
        for (const auto& [key, count] : layer.pairs) {
            if (count > model.min_count) pairs.push_back({key.first, key.second, count});
        }
        l["pairs"] = std::move(pairs);
        j["layers"].push_back(std::move(l));
    }
    return j;
}

inline PhraseModel phrase_model_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "egoflux.phrase_model") throw ParseError("not a phrase model");
    if (j.value("version", 0) != kPhraseModelVersion) throw ParseError("unsupported phrase model version");
    PhraseModel model;
    model.min_count = j.at("min_count").get<std::uint64_t>();
    model.threshold = j.at("threshold").get<double>();
    for (const auto& l : j.at("layers")) {
        PhraseLayer layer;
        layer.total_tokens = l.at("total_tokens").get<std::uint64_t>();
        layer.vocab = l.at("vocab").get<std::map<std::string, std::uint64_t>>();
        for (const auto& p : l.at("pairs")) {
            layer.pairs[{p.at(0).get<std::string>(), p.at(1).get<std::string>()}] = p.at(2).get<std::uint64_t>();
        }
        model.layers.push_back(std::move(layer));
    }
    return model;
}

/// clean + tokenize for a batch of posts (no phrase merging).
inline std::vector<std::vector<std::string>> tokenize_posts(const std::vector<Post>& posts) {
    std::vector<std::vector<std::string>> out;
    out.reserve(posts.size());
    for (const auto& p : posts) out.push_back(tokenize(clean(p.text)));
    return out;
}

/// Full text path for one post: clean, tokenize, merge phrases, then drop stopwords.
inline TokenDoc make_token_doc(const Post& post, const PhraseModel& phrases, const std::set<std::string>& stopwords) {
    TokenDoc doc{post.id, apply_phrases(phrases, tokenize(clean(post.text)))};
    std::erase_if(doc.tokens, [&](const std::string& t) { return stopwords.count(t) > 0; });
    return doc;
}

inline std::vector<TokenDoc> make_token_docs(const std::vector<Post>& posts, const PhraseModel& phrases,
                                             const std::set<std::string>& stopwords = default_stopwords()) {
    std::vector<TokenDoc> docs;
    docs.reserve(posts.size());
    for (const auto& p : posts) docs.push_back(make_token_doc(p, phrases, stopwords));
    return docs;
}

}  // namespace egoflux
