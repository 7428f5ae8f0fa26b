#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "egoflux/csv.hpp"
#include "egoflux/error.hpp"
#include "egoflux/timeutil.hpp"

namespace egoflux {

struct Post {
    std::string id;
    std::string author;  // canonical handle
    UtcTime created_at;
    std::string text;
    std::optional<std::string> retweeted_author;  // canonical handle

    friend bool operator==(const Post&, const Post&) = default;
};

struct TimeWindow {
    UtcTime start;
    UtcTime end;

    bool contains(UtcTime t) const { return start <= t && t <= end; }
};

/// Posts sorted ascending by (created_at, id), all inside the window.
struct Corpus {
    std::vector<Post> posts;
    TimeWindow window;
};

enum class CorpusFormat { csv, jsonl };

struct LoadOptions {
    CorpusFormat format = CorpusFormat::csv;
    TimeWindow window;
    bool strict = false;
};

struct LoadStats {
    std::size_t rows_read = 0;
    std::size_t dropped_out_of_window = 0;
    std::size_t dropped_malformed = 0;
    std::size_t dropped_duplicate = 0;
    std::vector<std::string> warnings;

    std::size_t dropped() const { return dropped_out_of_window + dropped_malformed + dropped_duplicate; }
};

struct LoadedCorpus {
    Corpus corpus;
    LoadStats stats;
};

/// Lowercases and strips surrounding whitespace and a leading "@".
inline std::string canonical_handle(std::string_view raw) {
    while (!raw.empty() && std::isspace(static_cast<unsigned char>(raw.front()))) raw.remove_prefix(1);
    while (!raw.empty() && std::isspace(static_cast<unsigned char>(raw.back()))) raw.remove_suffix(1);
    if (!raw.empty() && raw.front() == '@') raw.remove_prefix(1);
    std::string out(raw);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

/// Parses a window bound. A date-only end bound covers the whole day.
inline UtcTime parse_window_bound(std::string_view text, bool is_end) {
    auto t = parse_iso8601(text);
    if (!t) throw InvalidArgument("invalid ISO-8601 timestamp: " + std::string(text));
    std::string_view trimmed = text;
    while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.back()))) trimmed.remove_suffix(1);
    while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.front()))) trimmed.remove_prefix(1);
    if (is_end && trimmed.size() == 10) t->seconds += kSecondsPerDay - 1;
    return *t;
}

namespace detail {

struct RawRow {
    std::string id, author, created_at, text;
    std::optional<std::string> retweeted_author;
};

// Validates one raw row. Returns an error message, or nullopt with `out` filled.
inline std::optional<std::string> to_post(const RawRow& row, Post& out) {
    if (row.id.empty()) return "empty id";
    out.id = row.id;
    out.author = canonical_handle(row.author);
    if (out.author.empty()) return "empty author";
    auto t = parse_iso8601(row.created_at);
    if (!t) return "bad created_at '" + row.created_at + "'";
    out.created_at = *t;
    out.text = row.text;
    out.retweeted_author.reset();
    if (row.retweeted_author) {
        std::string handle = canonical_handle(*row.retweeted_author);
        if (!handle.empty()) {
            out.retweeted_author = std::move(handle);
        } else if (row.retweeted_author->find('@') != std::string::npos) {
            return "retweeted_author is a bare '@'";
        }
    }
    return std::nullopt;
}

}  // namespace detail

/// Loads posts from a stream, keeping only those inside the window.
///
/// Lenient mode skips and counts malformed rows and keeps the first occurrence
/// of a duplicated id. Strict mode throws ParseError on the first malformed or
/// duplicate row.
inline LoadedCorpus load_corpus(std::istream& in, const LoadOptions& opts) {
    if (opts.window.end < opts.window.start) throw InvalidArgument("window start is after window end");

    LoadedCorpus result;
    result.corpus.window = opts.window;
    LoadStats& stats = result.stats;
    std::unordered_set<std::string> seen;

    auto reject = [&](std::size_t row_no, const std::string& why) {
        if (opts.strict) throw ParseError("row " + std::to_string(row_no) + ": " + why);
        ++stats.dropped_malformed;
    };

    auto accept = [&](std::size_t row_no, const detail::RawRow& raw) {
        ++stats.rows_read;
        Post post;
        if (auto err = detail::to_post(raw, post)) {
            reject(row_no, *err);
            return;
        }
        if (!seen.insert(post.id).second) {
            if (opts.strict) throw ParseError("row " + std::to_string(row_no) + ": duplicate id '" + post.id + "'");
            ++stats.dropped_duplicate;
            return;
        }
        if (!opts.window.contains(post.created_at)) {
            ++stats.dropped_out_of_window;
            return;
        }
        result.corpus.posts.push_back(std::move(post));
    };

    if (opts.format == CorpusFormat::csv) {
        csv::Reader reader(in);
        auto header = reader.next();
        if (header) {
            if (!header->empty() && header->front().starts_with("\xEF\xBB\xBF")) header->front().erase(0, 3);
            std::map<std::string, std::size_t> col;
            for (std::size_t i = 0; i < header->size(); ++i) col[(*header)[i]] = i;
            for (const char* name : {"id", "author", "created_at", "text", "retweeted_author"}) {
                if (!col.count(name)) throw ParseError(std::string("CSV header is missing column '") + name + "'");
            }
            std::size_t row_no = 1;
            while (auto rec = reader.next()) {
                ++row_no;
                if (rec->size() == 1 && rec->front().empty() && !reader.malformed()) continue;  // blank line
                if (reader.malformed() || rec->size() != header->size()) {
                    ++stats.rows_read;
                    reject(row_no, "malformed CSV record");
                    continue;
                }
                detail::RawRow raw{(*rec)[col["id"]], (*rec)[col["author"]], (*rec)[col["created_at"]],
                                   (*rec)[col["text"]], std::nullopt};
                if (const auto& rt = (*rec)[col["retweeted_author"]]; !rt.empty()) raw.retweeted_author = rt;
                accept(row_no, raw);
            }
        }
    } else {
        std::string line;
        std::size_t row_no = 0;
        while (std::getline(in, line)) {
            ++row_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            nlohmann::json obj;
            try {
                obj = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception&) {
                ++stats.rows_read;
                reject(row_no, "invalid JSON");
                continue;
            }
            auto str = [&](const char* key) -> std::optional<std::string> {
                auto it = obj.find(key);
                if (it == obj.end() || it->is_null()) return std::nullopt;
                if (it->is_string()) return it->get<std::string>();
                if (it->is_number_integer() || it->is_number_unsigned()) return it->dump();
                return std::nullopt;
            };
            if (!obj.is_object() || !str("id") || !str("author") || !str("created_at") || !str("text")) {
                ++stats.rows_read;
                reject(row_no, "missing or mistyped field");
                continue;
            }
            accept(row_no, detail::RawRow{*str("id"), *str("author"), *str("created_at"), *str("text"),
                                          str("retweeted_author")});
        }
    }

    auto& posts = result.corpus.posts;
    std::sort(posts.begin(), posts.end(), [](const Post& a, const Post& b) {
        return a.created_at != b.created_at ? a.created_at < b.created_at : a.id < b.id;
    });
    if (posts.empty()) stats.warnings.push_back("corpus is empty after loading");
    if (stats.dropped_malformed) {
        stats.warnings.push_back("skipped " + std::to_string(stats.dropped_malformed) + " malformed row(s)");
    }
    if (stats.dropped_duplicate) {
        stats.warnings.push_back("skipped " + std::to_string(stats.dropped_duplicate) + " duplicate id(s)");
    }
    return result;
}

inline LoadedCorpus load_corpus(const std::string& path, const LoadOptions& opts) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open corpus file: " + path);
    return load_corpus(in, opts);
}

inline nlohmann::json post_to_json(const Post& p) {
    nlohmann::json j;
    j["id"] = p.id;
    j["author"] = p.author;
    j["created_at"] = format_iso8601(p.created_at);
    j["text"] = p.text;
    j["retweeted_author"] = p.retweeted_author ? nlohmann::json(*p.retweeted_author) : nlohmann::json(nullptr);
    return j;
}

/// Canonical JSONL serialization (one post per line, sorted keys).
inline void write_corpus_jsonl(std::ostream& out, const Corpus& corpus) {
    for (const auto& p : corpus.posts) {
        out << post_to_json(p).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
    }
}

inline void write_corpus_csv(std::ostream& out, const Corpus& corpus) {
    csv::write_record(out, {"id", "author", "created_at", "text", "retweeted_author"});
    for (const auto& p : corpus.posts) {
        csv::write_record(out, {p.id, p.author, format_iso8601(p.created_at), p.text, p.retweeted_author.value_or("")});
    }
}

struct AlterRanking {
    struct Entry {
        std::string handle;
        std::size_t retweet_count = 0;

        friend bool operator==(const Entry&, const Entry&) = default;
    };
    std::vector<Entry> entries;
    std::set<std::string> excluded;
    std::vector<std::string> warnings;

    std::vector<std::string> handles() const {
        std::vector<std::string> out;
        for (const auto& e : entries) out.push_back(e.handle);
        return out;
    }
};

/// Top-n accounts the ego retweeted, ignoring self-retweets and `exclude`.
/// Ties are broken lexicographically by handle.
inline AlterRanking rank_alters(const Corpus& ego, std::string_view ego_handle, const std::set<std::string>& exclude,
                                std::size_t n) {
    if (n < 1) throw InvalidArgument("rank_alters: n must be at least 1");
    AlterRanking ranking;
    for (const auto& h : exclude) ranking.excluded.insert(canonical_handle(h));
    const std::string self = canonical_handle(ego_handle);

    std::map<std::string, std::size_t> counts;
    for (const auto& p : ego.posts) {
        if (!p.retweeted_author) continue;
        const std::string& who = *p.retweeted_author;
        if (who == self || ranking.excluded.count(who)) continue;
        ++counts[who];
    }
    for (const auto& [handle, count] : counts) ranking.entries.push_back({handle, count});
    std::sort(ranking.entries.begin(), ranking.entries.end(), [](const auto& a, const auto& b) {
        return a.retweet_count != b.retweet_count ? a.retweet_count > b.retweet_count : a.handle < b.handle;
    });
    if (ranking.entries.size() > n) ranking.entries.resize(n);
    if (ranking.entries.empty()) ranking.warnings.push_back("no qualifying retweets found; alter ranking is empty");
    return ranking;
}

}  // namespace egoflux
