#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "egoflux/corpus.hpp"
#include "egoflux/csv.hpp"
#include "egoflux/error.hpp"
#include "egoflux/timeutil.hpp"

namespace egoflux {

inline constexpr std::int64_t kSecondsPerWeek = 7 * kSecondsPerDay;

/// Consecutive Monday-aligned UTC weeks [start + 7i days, start + 7(i+1) days).
struct WeekIndex {
    UtcTime epoch_week_start;  // Monday 00:00:00Z
    std::size_t n_weeks = 0;

    UtcTime week_start(std::size_t i) const {
        return UtcTime{epoch_week_start.seconds + static_cast<std::int64_t>(i) * kSecondsPerWeek};
    }

    std::optional<std::size_t> week_of(UtcTime t) const {
        const std::int64_t off = t.seconds - epoch_week_start.seconds;
        if (off < 0) return std::nullopt;
        const auto w = static_cast<std::size_t>(off / kSecondsPerWeek);
        if (w >= n_weeks) return std::nullopt;
        return w;
    }

    friend bool operator==(const WeekIndex&, const WeekIndex&) = default;
};

inline WeekIndex build_week_index(const TimeWindow& window) {
    if (window.end < window.start) throw InvalidArgument("build_week_index: start is after end");
    const std::int64_t day = floor_div(window.start.seconds, kSecondsPerDay);
    const std::int64_t monday = day - weekday_from_days(day);
    WeekIndex wi;
    wi.epoch_week_start = UtcTime{monday * kSecondsPerDay};
    wi.n_weeks = static_cast<std::size_t>((window.end.seconds - wi.epoch_week_start.seconds) / kSecondsPerWeek) + 1;
    return wi;
}

struct LabeledPost {
    std::string account;
    UtcTime created_at;
    int topic = 0;
};

struct TopicSeries {
    std::string account;
    int topic = 0;
    std::vector<std::int64_t> counts;

    friend bool operator==(const TopicSeries&, const TopicSeries&) = default;
};

/// All series of one analysis, sharing one week grid; ordered by (account, topic).
struct SeriesSet {
    WeekIndex weeks;
    std::size_t topics = 0;
    std::vector<TopicSeries> series;

    const TopicSeries* find(const std::string& account, int topic) const {
        for (const auto& s : series) {
            if (s.account == account && s.topic == topic) return &s;
        }
        return nullptr;
    }

    std::vector<std::string> accounts() const {
        std::set<std::string> names;
        for (const auto& s : series) names.insert(s.account);
        return {names.begin(), names.end()};
    }

    friend bool operator==(const SeriesSet&, const SeriesSet&) = default;
};

/// Weekly per-(account, topic) counts. Every account in `accounts` (plus any
/// account seen in `posts`) gets a series for each topic 0..topics-1.
inline SeriesSet bin_posts(const std::vector<LabeledPost>& posts, const WeekIndex& wi, std::size_t topics,
                           const std::vector<std::string>& accounts = {}) {
    std::set<std::string> names(accounts.begin(), accounts.end());
    for (const auto& p : posts) names.insert(p.account);
    std::map<std::pair<std::string, int>, std::vector<std::int64_t>> cells;
    for (const auto& a : names) {
        for (std::size_t t = 0; t < topics; ++t) {
            cells[{a, static_cast<int>(t)}].assign(wi.n_weeks, 0);
        }
    }
    for (const auto& p : posts) {
        if (p.topic < 0 || static_cast<std::size_t>(p.topic) >= topics) {
            throw InvalidArgument("bin_posts: topic " + std::to_string(p.topic) + " out of range");
        }
        auto w = wi.week_of(p.created_at);
        if (!w) throw InvalidArgument("bin_posts: post at " + format_iso8601(p.created_at) + " lies outside the week index");
        ++cells[{p.account, p.topic}][*w];
    }
    SeriesSet out;
    out.weeks = wi;
    out.topics = topics;
    for (auto& [key, counts] : cells) out.series.push_back({key.first, key.second, std::move(counts)});
    return out;
}

/// Rolling-window variant: bin i counts posts in [start + i*stride, start + i*stride + length).
/// Windows overlap when stride < length, so a post may fall in several bins.
inline std::vector<std::int64_t> rolling_counts(const std::vector<UtcTime>& times, UtcTime start, UtcTime end,
                                                int length_days, int stride_days) {
    if (length_days < 1 || stride_days < 1) throw InvalidArgument("rolling window length and stride must be >= 1");
    const std::int64_t len = length_days * kSecondsPerDay;
    const std::int64_t stride = stride_days * kSecondsPerDay;
    std::vector<std::int64_t> out;
    for (std::int64_t s = start.seconds; s + len - 1 <= end.seconds; s += stride) {
        std::int64_t c = 0;
        for (auto t : times) c += (t.seconds >= s && t.seconds < s + len) ? 1 : 0;
        out.push_back(c);
    }
    return out;
}

/// Long-format CSV: week_start,account,topic,count (one row per week per series).
inline void write_series_csv(std::ostream& out, const SeriesSet& set) {
    csv::write_record(out, {"week_start", "account", "topic", "count"});
    for (const auto& s : set.series) {
        for (std::size_t w = 0; w < s.counts.size(); ++w) {
            csv::write_record(out, {format_date(set.weeks.week_start(w)), s.account, std::to_string(s.topic),
                                    std::to_string(s.counts[w])});
        }
    }
}

inline SeriesSet read_series_csv(std::istream& in) {
    csv::Reader reader(in);
    auto header = reader.next();
    if (!header) throw ParseError("series CSV is empty");
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header->size(); ++i) col[(*header)[i]] = i;
    for (const char* name : {"week_start", "account", "topic", "count"}) {
        if (!col.count(name)) throw ParseError(std::string("series CSV is missing column '") + name + "'");
    }
    struct Row {
        std::int64_t week;
        std::string account;
        int topic;
        std::int64_t count;
    };
    std::vector<Row> rows;
    std::int64_t min_week = 0, max_week = 0;
    while (auto rec = reader.next()) {
        if (rec->size() == 1 && rec->front().empty()) continue;
        if (reader.malformed() || rec->size() != header->size()) throw ParseError("malformed series CSV row");
        auto t = parse_iso8601((*rec)[col["week_start"]]);
        if (!t) throw ParseError("bad week_start '" + (*rec)[col["week_start"]] + "'");
        Row r;
        r.week = floor_div(t->seconds, kSecondsPerDay);
        r.account = canonical_handle((*rec)[col["account"]]);
        try {
            r.topic = std::stoi((*rec)[col["topic"]]);
            r.count = std::stoll((*rec)[col["count"]]);
        } catch (const std::exception&) {
            throw ParseError("bad topic or count in series CSV");
        }
        if (r.topic < 0 || r.count < 0) throw ParseError("negative topic or count in series CSV");
        if (rows.empty()) {
            min_week = max_week = r.week;
        } else {
            min_week = std::min(min_week, r.week);
            max_week = std::max(max_week, r.week);
        }
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw ParseError("series CSV has no rows");
    if (weekday_from_days(min_week) != 0) throw ParseError("series weeks must start on a Monday");
    SeriesSet set;
    set.weeks.epoch_week_start = UtcTime{min_week * kSecondsPerDay};
    set.weeks.n_weeks = static_cast<std::size_t>((max_week - min_week) / 7) + 1;
    std::map<std::pair<std::string, int>, std::vector<std::int64_t>> cells;
    std::size_t topics = 0;
    for (const auto& r : rows) {
        if ((r.week - min_week) % 7 != 0) throw ParseError("series week_start values are not 7 days apart");
        auto& v = cells[{r.account, r.topic}];
        v.resize(set.weeks.n_weeks, 0);
        v[static_cast<std::size_t>((r.week - min_week) / 7)] += r.count;
        topics = std::max(topics, static_cast<std::size_t>(r.topic) + 1);
    }
    set.topics = topics;
    for (auto& [key, counts] : cells) set.series.push_back({key.first, key.second, std::move(counts)});
    return set;
}

inline SeriesSet read_series_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open series file: " + path);
    return read_series_csv(in);
}

}  // namespace egoflux
