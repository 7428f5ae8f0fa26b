#pragma once

#include <charconv>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace egoflux {

/// A UTC instant with second precision, stored as seconds since 1970-01-01T00:00:00Z.
struct UtcTime {
    std::int64_t seconds = 0;

    friend auto operator<=>(const UtcTime&, const UtcTime&) = default;
};

inline constexpr std::int64_t kSecondsPerDay = 86400;

// Days since the epoch for a proleptic Gregorian date (H. Hinnant's algorithm).
constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2 ? 1 : 0;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct CivilDate {
    std::int64_t year;
    unsigned month;
    unsigned day;
};

constexpr CivilDate civil_from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return {y + (m <= 2 ? 1 : 0), m, d};
}

constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

// 0 = Monday ... 6 = Sunday. 1970-01-01 was a Thursday.
constexpr int weekday_from_days(std::int64_t days) {
    return static_cast<int>(((days + 3) % 7 + 7) % 7);
}

namespace detail {

inline bool parse_fixed(std::string_view s, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > s.size()) return false;
    for (std::size_t i = pos; i < pos + len; ++i) {
        if (s[i] < '0' || s[i] > '9') return false;
    }
    auto res = std::from_chars(s.data() + pos, s.data() + pos + len, out);
    return res.ec == std::errc{};
}

}  // namespace detail

/// Parses an ISO-8601 timestamp: `YYYY-MM-DD`, optionally followed by `T` (or a
/// space) and `HH:MM[:SS[.fff]]`, optionally followed by `Z` or a `±HH[:MM]`
/// offset. A missing offset means UTC. Fractional seconds are truncated.
inline std::optional<UtcTime> parse_iso8601(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);

    int year = 0, month = 0, day = 0;
    if (!detail::parse_fixed(s, 0, 4, year) || s.size() < 10 || s[4] != '-' ||
        !detail::parse_fixed(s, 5, 2, month) || s[7] != '-' || !detail::parse_fixed(s, 8, 2, day)) {
        return std::nullopt;
    }
    if (month < 1 || month > 12 || day < 1) return std::nullopt;
    static constexpr int kMonthDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    const int max_day = kMonthDays[month - 1] + (month == 2 && leap ? 1 : 0);
    if (day > max_day) return std::nullopt;

    int hour = 0, minute = 0, second = 0;
    std::size_t pos = 10;
    if (pos < s.size() && (s[pos] == 'T' || s[pos] == 't' || s[pos] == ' ')) {
        ++pos;
        if (!detail::parse_fixed(s, pos, 2, hour) || pos + 2 >= s.size() || s[pos + 2] != ':' ||
            !detail::parse_fixed(s, pos + 3, 2, minute)) {
            return std::nullopt;
        }
        pos += 5;
        if (pos < s.size() && s[pos] == ':') {
            if (!detail::parse_fixed(s, pos + 1, 2, second)) return std::nullopt;
            pos += 3;
            if (pos < s.size() && (s[pos] == '.' || s[pos] == ',')) {
                ++pos;
                const std::size_t digits = pos;
                while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
                if (pos == digits) return std::nullopt;
            }
        }
        if (hour > 23 || minute > 59 || second > 60) return std::nullopt;
    }

    std::int64_t offset = 0;
    if (pos < s.size()) {
        if (s[pos] == 'Z' || s[pos] == 'z') {
            ++pos;
        } else if (s[pos] == '+' || s[pos] == '-') {
            const int sign = s[pos] == '-' ? -1 : 1;
            int oh = 0, om = 0;
            if (!detail::parse_fixed(s, pos + 1, 2, oh)) return std::nullopt;
            pos += 3;
            if (pos < s.size() && s[pos] == ':') ++pos;
            if (pos < s.size()) {
                if (!detail::parse_fixed(s, pos, 2, om)) return std::nullopt;
                pos += 2;
            }
            if (oh > 23 || om > 59) return std::nullopt;
            offset = sign * (oh * 3600 + om * 60);
        }
    }
    if (pos != s.size()) return std::nullopt;

    const std::int64_t days = days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
    return UtcTime{days * kSecondsPerDay + hour * 3600 + minute * 60 + second - offset};
}

/// Formats as `YYYY-MM-DDTHH:MM:SSZ`.
inline std::string format_iso8601(UtcTime t) {
    const std::int64_t days = floor_div(t.seconds, kSecondsPerDay);
    const std::int64_t rem = t.seconds - days * kSecondsPerDay;
    const CivilDate c = civil_from_days(days);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ", static_cast<long long>(c.year), c.month,
                  c.day, static_cast<long long>(rem / 3600), static_cast<long long>((rem / 60) % 60),
                  static_cast<long long>(rem % 60));
    return buf;
}

/// Formats the UTC calendar date as `YYYY-MM-DD`.
inline std::string format_date(UtcTime t) {
    const CivilDate c = civil_from_days(floor_div(t.seconds, kSecondsPerDay));
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04lld-%02u-%02u", static_cast<long long>(c.year), c.month, c.day);
    return buf;
}

}  // namespace egoflux
