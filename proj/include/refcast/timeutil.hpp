#ifndef REFCAST_TIMEUTIL_HPP
#define REFCAST_TIMEUTIL_HPP

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <optional>
#include <string>

namespace refcast {

/// Breaks an epoch-seconds timestamp into UTC calendar fields.
inline std::tm utc_tm(std::int64_t epoch_seconds) {
    std::time_t t = static_cast<std::time_t>(epoch_seconds);
    std::tm out{};
    gmtime_r(&t, &out);
    return out;
}

/// "YYYY-MM-DD" for the UTC day containing the timestamp.
inline std::string format_utc_date(std::int64_t epoch_seconds) {
    std::tm tm = utc_tm(epoch_seconds);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday);
    return buf;
}

/// "HH:MM" label for the UTC time of day, e.g. "07:00".
inline std::string format_hour_label(std::int64_t epoch_seconds) {
    std::tm tm = utc_tm(epoch_seconds);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%02d:%02d", tm.tm_hour, tm.tm_min);
    return buf;
}

/// "YYYY-MM-DDTHH:MM:SSZ".
inline std::string format_utc_datetime(std::int64_t epoch_seconds) {
    std::tm tm = utc_tm(epoch_seconds);
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

/// Parses "YYYY-MM-DD[ T]HH:MM[:SS][Z]" or a bare "YYYY-MM-DD" as UTC.
/// Returns nullopt when the text does not look like an ISO-8601 instant.
inline std::optional<std::int64_t> parse_iso8601_utc(const std::string& text) {
    int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
    char sep = 0;
    int n = std::sscanf(text.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d", &year, &month, &day, &sep,
                        &hour, &minute, &second);
    if (n < 3) return std::nullopt;
    if (n >= 4 && sep != 'T' && sep != ' ') return std::nullopt;
    if (month < 1 || month > 12 || day < 1 || day > 31) return std::nullopt;
    if (hour < 0 || hour > 23 || minute < 0 || minute > 59 || second < 0 || second > 60) {
        return std::nullopt;
    }
    std::tm tm{};
    tm.tm_year = year - 1900;
    tm.tm_mon = month - 1;
    tm.tm_mday = day;
    tm.tm_hour = hour;
    tm.tm_min = minute;
    tm.tm_sec = second;
    std::time_t t = timegm(&tm);
    if (t == static_cast<std::time_t>(-1)) return std::nullopt;
    return static_cast<std::int64_t>(t);
}

}  // namespace refcast

#endif  // REFCAST_TIMEUTIL_HPP
