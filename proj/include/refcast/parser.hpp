#ifndef REFCAST_PARSER_HPP
#define REFCAST_PARSER_HPP

#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "refcast/errors.hpp"

namespace refcast {

enum class ExtractionMode { Strict, Lenient };

/// Numeric predictions recovered from free-form model text. `values` aligns
/// with `matched_hours`; anything the text failed to cover is listed in
/// `missing_hours`. Negative values are clamped to zero (traffic volume
/// cannot be negative) with a recorded warning.
struct ParsedPrediction {
    std::vector<double> values;
    std::vector<std::string> matched_hours;
    std::vector<std::string> missing_hours;
    ExtractionMode extraction_mode = ExtractionMode::Lenient;
    std::vector<std::string> warnings;
    bool used_list_fallback = false;

    bool complete() const { return missing_hours.empty(); }
};

namespace parser_detail {

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Parses a decimal number at `pos`; advances `pos` past it on success.
inline std::optional<double> scan_number(const std::string& text, std::size_t& pos) {
    std::size_t p = pos;
    const std::size_t n = text.size();
    std::size_t start = p;
    if (p < n && (text[p] == '+' || text[p] == '-')) ++p;
    std::size_t digits = 0;
    while (p < n && is_digit(text[p])) ++p, ++digits;
    if (p < n && text[p] == '.') {
        ++p;
        while (p < n && is_digit(text[p])) ++p, ++digits;
    }
    if (digits == 0) return std::nullopt;
    if (p < n && (text[p] == 'e' || text[p] == 'E')) {
        std::size_t q = p + 1;
        if (q < n && (text[q] == '+' || text[q] == '-')) ++q;
        std::size_t exp_digits = 0;
        while (q < n && is_digit(text[q])) ++q, ++exp_digits;
        if (exp_digits > 0) p = q;
    }
    double value = 0.0;
    try {
        value = std::stod(text.substr(start, p - start));
    } catch (const std::exception&) {
        return std::nullopt;
    }
    if (!std::isfinite(value)) return std::nullopt;
    pos = p;
    return value;
}

// Accepts "-", ":", or an en dash as the label/value separator; advances past
// it (and surrounding spaces/tabs) on success.
inline bool scan_separator(const std::string& text, std::size_t& pos) {
    std::size_t p = pos;
    const std::size_t n = text.size();
    while (p < n && (text[p] == ' ' || text[p] == '\t')) ++p;
    if (p < n && (text[p] == '-' || text[p] == ':')) {
        ++p;
    } else if (p + 2 < n && static_cast<unsigned char>(text[p]) == 0xE2 &&
               static_cast<unsigned char>(text[p + 1]) == 0x80 &&
               static_cast<unsigned char>(text[p + 2]) == 0x93) {
        p += 3;  // UTF-8 en dash
    } else {
        return false;
    }
    while (p < n && (text[p] == ' ' || text[p] == '\t')) ++p;
    pos = p;
    return true;
}

// Tries to read "H[H]:MM <sep> <number>" starting at `pos`; on success,
// `end_out` is the offset just past the number.
inline bool scan_hour_value(const std::string& text, std::size_t pos, std::string& label_out,
                            double& value_out, std::size_t& end_out) {
    const std::size_t n = text.size();
    std::size_t p = pos;
    std::size_t hour_digits = 0;
    int hour = 0;
    while (p < n && is_digit(text[p]) && hour_digits < 2) {
        hour = hour * 10 + (text[p] - '0');
        ++p, ++hour_digits;
    }
    if (hour_digits == 0 || p >= n || text[p] != ':') return false;
    ++p;
    if (p + 1 >= n || !is_digit(text[p]) || !is_digit(text[p + 1])) return false;
    const int minute = (text[p] - '0') * 10 + (text[p + 1] - '0');
    p += 2;
    if (hour > 23 || minute > 59) return false;
    if (!scan_separator(text, p)) return false;
    const auto value = scan_number(text, p);
    if (!value) return false;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%02d:%02d", hour, minute);
    label_out = buf;
    value_out = *value;
    end_out = p;
    return true;
}

struct LineMatch {
    std::string label;
    double value = 0.0;
};

// Scans every line for hour-value pairs. Strict mode requires a single pair
// starting at the first non-space character of its line; lenient mode
// accepts any number of pairs anywhere in the line.
inline std::vector<LineMatch> scan_lines(const std::string& text, bool anywhere_in_line) {
    std::vector<LineMatch> matches;
    std::size_t line_start = 0;
    while (line_start <= text.size()) {
        std::size_t line_end = text.find('\n', line_start);
        if (line_end == std::string::npos) line_end = text.size();
        std::size_t p = line_start;
        while (p < line_end && (text[p] == ' ' || text[p] == '\t' || text[p] == '\r')) ++p;
        LineMatch m;
        std::size_t end = 0;
        if (anywhere_in_line) {
            std::size_t q = p;
            while (q < line_end) {
                if (is_digit(text[q]) && (q == p || !is_digit(text[q - 1])) &&
                    scan_hour_value(text, q, m.label, m.value, end)) {
                    matches.push_back(m);
                    q = end;
                } else {
                    ++q;
                }
            }
        } else if (p < line_end && scan_hour_value(text, p, m.label, m.value, end)) {
            matches.push_back(m);
        }
        if (line_end == text.size()) break;
        line_start = line_end + 1;
    }
    return matches;
}

// Extracts the numbers of the first JSON-style array whose body holds only
// numbers, commas, and whitespace.
inline std::optional<std::vector<double>> scan_json_array(const std::string& text) {
    std::size_t open = 0;
    while ((open = text.find('[', open)) != std::string::npos) {
        const std::size_t close = text.find(']', open + 1);
        if (close == std::string::npos) return std::nullopt;
        std::vector<double> values;
        std::size_t p = open + 1;
        bool ok = true;
        while (p < close) {
            const char c = text[p];
            if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == ',') {
                ++p;
                continue;
            }
            const auto v = scan_number(text, p);
            if (!v || p > close) {
                ok = false;
                break;
            }
            values.push_back(*v);
        }
        if (ok && !values.empty()) return values;
        open = close + 1;
    }
    return std::nullopt;
}

// Whole text is a bare numeric list (numbers split by commas/whitespace)?
inline std::optional<std::vector<double>> scan_bare_list(const std::string& text) {
    std::vector<double> values;
    std::size_t p = 0;
    const std::size_t n = text.size();
    while (p < n) {
        const char c = text[p];
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == ',') {
            ++p;
            continue;
        }
        const auto v = scan_number(text, p);
        if (!v) return std::nullopt;
        values.push_back(*v);
    }
    if (values.empty()) return std::nullopt;
    return values;
}

inline double clamp_volume(double v, const std::string& where,
                           std::vector<std::string>& warnings) {
    if (v < 0.0) {
        warnings.push_back("clamped negative value at " + where);
        return 0.0;
    }
    return v;
}

}  // namespace parser_detail

/// Extracts one value per expected hour from model text.
///
/// Strict mode accepts only the line grammar ("HH:MM <sep> <number>") and
/// demands every expected hour. Lenient mode additionally accepts a JSON
/// array or a bare numeric list of the right length, and tolerates partial
/// answers (unmatched hours are reported, not fatal). The first match per
/// hour wins; later duplicates are ignored with a warning.
inline ParsedPrediction parse_prediction(const std::string& text,
                                         const std::vector<std::string>& expected_hours,
                                         ExtractionMode mode) {
    if (expected_hours.empty()) throw EmptyInputError("expected hours");

    ParsedPrediction out;
    out.extraction_mode = mode;

    const bool lenient = mode == ExtractionMode::Lenient;
    const auto matches = parser_detail::scan_lines(text, lenient);
    std::map<std::string, double> by_label;
    for (const auto& m : matches) {
        auto [it, inserted] = by_label.emplace(m.label, m.value);
        if (!inserted) out.warnings.push_back("ignored duplicate line for " + m.label);
    }

    for (const auto& hour : expected_hours) {
        const auto it = by_label.find(hour);
        if (it != by_label.end()) {
            out.matched_hours.push_back(hour);
            out.values.push_back(
                parser_detail::clamp_volume(it->second, hour, out.warnings));
        } else {
            out.missing_hours.push_back(hour);
        }
    }

    if (mode == ExtractionMode::Strict) {
        if (!out.missing_hours.empty()) throw IncompleteError(out.missing_hours);
        return out;
    }

    if (out.missing_hours.empty()) return out;

    // Fallbacks for prose-wrapped answers.
    auto list = parser_detail::scan_json_array(text);
    if (!list) list = parser_detail::scan_bare_list(text);
    if (list && list->size() == expected_hours.size()) {
        out.values.clear();
        out.matched_hours.clear();
        out.missing_hours.clear();
        out.used_list_fallback = true;
        for (std::size_t i = 0; i < list->size(); ++i) {
            out.matched_hours.push_back(expected_hours[i]);
            out.values.push_back(
                parser_detail::clamp_volume((*list)[i], expected_hours[i], out.warnings));
        }
        return out;
    }
    if (out.matched_hours.empty()) {
        if (list) throw LengthMismatchError(list->size(), expected_hours.size());
        throw NoNumbersFoundError();
    }
    return out;
}

namespace parser_detail {

// Case-insensitive find of `needle` starting at a word boundary.
inline std::size_t find_marker(const std::string& lower_text, const std::string& needle) {
    std::size_t pos = lower_text.find(needle);
    while (pos != std::string::npos) {
        const bool at_boundary =
            pos == 0 || !std::isalpha(static_cast<unsigned char>(lower_text[pos - 1]));
        if (at_boundary) return pos;
        pos = lower_text.find(needle, pos + 1);
    }
    return std::string::npos;
}

}  // namespace parser_detail

/// Pulls a short description of the prediction method out of model text:
/// whatever follows the first recognized marker ("method:", "approach:",
/// "I used", "using"), up to the end of that sentence, truncated to 400
/// characters. An empty result means no marker was found.
inline std::string extract_method_summary(const std::string& text) {
    std::string lower = text;
    for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));

    static const char* kMarkers[] = {"method:", "approach:", "i used ", "using "};
    std::size_t best_pos = std::string::npos;
    std::size_t best_len = 0;
    for (const char* marker : kMarkers) {
        const std::size_t pos = parser_detail::find_marker(lower, marker);
        if (pos != std::string::npos && pos < best_pos) {
            best_pos = pos;
            best_len = std::string(marker).size();
        }
    }
    if (best_pos == std::string::npos) return "";

    std::size_t start = best_pos + best_len;
    while (start < text.size() && (text[start] == ' ' || text[start] == '\t')) ++start;
    std::size_t end = start;
    while (end < text.size()) {
        const char c = text[end];
        if (c == '\n') break;
        if (c == '.' &&
            (end + 1 >= text.size() || text[end + 1] == ' ' || text[end + 1] == '\n')) {
            ++end;  // keep the period
            break;
        }
        ++end;
    }
    std::string summary = text.substr(start, end - start);
    while (!summary.empty() && (summary.back() == ' ' || summary.back() == '\r')) {
        summary.pop_back();
    }
    if (summary.size() > 400) summary.resize(400);
    return summary;
}

}  // namespace refcast

#endif  // REFCAST_PARSER_HPP
