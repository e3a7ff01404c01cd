#ifndef REFCAST_LOADERS_HPP
#define REFCAST_LOADERS_HPP

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "refcast/errors.hpp"
#include "refcast/timeseries.hpp"
#include "refcast/timeutil.hpp"

namespace refcast {

/// What to do with missing samples discovered at load time.
enum class GapPolicy { Reject, Interpolate, ZeroFill };

inline std::string to_string(GapPolicy p) {
    switch (p) {
        case GapPolicy::Reject: return "reject";
        case GapPolicy::Interpolate: return "interpolate";
        case GapPolicy::ZeroFill: return "zero_fill";
    }
    return "interpolate";
}

inline GapPolicy gap_policy_from_string(const std::string& s) {
    if (s == "reject") return GapPolicy::Reject;
    if (s == "interpolate") return GapPolicy::Interpolate;
    if (s == "zero_fill" || s == "zero-fill" || s == "zero") return GapPolicy::ZeroFill;
    throw ConfigError("unknown gap policy '" + s + "'");
}

/// CSV ingestion settings: which header columns hold the data, how to treat
/// gaps, and an optional fixed resolution (otherwise inferred from spacing).
struct ColumnMap {
    std::string timestamp_column = "timestamp";
    std::string value_column = "volume";
    GapPolicy gap_policy = GapPolicy::Interpolate;
    std::optional<std::int64_t> resolution_seconds;
    std::string source_id;
};

/// Column layout of call-detail-record TSV files. The value column is picked
/// by index so multi-counter exports can select the wanted counter.
struct CdrColumns {
    std::size_t cell_column = 0;
    std::size_t timestamp_ms_column = 1;
    std::size_t value_column = 2;
    std::int64_t resolution_seconds = 600;
};

namespace detail {

inline std::string strip(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, sep)) out.push_back(field);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

inline bool parse_double(const std::string& raw, double& out) {
    const std::string s = strip(raw);
    if (s.empty()) return false;
    try {
        std::size_t pos = 0;
        out = std::stod(s, &pos);
        return pos == s.size();
    } catch (const std::exception&) {
        return false;
    }
}

inline bool parse_int64(const std::string& raw, std::int64_t& out) {
    const std::string s = strip(raw);
    if (s.empty()) return false;
    try {
        std::size_t pos = 0;
        out = std::stoll(s, &pos);
        return pos == s.size();
    } catch (const std::exception&) {
        return false;
    }
}

// Repairs or rejects grid gaps between already sorted, deduplicated samples.
inline std::vector<TrafficSample> repair_gaps(std::vector<TrafficSample> samples,
                                              std::int64_t resolution, GapPolicy policy,
                                              std::vector<std::string>* warnings) {
    std::vector<TrafficSample> out;
    out.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (i > 0) {
            const std::int64_t diff = samples[i].timestamp - samples[i - 1].timestamp;
            if (diff != resolution) {
                if (diff <= 0) throw NonMonotoneTimestampsError(samples[i].timestamp);
                if (diff % resolution != 0 || policy == GapPolicy::Reject) {
                    throw GapDetectedError(samples[i - 1].timestamp);
                }
                const std::int64_t steps = diff / resolution;
                for (std::int64_t k = 1; k < steps; ++k) {
                    const std::int64_t ts = samples[i - 1].timestamp + k * resolution;
                    double v = 0.0;
                    if (policy == GapPolicy::Interpolate) {
                        const double t = static_cast<double>(k) / static_cast<double>(steps);
                        v = samples[i - 1].volume +
                            t * (samples[i].volume - samples[i - 1].volume);
                    }
                    out.push_back({v, ts});
                }
                if (warnings != nullptr) {
                    warnings->push_back("filled " + std::to_string(steps - 1) +
                                        " missing sample(s) after t=" +
                                        std::to_string(samples[i - 1].timestamp));
                }
            }
        }
        out.push_back(samples[i]);
    }
    return out;
}

// Most common consecutive spacing; ties resolved toward the smaller value.
inline std::int64_t infer_resolution(const std::vector<TrafficSample>& sorted) {
    std::map<std::int64_t, std::size_t> diff_counts;
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        const std::int64_t d = sorted[i].timestamp - sorted[i - 1].timestamp;
        if (d > 0) ++diff_counts[d];
    }
    std::int64_t best = 0;
    std::size_t best_count = 0;
    for (const auto& [d, count] : diff_counts) {
        if (count > best_count) {
            best = d;
            best_count = count;
        }
    }
    if (best <= 0) throw Error("cannot infer resolution from fewer than two distinct timestamps");
    return best;
}

}  // namespace detail

/// Loads a header-carrying CSV of (timestamp, volume) rows. Timestamps may be
/// epoch seconds or ISO-8601; the style is auto-detected from the first data
/// row and must be uniform. Rows are sorted before validation, duplicates are
/// rejected, and gaps are handled per the configured policy.
inline TimeSeries load_csv(const std::string& path, const ColumnMap& columns = {},
                           std::vector<std::string>* warnings = nullptr) {
    std::ifstream file(path);
    if (!file) throw FileNotFoundError(path);

    std::string line;
    if (!std::getline(file, line)) throw MalformedRowError(1, "missing header row");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const auto header = detail::split(line, ',');
    std::optional<std::size_t> ts_idx, val_idx;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string name = detail::strip(header[i]);
        if (name == columns.timestamp_column) ts_idx = i;
        if (name == columns.value_column) val_idx = i;
    }
    if (!ts_idx) throw MalformedRowError(1, "missing column '" + columns.timestamp_column + "'");
    if (!val_idx) throw MalformedRowError(1, "missing column '" + columns.value_column + "'");

    enum class TsStyle { Unknown, Epoch, Iso } style = TsStyle::Unknown;
    std::vector<TrafficSample> samples;
    std::size_t line_no = 1;
    while (std::getline(file, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::strip(line).empty()) continue;
        const auto fields = detail::split(line, ',');
        if (fields.size() <= std::max(*ts_idx, *val_idx)) {
            throw MalformedRowError(line_no, "expected at least " +
                                                 std::to_string(std::max(*ts_idx, *val_idx) + 1) +
                                                 " fields");
        }
        const std::string ts_raw = detail::strip(fields[*ts_idx]);
        if (style == TsStyle::Unknown) {
            std::int64_t ignored;
            style = detail::parse_int64(ts_raw, ignored) ? TsStyle::Epoch : TsStyle::Iso;
        }
        std::int64_t ts = 0;
        if (style == TsStyle::Epoch) {
            if (!detail::parse_int64(ts_raw, ts)) {
                throw MalformedRowError(line_no, "expected epoch-seconds timestamp");
            }
        } else {
            const auto parsed = parse_iso8601_utc(ts_raw);
            if (!parsed) throw MalformedRowError(line_no, "expected ISO-8601 timestamp");
            ts = *parsed;
        }
        if (ts < 0) throw MalformedRowError(line_no, "negative timestamp");
        double value = 0.0;
        if (!detail::parse_double(fields[*val_idx], value)) {
            throw MalformedRowError(line_no, "unparsable value field");
        }
        if (!std::isfinite(value) || value < 0.0) {
            throw MalformedRowError(line_no, "volume must be finite and non-negative");
        }
        samples.push_back({value, ts});
    }
    if (samples.size() < 2 && !columns.resolution_seconds) {
        throw MalformedRowError(line_no, "need at least two rows to infer resolution");
    }

    std::sort(samples.begin(), samples.end(),
              [](const TrafficSample& a, const TrafficSample& b) {
                  return a.timestamp < b.timestamp;
              });
    for (std::size_t i = 1; i < samples.size(); ++i) {
        if (samples[i].timestamp == samples[i - 1].timestamp) {
            throw NonMonotoneTimestampsError(samples[i].timestamp);
        }
    }
    const std::int64_t resolution =
        columns.resolution_seconds ? *columns.resolution_seconds
                                   : detail::infer_resolution(samples);
    samples = detail::repair_gaps(std::move(samples), resolution, columns.gap_policy, warnings);
    const std::string source = columns.source_id.empty() ? path : columns.source_id;
    return TimeSeries(std::move(samples), resolution, source);
}

/// Loads one cell's series from a call-detail-record TSV of
/// (cell id, interval-start epoch milliseconds, value, ...) rows.
///
/// Rows for other cells are skipped, empty value fields count as 0, rows
/// sharing a timestamp are summed (counter exports split one interval across
/// several rows), and missing intervals are zero-filled: absent rows mean no
/// recorded interactions.
inline TimeSeries load_cdr_tsv(const std::string& path, const std::string& cell_id,
                               const CdrColumns& columns = {},
                               std::vector<std::string>* warnings = nullptr) {
    std::ifstream file(path);
    if (!file) throw FileNotFoundError(path);

    std::map<std::int64_t, double> by_timestamp;
    std::string line;
    std::size_t line_no = 0;
    bool cell_seen = false;
    while (std::getline(file, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::strip(line).empty()) continue;
        const auto fields = detail::split(line, '\t');
        const std::size_t max_needed =
            std::max({columns.cell_column, columns.timestamp_ms_column, columns.value_column});
        if (fields.size() <= max_needed) {
            throw MalformedRowError(line_no, "expected at least " +
                                                 std::to_string(max_needed + 1) + " fields");
        }
        if (detail::strip(fields[columns.cell_column]) != cell_id) continue;
        cell_seen = true;
        std::int64_t ts_ms = 0;
        if (!detail::parse_int64(fields[columns.timestamp_ms_column], ts_ms) || ts_ms < 0) {
            throw MalformedRowError(line_no, "unparsable interval-start milliseconds");
        }
        double value = 0.0;
        const std::string raw_value = detail::strip(fields[columns.value_column]);
        if (!raw_value.empty() && !detail::parse_double(raw_value, value)) {
            throw MalformedRowError(line_no, "unparsable traffic value");
        }
        if (!std::isfinite(value) || value < 0.0) {
            throw MalformedRowError(line_no, "traffic value must be finite and non-negative");
        }
        by_timestamp[ts_ms / 1000] += value;
    }
    if (!cell_seen) throw CellNotFoundError(cell_id);

    std::vector<TrafficSample> samples;
    samples.reserve(by_timestamp.size());
    for (const auto& [ts, v] : by_timestamp) samples.push_back({v, ts});
    samples = detail::repair_gaps(std::move(samples), columns.resolution_seconds,
                                  GapPolicy::ZeroFill, warnings);
    return TimeSeries(std::move(samples), columns.resolution_seconds, "cell:" + cell_id);
}

}  // namespace refcast

#endif  // REFCAST_LOADERS_HPP
