#ifndef REFCAST_ERRORS_HPP
#define REFCAST_ERRORS_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace refcast {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& message) : std::runtime_error(message) {}
};

// ---- dataset / series errors ----

class FileNotFoundError : public Error {
public:
    explicit FileNotFoundError(const std::string& path)
        : Error("file not found: " + path) {}
};

class MalformedRowError : public Error {
public:
    MalformedRowError(std::size_t line, const std::string& detail)
        : Error("malformed row at line " + std::to_string(line) + ": " + detail),
          line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class NonMonotoneTimestampsError : public Error {
public:
    explicit NonMonotoneTimestampsError(std::int64_t timestamp)
        : Error("timestamps not strictly increasing near t=" + std::to_string(timestamp)) {}
};

class GapDetectedError : public Error {
public:
    explicit GapDetectedError(std::int64_t timestamp)
        : Error("gap in series at t=" + std::to_string(timestamp)), timestamp_(timestamp) {}
    std::int64_t timestamp() const { return timestamp_; }

private:
    std::int64_t timestamp_;
};

class CellNotFoundError : public Error {
public:
    explicit CellNotFoundError(const std::string& cell_id)
        : Error("no rows for cell '" + cell_id + "'") {}
};

class EmptySeriesError : public Error {
public:
    EmptySeriesError() : Error("series is empty") {}
};

class EmptyInputError : public Error {
public:
    explicit EmptyInputError(const std::string& what_is_empty)
        : Error(what_is_empty + " must not be empty") {}
};

class SeriesTooShortError : public Error {
public:
    SeriesTooShortError(std::size_t needed, std::size_t got)
        : Error("series too short: need " + std::to_string(needed) + " samples, got " +
                std::to_string(got)),
          needed_(needed), got_(got) {}
    std::size_t needed() const { return needed_; }
    std::size_t got() const { return got_; }

private:
    std::size_t needed_;
    std::size_t got_;
};

class LengthMismatchError : public Error {
public:
    LengthMismatchError(std::size_t lhs, std::size_t rhs)
        : Error("length mismatch: " + std::to_string(lhs) + " vs " + std::to_string(rhs)) {}
};

class DegenerateSystemError : public Error {
public:
    explicit DegenerateSystemError(const std::string& detail)
        : Error("degenerate linear system: " + detail) {}
};

// ---- prompt errors ----

class BudgetTooSmallError : public Error {
public:
    BudgetTooSmallError(std::size_t needed, std::size_t budget)
        : Error("token budget too small: need " + std::to_string(needed) + ", have " +
                std::to_string(budget)) {}
};

class KindMismatchError : public Error {
public:
    explicit KindMismatchError(const std::string& detail)
        : Error("segment kind mismatch: " + detail) {}
};

class TemplateError : public Error {
public:
    explicit TemplateError(const std::string& detail) : Error("template error: " + detail) {}
};

// ---- backend errors ----

class AuthError : public Error {
public:
    explicit AuthError(const std::string& detail) : Error("authentication failed: " + detail) {}
};

class RateLimitedError : public Error {
public:
    explicit RateLimitedError(const std::string& detail) : Error("rate limited: " + detail) {}
};

class TimeoutError : public Error {
public:
    explicit TimeoutError(const std::string& detail) : Error("request timed out: " + detail) {}
};

class MalformedBackendReplyError : public Error {
public:
    explicit MalformedBackendReplyError(const std::string& detail)
        : Error("malformed backend reply: " + detail) {}
};

class ScriptExhaustedError : public Error {
public:
    ScriptExhaustedError() : Error("scripted backend has no responses left") {}
};

// ---- parser errors ----

class IncompleteError : public Error {
public:
    explicit IncompleteError(std::vector<std::string> missing_hours)
        : Error("prediction incomplete, missing " + join(missing_hours)),
          missing_hours_(std::move(missing_hours)) {}
    const std::vector<std::string>& missing_hours() const { return missing_hours_; }

private:
    static std::string join(const std::vector<std::string>& hours) {
        std::string out;
        for (const auto& h : hours) {
            if (!out.empty()) out += ", ";
            out += h;
        }
        return out;
    }
    std::vector<std::string> missing_hours_;
};

class NoNumbersFoundError : public Error {
public:
    NoNumbersFoundError() : Error("no numeric values found in text") {}
};

// ---- orchestrator errors ----

class PredictionFailedError : public Error {
public:
    explicit PredictionFailedError(const std::string& cause)
        : Error("prediction failed: " + cause) {}
};

// ---- baseline errors ----

class NonFiniteInputError : public Error {
public:
    NonFiniteInputError() : Error("input contains non-finite values") {}
};

class HistoryTooShortError : public Error {
public:
    HistoryTooShortError(std::size_t needed, std::size_t got)
        : Error("history too short: need " + std::to_string(needed) + " values, got " +
                std::to_string(got)) {}
};

// ---- cli / io errors ----

class IoError : public Error {
public:
    explicit IoError(const std::string& detail) : Error("i/o error: " + detail) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& detail) : Error("config error: " + detail) {}
};

}  // namespace refcast

#endif  // REFCAST_ERRORS_HPP
