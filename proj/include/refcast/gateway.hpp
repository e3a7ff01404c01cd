#ifndef REFCAST_GATEWAY_HPP
#define REFCAST_GATEWAY_HPP

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "refcast/errors.hpp"
#include "refcast/parser.hpp"
#include "refcast/prompt.hpp"

namespace refcast {

enum class BackendKind { Http, Mock };
enum class MockPolicy { Scripted, EchoLastPeriod, SeasonalOracle, Improving };

inline std::string to_string(MockPolicy p) {
    switch (p) {
        case MockPolicy::Scripted: return "scripted";
        case MockPolicy::EchoLastPeriod: return "echo_last_period";
        case MockPolicy::SeasonalOracle: return "seasonal_oracle";
        case MockPolicy::Improving: return "improving";
    }
    return "scripted";
}

inline MockPolicy mock_policy_from_string(const std::string& s) {
    if (s == "scripted") return MockPolicy::Scripted;
    if (s == "echo_last_period" || s == "echo") return MockPolicy::EchoLastPeriod;
    if (s == "seasonal_oracle" || s == "seasonal") return MockPolicy::SeasonalOracle;
    if (s == "improving") return MockPolicy::Improving;
    throw ConfigError("unknown mock policy '" + s + "'");
}

/// One chat-completion invocation: a system message plus a single user
/// message. Conversation history lives in the prompt text, not the wire
/// session, so every request is self-contained.
struct ChatRequest {
    std::string system_text;
    std::string user_text;
    double temperature = 0.0;
    std::size_t max_output_tokens = 2048;
    std::string request_id;
};

struct ChatResponse {
    std::string text;
    std::string backend_name;
    std::int64_t latency_ms = 0;
    std::size_t attempt_count = 1;
};

/// Backend selection and tuning. Http talks to an OpenAI-compatible
/// chat-completion endpoint; Mock runs one of the deterministic test
/// policies.
struct BackendConfig {
    BackendKind kind = BackendKind::Mock;
    std::string endpoint_url;
    std::string model_name = "mock";
    std::string api_key_env_var;
    MockPolicy mock_policy = MockPolicy::EchoLastPeriod;
    int retry_max = 3;
    int rate_limit_per_minute = 0;  // 0 disables the limiter
    int timeout_seconds = 30;
    int retry_base_ms = 1000;
    unsigned jitter_seed = 12345;
    std::vector<std::string> script;        // Scripted responses, in order
    std::vector<double> improving_truth;    // Improving: target values
    std::vector<double> improving_initial;  // Improving: first prediction
    double improving_contraction = 0.5;
    std::string transcript_path;  // JSON-lines log; empty disables

    void validate() const {
        if (kind == BackendKind::Http) {
            if (endpoint_url.empty()) throw ConfigError("http backend requires endpoint_url");
            if (api_key_env_var.empty()) {
                throw ConfigError("http backend requires api_key_env_var");
            }
        } else if (mock_policy == MockPolicy::Improving) {
            if (improving_truth.size() != improving_initial.size()) {
                throw LengthMismatchError(improving_truth.size(), improving_initial.size());
            }
            if (improving_truth.empty()) throw EmptyInputError("improving mock values");
        }
        if (retry_max < 0 || timeout_seconds <= 0 || retry_base_ms < 0) {
            throw ConfigError("retry/timeout settings must be non-negative");
        }
    }
};

/// The Improving policy's emission at iteration i: the initial error
/// contracted by r^i, formatted in the answer grammar.
inline std::string improving_response_text(std::size_t iteration,
                                           const std::vector<double>& truth,
                                           const std::vector<double>& initial_pred,
                                           const std::vector<std::string>& labels,
                                           double contraction = 0.5) {
    if (truth.size() != initial_pred.size()) {
        throw LengthMismatchError(truth.size(), initial_pred.size());
    }
    if (labels.size() != truth.size()) throw LengthMismatchError(labels.size(), truth.size());
    const double factor = std::pow(contraction, static_cast<double>(iteration));
    std::vector<double> values(truth.size());
    for (std::size_t j = 0; j < truth.size(); ++j) {
        values[j] = truth[j] + (initial_pred[j] - truth[j]) * factor;
    }
    return format_answer_lines(labels, values);
}

namespace gateway_detail {

inline std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t hash = 1469598103934665603ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    return hash;
}

inline std::string fnv1a64_hex(const std::string& text) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(text)));
    return buf;
}

// Continuous-refill token bucket; capacity equals the per-minute budget.
class TokenBucket {
public:
    explicit TokenBucket(int per_minute)
        : per_minute_(per_minute),
          tokens_(static_cast<double>(per_minute)),
          last_(std::chrono::steady_clock::now()) {}

    void acquire() {
        if (per_minute_ <= 0) return;
        std::unique_lock<std::mutex> lock(mutex_);
        for (;;) {
            refill();
            if (tokens_ >= 1.0) {
                tokens_ -= 1.0;
                return;
            }
            const double deficit = 1.0 - tokens_;
            const auto wait = std::chrono::milliseconds(
                static_cast<std::int64_t>(deficit * 60000.0 / per_minute_) + 1);
            lock.unlock();
            std::this_thread::sleep_for(wait);
            lock.lock();
        }
    }

private:
    void refill() {
        const auto now = std::chrono::steady_clock::now();
        const double elapsed = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        tokens_ = std::min(static_cast<double>(per_minute_),
                           tokens_ + elapsed * per_minute_ / 60.0);
    }

    int per_minute_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
    std::mutex mutex_;
};

// Limiters are shared process-wide per endpoint, so several gateways talking
// to the same service share one budget.
inline std::shared_ptr<TokenBucket> shared_bucket(const std::string& key, int per_minute) {
    static std::mutex registry_mutex;
    static std::map<std::string, std::shared_ptr<TokenBucket>> registry;
    std::lock_guard<std::mutex> lock(registry_mutex);
    auto& slot = registry[key + "#" + std::to_string(per_minute)];
    if (!slot) slot = std::make_shared<TokenBucket>(per_minute);
    return slot;
}

inline std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint_url missing scheme");
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

// Collects hour-value lines in first-seen label order, keeping the last
// value observed for each label.
inline std::pair<std::vector<std::string>, std::vector<double>> last_value_per_label(
    const std::string& text) {
    std::vector<std::string> labels;
    std::vector<double> values;
    for (const auto& m : parser_detail::scan_lines(text, /*anywhere_in_line=*/true)) {
        bool found = false;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == m.label) {
                values[i] = m.value;
                found = true;
                break;
            }
        }
        if (!found) {
            labels.push_back(m.label);
            values.push_back(m.value);
        }
    }
    return {std::move(labels), std::move(values)};
}

}  // namespace gateway_detail

/// The marker every rendered input starts with; mocks use it to find the
/// real input section inside a composed prompt.
inline constexpr const char* kInputMarker = "Observed traffic for ";

inline std::string next_request_id() {
    static std::atomic<std::uint64_t> counter{0};
    char buf[24];
    std::snprintf(buf, sizeof(buf), "req-%06llu",
                  static_cast<unsigned long long>(++counter));
    return buf;
}

/// Uniform entry point to chat-completion backends. The HTTP path retries
/// transient failures with exponential backoff and honors a shared
/// rate-limit budget; mock policies are fully deterministic given their
/// configuration and the request sequence. Safe for concurrent callers.
class Gateway {
public:
    explicit Gateway(BackendConfig config) : config_(std::move(config)) {
        config_.validate();
        for (const auto& s : config_.script) script_.push_back(s);
        if (config_.rate_limit_per_minute > 0) {
            const std::string key =
                config_.kind == BackendKind::Http ? config_.endpoint_url : "mock";
            bucket_ = gateway_detail::shared_bucket(key, config_.rate_limit_per_minute);
        }
        if (!config_.transcript_path.empty()) {
            transcript_.open(config_.transcript_path, std::ios::app);
            if (!transcript_) {
                throw IoError("cannot open transcript file " + config_.transcript_path);
            }
        }
        jitter_rng_.seed(config_.jitter_seed);
    }

    const BackendConfig& config() const { return config_; }

    ChatRequest make_request(std::string system_text, std::string user_text) const {
        ChatRequest req;
        req.system_text = std::move(system_text);
        req.user_text = std::move(user_text);
        req.request_id = next_request_id();
        return req;
    }

    /// Resets per-window mock state (the Improving iteration counter).
    /// Scripted queues are intentionally left alone so transcript replays
    /// stay continuous across windows.
    void reset_mock_iteration() {
        std::lock_guard<std::mutex> lock(mutex_);
        improving_iteration_ = 0;
    }

    ChatResponse complete(const ChatRequest& request) {
        if (request.user_text.empty()) throw Error("chat request user_text must not be empty");
        if (request.temperature < 0.0 || request.temperature > 2.0) {
            throw Error("temperature must lie in [0, 2]");
        }
        if (bucket_) bucket_->acquire();
        const auto start = std::chrono::steady_clock::now();
        ChatResponse response = config_.kind == BackendKind::Mock ? complete_mock(request)
                                                                  : complete_http(request);
        response.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                  std::chrono::steady_clock::now() - start)
                                  .count();
        log_transcript(request, response);
        return response;
    }

private:
    ChatResponse complete_mock(const ChatRequest& request) {
        std::lock_guard<std::mutex> lock(mutex_);
        ChatResponse out;
        out.backend_name = "mock:" + to_string(config_.mock_policy);
        switch (config_.mock_policy) {
            case MockPolicy::Scripted: {
                if (script_.empty()) throw ScriptExhaustedError();
                out.text = script_.front();
                script_.pop_front();
                return out;
            }
            case MockPolicy::EchoLastPeriod: {
                auto [labels, values] = gateway_detail::last_value_per_label(request.user_text);
                if (labels.empty()) {
                    throw MalformedBackendReplyError("echo mock found no hour lines to echo");
                }
                out.text = format_answer_lines(labels, values);
                return out;
            }
            case MockPolicy::SeasonalOracle: {
                // Replicate only the real input section: the text after the
                // last input marker, so demonstrations cannot leak in.
                const std::size_t pos = request.user_text.rfind(kInputMarker);
                const std::string scope =
                    pos == std::string::npos ? request.user_text
                                             : request.user_text.substr(pos);
                auto [labels, values] = gateway_detail::last_value_per_label(scope);
                if (labels.empty()) {
                    throw MalformedBackendReplyError("seasonal mock found no input lines");
                }
                out.text = format_answer_lines(labels, values);
                return out;
            }
            case MockPolicy::Improving: {
                auto labels = improving_labels(request.user_text);
                out.text = improving_response_text(improving_iteration_,
                                                   config_.improving_truth,
                                                   config_.improving_initial, labels,
                                                   config_.improving_contraction);
                ++improving_iteration_;
                return out;
            }
        }
        throw Error("unreachable mock policy");
    }

    std::vector<std::string> improving_labels(const std::string& user_text) const {
        auto [labels, values] = gateway_detail::last_value_per_label(user_text);
        (void)values;
        const std::size_t needed = config_.improving_truth.size();
        if (labels.size() > needed) labels.resize(needed);
        while (labels.size() < needed) {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "%02zu:00", labels.size() % 24);
            labels.emplace_back(buf);
        }
        return labels;
    }

    ChatResponse complete_http(const ChatRequest& request) {
        const char* key = std::getenv(config_.api_key_env_var.c_str());
        if (key == nullptr || *key == '\0') {
            throw AuthError("environment variable " + config_.api_key_env_var + " is not set");
        }
        auto [base, path] = gateway_detail::split_url(config_.endpoint_url);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
        if (base.rfind("https://", 0) == 0) {
            throw ConfigError("this build lacks TLS support; use an http:// endpoint");
        }
#endif
        nlohmann::json body = {
            {"model", config_.model_name},
            {"messages",
             {{{"role", "system"}, {"content", request.system_text}},
              {{"role", "user"}, {"content", request.user_text}}}},
            {"temperature", request.temperature},
            {"max_tokens", request.max_output_tokens},
        };
        const std::string payload = body.dump();

        int last_status = 0;
        bool last_timeout = false;
        for (int attempt = 0; attempt <= config_.retry_max; ++attempt) {
            if (attempt > 0) backoff_sleep(attempt);
            httplib::Client client(base);
            client.set_connection_timeout(config_.timeout_seconds, 0);
            client.set_read_timeout(config_.timeout_seconds, 0);
            client.set_write_timeout(config_.timeout_seconds, 0);
            client.set_bearer_token_auth(key);
            auto res = client.Post(path, payload, "application/json");
            if (!res) {
                last_timeout = true;
                continue;  // connection failure or timeout: transient
            }
            last_status = res->status;
            if (res->status == 401 || res->status == 403) {
                throw AuthError("backend returned HTTP " + std::to_string(res->status));
            }
            if (res->status == 429 || res->status >= 500) {
                last_timeout = false;
                continue;
            }
            if (res->status != 200) {
                throw MalformedBackendReplyError("unexpected HTTP " +
                                                 std::to_string(res->status));
            }
            ChatResponse out;
            out.backend_name = "http:" + config_.model_name;
            out.attempt_count = static_cast<std::size_t>(attempt) + 1;
            try {
                const auto reply = nlohmann::json::parse(res->body);
                out.text = reply.at("choices").at(0).at("message").at("content")
                               .get<std::string>();
            } catch (const nlohmann::json::exception& ex) {
                throw MalformedBackendReplyError(ex.what());
            }
            return out;
        }
        if (last_status == 429) {
            throw RateLimitedError("gave up after " + std::to_string(config_.retry_max + 1) +
                                   " attempts");
        }
        if (last_timeout) {
            throw TimeoutError("gave up after " + std::to_string(config_.retry_max + 1) +
                               " attempts");
        }
        throw Error("backend kept failing with HTTP " + std::to_string(last_status));
    }

    void backoff_sleep(int attempt) {
        std::int64_t jitter = 0;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            if (config_.retry_base_ms > 0) {
                std::uniform_int_distribution<std::int64_t> dist(0, config_.retry_base_ms / 2);
                jitter = dist(jitter_rng_);
            }
        }
        const std::int64_t delay =
            config_.retry_base_ms * (std::int64_t{1} << (attempt - 1)) + jitter;
        std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }

    void log_transcript(const ChatRequest& request, const ChatResponse& response) {
        if (!transcript_.is_open()) return;
        nlohmann::json line = {
            {"request_id", request.request_id},
            {"timestamp", static_cast<std::int64_t>(std::time(nullptr))},
            {"request_text_hash", gateway_detail::fnv1a64_hex(request.user_text)},
            {"request_text", request.user_text},
            {"response_text", response.text},
            {"latency_ms", response.latency_ms},
            {"attempts", response.attempt_count},
        };
        std::lock_guard<std::mutex> lock(mutex_);
        transcript_ << line.dump() << "\n";
        transcript_.flush();
    }

    BackendConfig config_;
    std::mutex mutex_;
    std::deque<std::string> script_;
    std::size_t improving_iteration_ = 0;
    std::shared_ptr<gateway_detail::TokenBucket> bucket_;
    std::ofstream transcript_;
    std::mt19937 jitter_rng_;
};

/// Builds a Scripted backend that replays the responses recorded in a
/// transcript file, in order.
inline BackendConfig scripted_from_transcript(const std::string& transcript_path) {
    std::ifstream file(transcript_path);
    if (!file) throw FileNotFoundError(transcript_path);
    BackendConfig config;
    config.kind = BackendKind::Mock;
    config.mock_policy = MockPolicy::Scripted;
    std::string line;
    while (std::getline(file, line)) {
        if (line.empty()) continue;
        try {
            const auto parsed = nlohmann::json::parse(line);
            config.script.push_back(parsed.at("response_text").get<std::string>());
        } catch (const nlohmann::json::exception& ex) {
            throw MalformedBackendReplyError(std::string("bad transcript line: ") + ex.what());
        }
    }
    return config;
}

}  // namespace refcast

#endif  // REFCAST_GATEWAY_HPP
