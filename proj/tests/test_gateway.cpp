#include "refcast/gateway.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <filesystem>
#include <thread>

using namespace refcast;

namespace {

BackendConfig scripted(std::vector<std::string> responses) {
    BackendConfig config;
    config.kind = BackendKind::Mock;
    config.mock_policy = MockPolicy::Scripted;
    config.script = std::move(responses);
    return config;
}

std::string hourly_prompt() {
    std::string text = "Observed traffic for 2013-11-06:\n";
    for (int h = 0; h < 24; ++h) {
        char line[40];
        std::snprintf(line, sizeof(line), "%02d:00 - %d.00\n", h, 10 + h);
        text += line;
    }
    text += "Predict the traffic for 2013-11-07.";
    return text;
}

}  // namespace

TEST_CASE("scripted mock pops its queue", "[gateway]") {
    Gateway gateway(scripted({"A", "B"}));
    const auto req = gateway.make_request("sys", "user");
    CHECK(gateway.complete(req).text == "A");
    CHECK(gateway.complete(gateway.make_request("sys", "user")).text == "B");
    CHECK_THROWS_AS(gateway.complete(gateway.make_request("sys", "user")),
                    ScriptExhaustedError);
}

TEST_CASE("echo mock replays the observed hour values", "[gateway]") {
    BackendConfig config;
    config.mock_policy = MockPolicy::EchoLastPeriod;
    Gateway gateway(config);

    const auto response = gateway.complete(gateway.make_request("sys", hourly_prompt()));
    const auto parsed = parse_prediction(
        response.text,
        [] {
            std::vector<std::string> hours;
            for (int h = 0; h < 24; ++h) {
                char buf[8];
                std::snprintf(buf, sizeof(buf), "%02d:00", h);
                hours.push_back(buf);
            }
            return hours;
        }(),
        ExtractionMode::Strict);
    for (int h = 0; h < 24; ++h) {
        CHECK(parsed.values[h] == Catch::Approx(10.0 + h).margin(0.005));
    }

    SECTION("no hour lines means nothing to echo") {
        CHECK_THROWS_AS(gateway.complete(gateway.make_request("sys", "just words")),
                        MalformedBackendReplyError);
    }
}

TEST_CASE("seasonal mock ignores demonstration sections", "[gateway]") {
    BackendConfig config;
    config.mock_policy = MockPolicy::SeasonalOracle;
    Gateway gateway(config);

    const std::string demo =
        "Observed traffic for 2013-11-01:\n00:00 - 999.00\nAnswer:\n00:00 - 998.00\n\n";
    const std::string input = "Observed traffic for 2013-11-06:\n00:00 - 5.00\n";
    const auto response = gateway.complete(gateway.make_request("sys", demo + input));
    CHECK(response.text == "00:00 - 5.00");
}

TEST_CASE("improving mock contracts toward the truth", "[gateway]") {
    CHECK(improving_response_text(0, {10}, {20}, {"00:00"}) == "00:00 - 20.00");
    CHECK(improving_response_text(1, {10}, {20}, {"00:00"}) == "00:00 - 15.00");
    CHECK(improving_response_text(3, {10}, {20}, {"00:00"}) == "00:00 - 11.25");
    CHECK_THROWS_AS(improving_response_text(0, {1, 2}, {3}, {"00:00"}), LengthMismatchError);

    SECTION("successive calls halve the error") {
        BackendConfig config;
        config.mock_policy = MockPolicy::Improving;
        config.improving_truth = {10.0, 12.0};
        config.improving_initial = {20.0, 4.0};
        Gateway gateway(config);
        const std::string prompt = "00:00 - 20.00\n01:00 - 4.00";
        CHECK(gateway.complete(gateway.make_request("s", prompt)).text ==
              "00:00 - 20.00\n01:00 - 4.00");
        CHECK(gateway.complete(gateway.make_request("s", prompt)).text ==
              "00:00 - 15.00\n01:00 - 8.00");
        gateway.reset_mock_iteration();
        CHECK(gateway.complete(gateway.make_request("s", prompt)).text ==
              "00:00 - 20.00\n01:00 - 4.00");
    }
    SECTION("mismatched mock vectors rejected at construction") {
        BackendConfig config;
        config.mock_policy = MockPolicy::Improving;
        config.improving_truth = {1.0};
        config.improving_initial = {1.0, 2.0};
        CHECK_THROWS_AS(Gateway{config}, LengthMismatchError);
    }
}

TEST_CASE("request ids are unique", "[gateway]") {
    Gateway gateway(scripted({"a", "b"}));
    const auto r1 = gateway.make_request("s", "u");
    const auto r2 = gateway.make_request("s", "u");
    CHECK(r1.request_id != r2.request_id);
}

TEST_CASE("http backend retries 429 then succeeds", "[gateway][http]") {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        if (hits.fetch_add(1) == 0) {
            res.status = 429;
            res.set_content("slow down", "text/plain");
            return;
        }
        nlohmann::json reply = {
            {"choices",
             {{{"message", {{"role", "assistant"}, {"content", "00:00 - 1.00"}}}}}}};
        res.set_content(reply.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    setenv("REFCAST_TEST_KEY", "sk-test", 1);
    BackendConfig config;
    config.kind = BackendKind::Http;
    config.endpoint_url =
        "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    config.api_key_env_var = "REFCAST_TEST_KEY";
    config.retry_max = 3;
    config.retry_base_ms = 1;
    Gateway gateway(config);

    const auto response = gateway.complete(gateway.make_request("sys", "user"));
    CHECK(response.text == "00:00 - 1.00");
    CHECK(response.attempt_count == 2);
    CHECK(hits.load() == 2);

    SECTION("auth failures are not retried") {
        unsetenv("REFCAST_TEST_KEY");
        Gateway no_key(config);
        CHECK_THROWS_AS(no_key.complete(no_key.make_request("s", "u")), AuthError);
        setenv("REFCAST_TEST_KEY", "sk-test", 1);
    }

    server.stop();
    server_thread.join();
}

TEST_CASE("http backend rejects malformed envelopes", "[gateway][http]") {
    httplib::Server server;
    server.Post("/chat", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("{\"unexpected\": true}", "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    setenv("REFCAST_TEST_KEY", "sk-test", 1);
    BackendConfig config;
    config.kind = BackendKind::Http;
    config.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/chat";
    config.api_key_env_var = "REFCAST_TEST_KEY";
    config.retry_base_ms = 1;
    Gateway gateway(config);
    CHECK_THROWS_AS(gateway.complete(gateway.make_request("s", "u")),
                    MalformedBackendReplyError);

    server.stop();
    server_thread.join();
}

TEST_CASE("transcripts replay bit-exactly through the scripted mock", "[gateway]") {
    const auto transcript =
        (std::filesystem::temp_directory_path() / "refcast_transcript.jsonl").string();
    std::filesystem::remove(transcript);

    std::vector<std::string> first_run;
    {
        BackendConfig config;
        config.mock_policy = MockPolicy::EchoLastPeriod;
        config.transcript_path = transcript;
        Gateway gateway(config);
        first_run.push_back(
            gateway.complete(gateway.make_request("s", hourly_prompt())).text);
        first_run.push_back(
            gateway.complete(gateway.make_request("s", "00:00 - 3.00")).text);
    }

    Gateway replay(scripted_from_transcript(transcript));
    CHECK(replay.complete(replay.make_request("s", "anything")).text == first_run[0]);
    CHECK(replay.complete(replay.make_request("s", "anything")).text == first_run[1]);
}

TEST_CASE("rate limiter admits calls within budget", "[gateway]") {
    BackendConfig config;
    config.mock_policy = MockPolicy::EchoLastPeriod;
    config.rate_limit_per_minute = 100000;
    Gateway gateway(config);
    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < 5; ++i) {
        gateway.complete(gateway.make_request("s", "00:00 - 1.00"));
    }
    const auto elapsed = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - start).count();
    CHECK(elapsed < 1.0);  // an ample budget must not block
}
