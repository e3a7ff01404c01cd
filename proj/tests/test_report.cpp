#include "refcast/report.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace refcast;

namespace {

WindowedSample small_window() {
    WindowedSample w;
    for (int i = 0; i < 24; ++i) {
        w.input_volumes.push_back(10.0 + i);
        w.input_timestamps.push_back(1383696000 + i * 3600);
        w.truth_volumes.push_back(12.0 + i);
        w.truth_timestamps.push_back(1383696000 + (24 + i) * 3600);
    }
    return w;
}

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
    std::size_t count = 0, pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        ++count;
        pos += needle.size();
    }
    return count;
}

}  // namespace

TEST_CASE("svg chart has one polyline per series", "[report][svg]") {
    const auto window = small_window();
    std::map<std::string, std::vector<double>> predictions{
        {"arima", std::vector<double>(24, 15.0)},
        {"refcast", std::vector<double>(24, 14.0)},
    };
    const auto svg = svg_chart_string(window, predictions);
    CHECK(count_occurrences(svg, "<polyline") == 3);  // truth + 2 methods
    CHECK(svg.find("ground truth") != std::string::npos);
    CHECK(svg.find("arima") != std::string::npos);
    CHECK(svg.find("refcast") != std::string::npos);

    SECTION("byte-identical for identical input") {
        CHECK(svg_chart_string(window, predictions) == svg);
    }
    SECTION("empty prediction map still draws the truth") {
        const auto truth_only = svg_chart_string(window, {});
        CHECK(count_occurrences(truth_only, "<polyline") == 1);
    }
    SECTION("wrong-length vectors rejected") {
        CHECK_THROWS_AS(
            svg_chart_string(window, {{"bad", std::vector<double>(7, 1.0)}}),
            LengthMismatchError);
    }
}

TEST_CASE("experiment report serialization round-trips", "[report]") {
    ExperimentReport report;
    report.per_method["arima"].per_window = {{0, 1.5, 4.0}, {1, 2.5, 9.0}};
    report.per_method["refcast"].per_window = {{0, 0.5, 1.0}};
    report.failures.push_back({1, "refcast", "backend unavailable"});
    report.traces_path = "out/traces";
    report.config_echo = nlohmann::json{{"seed", 42}};
    report.wallclock_seconds = 1.25;
    finalize_averages(report);

    CHECK(report.per_method["arima"].avg_mae == Catch::Approx(2.0));
    CHECK(report.per_method["arima"].avg_mse == Catch::Approx(6.5));

    const auto restored = report_from_json(to_json(report));
    CHECK(to_json(restored) == to_json(report));

    SECTION("averages recomputable from per-window entries") {
        for (const auto& [name, stats] : restored.per_method) {
            double sum = 0.0;
            for (const auto& w : stats.per_window) sum += w.mae;
            CHECK(stats.avg_mae ==
                  Catch::Approx(sum / static_cast<double>(stats.per_window.size())));
        }
    }
}
