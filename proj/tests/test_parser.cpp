#include "refcast/parser.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace refcast;

TEST_CASE("parse_prediction accepts the line grammar", "[parser]") {
    const std::vector<std::string> hours{"00:00", "01:00"};
    const auto parsed =
        parse_prediction("00:00 - 10.50\n01:00 - 11.00", hours, ExtractionMode::Strict);
    CHECK(parsed.values == std::vector<double>{10.5, 11.0});
    CHECK(parsed.matched_hours == hours);
    CHECK(parsed.missing_hours.empty());

    SECTION("all three separators work") {
        CHECK(parse_prediction("00:00 : 7.25", {"00:00"}, ExtractionMode::Strict).values[0] ==
              7.25);
        CHECK(parse_prediction("00:00 \xE2\x80\x93 7.25", {"00:00"},
                               ExtractionMode::Strict)
                  .values[0] == 7.25);
    }
    SECTION("strict mode throws Incomplete with the missing hours") {
        try {
            parse_prediction("00:00 - 10.50", hours, ExtractionMode::Strict);
            FAIL("expected IncompleteError");
        } catch (const IncompleteError& ex) {
            REQUIRE(ex.missing_hours() == std::vector<std::string>{"01:00"});
        }
    }
    SECTION("duplicates beyond the first are ignored with a warning") {
        const auto dup = parse_prediction("00:00 - 1.00\n00:00 - 2.00\n01:00 - 3.00", hours,
                                          ExtractionMode::Strict);
        CHECK(dup.values[0] == 1.0);
        REQUIRE(dup.warnings.size() == 1);
    }
    SECTION("negative values clamp to zero with a warning") {
        const auto neg =
            parse_prediction("00:00 - -4.00\n01:00 - 2.00", hours, ExtractionMode::Strict);
        CHECK(neg.values[0] == 0.0);
        CHECK(!neg.warnings.empty());
    }
}

TEST_CASE("parse_prediction lenient fallbacks", "[parser]") {
    const std::vector<std::string> three{"00:00", "01:00", "02:00"};

    SECTION("JSON array wrapped in prose") {
        const auto parsed = parse_prediction("Here is my forecast: [1.0, 2.0, 3.0]", three,
                                             ExtractionMode::Lenient);
        CHECK(parsed.values == std::vector<double>{1.0, 2.0, 3.0});
        CHECK(parsed.used_list_fallback);
    }
    SECTION("bare whitespace-separated list") {
        const auto parsed = parse_prediction("1.5 2.5 3.5", three, ExtractionMode::Lenient);
        CHECK(parsed.values == std::vector<double>{1.5, 2.5, 3.5});
    }
    SECTION("bare comma list") {
        const auto parsed = parse_prediction("1, 2, 3", three, ExtractionMode::Lenient);
        CHECK(parsed.values == std::vector<double>{1.0, 2.0, 3.0});
    }
    SECTION("wrong-length list is a LengthMismatch") {
        CHECK_THROWS_AS(parse_prediction("[1.0, 2.0]", three, ExtractionMode::Lenient),
                        LengthMismatchError);
    }
    SECTION("no numbers at all") {
        CHECK_THROWS_AS(parse_prediction("nothing to see here", three,
                                         ExtractionMode::Lenient),
                        NoNumbersFoundError);
    }
    SECTION("partial hour lines are tolerated") {
        const auto parsed = parse_prediction("forecast: 00:00 - 4.00 only", three,
                                             ExtractionMode::Lenient);
        CHECK(parsed.values == std::vector<double>{4.0});
        CHECK(parsed.missing_hours == std::vector<std::string>{"01:00", "02:00"});
    }
    SECTION("hour lines embedded in prose") {
        const auto parsed = parse_prediction(
            "My prediction is 00:00 - 1.00, then 01:00 - 2.00, then 02:00 - 3.00.", three,
            ExtractionMode::Lenient);
        CHECK(parsed.values == std::vector<double>{1.0, 2.0, 3.0});
    }
    SECTION("strict success implies identical lenient result") {
        const std::string text = "00:00 - 1.25\n01:00 - 2.50\n02:00 - 3.75";
        const auto strict = parse_prediction(text, three, ExtractionMode::Strict);
        const auto lenient = parse_prediction(text, three, ExtractionMode::Lenient);
        CHECK(strict.values == lenient.values);
        CHECK(strict.matched_hours == lenient.matched_hours);
    }
}

TEST_CASE("parse_prediction survives arbitrary bytes", "[parser][fuzz]") {
    std::mt19937 rng(99);
    std::uniform_int_distribution<int> byte(0, 255);
    std::uniform_int_distribution<int> len(0, 200);
    const std::vector<std::string> hours{"00:00", "01:00", "02:00"};
    for (int rep = 0; rep < 500; ++rep) {
        std::string text;
        const int n = len(rng);
        for (int i = 0; i < n; ++i) text.push_back(static_cast<char>(byte(rng)));
        for (auto mode : {ExtractionMode::Strict, ExtractionMode::Lenient}) {
            try {
                const auto parsed = parse_prediction(text, hours, mode);
                for (double v : parsed.values) CHECK(std::isfinite(v));
            } catch (const Error&) {
                // typed errors are the contract
            }
        }
    }
}

TEST_CASE("extract_method_summary follows its markers", "[parser]") {
    CHECK(extract_method_summary("Method: seasonal ARIMA with period 24.") ==
          "seasonal ARIMA with period 24.");
    CHECK(extract_method_summary("no marker in this text").empty());
    CHECK(extract_method_summary("Method: first one. Approach: second one.") == "first one.");

    SECTION("'I used' marker") {
        CHECK(extract_method_summary("I used hourly persistence. It was simple.") ==
              "hourly persistence.");
    }
    SECTION("'using' must start at a word boundary") {
        CHECK(extract_method_summary("housing prices rose").empty());
        CHECK(extract_method_summary("predicted using linear extrapolation.") ==
              "linear extrapolation.");
    }
    SECTION("long summaries truncate to 400 characters") {
        const std::string text = "Method: " + std::string(1000, 'x');
        CHECK(extract_method_summary(text).size() == 400);
    }
}
