#include "refcast/arima.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace refcast;

namespace {

// Synthetic AR(1) trajectory from a fixed seed.
std::vector<double> ar1_path(double phi, std::size_t n, unsigned seed, double sigma = 1.0) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    std::vector<double> x(n + 100);
    x[0] = 0.0;
    for (std::size_t t = 1; t < x.size(); ++t) x[t] = phi * x[t - 1] + noise(rng);
    return {x.begin() + 100, x.end()};  // drop warm-up
}

// Independent Yule-Walker oracle, deliberately written from the definition.
double yw_phi1_oracle(const std::vector<double>& x) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double g0 = 0.0, g1 = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
        g0 += (x[t] - mean) * (x[t] - mean);
        if (t + 1 < x.size()) g1 += (x[t] - mean) * (x[t + 1] - mean);
    }
    return g1 / g0;
}

ArimaOrder order_of(std::size_t p, std::size_t d, std::size_t q) {
    ArimaOrder o;
    o.p = p;
    o.d = d;
    o.q = q;
    return o;
}

}  // namespace

TEST_CASE("fit_arima recovers a planted AR(1)", "[arima]") {
    const auto x = ar1_path(0.6, 500, 42);
    const auto model = fit_arima(x, order_of(1, 0, 0));
    REQUIRE(model.ar_coeffs.size() == 1);
    CHECK(model.ar_coeffs[0] > 0.5);
    CHECK(model.ar_coeffs[0] < 0.7);
    CHECK_FALSE(model.fallback);

    SECTION("agrees with the independent Yule-Walker oracle") {
        CHECK(std::abs(model.ar_coeffs[0] - yw_phi1_oracle(x)) < 0.05);
    }
}

TEST_CASE("fit_arima constant series with (0,1,0)", "[arima]") {
    const std::vector<double> constant(50, 7.5);
    const auto model = fit_arima(constant, order_of(0, 1, 0));
    CHECK(model.ar_coeffs.empty());
    CHECK(model.ma_coeffs.empty());
    CHECK(model.intercept == 0.0);
    CHECK(model.residual_variance == 0.0);
}

TEST_CASE("fit_arima stationarity clamp on an alternating series", "[arima]") {
    std::vector<double> alternating(60);
    for (std::size_t i = 0; i < alternating.size(); ++i) {
        alternating[i] = (i % 2 == 0) ? 1.0 : -1.0;
    }
    const auto model = fit_arima(alternating, order_of(1, 0, 0));
    CHECK(std::abs(model.ar_coeffs[0]) <= 0.999 + 1e-12);
    CHECK(model.ar_coeffs[0] < -0.9);
}

TEST_CASE("fit_arima input validation", "[arima]") {
    CHECK_THROWS_AS(fit_arima(std::vector<double>(5, 1.0), order_of(1, 0, 0)),
                    SeriesTooShortError);
    std::vector<double> bad(50, 1.0);
    bad[10] = std::nan("");
    CHECK_THROWS_AS(fit_arima(bad, order_of(1, 0, 0)), NonFiniteInputError);
    CHECK_THROWS_AS(order_of(0, 0, 0).validate(), ConfigError);
}

TEST_CASE("forecast_arima analytic cases", "[arima]") {
    SECTION("(0,1,0) forecasts the last value") {
        std::vector<double> history{3.0, 5.0, 6.5, 7.0};
        ArimaModel model;
        model.order = order_of(0, 1, 0);
        const auto forecast = forecast_arima(model, history, 3);
        CHECK(forecast == std::vector<double>{7.0, 7.0, 7.0});
    }
    SECTION("(1,0,0) with phi=0.5 decays by hand-computed recursion") {
        ArimaModel model;
        model.order = order_of(1, 0, 0);
        model.ar_coeffs = {0.5};
        model.intercept = 0.0;
        const auto forecast = forecast_arima(model, {2.0, 4.0, 8.0}, 3);
        REQUIRE(forecast.size() == 3);
        CHECK(forecast[0] == Catch::Approx(4.0));
        CHECK(forecast[1] == Catch::Approx(2.0));
        CHECK(forecast[2] == Catch::Approx(1.0));
    }
    SECTION("horizon prefix property") {
        ArimaModel model;
        model.order = order_of(1, 0, 0);
        model.ar_coeffs = {0.7};
        model.intercept = 0.3;
        const std::vector<double> history{1.0, 2.0, 3.0};
        const auto one = forecast_arima(model, history, 1);
        const auto two = forecast_arima(model, history, 2);
        CHECK(one[0] == two[0]);
    }
    SECTION("short history rejected") {
        ArimaModel model;
        model.order = order_of(0, 1, 0);
        CHECK_THROWS_AS(forecast_arima(model, {1.0}, 2), HistoryTooShortError);
    }
}

TEST_CASE("fit then forecast reproduces a noiseless AR(1) one step ahead", "[arima]") {
    // x_t = 2 + 0.6 x_{t-1}, converging to 5.
    std::vector<double> x(60);
    x[0] = 10.0;
    for (std::size_t t = 1; t < x.size(); ++t) x[t] = 2.0 + 0.6 * x[t - 1];
    const auto model = fit_arima(x, order_of(1, 0, 0));
    double max_err = 0.0;
    for (std::size_t t = 40; t + 1 < x.size(); ++t) {
        const std::vector<double> history(x.begin(), x.begin() + static_cast<long>(t) + 1);
        const auto next = forecast_arima(model, history, 1);
        max_err = std::max(max_err, std::abs(next[0] - x[t + 1]));
    }
    CHECK(max_err < 1e-6);
}

TEST_CASE("fit_arima handles an ARMA(1,1) signal", "[arima]") {
    std::mt19937 rng(7);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> x(600, 0.0);
    double prev_e = 0.0;
    for (std::size_t t = 1; t < x.size(); ++t) {
        const double e = noise(rng);
        x[t] = 0.5 * x[t - 1] + e + 0.3 * prev_e;
        prev_e = e;
    }
    const auto model = fit_arima({x.begin() + 100, x.end()}, order_of(1, 0, 1));
    CHECK_FALSE(model.fallback);
    CHECK(std::abs(model.ar_coeffs[0] - 0.5) < 0.15);
    CHECK(std::abs(model.ma_coeffs[0] - 0.3) < 0.15);
    CHECK(model.residual_variance > 0.5);
    CHECK(model.residual_variance < 1.5);
}

TEST_CASE("seasonal orders are runnable end to end", "[arima]") {
    // Daily cycle plus trend, sampled hourly for 20 days.
    std::vector<double> x(480);
    for (std::size_t t = 0; t < x.size(); ++t) {
        x[t] = 50.0 + 10.0 * std::sin(2.0 * M_PI * static_cast<double>(t % 24) / 24.0) +
               0.01 * static_cast<double>(t);
    }
    ArimaOrder order = order_of(1, 0, 0);
    order.seasonal_p = 0;
    order.seasonal_d = 1;
    order.seasonal_q = 1;
    order.seasonal_period = 24;
    const auto model = fit_arima(x, order);
    const auto forecast = forecast_arima(model, x, 24);
    REQUIRE(forecast.size() == 24);
    for (double v : forecast) CHECK(std::isfinite(v));
    // The seasonal difference removes the cycle, so the forecast must keep it.
    const double peak = *std::max_element(forecast.begin(), forecast.end());
    const double trough = *std::min_element(forecast.begin(), forecast.end());
    CHECK(peak - trough > 10.0);
}

TEST_CASE("seasonal_naive repeats the last period", "[arima]") {
    std::vector<double> day(24);
    for (int i = 0; i < 24; ++i) day[i] = i + 1;
    CHECK(seasonal_naive(day, 24, 24) == day);

    SECTION("period 1 degenerates to the last value") {
        CHECK(seasonal_naive({5.0, 9.0}, 1, 3) == std::vector<double>{9.0, 9.0, 9.0});
        CHECK(persistence({5.0, 9.0}, 3) == std::vector<double>{9.0, 9.0, 9.0});
    }
    SECTION("wraparound indexing") {
        CHECK(seasonal_naive({1, 2, 3, 4}, 2, 3) == std::vector<double>{3, 4, 3});
    }
    SECTION("perfectly periodic series scores zero error") {
        std::vector<double> two_days;
        for (int rep = 0; rep < 2; ++rep) {
            for (int i = 0; i < 24; ++i) two_days.push_back(10.0 + i);
        }
        const auto forecast = seasonal_naive(two_days, 24, 24);
        for (int i = 0; i < 24; ++i) CHECK(forecast[i] == 10.0 + i);
    }
    SECTION("short history rejected") {
        CHECK_THROWS_AS(seasonal_naive({1.0}, 2, 3), HistoryTooShortError);
    }
}

TEST_CASE("fitted coefficients stay stationary under fuzzing", "[arima]") {
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> jump(-10.0, 10.0);
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<double> x(80);
        for (auto& v : x) v = jump(rng);
        for (std::size_t p : {1, 2}) {
            const auto model = fit_arima(x, order_of(p, 0, 0));
            CHECK(arima_detail::ar_spectral_radius(model.ar_coeffs) <= 0.999 + 1e-9);
        }
    }
}

TEST_CASE("model serialization round-trips", "[arima]") {
    const auto x = ar1_path(0.6, 200, 5);
    ArimaOrder order = order_of(1, 0, 1);
    const auto model = fit_arima(x, order);
    const auto restored = arima_model_from_json(to_json(model));
    CHECK(restored.ar_coeffs == model.ar_coeffs);
    CHECK(restored.ma_coeffs == model.ma_coeffs);
    CHECK(restored.intercept == model.intercept);
    CHECK(restored.residual_variance == model.residual_variance);
    CHECK(restored.training_length == model.training_length);

    // Forecasts from the restored model are identical.
    const auto f1 = forecast_arima(model, x, 5);
    const auto f2 = forecast_arima(restored, x, 5);
    CHECK(f1 == f2);
}
