#include "refcast/sinusoid.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace refcast;

namespace {

std::vector<double> planted(double a, double b, double c, std::size_t n, std::size_t period) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double theta = 2.0 * M_PI * static_cast<double>(i) / static_cast<double>(period);
        v[i] = a * std::sin(theta) + b * std::cos(theta) + c;
    }
    return v;
}

}  // namespace

TEST_CASE("fit_sinusoid recovers planted parameters", "[sinusoid]") {
    SECTION("pure sine") {
        const auto fit = fit_sinusoid(planted(1, 0, 0, 48, 24), 24);
        CHECK(fit.sin_coeff == Catch::Approx(1.0).margin(1e-9));
        CHECK(fit.cos_coeff == Catch::Approx(0.0).margin(1e-9));
        CHECK(fit.offset == Catch::Approx(0.0).margin(1e-9));
    }
    SECTION("constant series") {
        const auto fit = fit_sinusoid(std::vector<double>(30, 5.0), 24);
        CHECK(fit.sin_coeff == Catch::Approx(0.0).margin(1e-9));
        CHECK(fit.cos_coeff == Catch::Approx(0.0).margin(1e-9));
        CHECK(fit.offset == Catch::Approx(5.0).margin(1e-9));
    }
    SECTION("general planted (2, 3, 1)") {
        const auto fit = fit_sinusoid(planted(2, 3, 1, 48, 24), 24);
        CHECK(fit.sin_coeff == Catch::Approx(2.0).margin(1e-9));
        CHECK(fit.cos_coeff == Catch::Approx(3.0).margin(1e-9));
        CHECK(fit.offset == Catch::Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("fit_sinusoid rejects degenerate systems", "[sinusoid]") {
    // Period 2 makes sin(pi * i) vanish at every integer index.
    CHECK_THROWS_AS(fit_sinusoid(std::vector<double>{1, 2, 1, 2, 1, 2}, 2),
                    DegenerateSystemError);
    CHECK_THROWS_AS(fit_sinusoid(std::vector<double>{1, 2}, 24), SeriesTooShortError);
}

TEST_CASE("fit_sinusoid is a least-squares projection", "[sinusoid]") {
    std::mt19937 rng(3);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<double> v(50);
        for (auto& x : v) x = 10.0 + noise(rng);
        const auto fit = fit_sinusoid(v, 24);

        SECTION("residual orthogonal to each regressor (rep " + std::to_string(rep) + ")") {
            double dot_sin = 0, dot_cos = 0, dot_one = 0;
            for (std::size_t i = 0; i < v.size(); ++i) {
                const double r = v[i] - fit.value_at(i);
                const double theta = 2.0 * M_PI * static_cast<double>(i) / 24.0;
                dot_sin += r * std::sin(theta);
                dot_cos += r * std::cos(theta);
                dot_one += r;
            }
            CHECK(std::abs(dot_sin) < 1e-6);
            CHECK(std::abs(dot_cos) < 1e-6);
            CHECK(std::abs(dot_one) < 1e-6);
        }
        SECTION("residual no worse than the offset-only fit (rep " + std::to_string(rep) +
                ")") {
            double mean = 0;
            for (double x : v) mean += x;
            mean /= static_cast<double>(v.size());
            const SinusoidFit offset_only{0.0, 0.0, mean, 24};
            CHECK(sinusoid_residual_ss(fit, v) <=
                  sinusoid_residual_ss(offset_only, v) + 1e-9);
        }
    }
}
