#ifndef REFCAST_ARIMA_HPP
#define REFCAST_ARIMA_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "refcast/errors.hpp"

namespace refcast {

/// Non-seasonal (p, d, q) orders plus an optional multiplicative seasonal
/// (P, D, Q) block with its period. Seasonal fields are jointly present or
/// absent.
struct ArimaOrder {
    std::size_t p = 1;
    std::size_t d = 1;
    std::size_t q = 1;
    std::optional<std::size_t> seasonal_period;
    std::optional<std::size_t> seasonal_p;  // P
    std::optional<std::size_t> seasonal_d;  // D
    std::optional<std::size_t> seasonal_q;  // Q

    bool has_seasonal() const { return seasonal_period.has_value(); }
    std::size_t period() const { return seasonal_period.value_or(0); }
    std::size_t P() const { return seasonal_p.value_or(0); }
    std::size_t D() const { return seasonal_d.value_or(0); }
    std::size_t Q() const { return seasonal_q.value_or(0); }

    void validate() const {
        if (p + q == 0 && d == 0) {
            throw ConfigError("order needs p + q >= 1 or d >= 1");
        }
        const bool any_seasonal = seasonal_period || seasonal_p || seasonal_d || seasonal_q;
        const bool all_seasonal = seasonal_period && seasonal_p && seasonal_d && seasonal_q;
        if (any_seasonal && !all_seasonal) {
            throw ConfigError("seasonal order fields must be jointly present or absent");
        }
        if (seasonal_period && *seasonal_period < 2) {
            throw ConfigError("seasonal period must be at least 2");
        }
    }
};

/// A fitted model: coefficients on the (possibly seasonally) differenced
/// scale. `fallback` marks a fit that diverged and fell back to its
/// Yule-Walker initialization.
struct ArimaModel {
    ArimaOrder order;
    std::vector<double> ar_coeffs;
    std::vector<double> ma_coeffs;
    std::vector<double> seasonal_ar_coeffs;
    std::vector<double> seasonal_ma_coeffs;
    double intercept = 0.0;
    double residual_variance = 0.0;
    std::size_t training_length = 0;
    bool fallback = false;
};

namespace arima_detail {

inline constexpr double kStationarityBound = 0.999;

inline std::vector<double> difference(const std::vector<double>& x, std::size_t lag) {
    if (x.size() <= lag) throw SeriesTooShortError(lag + 1, x.size());
    std::vector<double> out(x.size() - lag);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i + lag] - x[i];
    return out;
}

inline std::vector<double> apply_differencing(std::vector<double> x, const ArimaOrder& order) {
    for (std::size_t i = 0; i < order.d; ++i) x = difference(x, 1);
    for (std::size_t i = 0; i < order.D(); ++i) x = difference(x, order.period());
    return x;
}

// Polynomial product over the lag operator; inputs are coefficient arrays
// indexed by lag, entry 0 being the constant term.
inline std::vector<double> poly_multiply(const std::vector<double>& a,
                                         const std::vector<double>& b) {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    }
    return out;
}

// Expands phi(B) * PHI(B^s) into z_t = sum alpha_k z_{t-k} form:
// returns alpha indexed from lag 1.
inline std::vector<double> expand_ar(const std::vector<double>& ar,
                                     const std::vector<double>& seasonal_ar,
                                     std::size_t period) {
    std::vector<double> a(ar.size() + 1, 0.0);
    a[0] = 1.0;
    for (std::size_t i = 0; i < ar.size(); ++i) a[i + 1] = -ar[i];
    std::vector<double> b(seasonal_ar.size() * period + 1, 0.0);
    b[0] = 1.0;
    for (std::size_t i = 0; i < seasonal_ar.size(); ++i) {
        b[(i + 1) * period] = -seasonal_ar[i];
    }
    const auto product = poly_multiply(a, b);
    std::vector<double> alpha(product.size() - 1);
    for (std::size_t k = 1; k < product.size(); ++k) alpha[k - 1] = -product[k];
    return alpha;
}

// Expands theta(B) * THETA(B^s); returns beta indexed from lag 1.
inline std::vector<double> expand_ma(const std::vector<double>& ma,
                                     const std::vector<double>& seasonal_ma,
                                     std::size_t period) {
    std::vector<double> a(ma.size() + 1, 0.0);
    a[0] = 1.0;
    for (std::size_t i = 0; i < ma.size(); ++i) a[i + 1] = ma[i];
    std::vector<double> b(seasonal_ma.size() * period + 1, 0.0);
    b[0] = 1.0;
    for (std::size_t i = 0; i < seasonal_ma.size(); ++i) b[(i + 1) * period] = seasonal_ma[i];
    const auto product = poly_multiply(a, b);
    std::vector<double> beta(product.size() - 1);
    for (std::size_t k = 1; k < product.size(); ++k) beta[k - 1] = product[k];
    return beta;
}

// Conditional residuals e_t = z_t - c - sum alpha_k z_{t-k} - sum beta_k e_{t-k},
// starting once every AR lag is available, with earlier shocks at zero.
inline std::vector<double> css_residuals(const std::vector<double>& z,
                                         const std::vector<double>& alpha,
                                         const std::vector<double>& beta, double intercept) {
    const std::size_t start = alpha.size();
    if (z.size() <= start) return {};
    std::vector<double> e(z.size(), 0.0);
    std::vector<double> out;
    out.reserve(z.size() - start);
    for (std::size_t t = start; t < z.size(); ++t) {
        double pred = intercept;
        for (std::size_t k = 0; k < alpha.size(); ++k) pred += alpha[k] * z[t - 1 - k];
        for (std::size_t k = 0; k < beta.size(); ++k) {
            if (t >= k + 1) pred += beta[k] * e[t - 1 - k];
        }
        e[t] = z[t] - pred;
        out.push_back(e[t]);
    }
    return out;
}

inline double sum_squares(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return acc;
}

// Spectral radius of the AR companion matrix, i.e. the largest inverse root
// of the characteristic polynomial. Exact for p <= 2, power iteration above.
inline double ar_spectral_radius(const std::vector<double>& phi) {
    const std::size_t p = phi.size();
    if (p == 0) return 0.0;
    if (p == 1) return std::abs(phi[0]);
    if (p == 2) {
        const double disc = phi[0] * phi[0] + 4.0 * phi[1];
        if (disc >= 0.0) {
            const double r = std::sqrt(disc);
            return std::max(std::abs((phi[0] + r) / 2.0), std::abs((phi[0] - r) / 2.0));
        }
        return std::sqrt(-phi[1]);  // complex pair, |lambda|^2 = -phi2
    }
    std::vector<double> v(p, 1.0 / std::sqrt(static_cast<double>(p)));
    double log_growth = 0.0;
    const int iters = 200;
    for (int it = 0; it < iters; ++it) {
        std::vector<double> w(p, 0.0);
        for (std::size_t j = 0; j < p; ++j) w[0] += phi[j] * v[j];
        for (std::size_t j = 1; j < p; ++j) w[j] = v[j - 1];
        double norm = std::sqrt(sum_squares(w));
        if (norm < 1e-300) return 0.0;
        log_growth += std::log(norm);
        for (double& x : w) x /= norm;
        v = std::move(w);
    }
    return std::exp(log_growth / iters);
}

// Rescales coefficients so every characteristic root sits outside the unit
// circle: shrinking lag-k coefficients by s^k scales all roots by 1/s.
inline void clamp_stationary(std::vector<double>& phi) {
    const double rho = ar_spectral_radius(phi);
    if (rho <= kStationarityBound || rho == 0.0) return;
    const double s = kStationarityBound / rho;
    double factor = s;
    for (double& c : phi) {
        c *= factor;
        factor *= s;
    }
}

// Dense symmetric solve by Gaussian elimination with partial pivoting.
inline std::vector<double> solve_dense(std::vector<std::vector<double>> a,
                                       std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        }
        if (std::abs(a[pivot][col]) < 1e-12) {
            throw DegenerateSystemError("singular system in solver");
        }
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t r = n; r-- > 0;) {
        double acc = b[r];
        for (std::size_t c = r + 1; c < n; ++c) acc -= a[r][c] * x[c];
        x[r] = acc / a[r][r];
    }
    return x;
}

}  // namespace arima_detail

/// Yule-Walker AR(p) estimate from sample autocovariances.
inline std::vector<double> yule_walker(const std::vector<double>& series, std::size_t p) {
    if (p == 0) return {};
    if (series.size() < p + 2) throw SeriesTooShortError(p + 2, series.size());
    const std::size_t n = series.size();
    double mean = 0.0;
    for (double v : series) mean += v;
    mean /= static_cast<double>(n);
    std::vector<double> gamma(p + 1, 0.0);
    for (std::size_t k = 0; k <= p; ++k) {
        for (std::size_t t = 0; t + k < n; ++t) {
            gamma[k] += (series[t] - mean) * (series[t + k] - mean);
        }
        gamma[k] /= static_cast<double>(n);
    }
    if (gamma[0] <= 0.0) return std::vector<double>(p, 0.0);
    std::vector<std::vector<double>> R(p, std::vector<double>(p, 0.0));
    std::vector<double> r(p, 0.0);
    for (std::size_t i = 0; i < p; ++i) {
        r[i] = gamma[i + 1];
        for (std::size_t j = 0; j < p; ++j) {
            R[i][j] = gamma[i >= j ? i - j : j - i];
        }
    }
    std::vector<double> phi;
    try {
        phi = arima_detail::solve_dense(std::move(R), std::move(r));
    } catch (const DegenerateSystemError&) {
        // A flat series has no autoregressive signal.
        return std::vector<double>(p, 0.0);
    }
    arima_detail::clamp_stationary(phi);
    return phi;
}

namespace arima_detail {

struct ParamLayout {
    std::size_t p, q, P, Q;
    bool with_intercept;
    std::size_t period;

    std::size_t count() const { return p + q + P + Q + (with_intercept ? 1 : 0); }

    void unpack(const std::vector<double>& beta, ArimaModel& model) const {
        std::size_t i = 0;
        model.ar_coeffs.assign(beta.begin() + i, beta.begin() + i + p);
        i += p;
        model.ma_coeffs.assign(beta.begin() + i, beta.begin() + i + q);
        i += q;
        model.seasonal_ar_coeffs.assign(beta.begin() + i, beta.begin() + i + P);
        i += P;
        model.seasonal_ma_coeffs.assign(beta.begin() + i, beta.begin() + i + Q);
        i += Q;
        model.intercept = with_intercept ? beta[i] : 0.0;
    }

    std::vector<double> residuals(const std::vector<double>& z,
                                  const std::vector<double>& beta) const {
        ArimaModel scratch;
        unpack(beta, scratch);
        const auto alpha = expand_ar(scratch.ar_coeffs, scratch.seasonal_ar_coeffs, period);
        const auto ma = expand_ma(scratch.ma_coeffs, scratch.seasonal_ma_coeffs, period);
        return css_residuals(z, alpha, ma, scratch.intercept);
    }

    // Projects AR factors back inside the stationarity region.
    void clamp(std::vector<double>& beta) const {
        std::vector<double> phi(beta.begin(), beta.begin() + p);
        clamp_stationary(phi);
        std::copy(phi.begin(), phi.end(), beta.begin());
        std::vector<double> sphi(beta.begin() + p + q, beta.begin() + p + q + P);
        clamp_stationary(sphi);
        std::copy(sphi.begin(), sphi.end(), beta.begin() + p + q);
    }
};

}  // namespace arima_detail

/// Fits an ARIMA model by conditional sum of squares: the series is
/// differenced per the order, AR terms start at their Yule-Walker estimate,
/// and a damped Gauss-Newton refines all coefficients with a numerical
/// Jacobian. A diverging fit (non-finite objective) falls back to the
/// initialization, flagged on the returned model.
inline ArimaModel fit_arima(const std::vector<double>& series, const ArimaOrder& order) {
    order.validate();
    for (double v : series) {
        if (!std::isfinite(v)) throw NonFiniteInputError();
    }
    const std::size_t floor = 10 * (order.p + order.q + 1);
    if (series.size() < floor) throw SeriesTooShortError(floor, series.size());

    const auto z = arima_detail::apply_differencing(series, order);
    // No drift term once any differencing is applied, so a (0,d,0) forecast
    // stays pure persistence on the integrated scale.
    arima_detail::ParamLayout layout{order.p, order.q, order.P(), order.Q(),
                                     order.d == 0 && order.D() == 0,
                                     order.has_seasonal() ? order.period() : 1};

    ArimaModel model;
    model.order = order;
    model.training_length = series.size();

    const std::size_t k = layout.count();
    if (k == 0) {
        // Pure differencing: residuals are the differenced series itself.
        model.residual_variance =
            z.empty() ? 0.0
                      : arima_detail::sum_squares(z) / static_cast<double>(z.size());
        layout.unpack(std::vector<double>(0), model);
        return model;
    }

    std::vector<double> beta(k, 0.0);
    if (order.p > 0 && z.size() >= order.p + 2) {
        const auto init = yule_walker(z, order.p);
        std::copy(init.begin(), init.end(), beta.begin());
    }
    if (layout.with_intercept) {
        double mean = 0.0;
        for (double v : z) mean += v;
        if (!z.empty()) mean /= static_cast<double>(z.size());
        double ar_sum = 0.0;
        for (std::size_t i = 0; i < order.p; ++i) ar_sum += beta[i];
        beta[k - 1] = mean * (1.0 - ar_sum);
    }
    layout.clamp(beta);
    const std::vector<double> init_beta = beta;

    auto css = [&](const std::vector<double>& b) {
        const auto e = layout.residuals(z, b);
        return arima_detail::sum_squares(e);
    };

    double current = css(beta);
    if (!std::isfinite(current)) {
        layout.unpack(init_beta, model);
        model.fallback = true;
        return model;
    }

    double lambda = 1e-3;
    for (int iter = 0; iter < 200; ++iter) {
        const auto e0 = layout.residuals(z, beta);
        const std::size_t m = e0.size();
        if (m == 0) break;

        // Forward-difference Jacobian of the residual vector.
        std::vector<std::vector<double>> jac(k, std::vector<double>(m, 0.0));
        for (std::size_t j = 0; j < k; ++j) {
            const double h = 1e-6 * std::max(1.0, std::abs(beta[j]));
            auto perturbed = beta;
            perturbed[j] += h;
            const auto e1 = layout.residuals(z, perturbed);
            for (std::size_t t = 0; t < m; ++t) jac[j][t] = (e1[t] - e0[t]) / h;
        }
        std::vector<std::vector<double>> jtj(k, std::vector<double>(k, 0.0));
        std::vector<double> jte(k, 0.0);
        for (std::size_t a = 0; a < k; ++a) {
            for (std::size_t b = a; b < k; ++b) {
                double acc = 0.0;
                for (std::size_t t = 0; t < m; ++t) acc += jac[a][t] * jac[b][t];
                jtj[a][b] = jtj[b][a] = acc;
            }
            double acc = 0.0;
            for (std::size_t t = 0; t < m; ++t) acc += jac[a][t] * e0[t];
            jte[a] = -acc;
        }

        bool stepped = false;
        for (int attempt = 0; attempt < 8 && !stepped; ++attempt) {
            auto damped = jtj;
            for (std::size_t a = 0; a < k; ++a) {
                damped[a][a] += lambda * std::max(jtj[a][a], 1e-12);
            }
            std::vector<double> delta;
            try {
                delta = arima_detail::solve_dense(damped, jte);
            } catch (const DegenerateSystemError&) {
                lambda *= 10.0;
                continue;
            }
            auto candidate = beta;
            for (std::size_t a = 0; a < k; ++a) candidate[a] += delta[a];
            layout.clamp(candidate);
            const double next = css(candidate);
            if (!std::isfinite(next)) {
                layout.unpack(init_beta, model);
                model.fallback = true;
                return model;
            }
            if (next < current) {
                const double rel_change = (current - next) / std::max(current, 1e-300);
                beta = std::move(candidate);
                current = next;
                lambda = std::max(lambda / 10.0, 1e-12);
                stepped = true;
                if (rel_change < 1e-8) iter = 200;  // converged
            } else {
                lambda *= 10.0;
            }
        }
        if (!stepped) break;  // no damping level improves: local optimum
    }

    layout.unpack(beta, model);
    const auto final_residuals = layout.residuals(z, beta);
    const std::size_t dof =
        final_residuals.size() > k ? final_residuals.size() - k : std::size_t{1};
    model.residual_variance =
        arima_detail::sum_squares(final_residuals) / static_cast<double>(dof);
    return model;
}

/// Recursive forecast: future shocks are zero on the differenced scale, and
/// the result is integrated back through the seasonal and regular
/// differencing.
inline std::vector<double> forecast_arima(const ArimaModel& model,
                                          const std::vector<double>& history,
                                          std::size_t horizon) {
    if (horizon == 0) return {};
    const ArimaOrder& order = model.order;
    const std::size_t s = order.has_seasonal() ? order.period() : 1;
    const std::size_t min_len = order.d + s * order.D() + 1;
    if (history.size() < min_len) throw HistoryTooShortError(min_len, history.size());

    // Ladder of differenced histories; each level seeds the integration back.
    std::vector<std::vector<double>> ladder;
    ladder.push_back(history);
    for (std::size_t i = 0; i < order.d; ++i) {
        ladder.push_back(arima_detail::difference(ladder.back(), 1));
    }
    for (std::size_t i = 0; i < order.D(); ++i) {
        ladder.push_back(arima_detail::difference(ladder.back(), s));
    }

    const auto alpha =
        arima_detail::expand_ar(model.ar_coeffs, model.seasonal_ar_coeffs, s);
    const auto beta = arima_detail::expand_ma(model.ma_coeffs, model.seasonal_ma_coeffs, s);
    std::vector<double> z = ladder.back();
    if (z.size() < alpha.size()) throw HistoryTooShortError(alpha.size() + min_len, history.size());

    // Reconstruct in-sample shocks so MA terms condition on them.
    std::vector<double> e(z.size(), 0.0);
    for (std::size_t t = alpha.size(); t < z.size(); ++t) {
        double pred = model.intercept;
        for (std::size_t kk = 0; kk < alpha.size(); ++kk) pred += alpha[kk] * z[t - 1 - kk];
        for (std::size_t kk = 0; kk < beta.size(); ++kk) {
            if (t >= kk + 1) pred += beta[kk] * e[t - 1 - kk];
        }
        e[t] = z[t] - pred;
    }

    const std::size_t base = z.size();
    for (std::size_t h = 0; h < horizon; ++h) {
        const std::size_t t = base + h;
        double pred = model.intercept;
        for (std::size_t kk = 0; kk < alpha.size(); ++kk) {
            if (t >= kk + 1) pred += alpha[kk] * z[t - 1 - kk];
        }
        for (std::size_t kk = 0; kk < beta.size(); ++kk) {
            if (t >= kk + 1 && t - 1 - kk < e.size()) pred += beta[kk] * e[t - 1 - kk];
        }
        z.push_back(pred);
    }
    std::vector<double> forecast(z.end() - static_cast<std::ptrdiff_t>(horizon), z.end());

    // Integrate back: seasonal levels first (they were applied last).
    for (std::size_t level = ladder.size() - 1; level-- > 0;) {
        const std::size_t lag = level >= order.d ? s : 1;
        std::vector<double> ext = ladder[level];
        for (double f : forecast) {
            ext.push_back(f + ext[ext.size() - lag]);
        }
        forecast.assign(ext.end() - static_cast<std::ptrdiff_t>(horizon), ext.end());
    }
    return forecast;
}

/// Repeats the last full period verbatim: forecast[k] = history[n - period + k mod period].
inline std::vector<double> seasonal_naive(const std::vector<double>& history,
                                          std::size_t period, std::size_t horizon) {
    if (period == 0) throw Error("period must be positive");
    if (history.size() < period) throw HistoryTooShortError(period, history.size());
    std::vector<double> out;
    out.reserve(horizon);
    for (std::size_t k = 0; k < horizon; ++k) {
        out.push_back(history[history.size() - period + (k % period)]);
    }
    return out;
}

/// Last observed value, repeated.
inline std::vector<double> persistence(const std::vector<double>& history,
                                       std::size_t horizon) {
    return seasonal_naive(history, 1, horizon);
}

// ---- serialization ----

inline nlohmann::json to_json(const ArimaOrder& order) {
    nlohmann::json j = {{"p", order.p}, {"d", order.d}, {"q", order.q}};
    if (order.has_seasonal()) {
        j["seasonal"] = {{"P", order.P()}, {"D", order.D()}, {"Q", order.Q()},
                         {"period", order.period()}};
    }
    return j;
}

inline ArimaOrder arima_order_from_json(const nlohmann::json& j) {
    ArimaOrder order;
    order.p = j.at("p").get<std::size_t>();
    order.d = j.at("d").get<std::size_t>();
    order.q = j.at("q").get<std::size_t>();
    if (j.contains("seasonal")) {
        const auto& s = j.at("seasonal");
        order.seasonal_p = s.at("P").get<std::size_t>();
        order.seasonal_d = s.at("D").get<std::size_t>();
        order.seasonal_q = s.at("Q").get<std::size_t>();
        order.seasonal_period = s.at("period").get<std::size_t>();
    }
    order.validate();
    return order;
}

inline nlohmann::json to_json(const ArimaModel& model) {
    return nlohmann::json{
        {"order", to_json(model.order)},
        {"ar_coeffs", model.ar_coeffs},
        {"ma_coeffs", model.ma_coeffs},
        {"seasonal_ar_coeffs", model.seasonal_ar_coeffs},
        {"seasonal_ma_coeffs", model.seasonal_ma_coeffs},
        {"intercept", model.intercept},
        {"residual_variance", model.residual_variance},
        {"training_length", model.training_length},
        {"fallback", model.fallback},
    };
}

inline ArimaModel arima_model_from_json(const nlohmann::json& j) {
    ArimaModel model;
    model.order = arima_order_from_json(j.at("order"));
    model.ar_coeffs = j.at("ar_coeffs").get<std::vector<double>>();
    model.ma_coeffs = j.at("ma_coeffs").get<std::vector<double>>();
    model.seasonal_ar_coeffs = j.at("seasonal_ar_coeffs").get<std::vector<double>>();
    model.seasonal_ma_coeffs = j.at("seasonal_ma_coeffs").get<std::vector<double>>();
    model.intercept = j.at("intercept").get<double>();
    model.residual_variance = j.at("residual_variance").get<double>();
    model.training_length = j.at("training_length").get<std::size_t>();
    model.fallback = j.value("fallback", false);
    return model;
}

}  // namespace refcast

#endif  // REFCAST_ARIMA_HPP
