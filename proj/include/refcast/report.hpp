#ifndef REFCAST_REPORT_HPP
#define REFCAST_REPORT_HPP

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "refcast/errors.hpp"
#include "refcast/timeseries.hpp"
#include "refcast/timeutil.hpp"

namespace refcast {

namespace svg_detail {

inline std::string fmt1(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return buf;
}

// Fixed palette; ground truth is always black.
inline const char* palette(std::size_t i) {
    static const char* kColors[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};
    return kColors[i % (sizeof(kColors) / sizeof(kColors[0]))];
}

}  // namespace svg_detail

/// Renders one window as an SVG line chart: hour axis, a polyline for the
/// ground truth and one per method, and a legend. Output is byte-stable for
/// identical input.
inline std::string svg_chart_string(const WindowedSample& window,
                                    const std::map<std::string, std::vector<double>>& predictions) {
    const std::size_t l = window.truth_volumes.size();
    if (l < 1) throw EmptyInputError("window horizon");
    for (const auto& [name, values] : predictions) {
        if (values.size() != l) throw LengthMismatchError(values.size(), l);
    }

    const int width = 800, height = 400;
    const int margin_left = 60, margin_right = 160, margin_top = 30, margin_bottom = 40;
    const double plot_w = width - margin_left - margin_right;
    const double plot_h = height - margin_top - margin_bottom;

    double lo = window.truth_volumes[0], hi = window.truth_volumes[0];
    auto widen = [&](const std::vector<double>& v) {
        for (double x : v) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
    };
    widen(window.truth_volumes);
    for (const auto& [name, values] : predictions) widen(values);
    if (hi - lo < 1e-12) {
        hi += 1.0;
        lo -= 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    auto x_of = [&](std::size_t i) {
        return margin_left +
               (l == 1 ? plot_w / 2
                       : plot_w * static_cast<double>(i) / static_cast<double>(l - 1));
    };
    auto y_of = [&](double v) { return margin_top + plot_h * (1.0 - (v - lo) / (hi - lo)); };

    auto polyline = [&](const std::vector<double>& values, const std::string& color) {
        std::string points;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i > 0) points += " ";
            points += svg_detail::fmt1(x_of(i)) + "," + svg_detail::fmt1(y_of(values[i]));
        }
        return "  <polyline fill=\"none\" stroke=\"" + color +
               "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
    };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\">\n";
    svg += "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    // Axes.
    svg += "  <line x1=\"" + std::to_string(margin_left) + "\" y1=\"" +
           std::to_string(margin_top) + "\" x2=\"" + std::to_string(margin_left) + "\" y2=\"" +
           std::to_string(height - margin_bottom) + "\" stroke=\"black\"/>\n";
    svg += "  <line x1=\"" + std::to_string(margin_left) + "\" y1=\"" +
           std::to_string(height - margin_bottom) + "\" x2=\"" +
           std::to_string(width - margin_right) + "\" y2=\"" +
           std::to_string(height - margin_bottom) + "\" stroke=\"black\"/>\n";

    // Hour ticks: at most 8 labels to stay readable.
    const std::size_t tick_step = std::max<std::size_t>(1, l / 8);
    for (std::size_t i = 0; i < l; i += tick_step) {
        svg += "  <text x=\"" + svg_detail::fmt1(x_of(i)) + "\" y=\"" +
               std::to_string(height - margin_bottom + 16) +
               "\" font-size=\"10\" text-anchor=\"middle\">" +
               format_hour_label(window.truth_timestamps[i]) + "</text>\n";
    }
    for (int t = 0; t <= 4; ++t) {
        const double v = lo + (hi - lo) * t / 4.0;
        svg += "  <text x=\"" + std::to_string(margin_left - 6) + "\" y=\"" +
               svg_detail::fmt1(y_of(v) + 3) + "\" font-size=\"10\" text-anchor=\"end\">" +
               svg_detail::fmt1(v) + "</text>\n";
    }

    svg += polyline(window.truth_volumes, "black");
    std::size_t color_index = 0;
    for (const auto& [name, values] : predictions) {
        svg += polyline(values, svg_detail::palette(color_index));
        ++color_index;
    }

    // Legend.
    int legend_y = margin_top + 10;
    auto legend_entry = [&](const std::string& name, const std::string& color) {
        svg += "  <line x1=\"" + std::to_string(width - margin_right + 10) + "\" y1=\"" +
               std::to_string(legend_y - 4) + "\" x2=\"" +
               std::to_string(width - margin_right + 30) + "\" y2=\"" +
               std::to_string(legend_y - 4) + "\" stroke=\"" + color +
               "\" stroke-width=\"2\"/>\n";
        svg += "  <text x=\"" + std::to_string(width - margin_right + 35) + "\" y=\"" +
               std::to_string(legend_y) + "\" font-size=\"11\">" + name + "</text>\n";
        legend_y += 16;
    };
    legend_entry("ground truth", "black");
    color_index = 0;
    for (const auto& [name, values] : predictions) {
        legend_entry(name, svg_detail::palette(color_index));
        ++color_index;
    }

    svg += "</svg>\n";
    return svg;
}

/// Writes the chart to disk.
inline void emit_svg(const WindowedSample& window,
                     const std::map<std::string, std::vector<double>>& predictions,
                     const std::string& path) {
    const std::string content = svg_chart_string(window, predictions);
    std::ofstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot write " + path);
    file << content;
    if (!file) throw IoError("failed writing " + path);
}

/// Per-method experiment outcome, with enough per-window detail to recompute
/// every average.
struct MethodStats {
    double avg_mae = 0.0;
    double avg_mse = 0.0;
    struct PerWindow {
        std::size_t window_index = 0;
        double mae = 0.0;
        double mse = 0.0;
    };
    std::vector<PerWindow> per_window;
};

struct WindowFailure {
    std::size_t window_index = 0;
    std::string method;
    std::string error;
};

struct ExperimentReport {
    std::map<std::string, MethodStats> per_method;
    std::vector<WindowFailure> failures;
    std::string traces_path;
    nlohmann::json config_echo;
    double wallclock_seconds = 0.0;
};

inline void finalize_averages(ExperimentReport& report) {
    for (auto& [name, stats] : report.per_method) {
        double sum_mae = 0.0, sum_mse = 0.0;
        for (const auto& w : stats.per_window) {
            sum_mae += w.mae;
            sum_mse += w.mse;
        }
        const double n = static_cast<double>(stats.per_window.size());
        stats.avg_mae = stats.per_window.empty() ? 0.0 : sum_mae / n;
        stats.avg_mse = stats.per_window.empty() ? 0.0 : sum_mse / n;
    }
}

inline nlohmann::json to_json(const ExperimentReport& report) {
    nlohmann::json methods = nlohmann::json::object();
    for (const auto& [name, stats] : report.per_method) {
        nlohmann::json windows = nlohmann::json::array();
        for (const auto& w : stats.per_window) {
            windows.push_back(
                {{"window", w.window_index}, {"mae", w.mae}, {"mse", w.mse}});
        }
        methods[name] = {{"avg_mae", stats.avg_mae},
                         {"avg_mse", stats.avg_mse},
                         {"per_window", windows}};
    }
    nlohmann::json failures = nlohmann::json::array();
    for (const auto& f : report.failures) {
        failures.push_back(
            {{"window", f.window_index}, {"method", f.method}, {"error", f.error}});
    }
    return nlohmann::json{{"per_method", methods},
                          {"failures", failures},
                          {"traces_path", report.traces_path},
                          {"config_echo", report.config_echo},
                          {"wallclock_seconds", report.wallclock_seconds}};
}

inline ExperimentReport report_from_json(const nlohmann::json& j) {
    ExperimentReport report;
    for (const auto& [name, stats_json] : j.at("per_method").items()) {
        MethodStats stats;
        stats.avg_mae = stats_json.at("avg_mae").get<double>();
        stats.avg_mse = stats_json.at("avg_mse").get<double>();
        for (const auto& w : stats_json.at("per_window")) {
            stats.per_window.push_back({w.at("window").get<std::size_t>(),
                                        w.at("mae").get<double>(),
                                        w.at("mse").get<double>()});
        }
        report.per_method[name] = std::move(stats);
    }
    for (const auto& f : j.at("failures")) {
        report.failures.push_back({f.at("window").get<std::size_t>(),
                                   f.at("method").get<std::string>(),
                                   f.at("error").get<std::string>()});
    }
    report.traces_path = j.at("traces_path").get<std::string>();
    report.config_echo = j.at("config_echo");
    report.wallclock_seconds = j.at("wallclock_seconds").get<double>();
    return report;
}

}  // namespace refcast

#endif  // REFCAST_REPORT_HPP
