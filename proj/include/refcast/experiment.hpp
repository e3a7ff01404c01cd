#ifndef REFCAST_EXPERIMENT_HPP
#define REFCAST_EXPERIMENT_HPP

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "refcast/arima.hpp"
#include "refcast/gateway.hpp"
#include "refcast/loaders.hpp"
#include "refcast/refine.hpp"
#include "refcast/report.hpp"
#include "refcast/timeseries.hpp"

namespace refcast {

/// Name under which the refinement pipeline appears in reports.
inline constexpr const char* kPipelineMethod = "refcast";

struct DatasetConfig {
    std::string path;
    std::string format = "csv";  // "csv" or "cdr_tsv"
    std::string cell_id;
    std::size_t aggregate_factor = 1;
    ColumnMap csv_columns;
    CdrColumns cdr_columns;
};

struct WindowConfig {
    std::size_t w = 24;
    std::size_t l = 24;
    std::size_t stride = 24;  // non-overlapping days by default
};

struct BaselinesConfig {
    ArimaOrder arima_order;  // defaults to (1,1,1)
    std::size_t seasonal_period = 24;
};

struct HarvestConfig {
    bool enabled = true;
    std::size_t k = 4;
};

/// The full experiment description. Flags in the CLI override file values.
struct ExperimentConfig {
    DatasetConfig dataset;
    std::optional<DatasetConfig> source_dataset;  // transfer mode when present
    WindowConfig window;
    double demo_fraction = 0.6;
    BackendConfig backend;
    LoopConfig loop;
    BaselinesConfig baselines;
    HarvestConfig harvest;
    std::string output_dir = "out";
    std::string templates_dir;
    unsigned seed = 0;
    std::size_t workers = 1;
};

// ---- config serialization ----

inline nlohmann::json to_json(const DatasetConfig& d) {
    nlohmann::json j = {{"path", d.path},
                        {"format", d.format},
                        {"aggregate_factor", d.aggregate_factor}};
    if (!d.cell_id.empty()) j["cell_id"] = d.cell_id;
    if (d.format == "csv") {
        j["timestamp_column"] = d.csv_columns.timestamp_column;
        j["value_column"] = d.csv_columns.value_column;
        j["gap_policy"] = to_string(d.csv_columns.gap_policy);
        if (d.csv_columns.resolution_seconds) {
            j["resolution_seconds"] = *d.csv_columns.resolution_seconds;
        }
    } else {
        j["cell_column"] = d.cdr_columns.cell_column;
        j["timestamp_ms_column"] = d.cdr_columns.timestamp_ms_column;
        j["value_column_index"] = d.cdr_columns.value_column;
        j["resolution_seconds"] = d.cdr_columns.resolution_seconds;
    }
    return j;
}

inline DatasetConfig dataset_from_json(const nlohmann::json& j) {
    DatasetConfig d;
    d.path = j.at("path").get<std::string>();
    d.format = j.value("format", std::string("csv"));
    if (d.format != "csv" && d.format != "cdr_tsv") {
        throw ConfigError("dataset format must be 'csv' or 'cdr_tsv'");
    }
    d.cell_id = j.value("cell_id", std::string());
    d.aggregate_factor = j.value("aggregate_factor", std::size_t{1});
    if (d.format == "csv") {
        d.csv_columns.timestamp_column = j.value("timestamp_column", std::string("timestamp"));
        d.csv_columns.value_column = j.value("value_column", std::string("volume"));
        d.csv_columns.gap_policy =
            gap_policy_from_string(j.value("gap_policy", std::string("interpolate")));
        if (j.contains("resolution_seconds")) {
            d.csv_columns.resolution_seconds = j.at("resolution_seconds").get<std::int64_t>();
        }
    } else {
        d.cdr_columns.cell_column = j.value("cell_column", std::size_t{0});
        d.cdr_columns.timestamp_ms_column = j.value("timestamp_ms_column", std::size_t{1});
        d.cdr_columns.value_column = j.value("value_column_index", std::size_t{2});
        d.cdr_columns.resolution_seconds =
            j.value("resolution_seconds", std::int64_t{600});
    }
    return d;
}

inline nlohmann::json to_json(const BackendConfig& b) {
    nlohmann::json j = {{"kind", b.kind == BackendKind::Http ? "http" : "mock"},
                        {"model_name", b.model_name},
                        {"retry_max", b.retry_max},
                        {"rate_limit_per_minute", b.rate_limit_per_minute},
                        {"timeout_seconds", b.timeout_seconds}};
    if (b.kind == BackendKind::Http) {
        j["endpoint_url"] = b.endpoint_url;
        j["api_key_env_var"] = b.api_key_env_var;
    } else {
        j["mock_policy"] = to_string(b.mock_policy);
        if (!b.script.empty()) j["script"] = b.script;
        if (!b.improving_truth.empty()) {
            j["improving_truth"] = b.improving_truth;
            j["improving_initial"] = b.improving_initial;
        }
    }
    return j;
}

inline BackendConfig backend_from_json(const nlohmann::json& j) {
    BackendConfig b;
    const std::string kind = j.value("kind", std::string("mock"));
    if (kind == "http") {
        b.kind = BackendKind::Http;
        b.endpoint_url = j.value("endpoint_url", std::string());
        b.api_key_env_var = j.value("api_key_env_var", std::string());
    } else if (kind == "mock") {
        b.kind = BackendKind::Mock;
        b.mock_policy =
            mock_policy_from_string(j.value("mock_policy", std::string("echo_last_period")));
        if (j.contains("script")) b.script = j.at("script").get<std::vector<std::string>>();
        if (j.contains("improving_truth")) {
            b.improving_truth = j.at("improving_truth").get<std::vector<double>>();
            b.improving_initial = j.at("improving_initial").get<std::vector<double>>();
        }
    } else {
        throw ConfigError("backend kind must be 'http' or 'mock'");
    }
    b.model_name = j.value("model_name", std::string("mock"));
    b.retry_max = j.value("retry_max", 3);
    b.rate_limit_per_minute = j.value("rate_limit_per_minute", 0);
    b.timeout_seconds = j.value("timeout_seconds", 30);
    return b;
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j = {
        {"dataset", to_json(c.dataset)},
        {"window", {{"w", c.window.w}, {"l", c.window.l}, {"stride", c.window.stride}}},
        {"split", {{"demo_fraction", c.demo_fraction}}},
        {"backend", to_json(c.backend)},
        {"loop",
         {{"max_iters", c.loop.max_iters},
          {"rel_epsilon", c.loop.rel_epsilon},
          {"keep_last", c.loop.keep_last},
          {"token_budget", c.loop.token_budget},
          {"parse_retry", c.loop.parse_retry},
          {"llm_feedback", c.loop.llm_feedback}}},
        {"baselines",
         {{"arima_order", to_json(c.baselines.arima_order)},
          {"seasonal_period", c.baselines.seasonal_period}}},
        {"harvest", {{"enabled", c.harvest.enabled}, {"k", c.harvest.k}}},
        {"output_dir", c.output_dir},
        {"seed", c.seed},
        {"workers", c.workers},
    };
    if (c.source_dataset) j["source_dataset"] = to_json(*c.source_dataset);
    if (!c.templates_dir.empty()) j["templates_dir"] = c.templates_dir;
    return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    c.dataset = dataset_from_json(j.at("dataset"));
    if (j.contains("source_dataset")) {
        c.source_dataset = dataset_from_json(j.at("source_dataset"));
    }
    if (j.contains("window")) {
        const auto& w = j.at("window");
        c.window.w = w.value("w", std::size_t{24});
        c.window.l = w.value("l", std::size_t{24});
        c.window.stride = w.value("stride", c.window.l);
    }
    if (j.contains("split")) c.demo_fraction = j.at("split").value("demo_fraction", 0.6);
    if (j.contains("backend")) c.backend = backend_from_json(j.at("backend"));
    if (j.contains("loop")) {
        const auto& lp = j.at("loop");
        c.loop.max_iters = lp.value("max_iters", std::size_t{3});
        c.loop.rel_epsilon = lp.value("rel_epsilon", 0.05);
        c.loop.keep_last = lp.value("keep_last", std::size_t{3});
        c.loop.token_budget = lp.value("token_budget", std::size_t{8192});
        c.loop.parse_retry = lp.value("parse_retry", true);
        c.loop.llm_feedback = lp.value("llm_feedback", false);
    }
    if (j.contains("baselines")) {
        const auto& b = j.at("baselines");
        if (b.contains("arima_order")) {
            c.baselines.arima_order = arima_order_from_json(b.at("arima_order"));
        }
        c.baselines.seasonal_period = b.value("seasonal_period", std::size_t{24});
    }
    if (j.contains("harvest")) {
        c.harvest.enabled = j.at("harvest").value("enabled", true);
        c.harvest.k = j.at("harvest").value("k", std::size_t{4});
    }
    c.output_dir = j.value("output_dir", std::string("out"));
    c.templates_dir = j.value("templates_dir", std::string());
    c.seed = j.value("seed", 0u);
    c.workers = j.value("workers", std::size_t{1});
    if (c.window.w < 1 || c.window.l < 1) throw ConfigError("w and l must be at least 1");
    if (!(c.demo_fraction > 0.0 && c.demo_fraction < 1.0)) {
        throw ConfigError("demo_fraction must lie in (0, 1)");
    }
    return c;
}

// ---- dataset helpers ----

inline TimeSeries load_dataset(const DatasetConfig& d,
                               std::vector<std::string>* warnings = nullptr) {
    TimeSeries series = d.format == "cdr_tsv"
                            ? load_cdr_tsv(d.path, d.cell_id, d.cdr_columns, warnings)
                            : load_csv(d.path, d.csv_columns, warnings);
    if (d.aggregate_factor > 1) series = aggregate(series, d.aggregate_factor, warnings);
    return series;
}

/// Writes the normalized form back out: "timestamp,volume" CSV, loadable by
/// the csv loader.
inline void write_series_csv(const TimeSeries& series, const std::string& path) {
    std::ofstream file(path);
    if (!file) throw IoError("cannot write " + path);
    file << "timestamp,volume\n";
    for (const auto& s : series.samples()) {
        file << s.timestamp << "," << format_volume(s.volume) << "\n";
    }
}

/// Distinct cell ids of a CDR file, sorted; used for seeded source/target
/// picks.
inline std::vector<std::string> list_cdr_cells(const std::string& path,
                                               std::size_t cell_column = 0) {
    std::ifstream file(path);
    if (!file) throw FileNotFoundError(path);
    std::set<std::string> cells;
    std::string line;
    while (std::getline(file, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = detail::split(line, '\t');
        if (fields.size() > cell_column) cells.insert(detail::strip(fields[cell_column]));
    }
    return {cells.begin(), cells.end()};
}

// ---- the experiment driver ----

namespace experiment_detail {

struct EvalOutcome {
    bool ok = false;
    std::string error;
    std::vector<double> values;  // full horizon when complete
    double mae_value = 0.0;
    double mse_value = 0.0;
};

// Scores one prediction against truth, aligning by hour label so partial
// answers are scored on what they did cover.
inline EvalOutcome score_prediction(const WindowedSample& window,
                                    const ParsedPrediction& parsed) {
    EvalOutcome out;
    std::map<std::string, double> truth_by_label;
    const auto labels = hour_labels(window.truth_timestamps);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        truth_by_label.emplace(labels[i], window.truth_volumes[i]);
    }
    std::vector<double> truth_aligned, pred_aligned;
    for (std::size_t i = 0; i < parsed.matched_hours.size(); ++i) {
        const auto it = truth_by_label.find(parsed.matched_hours[i]);
        if (it == truth_by_label.end()) continue;
        truth_aligned.push_back(it->second);
        pred_aligned.push_back(parsed.values[i]);
    }
    if (truth_aligned.empty()) {
        out.error = "prediction matched no target hours";
        return out;
    }
    out.ok = true;
    out.mae_value = mae(truth_aligned, pred_aligned);
    out.mse_value = mse(truth_aligned, pred_aligned);
    if (parsed.complete()) out.values = parsed.values;
    return out;
}

}  // namespace experiment_detail

enum class RunMode { Full, BaselinesOnly };

/// Runs the full protocol: windowing, chronological split, the refinement
/// loop over demonstration windows, demonstration harvesting, single-shot
/// evaluation (never any feedback/refinement segments), classical baselines
/// on the same evaluation windows, and report/plot emission.
///
/// In transfer mode (source_dataset present) the source's windows feed the
/// loop and harvesting while every target window is evaluated; the ARIMA
/// baseline is then fitted on the source series, mimicking a model carried
/// across base stations. BaselinesOnly skips everything backend-related.
inline ExperimentReport run_experiment(const ExperimentConfig& config,
                                       std::vector<std::string>* warnings = nullptr,
                                       RunMode mode = RunMode::Full) {
    namespace fs = std::filesystem;
    const auto t0 = std::chrono::steady_clock::now();

    fs::create_directories(config.output_dir);
    fs::create_directories(fs::path(config.output_dir) / "traces");
    fs::create_directories(fs::path(config.output_dir) / "plots");

    const TemplateSet templates = config.templates_dir.empty()
                                      ? TemplateSet::defaults()
                                      : TemplateSet::load_dir(config.templates_dir);

    const TimeSeries target = load_dataset(config.dataset, warnings);
    std::optional<TimeSeries> source;
    if (config.source_dataset) source = load_dataset(*config.source_dataset, warnings);

    const auto target_windows =
        make_windows(target, config.window.w, config.window.l, config.window.stride);

    std::vector<WindowedSample> demo_windows, eval_windows;
    if (source) {
        demo_windows =
            make_windows(*source, config.window.w, config.window.l, config.window.stride);
        eval_windows = target_windows;
    } else {
        auto [demo, eval] = split_windows(target_windows, config.demo_fraction);
        demo_windows = std::move(demo);
        eval_windows = std::move(eval);
    }
    if (eval_windows.empty()) {
        throw ConfigError("no evaluation windows; lower demo_fraction or add data");
    }

    std::optional<Gateway> gateway;
    if (mode == RunMode::Full) {
        BackendConfig backend = config.backend;
        if (backend.transcript_path.empty()) {
            backend.transcript_path =
                (fs::path(config.output_dir) / "transcripts.jsonl").string();
        }
        gateway.emplace(backend);
    }

    ExperimentReport report;
    report.config_echo = to_json(config);
    report.traces_path = (fs::path(config.output_dir) / "traces").string();

    // Demonstration phase: refine every demo window, harvest the best.
    std::vector<RefinementTrace> traces;
    std::vector<DemonstrationExample> harvested;
    if (gateway) {
        for (std::size_t i = 0; i < demo_windows.size(); ++i) {
            gateway->reset_mock_iteration();
            try {
                auto trace = run_refine_loop(demo_windows[i], {}, *gateway, config.loop,
                                             templates, warnings);
                std::ofstream trace_file(fs::path(config.output_dir) / "traces" /
                                         ("window_" + std::to_string(i) + ".json"));
                trace_file << to_json(trace).dump(2) << "\n";
                traces.push_back(std::move(trace));
            } catch (const Error& ex) {
                report.failures.push_back({i, "refine_loop", ex.what()});
            }
        }
        if (config.harvest.enabled && !traces.empty()) {
            harvested = harvest_demonstrations(traces, config.harvest.k, templates);
        }
    }

    // Baseline models are fitted once: on the source series in transfer mode,
    // otherwise on the demonstration span of the target series.
    const auto target_values = target.volumes();
    std::vector<double> training_values;
    if (source) {
        training_values = source->volumes();
    } else {
        const std::size_t demo_span =
            demo_windows.empty()
                ? 0
                : (demo_windows.size() - 1) * config.window.stride + config.window.w +
                      config.window.l;
        training_values.assign(target_values.begin(),
                               target_values.begin() +
                                   static_cast<std::ptrdiff_t>(
                                       std::min(demo_span, target_values.size())));
    }
    std::optional<ArimaModel> arima_model;
    try {
        arima_model = fit_arima(training_values, config.baselines.arima_order);
        // Persist the fitted model; a transfer run carries it across series.
        std::ofstream model_file(fs::path(config.output_dir) / "arima_model.json");
        model_file << to_json(*arima_model).dump(2) << "\n";
    } catch (const Error& ex) {
        if (warnings != nullptr) {
            warnings->push_back(std::string("arima baseline unavailable: ") + ex.what());
        }
    }

    // Evaluation phase, optionally across a bounded worker pool.
    const std::size_t eval_offset = source ? 0 : demo_windows.size();
    std::vector<experiment_detail::EvalOutcome> pipeline_outcomes(eval_windows.size());
    if (gateway) {
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= eval_windows.size()) return;
                try {
                    auto result = evaluate_predict(eval_windows[i], harvested, *gateway,
                                                   config.loop, templates);
                    pipeline_outcomes[i] =
                        experiment_detail::score_prediction(eval_windows[i], result.parsed);
                } catch (const Error& ex) {
                    pipeline_outcomes[i].ok = false;
                    pipeline_outcomes[i].error = ex.what();
                }
            }
        };
        const std::size_t pool = std::max<std::size_t>(1, config.workers);
        if (pool == 1) {
            worker();
        } else {
            std::vector<std::thread> threads;
            for (std::size_t t = 0; t < pool; ++t) threads.emplace_back(worker);
            for (auto& t : threads) t.join();
        }
    }

    for (std::size_t i = 0; i < eval_windows.size(); ++i) {
        const WindowedSample& window = eval_windows[i];
        const std::size_t window_index = eval_offset + i;
        std::map<std::string, std::vector<double>> plot_lines;

        if (gateway) {
            const auto& pipeline = pipeline_outcomes[i];
            if (pipeline.ok) {
                report.per_method[kPipelineMethod].per_window.push_back(
                    {window_index, pipeline.mae_value, pipeline.mse_value});
                if (!pipeline.values.empty()) plot_lines[kPipelineMethod] = pipeline.values;
            } else {
                report.failures.push_back({window_index, kPipelineMethod, pipeline.error});
            }
        }

        if (arima_model) {
            try {
                // Condition on everything observed up to the window's input end.
                const std::size_t history_end =
                    window_index * config.window.stride + config.window.w;
                std::vector<double> history(
                    target_values.begin(),
                    target_values.begin() + static_cast<std::ptrdiff_t>(
                                                std::min(history_end, target_values.size())));
                auto forecast = forecast_arima(*arima_model, history, config.window.l);
                report.per_method["arima"].per_window.push_back(
                    {window_index, mae(window.truth_volumes, forecast),
                     mse(window.truth_volumes, forecast)});
                plot_lines["arima"] = std::move(forecast);
            } catch (const Error& ex) {
                report.failures.push_back({window_index, "arima", ex.what()});
            }
        }

        try {
            const std::size_t period =
                std::min(config.baselines.seasonal_period, window.input_volumes.size());
            auto forecast = seasonal_naive(window.input_volumes, period, config.window.l);
            report.per_method["seasonal_naive"].per_window.push_back(
                {window_index, mae(window.truth_volumes, forecast),
                 mse(window.truth_volumes, forecast)});
            plot_lines["seasonal_naive"] = std::move(forecast);
        } catch (const Error& ex) {
            report.failures.push_back({window_index, "seasonal_naive", ex.what()});
        }

        try {
            auto forecast = persistence(window.input_volumes, config.window.l);
            report.per_method["persistence"].per_window.push_back(
                {window_index, mae(window.truth_volumes, forecast),
                 mse(window.truth_volumes, forecast)});
            plot_lines["persistence"] = std::move(forecast);
        } catch (const Error& ex) {
            report.failures.push_back({window_index, "persistence", ex.what()});
        }

        emit_svg(window, plot_lines,
                 (fs::path(config.output_dir) / "plots" /
                  ("window_" + std::to_string(window_index) + ".svg"))
                     .string());
    }

    const bool all_pipeline_failed =
        gateway && (report.per_method.find(kPipelineMethod) == report.per_method.end() ||
                    report.per_method[kPipelineMethod].per_window.empty());
    if (all_pipeline_failed) {
        // Leave the decision to the caller; the report records every failure.
        if (warnings != nullptr) warnings->push_back("every evaluation window failed");
    }

    finalize_averages(report);
    report.wallclock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    // Persist the run directory: config echo, report, per-window CSV.
    {
        std::ofstream config_file(fs::path(config.output_dir) / "config_echo.json");
        config_file << report.config_echo.dump(2) << "\n";
        std::ofstream report_file(fs::path(config.output_dir) / "report.json");
        report_file << to_json(report).dump(2) << "\n";
        std::ofstream csv(fs::path(config.output_dir) / "per_window.csv");
        csv << "window,method,mae,mse\n";
        for (const auto& [name, stats] : report.per_method) {
            for (const auto& w : stats.per_window) {
                char line[160];
                std::snprintf(line, sizeof(line), "%zu,%s,%.12g,%.12g\n", w.window_index,
                              name.c_str(), w.mae, w.mse);
                csv << line;
            }
        }
    }
    return report;
}

}  // namespace refcast

#endif  // REFCAST_EXPERIMENT_HPP
