// Command-line driver: dataset ingestion, experiment runs, baselines-only
// runs, and report display.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "refcast/refcast.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInputError = 2;
constexpr int kExitBackendError = 3;
constexpr int kExitPartial = 4;

struct CommonFlags {
    std::string config_path;
    std::string dataset_path;
    std::string format;
    std::string cell;
    std::string backend;
    std::string mock_policy;
    std::string out;
    std::optional<std::size_t> w, l, stride;
    std::optional<std::size_t> aggregate_factor;
    std::optional<unsigned> seed;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON config file");
    cmd->add_option("--dataset", flags.dataset_path, "dataset path (overrides config)");
    cmd->add_option("--format", flags.format, "dataset format: csv or cdr_tsv");
    cmd->add_option("--cell", flags.cell, "cell id for cdr_tsv datasets");
    cmd->add_option("--aggregate", flags.aggregate_factor,
                    "sum this many consecutive samples into one");
    cmd->add_option("--backend", flags.backend, "backend kind: mock or http");
    cmd->add_option("--mock-policy", flags.mock_policy,
                    "mock policy: scripted, echo_last_period, seasonal_oracle, improving");
    cmd->add_option("--w", flags.w, "input window length");
    cmd->add_option("--l", flags.l, "forecast horizon length");
    cmd->add_option("--stride", flags.stride, "window stride");
    cmd->add_option("--seed", flags.seed, "seed for reproducible cell selection");
    cmd->add_option("--out", flags.out, "output directory");
}

refcast::ExperimentConfig load_config(const CommonFlags& flags) {
    refcast::ExperimentConfig config;
    if (!flags.config_path.empty()) {
        std::ifstream file(flags.config_path);
        if (!file) throw refcast::FileNotFoundError(flags.config_path);
        nlohmann::json j;
        file >> j;
        config = refcast::config_from_json(j);
    }
    if (!flags.dataset_path.empty()) config.dataset.path = flags.dataset_path;
    if (!flags.format.empty()) config.dataset.format = flags.format;
    if (!flags.cell.empty()) config.dataset.cell_id = flags.cell;
    if (flags.aggregate_factor) config.dataset.aggregate_factor = *flags.aggregate_factor;
    if (!flags.backend.empty()) {
        config.backend.kind = flags.backend == "http" ? refcast::BackendKind::Http
                                                      : refcast::BackendKind::Mock;
    }
    if (!flags.mock_policy.empty()) {
        config.backend.mock_policy = refcast::mock_policy_from_string(flags.mock_policy);
    }
    if (flags.w) config.window.w = *flags.w;
    if (flags.l) config.window.l = *flags.l;
    if (flags.stride) config.window.stride = *flags.stride;
    if (flags.seed) config.seed = *flags.seed;
    if (!flags.out.empty()) config.output_dir = flags.out;
    if (config.dataset.path.empty()) {
        throw refcast::ConfigError("no dataset given; use --config or --dataset");
    }

    // Seeded cell picks when a CDR dataset names no cell; the source pick
    // avoids colliding with the target's.
    if (config.dataset.format == "cdr_tsv" && config.dataset.cell_id.empty()) {
        const auto cells = refcast::list_cdr_cells(config.dataset.path,
                                                   config.dataset.cdr_columns.cell_column);
        if (cells.empty()) throw refcast::ConfigError("dataset contains no cells");
        config.dataset.cell_id = cells[config.seed % cells.size()];
        std::cout << "selected cell " << config.dataset.cell_id << " (seed " << config.seed
                  << ")\n";
    }
    if (config.source_dataset && config.source_dataset->format == "cdr_tsv" &&
        config.source_dataset->cell_id.empty()) {
        const auto cells = refcast::list_cdr_cells(
            config.source_dataset->path, config.source_dataset->cdr_columns.cell_column);
        if (cells.empty()) throw refcast::ConfigError("source dataset contains no cells");
        std::size_t pick = config.seed % cells.size();
        if (cells[pick] == config.dataset.cell_id && cells.size() > 1) {
            pick = (pick + 1) % cells.size();
        }
        config.source_dataset->cell_id = cells[pick];
        std::cout << "selected source cell " << config.source_dataset->cell_id << " (seed "
                  << config.seed << ")\n";
    }
    return config;
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

void print_summary(const refcast::ExperimentReport& report) {
    std::printf("%-16s %12s %14s %9s\n", "method", "avg_mae", "avg_mse", "windows");
    for (const auto& [name, stats] : report.per_method) {
        std::printf("%-16s %12.4f %14.4f %9zu\n", name.c_str(), stats.avg_mae, stats.avg_mse,
                    stats.per_window.size());
    }
    if (!report.failures.empty()) {
        std::printf("failed windows: %zu (see report.json)\n", report.failures.size());
    }
}

int exit_code_for(const refcast::ExperimentReport& report, bool pipeline_expected) {
    if (pipeline_expected) {
        const auto it = report.per_method.find(refcast::kPipelineMethod);
        if (it == report.per_method.end() || it->second.per_window.empty()) {
            return kExitBackendError;
        }
    }
    return report.failures.empty() ? kExitOk : kExitPartial;
}

int cmd_ingest(const CommonFlags& flags) {
    auto config = load_config(flags);
    std::vector<std::string> warnings;
    const auto series = refcast::load_dataset(config.dataset, &warnings);
    print_warnings(warnings);

    std::cout << "samples: " << series.size() << "\n";
    std::cout << "resolution: " << series.resolution_seconds() << "s\n";
    std::cout << "span: " << refcast::format_utc_datetime(series.samples().front().timestamp)
              << " .. " << refcast::format_utc_datetime(series.samples().back().timestamp)
              << "\n";
    std::cout << "source: " << series.source_id() << "\n";

    std::filesystem::create_directories(config.output_dir);
    const auto out_path =
        (std::filesystem::path(config.output_dir) / "series.csv").string();
    refcast::write_series_csv(series, out_path);
    std::cout << "wrote " << out_path << "\n";
    return kExitOk;
}

int cmd_run(const CommonFlags& flags, refcast::RunMode mode) {
    auto config = load_config(flags);
    std::vector<std::string> warnings;
    const auto report = refcast::run_experiment(config, &warnings, mode);
    print_warnings(warnings);
    print_summary(report);
    std::cout << "report: " << config.output_dir << "/report.json\n";
    return exit_code_for(report, mode == refcast::RunMode::Full);
}

int cmd_report(const std::string& run_dir) {
    std::ifstream file(std::filesystem::path(run_dir) / "report.json");
    if (!file) throw refcast::FileNotFoundError(run_dir + "/report.json");
    nlohmann::json j;
    file >> j;
    const auto report = refcast::report_from_json(j);
    print_summary(report);
    std::printf("wallclock: %.2fs\n", report.wallclock_seconds);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-refined in-context traffic forecasting"};
    app.require_subcommand(1);

    CommonFlags ingest_flags, run_flags, baseline_flags;
    std::string report_dir;

    auto* ingest = app.add_subcommand("ingest", "load a dataset and write its normalized form");
    add_common_flags(ingest, ingest_flags);

    auto* run = app.add_subcommand("run", "run the full prediction experiment");
    add_common_flags(run, run_flags);

    auto* baseline = app.add_subcommand("baseline", "run classical baselines only");
    add_common_flags(baseline, baseline_flags);

    auto* report = app.add_subcommand("report", "print the summary of a finished run");
    report->add_option("--run-dir", report_dir, "directory of a finished run")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (ingest->parsed()) return cmd_ingest(ingest_flags);
        if (run->parsed()) return cmd_run(run_flags, refcast::RunMode::Full);
        if (baseline->parsed()) return cmd_run(baseline_flags, refcast::RunMode::BaselinesOnly);
        if (report->parsed()) return cmd_report(report_dir);
    } catch (const refcast::AuthError& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitBackendError;
    } catch (const refcast::RateLimitedError& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitBackendError;
    } catch (const refcast::TimeoutError& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitBackendError;
    } catch (const refcast::Error& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitInputError;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitInputError;
    }
    return kExitOk;
}
