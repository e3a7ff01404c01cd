#ifndef REFCAST_REFINE_HPP
#define REFCAST_REFINE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "refcast/errors.hpp"
#include "refcast/feedback.hpp"
#include "refcast/gateway.hpp"
#include "refcast/parser.hpp"
#include "refcast/prompt.hpp"
#include "refcast/sinusoid.hpp"
#include "refcast/timeseries.hpp"

namespace refcast {

/// Bounds and thresholds of the refinement loop.
struct LoopConfig {
    std::size_t max_iters = 3;       // total prediction calls per window
    double rel_epsilon = 0.05;       // relative-MAE improvement floor
    std::size_t keep_last = 3;       // history triples that survive truncation
    std::size_t token_budget = 8192;
    bool parse_retry = true;         // one re-ask with a format reminder
    bool llm_feedback = false;       // also request a feedback narrative

    void validate() const {
        if (max_iters < 1) throw ConfigError("max_iters must be at least 1");
        if (!(rel_epsilon > 0.0 && rel_epsilon < 1.0)) {
            throw ConfigError("rel_epsilon must lie in (0, 1)");
        }
        if (keep_last < 1) throw ConfigError("keep_last must be at least 1");
        if (token_budget < 1) throw ConfigError("token_budget must be positive");
    }
};

enum class StopReason { Converged, MaxIters, NonImproving, ParseFailure };

inline std::string to_string(StopReason r) {
    switch (r) {
        case StopReason::Converged: return "converged";
        case StopReason::MaxIters: return "max_iters";
        case StopReason::NonImproving: return "non_improving";
        case StopReason::ParseFailure: return "parse_failure";
    }
    return "unknown";
}

/// A prediction together with the texts that produced and carried it.
struct PredictionResult {
    ParsedPrediction parsed;
    std::string raw_text;      // verbatim backend reply
    std::string request_text;  // user message that was sent
};

/// One loop iteration: the prediction, its machine-computed feedback, and
/// the refinement instruction derived from that feedback.
struct RefinementIteration {
    ParsedPrediction prediction;
    std::string raw_text;
    std::string canonical_answer;  // parsed values re-rendered in the grammar
    FeedbackReport feedback;
    std::string feedback_text;
    std::string refinement_text;
    std::string request_text;

    double mae() const { return feedback.overall_mae; }
};

/// Full history of one window's refinement run.
struct RefinementTrace {
    WindowedSample window;
    std::vector<RefinementIteration> iterations;
    std::size_t best_iteration = 0;
    StopReason stop_reason = StopReason::MaxIters;

    double best_mae() const { return iterations[best_iteration].mae(); }
};

namespace refine_detail {

inline std::size_t period_for_window(const WindowedSample& window) {
    const std::int64_t res = window.resolution_seconds();
    if (res <= 0) return 24;
    const std::int64_t period = 86400 / res;
    return period >= 2 ? static_cast<std::size_t>(period) : 2;
}

inline SinusoidFit offset_only_fit(const std::vector<double>& values, std::size_t period) {
    double mean = 0.0;
    for (double v : values) mean += v;
    if (!values.empty()) mean /= static_cast<double>(values.size());
    return SinusoidFit{0.0, 0.0, mean, period};
}

inline SinusoidFit fit_or_offset(const std::vector<double>& values, std::size_t period) {
    if (values.size() >= 3) {
        try {
            return fit_sinusoid(values, period);
        } catch (const Error&) {
            // Degenerate projection: fall back to the plain mean level.
        }
    }
    return offset_only_fit(values, period);
}

// Candidate steps harvested from the model's own prose: lines carrying a
// suggestion marker become steps, subject to the training blocklist later.
inline std::vector<std::string> harvest_suggested_steps(const std::string& raw_text) {
    std::vector<std::string> out;
    std::string lower = detail::lowercase(raw_text);
    std::size_t line_start = 0;
    while (line_start <= raw_text.size()) {
        std::size_t line_end = raw_text.find('\n', line_start);
        if (line_end == std::string::npos) line_end = raw_text.size();
        const std::string line = raw_text.substr(line_start, line_end - line_start);
        const std::string line_lower = lower.substr(line_start, line_end - line_start);
        if (line_lower.find("suggest") != std::string::npos ||
            line_lower.find("next step") != std::string::npos ||
            line_lower.find("recommend") != std::string::npos) {
            std::string trimmed = line;
            while (!trimmed.empty() && (trimmed.front() == ' ' || trimmed.front() == '-')) {
                trimmed.erase(trimmed.begin());
            }
            if (!trimmed.empty()) out.push_back(trimmed);
        }
        if (line_end == raw_text.size()) break;
        line_start = line_end + 1;
    }
    return out;
}

inline std::string format_reminder(const std::vector<std::string>& labels) {
    return "Reminder: answer with exactly " + std::to_string(labels.size()) +
           " lines, one per timestamp from " + labels.front() + " to " + labels.back() +
           ", each formatted as \"HH:MM - value\", and no other text.";
}

}  // namespace refine_detail

/// Computes the feedback report for one prediction: overall error and both
/// sinusoid projections are computed programmatically, completeness comes
/// from the parser, and the method summary from the prediction text. When a
/// gateway is supplied, a narrative version is additionally requested from
/// the backend; narrative failures degrade to a warning, never an error.
inline FeedbackReport compute_feedback(const WindowedSample& window,
                                       const ParsedPrediction& parsed,
                                       const std::string& raw_text,
                                       Gateway* narrative_gateway = nullptr,
                                       const TemplateSet& tmpl = TemplateSet::defaults(),
                                       std::vector<std::string>* warnings = nullptr) {
    FeedbackReport report;
    report.horizon_len = window.truth_volumes.size();
    report.missing_hours = parsed.missing_hours;
    report.malformed = parsed.used_list_fallback || !parsed.warnings.empty();

    // Align truth to the hours the parser actually matched.
    std::map<std::string, double> truth_by_label;
    const auto truth_labels = hour_labels(window.truth_timestamps);
    for (std::size_t i = 0; i < truth_labels.size(); ++i) {
        truth_by_label.emplace(truth_labels[i], window.truth_volumes[i]);
    }
    std::vector<double> truth_aligned;
    std::vector<double> pred_aligned;
    for (std::size_t i = 0; i < parsed.matched_hours.size(); ++i) {
        const auto it = truth_by_label.find(parsed.matched_hours[i]);
        if (it == truth_by_label.end()) continue;
        truth_aligned.push_back(it->second);
        pred_aligned.push_back(parsed.values[i]);
    }
    if (!truth_aligned.empty()) {
        report.overall_mae = mae(truth_aligned, pred_aligned);
        report.overall_mse = mse(truth_aligned, pred_aligned);
    }

    const std::size_t period = refine_detail::period_for_window(window);
    report.truth_fit = refine_detail::fit_or_offset(window.truth_volumes, period);
    report.pred_fit = parsed.complete()
                          ? refine_detail::fit_or_offset(pred_aligned, period)
                          : refine_detail::offset_only_fit(pred_aligned, period);

    report.method_summary = extract_method_summary(raw_text);

    // Deterministic actionable steps derived from the facet comparisons.
    std::vector<std::string> steps;
    const double level_gap = report.pred_fit.offset - report.truth_fit.offset;
    const double level_scale = std::max(std::abs(report.truth_fit.offset), 1e-9);
    if (std::abs(level_gap) > 0.05 * level_scale) {
        steps.push_back(std::string(level_gap < 0 ? "Raise" : "Lower") +
                        " the overall level of the forecast; the predicted mean " +
                        format_coeff(report.pred_fit.offset) + " should be closer to " +
                        format_coeff(report.truth_fit.offset) + ".");
    }
    const double truth_amp = report.truth_fit.amplitude();
    const double pred_amp = report.pred_fit.amplitude();
    if (truth_amp > 0.05 * level_scale) {
        if (pred_amp < 0.5 * truth_amp) {
            steps.push_back(
                "Increase the daily swing: the prediction is flatter than the observed "
                "cycle of amplitude " +
                format_coeff(truth_amp) + ".");
        } else if (pred_amp > 1.5 * truth_amp) {
            steps.push_back(
                "Reduce the daily swing: the prediction overshoots the observed cycle of "
                "amplitude " +
                format_coeff(truth_amp) + ".");
        }
        if (pred_amp < 0.5 * truth_amp || pred_amp > 1.5 * truth_amp) {
            steps.push_back(
                "Consider a seasonal statistical approach such as seasonal ARIMA, since a "
                "daily cycle dominates this series.");
        }
    }
    if (!report.missing_hours.empty()) {
        steps.push_back("Provide a value for every required timestamp; " +
                        std::to_string(report.missing_hours.size()) + " are missing.");
    }
    if (report.malformed) {
        steps.push_back("Use the exact line format \"HH:MM - value\" with no extra prose.");
    }
    for (auto& suggested : refine_detail::harvest_suggested_steps(raw_text)) {
        steps.push_back(std::move(suggested));
    }
    steps = filter_actionable_steps(steps);
    if (steps.empty()) {
        steps.push_back(
            "Keep the forecast aligned with the observed daily pattern and keep the "
            "required line format.");
    }
    report.actionable_steps = std::move(steps);

    if (narrative_gateway != nullptr) {
        try {
            std::string text = tmpl.narrative_request;
            text = detail::replace_all(
                text, "{truth_lines}",
                format_answer_lines(truth_labels, window.truth_volumes));
            text = detail::replace_all(
                text, "{pred_lines}",
                parsed.values.empty()
                    ? std::string("(no values)")
                    : format_answer_lines(parsed.matched_hours, parsed.values));
            const auto response = narrative_gateway->complete(
                narrative_gateway->make_request(tmpl.system, text));
            report.llm_feedback_text = response.text;
        } catch (const Error& ex) {
            if (warnings != nullptr) {
                warnings->push_back(std::string("feedback narrative unavailable: ") +
                                    ex.what());
            }
        }
    }
    return report;
}

namespace refine_detail {

inline PredictionResult send_and_parse(Gateway& gateway, const TemplateSet& tmpl,
                                       std::string user_text,
                                       const std::vector<std::string>& expected_labels,
                                       bool parse_retry) {
    PredictionResult result;
    result.request_text = user_text;
    ChatResponse response;
    try {
        response = gateway.complete(gateway.make_request(tmpl.system, user_text));
    } catch (const Error& ex) {
        throw PredictionFailedError(ex.what());
    }
    result.raw_text = response.text;
    try {
        result.parsed =
            parse_prediction(response.text, expected_labels, ExtractionMode::Lenient);
        return result;
    } catch (const Error& first_error) {
        if (!parse_retry) throw PredictionFailedError(first_error.what());
        user_text += "\n\n" + format_reminder(expected_labels);
        result.request_text = user_text;
        try {
            response = gateway.complete(gateway.make_request(tmpl.system, user_text));
            result.raw_text = response.text;
            result.parsed =
                parse_prediction(response.text, expected_labels, ExtractionMode::Lenient);
            return result;
        } catch (const Error& second_error) {
            throw PredictionFailedError(second_error.what());
        }
    }
}

}  // namespace refine_detail

/// First prediction for a window: the prediction bundle (demonstrations,
/// input, question) is sent once; a parse failure triggers one re-ask with a
/// format reminder when enabled.
inline PredictionResult initial_predict(const WindowedSample& window,
                                        const std::vector<DemonstrationExample>& demos,
                                        Gateway& gateway, const LoopConfig& cfg = {},
                                        const TemplateSet& tmpl = TemplateSet::defaults()) {
    cfg.validate();
    const auto input = render_input(window.input_volumes, window.input_timestamps, tmpl);
    const auto question = render_question(window.truth_timestamps, tmpl);
    const auto bundle = build_prediction_bundle(demos, input, question, cfg.token_budget, tmpl);
    return refine_detail::send_and_parse(gateway, tmpl, bundle.text(),
                                         hour_labels(window.truth_timestamps),
                                         cfg.parse_retry);
}

/// One refinement step: rebuilds the history bundle (input followed by the
/// retained prior-prediction/feedback/refinement triples) and asks for a new
/// prediction. The caller appends the result to the trace.
inline PredictionResult refine_once(const WindowedSample& window,
                                    const RefinementTrace& trace, Gateway& gateway,
                                    const LoopConfig& cfg = {},
                                    const TemplateSet& tmpl = TemplateSet::defaults()) {
    cfg.validate();
    if (trace.iterations.empty()) throw EmptyInputError("refinement trace");
    const auto input = render_input(window.input_volumes, window.input_timestamps, tmpl);
    std::vector<RefinementTriple> history;
    history.reserve(trace.iterations.size());
    for (const auto& it : trace.iterations) {
        RefinementTriple triple;
        // History carries the parsed values re-rendered canonically, so the
        // model re-reads clean grammar even if its reply was messy.
        triple.prediction_text = it.canonical_answer;
        triple.feedback_segment = make_segment(PromptKind::Feedback, it.feedback_text);
        triple.refinement_segment = make_segment(PromptKind::Refinement, it.refinement_text);
        history.push_back(std::move(triple));
    }
    const auto bundle = build_refinement_bundle(input, history, cfg.token_budget, cfg.keep_last);
    return refine_detail::send_and_parse(gateway, tmpl, bundle.text(),
                                         hour_labels(window.truth_timestamps),
                                         cfg.parse_retry);
}

namespace refine_detail {

inline RefinementIteration make_iteration(const WindowedSample& window,
                                          PredictionResult&& result, Gateway* narrative,
                                          const TemplateSet& tmpl,
                                          std::vector<std::string>* warnings) {
    RefinementIteration iteration;
    iteration.prediction = std::move(result.parsed);
    iteration.raw_text = std::move(result.raw_text);
    iteration.request_text = std::move(result.request_text);
    iteration.canonical_answer = format_answer_lines(iteration.prediction.matched_hours,
                                                     iteration.prediction.values);
    iteration.feedback = compute_feedback(window, iteration.prediction, iteration.raw_text,
                                          narrative, tmpl, warnings);
    const auto feedback_segment = render_feedback(iteration.feedback, tmpl);
    iteration.feedback_text = feedback_segment.text;
    iteration.refinement_text = render_refinement_instruction(feedback_segment, tmpl).text;
    return iteration;
}

}  // namespace refine_detail

/// Runs the full loop on one window of the demonstration split: initial
/// prediction, then refinements until convergence, two non-improving steps,
/// a parse failure, or the iteration cap. The best iteration (lowest MAE) is
/// tracked throughout; a refinement failure keeps everything already earned.
inline RefinementTrace run_refine_loop(const WindowedSample& window,
                                       const std::vector<DemonstrationExample>& demos,
                                       Gateway& gateway, const LoopConfig& cfg = {},
                                       const TemplateSet& tmpl = TemplateSet::defaults(),
                                       std::vector<std::string>* warnings = nullptr) {
    cfg.validate();
    Gateway* narrative = cfg.llm_feedback ? &gateway : nullptr;

    RefinementTrace trace;
    trace.window = window;

    auto initial = initial_predict(window, demos, gateway, cfg, tmpl);
    trace.iterations.push_back(refine_detail::make_iteration(window, std::move(initial),
                                                             narrative, tmpl, warnings));
    trace.stop_reason = StopReason::MaxIters;

    std::size_t worse_streak = 0;
    for (std::size_t i = 1; i < cfg.max_iters; ++i) {
        PredictionResult refined;
        try {
            refined = refine_once(window, trace, gateway, cfg, tmpl);
        } catch (const PredictionFailedError& ex) {
            trace.stop_reason = StopReason::ParseFailure;
            if (warnings != nullptr) {
                warnings->push_back(std::string("refinement stopped: ") + ex.what());
            }
            break;
        }
        trace.iterations.push_back(refine_detail::make_iteration(window, std::move(refined),
                                                                 narrative, tmpl, warnings));
        const double prev = trace.iterations[trace.iterations.size() - 2].mae();
        const double cur = trace.iterations.back().mae();
        if (cur > prev) {
            if (++worse_streak >= 2) {
                trace.stop_reason = StopReason::NonImproving;
                break;
            }
        } else {
            worse_streak = 0;
            const double improvement = prev > 0.0 ? (prev - cur) / prev : 0.0;
            if (improvement < cfg.rel_epsilon) {
                trace.stop_reason = StopReason::Converged;
                break;
            }
        }
    }

    trace.best_iteration = 0;
    for (std::size_t i = 1; i < trace.iterations.size(); ++i) {
        if (trace.iterations[i].mae() < trace.iterations[trace.best_iteration].mae()) {
            trace.best_iteration = i;
        }
    }
    return trace;
}

/// Promotes each trace's best iteration into a demonstration and returns the
/// k lowest-error examples.
inline std::vector<DemonstrationExample> harvest_demonstrations(
    const std::vector<RefinementTrace>& traces, std::size_t k,
    const TemplateSet& tmpl = TemplateSet::defaults()) {
    if (traces.empty()) throw EmptyInputError("trace list");
    if (k == 0) throw Error("k must be positive");

    std::vector<const RefinementTrace*> order;
    order.reserve(traces.size());
    for (const auto& t : traces) order.push_back(&t);
    std::stable_sort(order.begin(), order.end(),
                     [](const RefinementTrace* a, const RefinementTrace* b) {
                         return a->best_mae() < b->best_mae();
                     });
    if (order.size() > k) order.resize(k);

    std::vector<DemonstrationExample> out;
    out.reserve(order.size());
    for (const auto* t : order) {
        const auto& best = t->iterations[t->best_iteration];
        const auto input =
            render_input(t->window.input_volumes, t->window.input_timestamps, tmpl);
        out.push_back(make_demonstration(input.text, best.canonical_answer,
                                         DemonstrationExample::Provenance::Harvested,
                                         best.mae()));
    }
    return out;
}

/// Evaluation-mode prediction: exactly one backend call with the prediction
/// bundle (harvested demonstrations, input, question). No feedback or
/// refinement segments are ever part of this request, and no retry happens.
inline PredictionResult evaluate_predict(const WindowedSample& window,
                                         const std::vector<DemonstrationExample>& harvested,
                                         Gateway& gateway, const LoopConfig& cfg = {},
                                         const TemplateSet& tmpl = TemplateSet::defaults()) {
    cfg.validate();
    const auto input = render_input(window.input_volumes, window.input_timestamps, tmpl);
    const auto question = render_question(window.truth_timestamps, tmpl);
    const auto bundle =
        build_prediction_bundle(harvested, input, question, cfg.token_budget, tmpl);
    return refine_detail::send_and_parse(gateway, tmpl, bundle.text(),
                                         hour_labels(window.truth_timestamps),
                                         /*parse_retry=*/false);
}

// ---- trace serialization ----

inline nlohmann::json to_json(const FeedbackReport& report) {
    nlohmann::json j = {
        {"overall_mae", report.overall_mae},
        {"overall_mse", report.overall_mse},
        {"truth_fit",
         {{"sin", report.truth_fit.sin_coeff},
          {"cos", report.truth_fit.cos_coeff},
          {"offset", report.truth_fit.offset},
          {"period", report.truth_fit.period_samples}}},
        {"pred_fit",
         {{"sin", report.pred_fit.sin_coeff},
          {"cos", report.pred_fit.cos_coeff},
          {"offset", report.pred_fit.offset},
          {"period", report.pred_fit.period_samples}}},
        {"missing_hours", report.missing_hours},
        {"malformed", report.malformed},
        {"method_summary", report.method_summary},
        {"actionable_steps", report.actionable_steps},
    };
    if (report.llm_feedback_text) j["llm_feedback_text"] = *report.llm_feedback_text;
    return j;
}

inline nlohmann::json to_json(const RefinementTrace& trace) {
    nlohmann::json iterations = nlohmann::json::array();
    for (const auto& it : trace.iterations) {
        iterations.push_back({
            {"values", it.prediction.values},
            {"matched_hours", it.prediction.matched_hours},
            {"missing_hours", it.prediction.missing_hours},
            {"raw_text", it.raw_text},
            {"canonical_answer", it.canonical_answer},
            {"feedback", to_json(it.feedback)},
            {"feedback_text", it.feedback_text},
            {"refinement_text", it.refinement_text},
            {"request_text", it.request_text},
            {"mae", it.mae()},
        });
    }
    return nlohmann::json{
        {"window",
         {{"input_timestamps", trace.window.input_timestamps},
          {"input_volumes", trace.window.input_volumes},
          {"truth_timestamps", trace.window.truth_timestamps},
          {"truth_volumes", trace.window.truth_volumes}}},
        {"iterations", iterations},
        {"best_iteration", trace.best_iteration},
        {"stop_reason", to_string(trace.stop_reason)},
    };
}

}  // namespace refcast

#endif  // REFCAST_REFINE_HPP
