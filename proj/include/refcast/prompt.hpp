#ifndef REFCAST_PROMPT_HPP
#define REFCAST_PROMPT_HPP

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "refcast/errors.hpp"
#include "refcast/feedback.hpp"
#include "refcast/timeutil.hpp"

namespace refcast {

enum class PromptKind {
    PredictionDemo,
    InputTemplate,
    Input,
    Question,
    Feedback,
    Refinement,
    PriorPrediction,
};

inline std::string to_string(PromptKind kind) {
    switch (kind) {
        case PromptKind::PredictionDemo: return "prediction_demo";
        case PromptKind::InputTemplate: return "input_template";
        case PromptKind::Input: return "input";
        case PromptKind::Question: return "question";
        case PromptKind::Feedback: return "feedback";
        case PromptKind::Refinement: return "refinement";
        case PromptKind::PriorPrediction: return "prior_prediction";
    }
    return "unknown";
}

/// One typed piece of prompt text. Token counts use a fixed chars/4 heuristic
/// so budgets stay backend-agnostic.
struct PromptSegment {
    PromptKind kind = PromptKind::Input;
    std::string text;
    std::size_t token_estimate = 0;
};

inline std::size_t estimate_tokens(const std::string& text) {
    return (text.size() + 3) / 4;
}

inline PromptSegment make_segment(PromptKind kind, std::string text) {
    if (text.empty()) throw Error("prompt segment text must not be empty");
    const std::size_t tokens = estimate_tokens(text);
    return PromptSegment{kind, std::move(text), tokens};
}

/// An ordered concatenation of segments, ready to send as one user message.
struct PromptBundle {
    std::vector<PromptSegment> segments;
    std::size_t total_tokens = 0;

    /// The wire text: segments joined by blank lines.
    std::string text() const {
        std::string out;
        for (std::size_t i = 0; i < segments.size(); ++i) {
            if (i > 0) out += "\n\n";
            out += segments[i].text;
        }
        return out;
    }
};

inline PromptBundle make_bundle(std::vector<PromptSegment> segments) {
    PromptBundle bundle;
    bundle.segments = std::move(segments);
    for (const auto& s : bundle.segments) bundle.total_tokens += s.token_estimate;
    return bundle;
}

enum class BundleForm { Prediction, Refinement };

/// Checks the segment-kind sequence against the expected shape:
/// Prediction = Demo* Input Question, Refinement = Input (Prior Feedback Refinement)+.
inline bool kind_sequence_valid(const PromptBundle& bundle, BundleForm form) {
    const auto& segs = bundle.segments;
    std::size_t i = 0;
    if (form == BundleForm::Prediction) {
        while (i < segs.size() && segs[i].kind == PromptKind::PredictionDemo) ++i;
        if (i + 2 != segs.size()) return false;
        return segs[i].kind == PromptKind::Input && segs[i + 1].kind == PromptKind::Question;
    }
    if (segs.size() < 4 || segs[0].kind != PromptKind::Input) return false;
    if ((segs.size() - 1) % 3 != 0) return false;
    for (i = 1; i + 2 < segs.size() + 1 && i < segs.size(); i += 3) {
        if (segs[i].kind != PromptKind::PriorPrediction ||
            segs[i + 1].kind != PromptKind::Feedback ||
            segs[i + 2].kind != PromptKind::Refinement) {
            return false;
        }
    }
    return true;
}

/// A worked question-answer example included ahead of the real input. Seed
/// examples are hand-written; harvested ones come from refined predictions
/// and carry the error of the answer they teach.
struct DemonstrationExample {
    std::string input_text;
    std::string answer_text;
    enum class Provenance { Seed, Harvested } provenance = Provenance::Seed;
    std::optional<double> quality_mae;
};

inline DemonstrationExample make_demonstration(std::string input_text, std::string answer_text,
                                               DemonstrationExample::Provenance provenance,
                                               std::optional<double> quality_mae = std::nullopt) {
    if (input_text.empty() || answer_text.empty()) {
        throw Error("demonstration texts must not be empty");
    }
    if (provenance == DemonstrationExample::Provenance::Harvested && !quality_mae) {
        throw Error("harvested demonstrations must carry quality_mae");
    }
    return DemonstrationExample{std::move(input_text), std::move(answer_text), provenance,
                                quality_mae};
}

// ---- formatting helpers ----

inline std::string format_volume(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline std::string format_coeff(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

/// Writer side of the answer grammar: one "HH:MM - value" line per sample.
inline std::string format_answer_lines(const std::vector<std::string>& labels,
                                       const std::vector<double>& values) {
    if (labels.size() != values.size()) throw LengthMismatchError(labels.size(), values.size());
    std::string out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i > 0) out += "\n";
        out += labels[i] + " - " + format_volume(values[i]);
    }
    return out;
}

inline std::vector<std::string> hour_labels(const std::vector<std::int64_t>& timestamps) {
    std::vector<std::string> out;
    out.reserve(timestamps.size());
    for (auto ts : timestamps) out.push_back(format_hour_label(ts));
    return out;
}

// ---- templates ----

namespace templates {

inline constexpr const char* kInput =
    "Observed traffic for {date_span}:\n{hour_lines}";

inline constexpr const char* kQuestion =
    "Predict the traffic for {horizon}. Answer with exactly {count} lines and no other "
    "text, one line per timestamp from {first_label} to {last_label}, each formatted as "
    "\"HH:MM - value\".";

inline constexpr const char* kDemo = "{input_text}\nAnswer:\n{answer_text}";

inline constexpr const char* kFeedback =
    "Feedback on the last prediction:\n"
    "1. Overall performance: mean absolute error {mae}, mean squared error {mse} across "
    "{count} values.\n"
    "2. Periodical performance: over a {period}-sample cycle the ground truth projects to "
    "sin={truth_sin}, cos={truth_cos}, level={truth_offset}; the prediction projects to "
    "sin={pred_sin}, cos={pred_cos}, level={pred_offset}.\n"
    "3. Format and completeness: {completeness}\n"
    "4. Prediction method: {method}\n"
    "Actionable steps:\n"
    "{steps}";

inline constexpr const char* kRefinement =
    "Refine the prediction by applying these actionable steps:\n"
    "{steps}\n"
    "Answer again with one line per required timestamp in the form \"HH:MM - value\" and "
    "no other text.";

inline constexpr const char* kSystem =
    "You are a precise assistant for wireless traffic forecasting. Follow the examples "
    "and answer in the exact format requested.";

inline constexpr const char* kNarrativeRequest =
    "Evaluate the prediction against the ground truth and write concise feedback covering: "
    "overall error, how well the daily cycle is captured, format and completeness, and the "
    "prediction method with actionable steps to improve it.\n"
    "Ground truth:\n{truth_lines}\nPrediction:\n{pred_lines}";

}  // namespace templates

namespace detail {

inline std::string replace_all(std::string text, const std::string& placeholder,
                               const std::string& value) {
    std::size_t pos = 0;
    while ((pos = text.find(placeholder, pos)) != std::string::npos) {
        text.replace(pos, placeholder.size(), value);
        pos += value.size();
    }
    return text;
}

inline std::set<std::string> find_placeholders(const std::string& text) {
    std::set<std::string> out;
    std::size_t pos = 0;
    while ((pos = text.find('{', pos)) != std::string::npos) {
        const std::size_t end = text.find('}', pos + 1);
        if (end == std::string::npos) break;
        const std::string name = text.substr(pos + 1, end - pos - 1);
        const bool is_identifier =
            !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
                return (c >= 'a' && c <= 'z') || c == '_';
            });
        if (is_identifier) out.insert(name);
        pos = end + 1;
    }
    return out;
}

}  // namespace detail

/// The named text templates behind every rendered prompt. Defaults are built
/// in; `load_dir` overrides individual templates from plain-text files. Every
/// template is validated against its documented placeholder set, so a typo in
/// an override fails at startup instead of mid-run.
class TemplateSet {
public:
    std::string input = templates::kInput;
    std::string question = templates::kQuestion;
    std::string demo = templates::kDemo;
    std::string feedback = templates::kFeedback;
    std::string refinement = templates::kRefinement;
    std::string system = templates::kSystem;
    std::string narrative_request = templates::kNarrativeRequest;

    static TemplateSet defaults() { return TemplateSet{}; }

    /// Reads overrides from <dir>/{input,question,demo,feedback,refinement,
    /// system,narrative_request}.txt. Missing files keep the default.
    static TemplateSet load_dir(const std::string& dir) {
        TemplateSet set;
        auto maybe_read = [&dir](const char* name, std::string& target) {
            const std::filesystem::path path = std::filesystem::path(dir) / (std::string(name) + ".txt");
            std::ifstream file(path);
            if (!file) return;
            std::ostringstream buf;
            buf << file.rdbuf();
            std::string text = buf.str();
            while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
            target = std::move(text);
        };
        maybe_read("input", set.input);
        maybe_read("question", set.question);
        maybe_read("demo", set.demo);
        maybe_read("feedback", set.feedback);
        maybe_read("refinement", set.refinement);
        maybe_read("system", set.system);
        maybe_read("narrative_request", set.narrative_request);
        set.validate();
        return set;
    }

    /// Checks that each template carries exactly its documented placeholders.
    void validate() const {
        check("input", input, {"date_span", "hour_lines"});
        check("question", question, {"horizon", "count", "first_label", "last_label"});
        check("demo", demo, {"input_text", "answer_text"});
        check("feedback", feedback,
              {"mae", "mse", "count", "period", "truth_sin", "truth_cos", "truth_offset",
               "pred_sin", "pred_cos", "pred_offset", "completeness", "method", "steps"});
        check("refinement", refinement, {"steps"});
        check("system", system, {});
        check("narrative_request", narrative_request, {"truth_lines", "pred_lines"});
    }

private:
    static void check(const char* name, const std::string& text,
                      const std::set<std::string>& required) {
        const auto found = detail::find_placeholders(text);
        for (const auto& r : required) {
            if (found.count(r) == 0) {
                throw TemplateError(std::string(name) + " template missing {" + r + "}");
            }
        }
        for (const auto& f : found) {
            if (required.count(f) == 0) {
                throw TemplateError(std::string(name) + " template has unknown {" + f + "}");
            }
        }
    }
};

// ---- render operations ----

/// Renders historical traffic as natural-language text: a header naming the
/// date span, then one "HH:MM - value" line per sample (2 decimal places).
inline PromptSegment render_input(const std::vector<double>& volumes,
                                  const std::vector<std::int64_t>& timestamps,
                                  const TemplateSet& tmpl = TemplateSet::defaults()) {
    if (volumes.empty()) throw EmptyInputError("input window");
    if (volumes.size() != timestamps.size()) {
        throw LengthMismatchError(volumes.size(), timestamps.size());
    }
    const std::string first_date = format_utc_date(timestamps.front());
    const std::string last_date = format_utc_date(timestamps.back());
    const std::string span =
        first_date == last_date ? first_date : first_date + " to " + last_date;
    const std::string lines = format_answer_lines(hour_labels(timestamps), volumes);
    std::string text = detail::replace_all(tmpl.input, "{date_span}", span);
    text = detail::replace_all(text, "{hour_lines}", lines);
    return make_segment(PromptKind::Input, std::move(text));
}

/// Renders the question asking for one value per target timestamp, mandating
/// the machine-readable answer grammar.
inline PromptSegment render_question(const std::vector<std::int64_t>& horizon_timestamps,
                                     const TemplateSet& tmpl = TemplateSet::defaults()) {
    if (horizon_timestamps.empty()) throw EmptyInputError("horizon");
    const std::string first_date = format_utc_date(horizon_timestamps.front());
    const std::string last_date = format_utc_date(horizon_timestamps.back());
    const std::string horizon =
        first_date == last_date ? first_date : first_date + " to " + last_date;
    std::string text = detail::replace_all(tmpl.question, "{horizon}", horizon);
    text = detail::replace_all(text, "{count}", std::to_string(horizon_timestamps.size()));
    text = detail::replace_all(text, "{first_label}",
                               format_hour_label(horizon_timestamps.front()));
    text = detail::replace_all(text, "{last_label}",
                               format_hour_label(horizon_timestamps.back()));
    return make_segment(PromptKind::Question, std::move(text));
}

inline PromptSegment render_demo(const DemonstrationExample& demo,
                                 const TemplateSet& tmpl = TemplateSet::defaults()) {
    std::string text = detail::replace_all(tmpl.demo, "{input_text}", demo.input_text);
    text = detail::replace_all(text, "{answer_text}", demo.answer_text);
    return make_segment(PromptKind::PredictionDemo, std::move(text));
}

/// Assembles the prediction request: demonstrations, then input, then the
/// question. Demonstrations are added greedily, best harvested quality first
/// and seeds afterwards in their given order, until the token budget is hit.
/// The input and question are never dropped.
inline PromptBundle build_prediction_bundle(const std::vector<DemonstrationExample>& demos,
                                            const PromptSegment& input,
                                            const PromptSegment& question, std::size_t budget,
                                            const TemplateSet& tmpl = TemplateSet::defaults()) {
    if (input.kind != PromptKind::Input) throw KindMismatchError("expected an input segment");
    if (question.kind != PromptKind::Question) {
        throw KindMismatchError("expected a question segment");
    }
    const std::size_t base = input.token_estimate + question.token_estimate;
    if (base > budget) throw BudgetTooSmallError(base, budget);

    std::vector<const DemonstrationExample*> order;
    order.reserve(demos.size());
    for (const auto& d : demos) {
        if (d.provenance == DemonstrationExample::Provenance::Harvested) order.push_back(&d);
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const DemonstrationExample* a, const DemonstrationExample* b) {
                         return a->quality_mae.value_or(0.0) < b->quality_mae.value_or(0.0);
                     });
    for (const auto& d : demos) {
        if (d.provenance == DemonstrationExample::Provenance::Seed) order.push_back(&d);
    }

    std::vector<PromptSegment> segments;
    std::size_t used = base;
    for (const auto* d : order) {
        PromptSegment seg = render_demo(*d, tmpl);
        if (used + seg.token_estimate > budget) break;
        used += seg.token_estimate;
        segments.push_back(std::move(seg));
    }
    segments.push_back(input);
    segments.push_back(question);
    return make_bundle(std::move(segments));
}

namespace detail {

inline std::string steps_block(const std::vector<std::string>& steps) {
    if (steps.empty()) return "- (no further steps)";
    std::string out;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (i > 0) out += "\n";
        out += "- " + steps[i];
    }
    return out;
}

}  // namespace detail

/// Renders a feedback report as the four labeled sections: overall
/// performance, periodical performance, format/completeness, and prediction
/// method with actionable steps. Training-type steps never reach the text.
inline PromptSegment render_feedback(const FeedbackReport& report,
                                     const TemplateSet& tmpl = TemplateSet::defaults()) {
    std::string completeness;
    if (report.missing_hours.empty() && !report.malformed) {
        completeness = "the prediction is complete and well formatted.";
    } else {
        if (!report.missing_hours.empty()) {
            completeness = "values are missing for: ";
            for (std::size_t i = 0; i < report.missing_hours.size(); ++i) {
                if (i > 0) completeness += ", ";
                completeness += report.missing_hours[i];
            }
            completeness += ".";
        }
        if (report.malformed) {
            if (!completeness.empty()) completeness += " ";
            completeness += "Some lines did not follow the required format.";
        }
    }
    const std::string method =
        report.method_summary.empty() ? "no method was stated." : report.method_summary;
    const auto steps = filter_actionable_steps(report.actionable_steps);

    std::string text = tmpl.feedback;
    text = detail::replace_all(text, "{mae}", format_volume(report.overall_mae));
    text = detail::replace_all(text, "{mse}", format_volume(report.overall_mse));
    text = detail::replace_all(text, "{count}", std::to_string(report.horizon_len));
    text = detail::replace_all(text, "{period}",
                               std::to_string(report.truth_fit.period_samples));
    text = detail::replace_all(text, "{truth_sin}", format_coeff(report.truth_fit.sin_coeff));
    text = detail::replace_all(text, "{truth_cos}", format_coeff(report.truth_fit.cos_coeff));
    text = detail::replace_all(text, "{truth_offset}", format_coeff(report.truth_fit.offset));
    text = detail::replace_all(text, "{pred_sin}", format_coeff(report.pred_fit.sin_coeff));
    text = detail::replace_all(text, "{pred_cos}", format_coeff(report.pred_fit.cos_coeff));
    text = detail::replace_all(text, "{pred_offset}", format_coeff(report.pred_fit.offset));
    text = detail::replace_all(text, "{completeness}", completeness);
    text = detail::replace_all(text, "{method}", method);
    text = detail::replace_all(text, "{steps}", detail::steps_block(steps));
    return make_segment(PromptKind::Feedback, std::move(text));
}

/// Lifts the "- step" lines under the actionable-steps header out of a
/// rendered feedback segment, verbatim.
inline std::vector<std::string> extract_steps_block(const std::string& feedback_text) {
    std::vector<std::string> steps;
    const std::string marker = "Actionable steps:";
    std::size_t pos = feedback_text.find(marker);
    if (pos == std::string::npos) return steps;
    std::istringstream in(feedback_text.substr(pos + marker.size()));
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("- ", 0) == 0) steps.push_back(line.substr(2));
    }
    return steps;
}

/// Turns a feedback segment into the instruction that asks for a refreshed
/// prediction. The actionable steps are carried over verbatim so any method
/// suggestion (e.g. a named statistical technique) survives intact.
inline PromptSegment render_refinement_instruction(
    const PromptSegment& feedback_segment, const TemplateSet& tmpl = TemplateSet::defaults()) {
    if (feedback_segment.kind != PromptKind::Feedback) {
        throw KindMismatchError("refinement instruction requires a feedback segment");
    }
    const auto steps = extract_steps_block(feedback_segment.text);
    const std::string text =
        detail::replace_all(tmpl.refinement, "{steps}", detail::steps_block(steps));
    return make_segment(PromptKind::Refinement, text);
}

/// One completed iteration as it appears in the refinement history.
struct RefinementTriple {
    std::string prediction_text;
    PromptSegment feedback_segment;
    PromptSegment refinement_segment;
};

/// Assembles the refinement request: the input followed by the retained
/// (prior prediction, feedback, refinement) history in chronological order.
/// Oldest triples are dropped first when over budget, but the most recent
/// `keep_last` triples are never sacrificed.
inline PromptBundle build_refinement_bundle(const PromptSegment& input,
                                            const std::vector<RefinementTriple>& history,
                                            std::size_t budget, std::size_t keep_last) {
    if (history.empty()) throw EmptyInputError("refinement history");
    if (keep_last == 0) throw Error("keep_last must be positive");
    if (input.kind != PromptKind::Input) throw KindMismatchError("expected an input segment");

    std::vector<std::size_t> triple_tokens;
    std::vector<std::vector<PromptSegment>> triples;
    triples.reserve(history.size());
    for (const auto& h : history) {
        if (h.feedback_segment.kind != PromptKind::Feedback ||
            h.refinement_segment.kind != PromptKind::Refinement) {
            throw KindMismatchError("history triple has wrong segment kinds");
        }
        std::vector<PromptSegment> t;
        t.push_back(make_segment(PromptKind::PriorPrediction, h.prediction_text));
        t.push_back(h.feedback_segment);
        t.push_back(h.refinement_segment);
        std::size_t tokens = 0;
        for (const auto& s : t) tokens += s.token_estimate;
        triple_tokens.push_back(tokens);
        triples.push_back(std::move(t));
    }

    std::size_t first = 0;
    auto total = [&]() {
        std::size_t t = input.token_estimate;
        for (std::size_t i = first; i < triples.size(); ++i) t += triple_tokens[i];
        return t;
    };
    const std::size_t min_keep = std::min(keep_last, triples.size());
    while (total() > budget && triples.size() - first > min_keep) ++first;
    if (total() > budget) throw BudgetTooSmallError(total(), budget);

    std::vector<PromptSegment> segments;
    segments.push_back(input);
    for (std::size_t i = first; i < triples.size(); ++i) {
        for (auto& s : triples[i]) segments.push_back(std::move(s));
    }
    return make_bundle(std::move(segments));
}

}  // namespace refcast

#endif  // REFCAST_PROMPT_HPP
