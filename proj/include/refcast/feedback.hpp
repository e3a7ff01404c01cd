#ifndef REFCAST_FEEDBACK_HPP
#define REFCAST_FEEDBACK_HPP

#include <cctype>
#include <optional>
#include <string>
#include <vector>

#include "refcast/sinusoid.hpp"

namespace refcast {

/// Machine-computed critique of one prediction: overall error, periodicity
/// projections of truth and prediction, completeness, the stated method, and
/// the actionable steps proposed for the next refinement.
struct FeedbackReport {
    double overall_mae = 0.0;
    double overall_mse = 0.0;
    SinusoidFit truth_fit;
    SinusoidFit pred_fit;
    std::vector<std::string> missing_hours;
    bool malformed = false;
    std::string method_summary;
    std::vector<std::string> actionable_steps;
    std::optional<std::string> llm_feedback_text;
    std::size_t horizon_len = 0;
};

namespace detail {

inline std::string lowercase(const std::string& s) {
    std::string out = s;
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// True when `word` occurs at a word start (prefix match, so "train" also
// catches "training" but not "constraint").
inline bool contains_word_prefix(const std::string& haystack_lower, const std::string& word) {
    std::size_t pos = haystack_lower.find(word);
    while (pos != std::string::npos) {
        const bool at_start =
            pos == 0 || !std::isalpha(static_cast<unsigned char>(haystack_lower[pos - 1]));
        if (at_start) return true;
        pos = haystack_lower.find(word, pos + 1);
    }
    return false;
}

}  // namespace detail

/// Steps that would require model training are disallowed: the whole point of
/// the loop is improving predictions without any training cost.
inline bool is_training_step(const std::string& step) {
    const std::string lower = detail::lowercase(step);
    return detail::contains_word_prefix(lower, "train") ||
           detail::contains_word_prefix(lower, "lstm") ||
           detail::contains_word_prefix(lower, "fine-tun") ||
           detail::contains_word_prefix(lower, "finetun") ||
           lower.find("neural network") != std::string::npos;
}

/// Drops every step matching the training blocklist.
inline std::vector<std::string> filter_actionable_steps(const std::vector<std::string>& steps) {
    std::vector<std::string> kept;
    kept.reserve(steps.size());
    for (const auto& s : steps) {
        if (!is_training_step(s)) kept.push_back(s);
    }
    return kept;
}

}  // namespace refcast

#endif  // REFCAST_FEEDBACK_HPP
