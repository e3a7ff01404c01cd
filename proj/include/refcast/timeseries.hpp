#ifndef REFCAST_TIMESERIES_HPP
#define REFCAST_TIMESERIES_HPP

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <utility>
#include <vector>

#include "refcast/errors.hpp"

namespace refcast {

/// One traffic measurement: a non-negative load volume at a UTC timestamp.
struct TrafficSample {
    double volume = 0.0;
    std::int64_t timestamp = 0;  // epoch seconds, UTC
};

/// An evenly spaced, strictly increasing sequence of traffic samples.
///
/// The constructor validates the invariants: finite non-negative volumes,
/// strictly increasing timestamps, and consecutive timestamps exactly
/// `resolution_seconds` apart. Instances are immutable after construction.
class TimeSeries {
public:
    TimeSeries(std::vector<TrafficSample> samples, std::int64_t resolution_seconds,
               std::string source_id)
        : samples_(std::move(samples)),
          resolution_seconds_(resolution_seconds),
          source_id_(std::move(source_id)) {
        if (resolution_seconds_ <= 0) {
            throw Error("resolution must be positive, got " +
                        std::to_string(resolution_seconds_));
        }
        for (std::size_t i = 0; i < samples_.size(); ++i) {
            const TrafficSample& s = samples_[i];
            if (!std::isfinite(s.volume) || s.volume < 0.0) {
                throw Error("sample volume must be finite and non-negative at t=" +
                            std::to_string(s.timestamp));
            }
            if (s.timestamp < 0) {
                throw Error("sample timestamp must be non-negative");
            }
            if (i > 0 && samples_[i].timestamp <= samples_[i - 1].timestamp) {
                throw NonMonotoneTimestampsError(samples_[i].timestamp);
            }
            if (i > 0 &&
                samples_[i].timestamp - samples_[i - 1].timestamp != resolution_seconds_) {
                throw GapDetectedError(samples_[i - 1].timestamp);
            }
        }
    }

    const std::vector<TrafficSample>& samples() const { return samples_; }
    std::int64_t resolution_seconds() const { return resolution_seconds_; }
    const std::string& source_id() const { return source_id_; }
    std::size_t size() const { return samples_.size(); }
    bool empty() const { return samples_.empty(); }

    std::vector<double> volumes() const {
        std::vector<double> out;
        out.reserve(samples_.size());
        for (const auto& s : samples_) out.push_back(s.volume);
        return out;
    }

    std::vector<std::int64_t> timestamps() const {
        std::vector<std::int64_t> out;
        out.reserve(samples_.size());
        for (const auto& s : samples_) out.push_back(s.timestamp);
        return out;
    }

private:
    std::vector<TrafficSample> samples_;
    std::int64_t resolution_seconds_;
    std::string source_id_;
};

/// One (input, truth) pair cut from a series by the sliding window:
/// w historical samples followed by l future samples.
struct WindowedSample {
    std::vector<double> input_volumes;
    std::vector<std::int64_t> input_timestamps;
    std::vector<double> truth_volumes;
    std::vector<std::int64_t> truth_timestamps;

    std::size_t input_len() const { return input_volumes.size(); }
    std::size_t horizon_len() const { return truth_volumes.size(); }

    /// Sample spacing, derived from the window's own timestamps.
    std::int64_t resolution_seconds() const {
        if (input_timestamps.size() >= 2) return input_timestamps[1] - input_timestamps[0];
        if (!input_timestamps.empty() && !truth_timestamps.empty()) {
            return truth_timestamps.front() - input_timestamps.back();
        }
        return 0;
    }
};

/// Sums blocks of `factor` consecutive samples into one coarser sample.
///
/// The output timestamp is the first timestamp of each block and the
/// resolution is multiplied by `factor`. A trailing partial block is dropped
/// and reported through `warnings` when provided.
inline TimeSeries aggregate(const TimeSeries& series, std::size_t factor,
                            std::vector<std::string>* warnings = nullptr) {
    if (series.empty()) throw EmptySeriesError();
    if (factor == 0) throw Error("aggregation factor must be positive");
    if (factor == 1) return series;

    const auto& in = series.samples();
    const std::size_t blocks = in.size() / factor;
    if (blocks == 0) {
        throw SeriesTooShortError(factor, in.size());
    }
    if (in.size() % factor != 0 && warnings != nullptr) {
        warnings->push_back("aggregate: dropped trailing partial block of " +
                            std::to_string(in.size() % factor) + " samples");
    }
    std::vector<TrafficSample> out;
    out.reserve(blocks);
    for (std::size_t b = 0; b < blocks; ++b) {
        double sum = 0.0;
        for (std::size_t j = 0; j < factor; ++j) sum += in[b * factor + j].volume;
        out.push_back({sum, in[b * factor].timestamp});
    }
    return TimeSeries(std::move(out),
                      series.resolution_seconds() * static_cast<std::int64_t>(factor),
                      series.source_id());
}

/// Cuts the series into sliding windows of w input samples and l truth
/// samples, advancing the start by `stride` each time. Produces
/// floor((N - w - l) / stride) + 1 windows.
inline std::vector<WindowedSample> make_windows(const TimeSeries& series, std::size_t w,
                                                std::size_t l, std::size_t stride) {
    if (w == 0 || l == 0 || stride == 0) {
        throw Error("w, l, and stride must all be positive");
    }
    const std::size_t n = series.size();
    if (n < w + l) throw SeriesTooShortError(w + l, n);

    const std::size_t count = (n - w - l) / stride + 1;
    const auto volumes = series.volumes();
    const auto timestamps = series.timestamps();
    std::vector<WindowedSample> windows(count);
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t start = k * stride;
        WindowedSample& ws = windows[k];
        ws.input_volumes.assign(volumes.begin() + start, volumes.begin() + start + w);
        ws.input_timestamps.assign(timestamps.begin() + start,
                                   timestamps.begin() + start + w);
        ws.truth_volumes.assign(volumes.begin() + start + w,
                                volumes.begin() + start + w + l);
        ws.truth_timestamps.assign(timestamps.begin() + start + w,
                                   timestamps.begin() + start + w + l);
    }
    return windows;
}

/// Chronological demonstration/evaluation split: the first
/// ceil(demo_fraction * n) windows become demonstrations, the rest are held
/// out for evaluation. No shuffling, so evaluation never precedes its demos.
inline std::pair<std::vector<WindowedSample>, std::vector<WindowedSample>> split_windows(
    const std::vector<WindowedSample>& windows, double demo_fraction) {
    if (windows.empty()) throw EmptyInputError("window list");
    if (!(demo_fraction > 0.0 && demo_fraction < 1.0)) {
        throw Error("demo_fraction must lie in (0, 1)");
    }
    const std::size_t n = windows.size();
    std::size_t demo_count =
        static_cast<std::size_t>(std::ceil(demo_fraction * static_cast<double>(n)));
    if (demo_count > n) demo_count = n;
    std::vector<WindowedSample> demo(windows.begin(),
                                     windows.begin() + static_cast<std::ptrdiff_t>(demo_count));
    std::vector<WindowedSample> eval(windows.begin() + static_cast<std::ptrdiff_t>(demo_count),
                                     windows.end());
    return {std::move(demo), std::move(eval)};
}

/// Mean absolute error, (1/n) * sum |truth_i - pred_i|.
inline double mae(const std::vector<double>& truth, const std::vector<double>& pred) {
    if (truth.size() != pred.size()) throw LengthMismatchError(truth.size(), pred.size());
    if (truth.empty()) throw EmptyInputError("metric input");
    double acc = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) acc += std::abs(truth[i] - pred[i]);
    return acc / static_cast<double>(truth.size());
}

/// Mean squared error, (1/n) * sum (truth_i - pred_i)^2.
inline double mse(const std::vector<double>& truth, const std::vector<double>& pred) {
    if (truth.size() != pred.size()) throw LengthMismatchError(truth.size(), pred.size());
    if (truth.empty()) throw EmptyInputError("metric input");
    double acc = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double d = truth[i] - pred[i];
        acc += d * d;
    }
    return acc / static_cast<double>(truth.size());
}

}  // namespace refcast

#endif  // REFCAST_TIMESERIES_HPP
