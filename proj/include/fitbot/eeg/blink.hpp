#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "fitbot/eeg/trace.hpp"
#include "fitbot/error.hpp"

namespace fitbot::eeg {

struct BlinkParams {
    double threshold = 150.0;     // raw ADC counts, applied to |first difference|
    double merge_gap_ms = 200.0;  // nonzero samples closer than this form one event
    double refractory_ms = 300.0; // minimum spacing between accepted events

    void validate() const {
        if (!(threshold >= 0.0)) throw InvalidArgument("threshold must be non-negative");
        if (!(merge_gap_ms > 0.0)) throw InvalidArgument("merge_gap_ms must be positive");
        if (!(refractory_ms >= merge_gap_ms))
            throw InvalidArgument("refractory_ms must be at least merge_gap_ms");
    }
};

struct BlinkEvent {
    double peak_time_ms = 0.0;
    double peak_magnitude = 0.0;

    bool operator==(const BlinkEvent&) const = default;
};

struct DetectionReport {
    std::size_t true_blinks = 0;
    std::size_t detected = 0;
    std::size_t matched = 0;
    double recall = 1.0;
    double precision = 1.0;
    double tolerance_ms = 250.0;

    bool operator==(const DetectionReport&) const = default;
};

/// d[i] = x[i+1] - x[i]. Sample i of the result keeps the timestamp of input
/// sample i; rate and metadata carry over.
inline EegTrace first_difference(const EegTrace& trace) {
    trace.validate();
    if (trace.size() < 2) throw InvalidArgument("first_difference needs at least 2 samples");
    EegTrace out;
    out.sample_rate_hz = trace.sample_rate_hz;
    out.electrodes = trace.electrodes;
    out.start_time_ms = trace.start_time_ms;
    out.samples.resize(trace.size() - 1);
    for (std::size_t i = 0; i + 1 < trace.size(); ++i)
        out.samples[i] = trace.samples[i + 1] - trace.samples[i];
    return out;
}

/// Keeps |d| where |d| >= threshold and zeroes everything else.
inline EegTrace amplitude_smooth(const EegTrace& diff_trace, double threshold) {
    if (!(threshold >= 0.0)) throw InvalidArgument("threshold must be non-negative");
    EegTrace out = diff_trace;
    for (auto& v : out.samples) {
        const double magnitude = std::abs(v);
        v = magnitude >= threshold ? magnitude : 0.0;
    }
    return out;
}

/// Blink detection: first difference, amplitude smoothing, then judgment.
///
/// The judgment groups nonzero smoothed samples whose spacing is below
/// merge_gap_ms; each group reports its largest magnitude (earliest on ties).
/// A group peak closer than refractory_ms to the previously accepted event is
/// dropped. A blink's rising and falling edges land in one group.
inline std::vector<BlinkEvent> detect_blinks(const EegTrace& trace, const BlinkParams& params = {}) {
    params.validate();
    const EegTrace smoothed = amplitude_smooth(first_difference(trace), params.threshold);

    std::vector<BlinkEvent> groups;
    bool open = false;
    double last_nonzero_ms = 0.0;
    for (std::size_t i = 0; i < smoothed.size(); ++i) {
        const double magnitude = smoothed.samples[i];
        if (magnitude == 0.0) continue;
        const double t = smoothed.time_of(i);
        if (!open || t - last_nonzero_ms >= params.merge_gap_ms) {
            groups.push_back({t, magnitude});
            open = true;
        } else if (magnitude > groups.back().peak_magnitude) {
            groups.back() = {t, magnitude};
        }
        last_nonzero_ms = t;
    }

    std::vector<BlinkEvent> events;
    events.reserve(groups.size());
    for (const auto& g : groups) {
        if (!events.empty() && g.peak_time_ms - events.back().peak_time_ms < params.refractory_ms) continue;
        events.push_back(g);
    }
    return events;
}

/// Greedy one-to-one matching in time order: each detection takes the earliest
/// unmatched truth instant within tolerance_ms.
inline DetectionReport evaluate_detection(const std::vector<BlinkEvent>& events,
                                          const std::vector<double>& truth_ms, double tolerance_ms = 250.0) {
    if (!(tolerance_ms > 0.0)) throw InvalidArgument("tolerance_ms must be positive");
    if (!std::is_sorted(truth_ms.begin(), truth_ms.end()))
        throw InvalidArgument("truth_ms must be sorted ascending");

    std::vector<BlinkEvent> ordered = events;
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const BlinkEvent& a, const BlinkEvent& b) { return a.peak_time_ms < b.peak_time_ms; });

    std::vector<bool> taken(truth_ms.size(), false);
    std::size_t matched = 0;
    for (const auto& e : ordered) {
        for (std::size_t j = 0; j < truth_ms.size(); ++j) {
            if (taken[j]) continue;
            if (truth_ms[j] > e.peak_time_ms + tolerance_ms) break;
            if (std::abs(truth_ms[j] - e.peak_time_ms) <= tolerance_ms) {
                taken[j] = true;
                ++matched;
                break;
            }
        }
    }

    DetectionReport report;
    report.true_blinks = truth_ms.size();
    report.detected = events.size();
    report.matched = matched;
    report.tolerance_ms = tolerance_ms;
    report.recall = report.true_blinks > 0
                        ? static_cast<double>(matched) / static_cast<double>(report.true_blinks)
                        : 1.0;
    report.precision =
        report.detected > 0 ? static_cast<double>(matched) / static_cast<double>(report.detected) : 1.0;
    return report;
}

} // namespace fitbot::eeg
