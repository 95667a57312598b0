#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "fitbot/eeg/blink.hpp"
#include "fitbot/eeg/trace.hpp"
#include "fitbot/text.hpp"

namespace fitbot::eeg {

// CSV: "time_ms,amplitude" header, one sample per row.

inline std::string trace_to_csv(const EegTrace& trace) {
    std::string out = "time_ms,amplitude\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
        out += text::format_double(trace.time_of(i));
        out += ',';
        out += text::format_double(trace.samples[i]);
        out += '\n';
    }
    return out;
}

/// The sample rate is recovered from the time column; the electrode
/// configuration is not stored in CSV and comes back as the default.
inline EegTrace trace_from_csv(const std::string& contents, double fallback_rate_hz = 250.0) {
    const auto rows = text::lines(contents);
    if (rows.empty() || rows.front() != "time_ms,amplitude")
        throw FormatError("trace CSV must start with header 'time_ms,amplitude'");

    std::vector<double> times;
    EegTrace trace;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].empty()) continue;
        const auto fields = text::split(rows[r]);
        if (fields.size() != 2) throw FormatError("trace CSV row " + std::to_string(r + 1) + " needs 2 fields");
        times.push_back(text::parse_double(fields[0], "time_ms"));
        trace.samples.push_back(text::parse_double(fields[1], "amplitude"));
    }
    if (!times.empty()) trace.start_time_ms = static_cast<std::int64_t>(std::llround(times.front()));
    if (times.size() >= 2) {
        const double span = times.back() - times.front();
        if (!(span > 0.0)) throw FormatError("trace CSV time column must be increasing");
        trace.sample_rate_hz = 1000.0 * static_cast<double>(times.size() - 1) / span;
    } else {
        trace.sample_rate_hz = fallback_rate_hz;
    }
    trace.validate();
    return trace;
}

inline nlohmann::json to_json(const EegTrace& trace) {
    return {{"sample_rate_hz", trace.sample_rate_hz},
            {"start_time_ms", trace.start_time_ms},
            {"electrodes",
             {{"collecting", trace.electrodes.collecting},
              {"reference", trace.electrodes.reference},
              {"bias", trace.electrodes.bias}}},
            {"samples", trace.samples}};
}

inline EegTrace trace_from_json(const nlohmann::json& j) {
    try {
        EegTrace trace;
        trace.sample_rate_hz = j.at("sample_rate_hz").get<double>();
        trace.start_time_ms = j.at("start_time_ms").get<std::int64_t>();
        const auto& e = j.at("electrodes");
        trace.electrodes = {e.at("collecting").get<std::string>(), e.at("reference").get<std::string>(),
                            e.at("bias").get<std::string>()};
        trace.samples = j.at("samples").get<std::vector<double>>();
        trace.validate();
        return trace;
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(std::string("malformed trace JSON: ") + ex.what());
    }
}

inline nlohmann::json to_json(const std::vector<BlinkEvent>& events) {
    auto arr = nlohmann::json::array();
    for (const auto& e : events) arr.push_back({{"peak_time_ms", e.peak_time_ms}, {"peak_magnitude", e.peak_magnitude}});
    return {{"events", arr}};
}

inline std::vector<BlinkEvent> events_from_json(const nlohmann::json& j) {
    try {
        std::vector<BlinkEvent> events;
        for (const auto& e : j.at("events"))
            events.push_back({e.at("peak_time_ms").get<double>(), e.at("peak_magnitude").get<double>()});
        return events;
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(std::string("malformed events JSON: ") + ex.what());
    }
}

inline nlohmann::json to_json(const DetectionReport& r) {
    return {{"true_blinks", r.true_blinks}, {"detected", r.detected},   {"matched", r.matched},
            {"recall", r.recall},           {"precision", r.precision}, {"tolerance_ms", r.tolerance_ms}};
}

} // namespace fitbot::eeg
