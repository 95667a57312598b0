#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "fitbot/error.hpp"
#include "fitbot/text.hpp"

namespace fitbot::cli {

// Every field defaults to the library default; empty paths mean "use the
// file of the same role under the output directory" or "generate".

struct EegConfig {
    double duration_ms = 20000.0;
    double sample_rate_hz = 25.0;
    double noise_amplitude = 40.0;
    double blink_amplitude = 600.0;
    std::size_t blinks = 20;
    double threshold = 150.0;
    double merge_gap_ms = 200.0;
    double refractory_ms = 300.0;
    double tolerance_ms = 250.0;
    double recall_floor = 0.85;
    std::string trace;  // detect input
    std::string events; // eval input
    std::string truth;  // eval input

    bool operator==(const EegConfig&) const = default;
};

struct EmotionConfig {
    // train
    std::string data_dir; // empty: separable toy set
    std::size_t toy_count = 200;
    std::int64_t toy_dim = 8;
    std::int64_t toy_min_length = 4;
    std::int64_t toy_max_length = 10;
    double toy_noise = 0.2;
    std::int64_t hidden_dim = 32;
    double init_scale = 0.08;
    double learning_rate = 0.05;
    std::size_t steps = 2000;
    std::size_t batch_size = 16;
    std::size_t log_every = 50;
    double accuracy_floor = 0.0; // 0 disables the check
    // classify
    std::string params; // empty: <out>/params.json
    std::string input;  // FrameSequence JSON
    bool zero_params = false;
    // gradcheck
    std::size_t gradcheck_instances = 5;
    std::int64_t gradcheck_input_dim = 3;
    std::int64_t gradcheck_hidden_dim = 4;
    std::int64_t gradcheck_length = 5;
    std::size_t gradcheck_batch = 2;
    double gradcheck_epsilon = 1e-5;
    double gradcheck_tolerance = 1e-4;

    bool operator==(const EmotionConfig&) const = default;
};

struct SimConfig {
    std::string topology;
    std::string workload; // empty: periodic workload from DEVICE0
    std::size_t requests = 50;
    double period_ms = 20.0;
    std::string quality = "STANDARD";
    std::int64_t feature_dim = 8;
    std::int64_t hidden_dim = 8;
    std::string local_params; // empty: seeded random recognizer
    std::string cloud_params;
    double latency_budget_ms = 100.0;
    double histogram_bucket_ms = 10.0;

    bool operator==(const SimConfig&) const = default;
};

struct CurateConfig {
    std::string dataset;    // JSON lines; empty: synthetic seed set, or empty with --candidates
    std::string candidates; // JSON lines; empty: synthetic stream
    double tau_sim = 0.7;
    double epsilon = 0.01;
    std::size_t stream_count = 200;
    std::size_t stream_dim = 8;
    std::size_t stream_classes = 5;
    std::size_t stream_seed_per_class = 3;
    double stream_spread = 0.15;
    double stream_ambiguous_rate = 0.15;
    double stream_outlier_rate = 0.1;

    bool operator==(const CurateConfig&) const = default;
};

struct RunConfig {
    std::uint64_t seed = 7;
    std::string out = ".";
    EegConfig eeg;
    EmotionConfig emotion;
    SimConfig sim;
    CurateConfig curate;

    bool operator==(const RunConfig&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EegConfig, duration_ms, sample_rate_hz, noise_amplitude,
                                                blink_amplitude, blinks, threshold, merge_gap_ms, refractory_ms,
                                                tolerance_ms, recall_floor, trace, events, truth)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EmotionConfig, data_dir, toy_count, toy_dim, toy_min_length,
                                                toy_max_length, toy_noise, hidden_dim, init_scale, learning_rate,
                                                steps, batch_size, log_every, accuracy_floor, params, input,
                                                zero_params, gradcheck_instances, gradcheck_input_dim,
                                                gradcheck_hidden_dim, gradcheck_length, gradcheck_batch,
                                                gradcheck_epsilon, gradcheck_tolerance)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SimConfig, topology, workload, requests, period_ms, quality,
                                                feature_dim, hidden_dim, local_params, cloud_params,
                                                latency_budget_ms, histogram_bucket_ms)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CurateConfig, dataset, candidates, tau_sim, epsilon, stream_count,
                                                stream_dim, stream_classes, stream_seed_per_class, stream_spread, stream_ambiguous_rate,
                                                stream_outlier_rate)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RunConfig, seed, out, eeg, emotion, sim, curate)

namespace detail {

// Rejects keys the schema does not know, so a typo cannot silently fall back
// to a default.
inline void check_keys(const nlohmann::json& given, const nlohmann::json& schema, const std::string& where) {
    if (!given.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, value] : given.items()) {
        const auto it = schema.find(key);
        const std::string path = where.empty() ? key : where + "." + key;
        if (it == schema.end()) throw ConfigError("unknown config key '" + path + "'");
        if (it->is_object()) check_keys(value, *it, path);
    }
}

} // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
    detail::check_keys(j, nlohmann::json(RunConfig{}), "");
    try {
        return j.get<RunConfig>();
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("invalid config: ") + ex.what());
    }
}

inline nlohmann::json to_json(const RunConfig& c) { return nlohmann::json(c); }

inline RunConfig load_config(const std::string& path) {
    const auto contents = text::read_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(contents);
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError("malformed config " + path + ": " + ex.what());
    }
    return config_from_json(j);
}

} // namespace fitbot::cli
