#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "fitbot/error.hpp"
#include "fitbot/random.hpp"

namespace fitbot::eeg {

/// Electrode placement of the single-channel headband: the collecting
/// electrode, the reference and the bias (driven-right-leg) electrode.
struct ElectrodeConfig {
    std::string collecting = "IN1P";
    std::string reference = "REF";
    std::string bias = "BIAS1";

    bool operator==(const ElectrodeConfig&) const = default;

    void validate() const {
        if (collecting.empty() || reference.empty() || bias.empty())
            throw InvalidArgument("electrode names must be non-empty");
        if (collecting == reference || collecting == bias || reference == bias)
            throw InvalidArgument("electrode names must be pairwise distinct");
    }
};

/// Uniformly sampled single-channel EEG signal in raw ADC counts.
struct EegTrace {
    std::vector<double> samples;
    double sample_rate_hz = 250.0;
    ElectrodeConfig electrodes;
    std::int64_t start_time_ms = 0;

    bool operator==(const EegTrace&) const = default;

    std::size_t size() const noexcept { return samples.size(); }

    double sample_period_ms() const { return 1000.0 / sample_rate_hz; }

    /// Timestamp of sample i in milliseconds.
    double time_of(std::size_t i) const {
        return static_cast<double>(start_time_ms) + static_cast<double>(i) * sample_period_ms();
    }

    void validate() const {
        if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz))
            throw InvalidArgument("sample_rate_hz must be positive");
        if (start_time_ms < 0) throw InvalidArgument("start_time_ms must be non-negative");
        electrodes.validate();
    }
};

/// Width of the synthetic blink artifact (full support of the raised cosine).
inline constexpr double kBlinkWidthMs = 300.0;

struct SyntheticEegParams {
    double duration_ms = 20000.0;
    double sample_rate_hz = 25.0;
    std::vector<double> blink_times_ms;
    double noise_amplitude = 40.0;
    double blink_amplitude = 600.0;
    std::uint64_t seed = 7;
};

namespace detail {

// Low-passed uniform noise rescaled so that max |noise| == amplitude.
inline std::vector<double> band_limited_noise(std::size_t n, double amplitude, std::uint64_t seed) {
    std::vector<double> noise(n, 0.0);
    if (n == 0 || amplitude == 0.0) return noise;

    Rng rng(seed);
    constexpr double kSmoothing = 0.35; // one-pole low-pass coefficient
    double state = 0.0;
    double peak = 0.0;
    for (auto& v : noise) {
        state += kSmoothing * (rng.uniform(-1.0, 1.0) - state);
        v = state;
        peak = std::max(peak, std::abs(state));
    }
    if (peak > 0.0) {
        const double scale = amplitude / peak;
        for (auto& v : noise) v *= scale;
    }
    return noise;
}

} // namespace detail

/// Raised-cosine blink pulse of peak `amplitude` centered at `center_ms`,
/// evaluated at `t_ms`. Zero outside the 300 ms support.
inline double blink_pulse(double t_ms, double center_ms, double amplitude) {
    const double offset = t_ms - center_ms;
    if (std::abs(offset) >= kBlinkWidthMs / 2.0) return 0.0;
    return 0.5 * amplitude * (1.0 + std::cos(2.0 * std::numbers::pi * offset / kBlinkWidthMs));
}

/// Synthesizes a trace with blink artifacts on top of seeded band-limited noise.
///
/// Output length is floor(duration_ms * sample_rate_hz / 1000). Blink times must
/// be strictly increasing and lie within [0, duration_ms).
inline EegTrace generate_synthetic_eeg(const SyntheticEegParams& p) {
    if (!(p.duration_ms > 0.0)) throw InvalidArgument("duration_ms must be positive");
    if (!(p.sample_rate_hz > 0.0)) throw InvalidArgument("sample_rate_hz must be positive");
    if (!(p.noise_amplitude >= 0.0)) throw InvalidArgument("noise_amplitude must be non-negative");
    if (!(p.blink_amplitude > 0.0)) throw InvalidArgument("blink_amplitude must be positive");
    if (!(p.blink_amplitude > p.noise_amplitude))
        throw InvalidArgument("blink_amplitude must exceed noise_amplitude");
    for (std::size_t i = 0; i < p.blink_times_ms.size(); ++i) {
        const double t = p.blink_times_ms[i];
        if (!(t >= 0.0 && t < p.duration_ms))
            throw InvalidArgument("blink time " + std::to_string(t) + " outside [0, duration)");
        if (i > 0 && !(t > p.blink_times_ms[i - 1]))
            throw InvalidArgument("blink times must be strictly increasing");
    }

    const auto n = static_cast<std::size_t>(std::floor(p.duration_ms * p.sample_rate_hz / 1000.0));
    EegTrace trace;
    trace.sample_rate_hz = p.sample_rate_hz;
    trace.samples = detail::band_limited_noise(n, p.noise_amplitude, p.seed);

    const double half = kBlinkWidthMs / 2.0;
    for (double center : p.blink_times_ms) {
        const double first = std::max(0.0, std::ceil((center - half) * p.sample_rate_hz / 1000.0));
        for (auto i = static_cast<std::size_t>(first); i < n; ++i) {
            const double t = trace.time_of(i);
            if (t - center >= half) break;
            trace.samples[i] += blink_pulse(t, center, p.blink_amplitude);
        }
    }
    return trace;
}

/// Blink schedule used by the detection benchmark: one blink per equal slot of
/// the recording, placed at the slot center with a seeded offset of up to a
/// fifth of the slot either way.
inline std::vector<double> benchmark_blink_times(std::size_t count, double duration_ms, std::uint64_t seed) {
    if (!(duration_ms > 0.0)) throw InvalidArgument("duration_ms must be positive");
    std::vector<double> times;
    if (count == 0) return times;
    const double slot = duration_ms / static_cast<double>(count);
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    times.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double jitter = rng.uniform(-0.2, 0.2) * slot;
        times.push_back(std::round((static_cast<double>(i) + 0.5) * slot + jitter));
    }
    return times;
}

} // namespace fitbot::eeg
