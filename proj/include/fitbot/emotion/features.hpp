#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "fitbot/emotion/types.hpp"
#include "fitbot/error.hpp"

namespace fitbot::emotion {

struct FeatureParams {
    double window_ms = 25.0;
    double hop_ms = 10.0;
    int bands = 8;
};

/// Log band energies per frame.
///
/// Each rectangular window is transformed with a direct DFT; the power of bins
/// 0..N/2 is summed into `bands` equal-width bands over [0, fs/2] and mapped
/// through log(1 + energy). Frame count is floor((len - window) / hop) + 1.
inline FrameSequence extract_features(std::span<const double> waveform, double sample_rate_hz,
                                      const FeatureParams& params = {}, std::string utterance_id = {}) {
    if (!(sample_rate_hz > 0.0)) throw InvalidArgument("sample_rate_hz must be positive");
    if (!(params.window_ms > 0.0) || !(params.hop_ms > 0.0))
        throw InvalidArgument("window_ms and hop_ms must be positive");
    if (params.bands < 1) throw InvalidArgument("bands must be at least 1");

    const auto window = static_cast<std::size_t>(std::llround(params.window_ms * sample_rate_hz / 1000.0));
    const auto hop = static_cast<std::size_t>(std::llround(params.hop_ms * sample_rate_hz / 1000.0));
    if (window < 1 || hop < 1) throw InvalidArgument("window and hop must span at least one sample");
    if (waveform.size() < window)
        throw InvalidArgument("waveform shorter than one analysis window (" + std::to_string(window) + " samples)");

    const std::size_t frames = (waveform.size() - window) / hop + 1;
    const std::size_t bins = window / 2 + 1;
    const auto bands = static_cast<std::size_t>(params.bands);

    // exp(-2πi m/N) for m in [0, N); bin k at sample n uses entry (k n) mod N.
    std::vector<double> cos_table(window), sin_table(window);
    for (std::size_t m = 0; m < window; ++m) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(window);
        cos_table[m] = std::cos(angle);
        sin_table[m] = std::sin(angle);
    }
    std::vector<std::size_t> band_of(bins);
    for (std::size_t k = 0; k < bins; ++k) band_of[k] = std::min(bands - 1, 2 * k * bands / window);

    FrameSequence seq;
    seq.frames = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(bands));
    seq.frame_hop_ms = params.hop_ms;
    seq.utterance_id = std::move(utterance_id);

    std::vector<double> energy(bands);
    for (std::size_t f = 0; f < frames; ++f) {
        const auto chunk = waveform.subspan(f * hop, window);
        std::fill(energy.begin(), energy.end(), 0.0);
        for (std::size_t k = 0; k < bins; ++k) {
            double re = 0.0, im = 0.0;
            std::size_t m = 0;
            for (std::size_t n = 0; n < window; ++n) {
                re += chunk[n] * cos_table[m];
                im -= chunk[n] * sin_table[m];
                m += k;
                if (m >= window) m -= window;
            }
            energy[band_of[k]] += re * re + im * im;
        }
        for (std::size_t b = 0; b < bands; ++b)
            seq.frames(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(b)) = std::log1p(energy[b]);
    }
    return seq;
}

} // namespace fitbot::emotion
