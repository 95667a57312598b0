#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <string>

#include <Eigen/Dense>

#include "fitbot/error.hpp"

namespace fitbot::emotion {

inline constexpr std::size_t kClassCount = 21;

/// Acoustic feature frames of one utterance: row t is the feature vector of
/// frame t (dimension = cols).
struct FrameSequence {
    Eigen::MatrixXd frames;
    double frame_hop_ms = 10.0;
    std::string utterance_id;

    Eigen::Index length() const noexcept { return frames.rows(); }
    Eigen::Index dim() const noexcept { return frames.cols(); }

    bool operator==(const FrameSequence& other) const {
        return frames.rows() == other.frames.rows() && frames.cols() == other.frames.cols() &&
               frames == other.frames && frame_hop_ms == other.frame_hop_ms && utterance_id == other.utterance_id;
    }
};

class EmotionLabel {
public:
    constexpr EmotionLabel() = default;
    explicit EmotionLabel(std::size_t index) : index_(index) {
        if (index >= kClassCount)
            throw InvalidArgument("emotion label " + std::to_string(index) + " outside [0, 21)");
    }

    constexpr std::size_t index() const noexcept { return index_; }
    constexpr bool operator==(const EmotionLabel&) const = default;

private:
    std::size_t index_ = 0;
};

/// Display names for the 21 classes. The defaults are placeholders; callers
/// may replace entries.
struct LabelNames {
    std::array<std::string, kClassCount> names = [] {
        std::array<std::string, kClassCount> n;
        for (std::size_t i = 0; i < kClassCount; ++i) {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "emotion_%02zu", i);
            n[i] = buf;
        }
        return n;
    }();

    const std::string& operator[](EmotionLabel label) const { return names[label.index()]; }
};

using Probabilities = std::array<double, kClassCount>;

/// First index of the maximum; ties resolve to the lowest index.
template <class Range>
std::size_t argmax(const Range& values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < static_cast<std::size_t>(std::size(values)); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

struct EmotionScore {
    Probabilities probabilities{};
    EmotionLabel argmax;

    bool operator==(const EmotionScore&) const = default;

    static EmotionScore from_probabilities(const Probabilities& p) {
        return {p, EmotionLabel(emotion::argmax(p))};
    }
};

/// Numerically stable softmax (max-shifted).
inline Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    if (logits.size() == 0) throw InvalidArgument("softmax of an empty vector");
    const Eigen::VectorXd shifted = (logits.array() - logits.maxCoeff()).exp().matrix();
    return shifted / shifted.sum();
}

} // namespace fitbot::emotion
