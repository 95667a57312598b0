#pragma once

// Fixtures shared by the unit tests and the acceptance binary.

#include <string>

#include "fitbot/curation/curation.hpp"
#include "fitbot/emotion/model.hpp"
#include "fitbot/protocol/simulator.hpp"
#include "fitbot/random.hpp"

namespace fitbot::testing {

inline protocol::NodeId node(protocol::NodeKind kind, int index = 0) {
    return {kind, static_cast<std::uint8_t>(index)};
}

inline protocol::NodeId device(int i = 0) { return node(protocol::NodeKind::Device, i); }
inline protocol::NodeId edge(int i = 0) { return node(protocol::NodeKind::Edge, i); }
inline protocol::NodeId cloud(int i = 0) { return node(protocol::NodeKind::Cloud, i); }

inline protocol::ResultPayload random_result(Rng& rng) {
    Eigen::VectorXd logits(emotion::kClassCount);
    for (auto& v : logits) v = rng.uniform(-4.0, 4.0);
    const Eigen::VectorXd probs = emotion::softmax(logits);
    emotion::Probabilities p;
    std::copy(probs.begin(), probs.end(), p.begin());
    return protocol::ResultPayload::from_score(emotion::EmotionScore::from_probabilities(p));
}

inline protocol::EmotionMessage random_message(Rng& rng) {
    using namespace protocol;
    EmotionMessage m;
    m.seq = static_cast<std::uint32_t>(rng.engine()());
    m.timestamp_ms = rng.engine()();
    m.source = node(static_cast<NodeKind>(1 + rng.below(3)), static_cast<int>(rng.below(256)));
    m.dest = node(static_cast<NodeKind>(1 + rng.below(3)), static_cast<int>(rng.below(256)));
    m.route = static_cast<RouteMode>(1 + rng.below(3));
    switch (rng.below(3)) {
    case 0: {
        RequestPayload r;
        const auto len = rng.below(40);
        for (std::size_t i = 0; i < len; ++i) r.utterance_id.push_back(static_cast<char>(rng.below(256)));
        r.frame_count = static_cast<std::uint32_t>(rng.engine()());
        r.frame_dim = static_cast<std::uint32_t>(rng.engine()());
        r.digest = static_cast<std::uint32_t>(rng.engine()());
        m.payload = r;
        break;
    }
    case 1: m.payload = random_result(rng); break;
    default: m.payload = AckPayload{static_cast<std::uint32_t>(rng.engine()())}; break;
    }
    return m;
}

/// DEVICE0 - EDGE0 - CLOUD0 chain plus a direct DEVICE0 - CLOUD0 link.
inline protocol::Topology chain_topology(double device_edge_ms, double edge_cloud_ms, double device_cloud_ms = 0.0) {
    protocol::Topology t;
    t.nodes = {device(), edge(), cloud()};
    t.links = {{device(), edge(), device_edge_ms, 0.0, 0.0, true},
               {edge(), cloud(), edge_cloud_ms, 0.0, 0.0, true},
               {device(), cloud(), device_cloud_ms, 0.0, 0.0, true}};
    return t;
}

inline emotion::FrameSequence random_sequence(Rng& rng, Eigen::Index length, Eigen::Index dim, std::string id) {
    emotion::FrameSequence s;
    s.frames.resize(length, dim);
    for (Eigen::Index t = 0; t < length; ++t)
        for (Eigen::Index d = 0; d < dim; ++d) s.frames(t, d) = rng.uniform(-1.0, 1.0);
    s.utterance_id = std::move(id);
    return s;
}

inline protocol::Workload periodic_workload(std::size_t count, double period_ms, protocol::ServiceQuality quality,
                                            Eigen::Index dim, std::uint64_t seed) {
    return protocol::periodic_workload(count, period_ms, quality, dim, seed, device());
}

/// Distinct local and cloud recognizers over the same input dimension.
struct ClassifierPair {
    emotion::ModelParams local;
    emotion::ModelParams cloud;

    protocol::Classifiers classifiers() const {
        return {[this](const emotion::FrameSequence& s) { return emotion::classify(local, s); },
                [this](const emotion::FrameSequence& s) { return emotion::classify(cloud, s); }};
    }
};

inline ClassifierPair make_classifiers(Eigen::Index dim, std::uint64_t seed) {
    return {emotion::ModelParams::random(dim, 6, seed, 0.5), emotion::ModelParams::random(dim, 6, seed + 1, 0.5)};
}

inline curation::SoftLabel sharp_label(std::size_t k, double peak) {
    curation::SoftLabel l;
    l.fill((1.0 - peak) / static_cast<double>(emotion::kClassCount - 1));
    l[k] = peak;
    return l;
}

inline curation::SoftLabel one_hot(std::size_t k) { return sharp_label(k, 1.0); }

inline std::vector<double> basis(std::size_t dim, std::size_t axis, double scale = 1.0) {
    std::vector<double> v(dim, 0.0);
    v[axis] = scale;
    return v;
}

/// Three classes whose samples sit on the first three axes of R^6, labels
/// with confidence 0.9.
inline curation::CurationDataset axis_dataset() {
    curation::CurationDataset d;
    for (std::size_t k = 0; k < 3; ++k)
        for (int rep = 0; rep < 4; ++rep)
            d.add({basis(6, k, 1.0 + 0.25 * rep), sharp_label(k, 0.9), "c" + std::to_string(k) + "_" + std::to_string(rep)});
    return d;
}

/// Near copy of an existing class-1 sample with a sharp label.
inline curation::CurationSample near_duplicate() {
    auto f = basis(6, 1, 1.25);
    f[4] = 0.01;
    return {f, sharp_label(1, 0.95), "near_dup"};
}

/// Cosine exactly 0.1 to each axis_dataset centroid.
inline curation::CurationSample far_outlier() {
    std::vector<double> f = {0.1, 0.1, 0.1, std::sqrt(1.0 - 0.03), 0.0, 0.0};
    return {f, sharp_label(0, 0.95), "outlier"};
}

} // namespace fitbot::testing
