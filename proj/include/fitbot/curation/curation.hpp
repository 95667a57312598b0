#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fitbot/emotion/types.hpp"
#include "fitbot/error.hpp"
#include "fitbot/random.hpp"

namespace fitbot::curation {

using SoftLabel = std::array<double, emotion::kClassCount>;

inline constexpr double kSoftLabelSumTolerance = 1e-9;

struct CurationSample {
    std::vector<double> features;
    SoftLabel soft_label{};
    std::string id;

    bool operator==(const CurationSample&) const = default;

    std::size_t label() const { return emotion::argmax(soft_label); }
    double confidence() const { return *std::max_element(soft_label.begin(), soft_label.end()); }

    void validate() const {
        if (features.empty()) throw InvalidArgument("sample '" + id + "' has no features");
        for (double f : features)
            if (!std::isfinite(f)) throw InvalidArgument("sample '" + id + "' has a non-finite feature");
        double sum = 0.0;
        for (double p : soft_label) {
            if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("sample '" + id + "' soft label outside [0, 1]");
            sum += p;
        }
        if (std::abs(sum - 1.0) > kSoftLabelSumTolerance)
            throw InvalidArgument("sample '" + id + "' soft label does not sum to 1");
    }
};

/// Samples plus per-class running-mean centroids, keyed by soft-label argmax.
/// The feature dimension is fixed by the first sample.
class CurationDataset {
public:
    const std::vector<CurationSample>& samples() const { return samples_; }
    std::size_t size() const { return samples_.size(); }
    bool empty() const { return samples_.empty(); }
    std::size_t dim() const { return empty() ? 0 : samples_.front().features.size(); }

    /// Absent when no sample has class k as its argmax.
    const std::optional<Eigen::VectorXd>& centroid(std::size_t k) const { return centroids_.at(k); }
    std::size_t count(std::size_t k) const { return counts_.at(k); }

    /// Sum of per-sample confidences, accumulated in insertion order.
    double confidence_sum() const { return confidence_sum_; }

    void add(CurationSample sample) {
        sample.validate();
        if (!empty() && sample.features.size() != dim())
            throw InvalidArgument("sample '" + sample.id + "' has " + std::to_string(sample.features.size()) +
                                  " features, dataset has " + std::to_string(dim()));
        const std::size_t k = sample.label();
        const Eigen::Map<const Eigen::VectorXd> x(sample.features.data(), static_cast<Eigen::Index>(sample.features.size()));
        auto& c = centroids_[k];
        const auto n = ++counts_[k];
        if (!c) c = x;
        else *c += (x - *c) / static_cast<double>(n);
        confidence_sum_ += sample.confidence();
        samples_.push_back(std::move(sample));
    }

    bool operator==(const CurationDataset&) const = default;

private:
    std::vector<CurationSample> samples_;
    std::array<std::optional<Eigen::VectorXd>, emotion::kClassCount> centroids_;
    std::array<std::size_t, emotion::kClassCount> counts_{};
    double confidence_sum_ = 0.0;
};

namespace detail {

inline double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0; // a zero centroid points nowhere
    return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

} // namespace detail

/// Cosine between the candidate features and the centroid of its argmax
/// class, or the best cosine over all present centroids when that class is
/// still empty. Throws EmptyDataset when no centroid exists.
inline double similarity(const CurationSample& candidate, const CurationDataset& dataset) {
    if (dataset.empty()) throw EmptyDataset("similarity against an empty dataset");
    if (candidate.features.size() != dataset.dim())
        throw InvalidArgument("candidate has " + std::to_string(candidate.features.size()) + " features, dataset has " +
                              std::to_string(dataset.dim()));
    const Eigen::VectorXd x =
        Eigen::Map<const Eigen::VectorXd>(candidate.features.data(), static_cast<Eigen::Index>(candidate.features.size()));
    if (x.norm() == 0.0) throw InvalidArgument("candidate '" + candidate.id + "' has an all-zero feature vector");

    if (const auto& own = dataset.centroid(candidate.label())) return detail::cosine(x, *own);
    double best = -1.0;
    for (std::size_t k = 0; k < emotion::kClassCount; ++k)
        if (const auto& c = dataset.centroid(k)) best = std::max(best, detail::cosine(x, *c));
    return best;
}

/// Mean of the per-sample maximum soft-label probability; 1 when empty.
inline double purity(const CurationDataset& dataset) {
    return dataset.empty() ? 1.0 : dataset.confidence_sum() / static_cast<double>(dataset.size());
}

enum class AdmissionReason { Ok, LowSimilarity, PurityDrop };

inline std::string_view to_string(AdmissionReason r) {
    switch (r) {
    case AdmissionReason::Ok: return "OK";
    case AdmissionReason::LowSimilarity: return "LOW_SIMILARITY";
    case AdmissionReason::PurityDrop: return "PURITY_DROP";
    }
    return "?";
}

struct AdmissionDecision {
    bool admitted = false;
    double similarity = 0.0;
    double purity_before = 1.0;
    double purity_after = 1.0;
    AdmissionReason reason = AdmissionReason::Ok;

    bool operator==(const AdmissionDecision&) const = default;
};

struct AdmissionParams {
    double tau_sim = 0.7;
    double epsilon = 0.01;

    void validate() const {
        if (!(tau_sim >= -1.0 && tau_sim <= 1.0)) throw InvalidArgument("tau_sim must be in [-1, 1]");
        if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw InvalidArgument("epsilon must be finite and >= 0");
    }
};

struct AdmissionResult {
    AdmissionDecision decision;
    CurationDataset dataset; // the input unchanged on rejection
};

/// Admits the candidate when it resembles its class (similarity >= tau_sim)
/// and does not pull dataset purity down by more than epsilon. An empty
/// dataset admits anything, reported with similarity 1.
inline AdmissionResult admit(const CurationSample& candidate, const CurationDataset& dataset,
                             const AdmissionParams& params = {}) {
    params.validate();
    candidate.validate();
    AdmissionResult out{{}, dataset};
    auto& d = out.decision;
    d.purity_before = purity(dataset);

    if (dataset.empty()) {
        d.similarity = 1.0;
    } else {
        d.similarity = similarity(candidate, dataset);
        if (d.similarity < params.tau_sim) {
            d.reason = AdmissionReason::LowSimilarity;
            d.purity_after = d.purity_before;
            return out;
        }
    }
    d.purity_after = (dataset.confidence_sum() + candidate.confidence()) / static_cast<double>(dataset.size() + 1);
    // Purity of an empty dataset is 1 by convention, so the bootstrap sample skips this check.
    if (!dataset.empty() && d.purity_after < d.purity_before - params.epsilon) {
        d.reason = AdmissionReason::PurityDrop;
        return out;
    }
    d.admitted = true;
    out.dataset.add(candidate);
    return out;
}

struct AdmissionRecord {
    std::string id;
    AdmissionDecision decision;
};

/// Feeds candidates through admit in order.
inline std::vector<AdmissionRecord> curate(CurationDataset& dataset, const std::vector<CurationSample>& candidates,
                                           const AdmissionParams& params = {}) {
    std::vector<AdmissionRecord> records;
    records.reserve(candidates.size());
    for (const auto& c : candidates) {
        auto result = admit(c, dataset, params);
        records.push_back({c.id, result.decision});
        if (result.decision.admitted) dataset = std::move(result.dataset);
    }
    return records;
}

struct StreamOptions {
    std::size_t count = 200;
    std::size_t dim = 8;
    std::size_t classes = 5;
    std::size_t seed_per_class = 3; // confidently labeled starting samples
    double spread = 0.15;            // feature noise around each class prototype
    double ambiguous_rate = 0.15;    // share of candidates with a flat soft label
    double outlier_rate = 0.1;       // share of candidates far from every prototype
    std::uint64_t seed = 0;
};

struct CandidateStream {
    CurationDataset seed;
    std::vector<CurationSample> candidates;
};

/// Synthetic capture stream around random class prototypes: a small sharply
/// labeled seed set, then candidates that mix clustered samples, ambiguous
/// soft labels and off-cluster outliers.
inline CandidateStream make_candidate_stream(const StreamOptions& o = {}) {
    if (o.dim == 0 || o.classes == 0 || o.classes > emotion::kClassCount)
        throw InvalidArgument("stream needs dim > 0 and 1..21 classes");
    Rng rng(o.seed);
    std::vector<Eigen::VectorXd> prototypes;
    for (std::size_t k = 0; k < o.classes; ++k) {
        Eigen::VectorXd p(static_cast<Eigen::Index>(o.dim));
        for (auto& v : p) v = rng.uniform(-1.0, 1.0);
        prototypes.push_back(p.normalized());
    }
    auto noise = [&] {
        Eigen::VectorXd x(static_cast<Eigen::Index>(o.dim));
        for (auto& v : x) v = rng.uniform(-1.0, 1.0);
        return x;
    };
    auto label = [](std::size_t k, double peak) {
        SoftLabel l;
        l.fill((1.0 - peak) / static_cast<double>(emotion::kClassCount - 1));
        l[k] = peak;
        return l;
    };

    CandidateStream out;
    for (std::size_t k = 0; k < o.classes; ++k)
        for (std::size_t r = 0; r < o.seed_per_class; ++r) {
            const Eigen::VectorXd x = prototypes[k] + o.spread * noise();
            out.seed.add({{x.data(), x.data() + x.size()}, label(k, rng.uniform(0.85, 0.98)),
                          "seed_" + std::to_string(k) + "_" + std::to_string(r)});
        }
    for (std::size_t i = 0; i < o.count; ++i) {
        const auto k = static_cast<std::size_t>(rng.below(o.classes));
        const double kind = rng.uniform();
        const Eigen::VectorXd n = noise();
        const Eigen::VectorXd x = kind < o.outlier_rate ? Eigen::VectorXd(-prototypes[k] + 0.5 * n.normalized())
                                                        : Eigen::VectorXd(prototypes[k] + o.spread * n);
        // Ambiguous labels stay peaked on k, just barely.
        const bool ambiguous = kind >= o.outlier_rate && kind < o.outlier_rate + o.ambiguous_rate;
        const double peak = ambiguous ? 0.1 : rng.uniform(0.8, 0.98);
        out.candidates.push_back({{x.data(), x.data() + x.size()}, label(k, peak), "cand_" + std::to_string(i)});
    }
    return out;
}

} // namespace fitbot::curation
