#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fitbot/emotion/model.hpp"
#include "fitbot/emotion/types.hpp"
#include "fitbot/error.hpp"
#include "fitbot/random.hpp"

namespace fitbot::emotion {

struct LabeledSequence {
    FrameSequence sequence;
    EmotionLabel label;
};

using Dataset = std::vector<LabeledSequence>;

struct LossAndGradients {
    double loss = 0.0;
    ModelParams gradients;
};

namespace detail {

// Forward pass keeping what backprop needs.
struct ForwardCache {
    std::vector<Eigen::VectorXd> update;    // z_t
    std::vector<Eigen::VectorXd> candidate; // g_t
    HiddenStates hidden;                    // h_t
    std::vector<Eigen::VectorXd> proj;      // u_t = tanh(Wa h_t + ba)
    Eigen::VectorXd alpha;
    Eigen::VectorXd context;
    Eigen::VectorXd probs;
};

inline ForwardCache forward_with_cache(const ModelParams& p, const FrameSequence& seq) {
    const auto T = static_cast<std::size_t>(seq.length());
    ForwardCache c;
    c.update.reserve(T);
    c.candidate.reserve(T);
    c.hidden.reserve(T);
    c.proj.reserve(T);

    Eigen::VectorXd h = Eigen::VectorXd::Zero(p.hidden_dim());
    for (std::size_t t = 0; t < T; ++t) {
        const Eigen::VectorXd x = seq.frames.row(static_cast<Eigen::Index>(t)).transpose();
        Eigen::VectorXd z = sigmoid(p.update_input * x + p.update_hidden * h + p.update_bias);
        Eigen::VectorXd g = (p.candidate_input * x + p.candidate_hidden * h + p.candidate_bias).array().tanh();
        h = (h.array() + z.array() * (g.array() - h.array())).matrix();
        c.update.push_back(std::move(z));
        c.candidate.push_back(std::move(g));
        c.hidden.push_back(h);
    }

    Eigen::VectorXd scores(static_cast<Eigen::Index>(T));
    for (std::size_t t = 0; t < T; ++t) {
        c.proj.push_back((p.attention_proj * c.hidden[t] + p.attention_bias).array().tanh());
        scores(static_cast<Eigen::Index>(t)) = p.attention_score.dot(c.proj.back());
    }
    c.alpha = softmax(scores);
    c.context = Eigen::VectorXd::Zero(p.hidden_dim());
    for (std::size_t t = 0; t < T; ++t) c.context += c.alpha(static_cast<Eigen::Index>(t)) * c.hidden[t];
    c.probs = softmax(output_logits(p, c.context));
    return c;
}

// Accumulates scale * d(-log p[label]) / d(params) into grads.
inline void backward(const ModelParams& p, const FrameSequence& seq, std::size_t label, const ForwardCache& c,
                     double scale, ModelParams& grads) {
    const auto T = static_cast<std::size_t>(seq.length());

    Eigen::VectorXd dlogits = c.probs;
    dlogits(static_cast<Eigen::Index>(label)) -= 1.0;
    dlogits *= scale;
    grads.output_weights.noalias() += dlogits * c.context.transpose();
    grads.output_bias += dlogits;
    const Eigen::VectorXd dcontext = p.output_weights.transpose() * dlogits;

    // Pooling: context = sum alpha_t h_t, alpha = softmax(e).
    std::vector<Eigen::VectorXd> dhidden(T);
    Eigen::VectorXd dalpha(static_cast<Eigen::Index>(T));
    for (std::size_t t = 0; t < T; ++t) {
        dhidden[t] = c.alpha(static_cast<Eigen::Index>(t)) * dcontext;
        dalpha(static_cast<Eigen::Index>(t)) = c.hidden[t].dot(dcontext);
    }
    const double mean_dalpha = c.alpha.dot(dalpha);
    for (std::size_t t = 0; t < T; ++t) {
        const auto ti = static_cast<Eigen::Index>(t);
        const double dscore = c.alpha(ti) * (dalpha(ti) - mean_dalpha);
        grads.attention_score += dscore * c.proj[t];
        const Eigen::VectorXd dpre = (dscore * p.attention_score).cwiseProduct(
            (1.0 - c.proj[t].array().square()).matrix());
        grads.attention_proj.noalias() += dpre * c.hidden[t].transpose();
        grads.attention_bias += dpre;
        dhidden[t].noalias() += p.attention_proj.transpose() * dpre;
    }

    // Backprop through time.
    Eigen::VectorXd carry = Eigen::VectorXd::Zero(p.hidden_dim());
    for (std::size_t step = T; step-- > 0;) {
        const Eigen::VectorXd dh = dhidden[step] + carry;
        const Eigen::VectorXd h_prev = step > 0 ? c.hidden[step - 1] : Eigen::VectorXd::Zero(p.hidden_dim());
        const Eigen::VectorXd x = seq.frames.row(static_cast<Eigen::Index>(step)).transpose();
        const auto& z = c.update[step];
        const auto& g = c.candidate[step];

        const Eigen::VectorXd dupdate_pre =
            (dh.array() * (g - h_prev).array() * z.array() * (1.0 - z.array())).matrix();
        const Eigen::VectorXd dcand_pre = (dh.array() * z.array() * (1.0 - g.array().square())).matrix();

        grads.update_input.noalias() += dupdate_pre * x.transpose();
        grads.update_hidden.noalias() += dupdate_pre * h_prev.transpose();
        grads.update_bias += dupdate_pre;
        grads.candidate_input.noalias() += dcand_pre * x.transpose();
        grads.candidate_hidden.noalias() += dcand_pre * h_prev.transpose();
        grads.candidate_bias += dcand_pre;

        carry = (dh.array() * (1.0 - z.array())).matrix();
        carry.noalias() += p.update_hidden.transpose() * dupdate_pre;
        carry.noalias() += p.candidate_hidden.transpose() * dcand_pre;
    }
}

} // namespace detail

/// Mean cross-entropy over the batch and its exact gradient.
inline LossAndGradients loss_and_gradients(const ModelParams& params, std::span<const LabeledSequence> batch) {
    if (batch.empty()) throw InvalidArgument("loss_and_gradients needs a non-empty batch");
    for (const auto& item : batch) detail::check_sequence(params, item.sequence);

    LossAndGradients out{0.0, ModelParams::zeros(params.input_dim(), params.hidden_dim())};
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (const auto& item : batch) {
        const auto cache = detail::forward_with_cache(params, item.sequence);
        const auto label = item.label.index();
        out.loss -= std::log(cache.probs(static_cast<Eigen::Index>(label)));
        detail::backward(params, item.sequence, label, cache, scale, out.gradients);
    }
    out.loss *= scale;
    return out;
}

/// Mean cross-entropy only.
inline double loss(const ModelParams& params, std::span<const LabeledSequence> batch) {
    if (batch.empty()) throw InvalidArgument("loss needs a non-empty batch");
    double total = 0.0;
    for (const auto& item : batch) {
        const auto score = classify(params, item.sequence);
        total -= std::log(score.probabilities[item.label.index()]);
    }
    return total / static_cast<double>(batch.size());
}

inline double accuracy(const ModelParams& params, std::span<const LabeledSequence> data) {
    if (data.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& item : data)
        if (classify(params, item.sequence).argmax == item.label) ++correct;
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

struct TrainOptions {
    double learning_rate = 0.05;
    std::size_t steps = 2000;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
};

/// Called after every update with the step number (1-based) and the
/// mini-batch loss measured before that update.
using TrainObserver = std::function<void(std::size_t step, double batch_loss, const ModelParams& params)>;

/// Plain mini-batch gradient descent. Batches are drawn from a seeded
/// reshuffle of the dataset each epoch.
inline ModelParams train(ModelParams params, const Dataset& dataset, const TrainOptions& options,
                         const TrainObserver& observer = {}) {
    if (!(options.learning_rate > 0.0) || !std::isfinite(options.learning_rate))
        throw InvalidArgument("learning_rate must be positive");
    if (options.batch_size == 0) throw InvalidArgument("batch_size must be positive");
    if (options.steps == 0) return params;
    if (dataset.empty()) throw InvalidArgument("cannot train on an empty dataset");
    params.validate();

    Rng rng(options.seed);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t cursor = order.size();
    std::vector<LabeledSequence> batch;
    const std::size_t batch_size = std::min(options.batch_size, dataset.size());

    for (std::size_t step = 1; step <= options.steps; ++step) {
        batch.clear();
        while (batch.size() < batch_size) {
            if (cursor == order.size()) {
                for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
                cursor = 0;
            }
            batch.push_back(dataset[order[cursor++]]);
        }
        const auto lg = loss_and_gradients(params, batch);
        if (!std::isfinite(lg.loss)) throw Diverged(step, lg.loss);

        params.add_scaled(-options.learning_rate, lg.gradients);
        if (!params.flatten().allFinite()) throw Diverged(step, lg.loss);

        if (observer) observer(step, lg.loss, params);
    }
    return params;
}

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::string worst_tensor;
    std::size_t entries_checked = 0;
};

/// Denominator floor of the relative error, so entries whose true gradient is
/// numerically zero are judged on absolute error.
inline constexpr double kGradCheckFloor = 1e-8;

/// Compares backprop against central finite differences for every entry.
/// Relative error = |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline GradCheckResult gradient_check(const ModelParams& params, std::span<const LabeledSequence> batch,
                                      double epsilon = 1e-5) {
    const auto analytic = loss_and_gradients(params, batch).gradients;
    GradCheckResult result;
    ModelParams probe = params;

    auto check_tensor = [&](std::string_view name, auto member) {
        auto& tensor = probe.*member;
        const auto& grad = analytic.*member;
        for (Eigen::Index r = 0; r < tensor.rows(); ++r) {
            for (Eigen::Index col = 0; col < tensor.cols(); ++col) {
                const double saved = tensor(r, col);
                tensor(r, col) = saved + epsilon;
                const double up = loss(probe, batch);
                tensor(r, col) = saved - epsilon;
                const double down = loss(probe, batch);
                tensor(r, col) = saved;

                const double numeric = (up - down) / (2.0 * epsilon);
                const double a = grad(r, col);
                const double rel =
                    std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
                ++result.entries_checked;
                if (rel > result.max_relative_error) {
                    result.max_relative_error = rel;
                    result.worst_tensor = std::string(name);
                }
            }
        }
    };
    check_tensor("update_input", &ModelParams::update_input);
    check_tensor("update_hidden", &ModelParams::update_hidden);
    check_tensor("update_bias", &ModelParams::update_bias);
    check_tensor("candidate_input", &ModelParams::candidate_input);
    check_tensor("candidate_hidden", &ModelParams::candidate_hidden);
    check_tensor("candidate_bias", &ModelParams::candidate_bias);
    check_tensor("attention_proj", &ModelParams::attention_proj);
    check_tensor("attention_bias", &ModelParams::attention_bias);
    check_tensor("attention_score", &ModelParams::attention_score);
    check_tensor("output_weights", &ModelParams::output_weights);
    check_tensor("output_bias", &ModelParams::output_bias);
    return result;
}

/// Random frames and labels for gradient checks.
inline Dataset random_batch(std::size_t count, Eigen::Index length, Eigen::Index dim, std::uint64_t seed) {
    Rng rng(seed);
    Dataset batch;
    for (std::size_t i = 0; i < count; ++i) {
        FrameSequence seq;
        seq.frames.resize(length, dim);
        for (Eigen::Index t = 0; t < length; ++t)
            for (Eigen::Index d = 0; d < dim; ++d) seq.frames(t, d) = rng.uniform(-1.0, 1.0);
        seq.utterance_id = "rand_" + std::to_string(i);
        batch.push_back({std::move(seq), EmotionLabel(rng.below(kClassCount))});
    }
    return batch;
}

/// A random model and batch for gradient checking. Weights are drawn at unit
/// scale: at the small training init several gradients sit near 1e-10, below
/// the round-off of a central difference, and the relative error says nothing.
struct GradCheckInstance {
    ModelParams params;
    Dataset batch;
};

inline GradCheckInstance make_gradcheck_instance(std::uint64_t seed, Eigen::Index input_dim = 3,
                                                 Eigen::Index hidden_dim = 4, Eigen::Index length = 5,
                                                 std::size_t batch_size = 2, double scale = 1.0) {
    return {ModelParams::random(input_dim, hidden_dim, seed, scale),
            random_batch(batch_size, length, input_dim, seed ^ 0x5bd1e995ULL)};
}

/// Separable 21-class toy set: every class has its own band signature and
/// each frame is that signature plus small uniform noise.
struct ToyDatasetOptions {
    std::size_t count = 200;
    Eigen::Index dim = 8;
    Eigen::Index min_length = 4;
    Eigen::Index max_length = 10;
    double signature_scale = 1.0;
    double noise = 0.2;
    std::uint64_t seed = 0;
};

inline Dataset make_toy_dataset(const ToyDatasetOptions& o = {}) {
    if (o.dim < 1 || o.min_length < 1 || o.max_length < o.min_length)
        throw InvalidArgument("invalid toy dataset shape");
    Rng rng(o.seed);
    std::vector<Eigen::VectorXd> signatures;
    for (std::size_t k = 0; k < kClassCount; ++k) {
        Eigen::VectorXd s(o.dim);
        for (Eigen::Index d = 0; d < o.dim; ++d) s(d) = rng.uniform(-o.signature_scale, o.signature_scale);
        signatures.push_back(std::move(s));
    }

    Dataset data;
    data.reserve(o.count);
    const auto span = static_cast<std::uint64_t>(o.max_length - o.min_length + 1);
    for (std::size_t i = 0; i < o.count; ++i) {
        const std::size_t k = i % kClassCount;
        const auto length = o.min_length + static_cast<Eigen::Index>(rng.below(span));
        FrameSequence seq;
        seq.frames.resize(length, o.dim);
        for (Eigen::Index t = 0; t < length; ++t)
            for (Eigen::Index d = 0; d < o.dim; ++d)
                seq.frames(t, d) = signatures[k](d) + rng.uniform(-o.noise, o.noise);
        char id[32];
        std::snprintf(id, sizeof(id), "toy_%04zu", i);
        seq.utterance_id = id;
        data.push_back({std::move(seq), EmotionLabel(k)});
    }
    return data;
}

} // namespace fitbot::emotion
