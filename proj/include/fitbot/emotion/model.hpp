#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fitbot/emotion/types.hpp"
#include "fitbot/error.hpp"
#include "fitbot/random.hpp"

namespace fitbot::emotion {

/// Weights of the attention-pooled gated recurrent classifier.
///
/// Cell (h_0 = 0):
///   z_t = sigmoid(Wz x_t + Uz h_{t-1} + bz)
///   g_t = tanh(Wh x_t + Uh h_{t-1} + bh)
///   h_t = (1 - z_t) * h_{t-1} + z_t * g_t
/// Pooling:
///   e_t = v . tanh(Wa h_t + ba),  alpha = softmax(e),  c = sum_t alpha_t h_t
/// Output:
///   p = softmax(Wo c + bo) over the 21 classes
///
/// Gradients share this type, so every tensor has a gradient of identical shape.
struct ModelParams {
    Eigen::MatrixXd update_input;     // Wz  H x D
    Eigen::MatrixXd update_hidden;    // Uz  H x H
    Eigen::VectorXd update_bias;      // bz  H
    Eigen::MatrixXd candidate_input;  // Wh  H x D
    Eigen::MatrixXd candidate_hidden; // Uh  H x H
    Eigen::VectorXd candidate_bias;   // bh  H
    Eigen::MatrixXd attention_proj;   // Wa  H x H
    Eigen::VectorXd attention_bias;   // ba  H
    Eigen::VectorXd attention_score;  // v   H
    Eigen::MatrixXd output_weights;   // Wo  K x H
    Eigen::VectorXd output_bias;      // bo  K

    Eigen::Index input_dim() const noexcept { return update_input.cols(); }
    Eigen::Index hidden_dim() const noexcept { return update_input.rows(); }
    Eigen::Index class_count() const noexcept { return output_bias.size(); }

    /// Visits every tensor in a fixed order as f(name, tensor).
    template <class F>
    void for_each(F&& f) {
        visit(*this, f);
    }
    template <class F>
    void for_each(F&& f) const {
        visit(*this, f);
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for_each([&](std::string_view, const auto& t) { n += static_cast<std::size_t>(t.size()); });
        return n;
    }

    static ModelParams zeros(Eigen::Index input_dim, Eigen::Index hidden_dim) {
        if (input_dim < 1 || hidden_dim < 1) throw InvalidArgument("model dimensions must be positive");
        const auto K = static_cast<Eigen::Index>(kClassCount);
        ModelParams p;
        p.update_input = Eigen::MatrixXd::Zero(hidden_dim, input_dim);
        p.update_hidden = Eigen::MatrixXd::Zero(hidden_dim, hidden_dim);
        p.update_bias = Eigen::VectorXd::Zero(hidden_dim);
        p.candidate_input = Eigen::MatrixXd::Zero(hidden_dim, input_dim);
        p.candidate_hidden = Eigen::MatrixXd::Zero(hidden_dim, hidden_dim);
        p.candidate_bias = Eigen::VectorXd::Zero(hidden_dim);
        p.attention_proj = Eigen::MatrixXd::Zero(hidden_dim, hidden_dim);
        p.attention_bias = Eigen::VectorXd::Zero(hidden_dim);
        p.attention_score = Eigen::VectorXd::Zero(hidden_dim);
        p.output_weights = Eigen::MatrixXd::Zero(K, hidden_dim);
        p.output_bias = Eigen::VectorXd::Zero(K);
        return p;
    }

    /// Every entry drawn from uniform(-scale, scale), row-major per tensor.
    static ModelParams random(Eigen::Index input_dim, Eigen::Index hidden_dim, std::uint64_t seed,
                              double scale = 0.08) {
        ModelParams p = zeros(input_dim, hidden_dim);
        Rng rng(seed);
        p.for_each([&](std::string_view, auto& t) {
            for (Eigen::Index r = 0; r < t.rows(); ++r)
                for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = rng.uniform(-scale, scale);
        });
        return p;
    }

    /// Throws InvalidArgument on inconsistent shapes and InvalidState on
    /// non-finite entries.
    void validate() const {
        const Eigen::Index H = hidden_dim(), D = input_dim();
        if (H < 1 || D < 1) throw InvalidArgument("model dimensions must be positive");
        auto expect = [](bool ok, const char* what) {
            if (!ok) throw InvalidArgument(std::string("inconsistent model shape: ") + what);
        };
        expect(update_hidden.rows() == H && update_hidden.cols() == H, "update_hidden");
        expect(update_bias.size() == H, "update_bias");
        expect(candidate_input.rows() == H && candidate_input.cols() == D, "candidate_input");
        expect(candidate_hidden.rows() == H && candidate_hidden.cols() == H, "candidate_hidden");
        expect(candidate_bias.size() == H, "candidate_bias");
        expect(attention_proj.rows() == H && attention_proj.cols() == H, "attention_proj");
        expect(attention_bias.size() == H, "attention_bias");
        expect(attention_score.size() == H, "attention_score");
        expect(output_weights.rows() == static_cast<Eigen::Index>(kClassCount) && output_weights.cols() == H,
               "output_weights");
        expect(output_bias.size() == static_cast<Eigen::Index>(kClassCount), "output_bias");
        for_each([](std::string_view name, const auto& t) {
            if (!t.allFinite()) throw InvalidState("non-finite entry in " + std::string(name));
        });
    }

    /// Exact (bitwise for finite values) equality of shapes and entries.
    bool operator==(const ModelParams& other) const {
        if (shapes() != other.shapes()) return false;
        return flatten() == other.flatten();
    }

    /// this += scale * other, tensor by tensor.
    void add_scaled(double scale, const ModelParams& other) {
        if (shapes() != other.shapes()) throw InvalidArgument("add_scaled: shape mismatch");
        auto axpy = [scale](auto& mine, const auto& theirs) { mine += scale * theirs; };
        axpy(update_input, other.update_input);
        axpy(update_hidden, other.update_hidden);
        axpy(update_bias, other.update_bias);
        axpy(candidate_input, other.candidate_input);
        axpy(candidate_hidden, other.candidate_hidden);
        axpy(candidate_bias, other.candidate_bias);
        axpy(attention_proj, other.attention_proj);
        axpy(attention_bias, other.attention_bias);
        axpy(attention_score, other.attention_score);
        axpy(output_weights, other.output_weights);
        axpy(output_bias, other.output_bias);
    }

    std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes() const {
        std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
        for_each([&](std::string_view, const auto& t) { out.emplace_back(t.rows(), t.cols()); });
        return out;
    }

    /// All entries concatenated in visiting order.
    Eigen::VectorXd flatten() const {
        Eigen::VectorXd out(static_cast<Eigen::Index>(parameter_count()));
        Eigen::Index at = 0;
        for_each([&](std::string_view, const auto& t) {
            for (Eigen::Index r = 0; r < t.rows(); ++r)
                for (Eigen::Index c = 0; c < t.cols(); ++c) out(at++) = t(r, c);
        });
        return out;
    }

private:
    template <class Self, class F>
    static void visit(Self& self, F& f) {
        f("update_input", self.update_input);
        f("update_hidden", self.update_hidden);
        f("update_bias", self.update_bias);
        f("candidate_input", self.candidate_input);
        f("candidate_hidden", self.candidate_hidden);
        f("candidate_bias", self.candidate_bias);
        f("attention_proj", self.attention_proj);
        f("attention_bias", self.attention_bias);
        f("attention_score", self.attention_score);
        f("output_weights", self.output_weights);
        f("output_bias", self.output_bias);
    }
};

using HiddenStates = std::vector<Eigen::VectorXd>;

struct AttentionResult {
    Eigen::VectorXd context;
    Eigen::VectorXd weights;
};

inline Eigen::VectorXd sigmoid(const Eigen::VectorXd& a) {
    return (1.0 / (1.0 + (-a.array()).exp())).matrix();
}

/// One step of the gated cell.
inline Eigen::VectorXd gated_cell(const ModelParams& p, const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev) {
    const Eigen::VectorXd z = sigmoid(p.update_input * x + p.update_hidden * h_prev + p.update_bias);
    const Eigen::VectorXd g = (p.candidate_input * x + p.candidate_hidden * h_prev + p.candidate_bias).array().tanh();
    return (h_prev.array() + z.array() * (g.array() - h_prev.array())).matrix();
}

namespace detail {

inline void check_sequence(const ModelParams& p, const FrameSequence& seq) {
    p.validate();
    if (seq.length() == 0) throw InvalidArgument("frame sequence is empty");
    if (seq.dim() != p.input_dim())
        throw InvalidArgument("frame dimension " + std::to_string(seq.dim()) + " does not match model input " +
                              std::to_string(p.input_dim()));
    if (!seq.frames.allFinite()) throw InvalidArgument("frame sequence contains non-finite values");
}

inline HiddenStates unroll(const ModelParams& p, const FrameSequence& seq) {
    HiddenStates hidden;
    hidden.reserve(static_cast<std::size_t>(seq.length()));
    Eigen::VectorXd h = Eigen::VectorXd::Zero(p.hidden_dim());
    for (Eigen::Index t = 0; t < seq.length(); ++t) {
        h = gated_cell(p, seq.frames.row(t).transpose(), h);
        hidden.push_back(h);
    }
    return hidden;
}

inline AttentionResult pool(const ModelParams& p, const HiddenStates& hidden) {
    const auto T = static_cast<Eigen::Index>(hidden.size());
    Eigen::VectorXd scores(T);
    for (Eigen::Index t = 0; t < T; ++t) {
        const Eigen::VectorXd u = (p.attention_proj * hidden[t] + p.attention_bias).array().tanh();
        scores(t) = p.attention_score.dot(u);
    }
    AttentionResult out{Eigen::VectorXd::Zero(p.hidden_dim()), softmax(scores)};
    for (Eigen::Index t = 0; t < T; ++t) out.context += out.weights(t) * hidden[static_cast<std::size_t>(t)];
    return out;
}

inline EmotionScore score(const Eigen::VectorXd& probs) {
    Probabilities p{};
    for (std::size_t k = 0; k < kClassCount; ++k) p[k] = probs(static_cast<Eigen::Index>(k));
    return EmotionScore::from_probabilities(p);
}

} // namespace detail

/// Hidden states h_1..h_T of the gated cell run left to right from h_0 = 0.
inline HiddenStates rnn_forward(const ModelParams& params, const FrameSequence& seq) {
    detail::check_sequence(params, seq);
    return detail::unroll(params, seq);
}

/// Additive attention over the hidden states ("weight pooling").
inline AttentionResult attention_pool(const ModelParams& params, const HiddenStates& hidden) {
    params.validate();
    if (hidden.empty()) throw InvalidArgument("attention_pool needs at least one hidden state");
    for (const auto& h : hidden)
        if (h.size() != params.hidden_dim()) throw InvalidArgument("hidden state dimension mismatch");
    return detail::pool(params, hidden);
}

inline Eigen::VectorXd output_logits(const ModelParams& params, const Eigen::VectorXd& context) {
    return params.output_weights * context + params.output_bias;
}

inline EmotionScore classify(const ModelParams& params, const FrameSequence& seq) {
    detail::check_sequence(params, seq);
    const auto pooled = detail::pool(params, detail::unroll(params, seq));
    return detail::score(softmax(output_logits(params, pooled.context)));
}

} // namespace fitbot::emotion
