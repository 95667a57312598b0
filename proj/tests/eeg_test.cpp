#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "fitbot/eeg/blink.hpp"
#include "fitbot/eeg/io.hpp"
#include "fitbot/eeg/trace.hpp"

using namespace fitbot;
using namespace fitbot::eeg;

namespace {

EegTrace make_trace(std::vector<double> samples, double rate = 250.0) {
    EegTrace t;
    t.samples = std::move(samples);
    t.sample_rate_hz = rate;
    return t;
}

EegTrace random_trace(std::mt19937_64& gen, std::size_t n, double spread) {
    std::uniform_real_distribution<double> dist(-spread, spread);
    std::vector<double> s(n);
    for (auto& v : s) v = dist(gen);
    return make_trace(std::move(s));
}

SyntheticEegParams benchmark_params() {
    SyntheticEegParams p;
    p.duration_ms = 20000.0;
    p.sample_rate_hz = 25.0;
    p.noise_amplitude = 40.0;
    p.blink_amplitude = 600.0;
    p.seed = 7;
    p.blink_times_ms = benchmark_blink_times(20, p.duration_ms, p.seed);
    return p;
}

} // namespace

TEST(ElectrodeConfig, DefaultsAreHeadbandElectrodes) {
    ElectrodeConfig e;
    EXPECT_EQ(e.collecting, "IN1P");
    EXPECT_NO_THROW(e.validate());
    e.bias = "IN1P";
    EXPECT_THROW(e.validate(), InvalidArgument);
    e.bias = "";
    EXPECT_THROW(e.validate(), InvalidArgument);
}

TEST(GenerateSyntheticEeg, SilentTraceIsAllZero) {
    SyntheticEegParams p;
    p.duration_ms = 1000.0;
    p.sample_rate_hz = 250.0;
    p.noise_amplitude = 0.0;
    p.seed = 1234;
    const auto trace = generate_synthetic_eeg(p);
    ASSERT_EQ(trace.size(), 250u);
    for (double v : trace.samples) EXPECT_EQ(v, 0.0);
}

TEST(GenerateSyntheticEeg, SameSeedIsBitwiseIdentical) {
    auto p = benchmark_params();
    p.seed = 42;
    EXPECT_EQ(generate_synthetic_eeg(p), generate_synthetic_eeg(p));
    auto q = p;
    q.seed = 43;
    EXPECT_NE(generate_synthetic_eeg(p).samples, generate_synthetic_eeg(q).samples);
}

TEST(GenerateSyntheticEeg, LengthAndNoisePeak) {
    SyntheticEegParams p;
    p.duration_ms = 1001.0;
    p.sample_rate_hz = 333.0;
    p.noise_amplitude = 40.0;
    const auto trace = generate_synthetic_eeg(p);
    EXPECT_EQ(trace.size(), static_cast<std::size_t>(std::floor(1001.0 * 333.0 / 1000.0)));
    double peak = 0.0;
    for (double v : trace.samples) peak = std::max(peak, std::abs(v));
    EXPECT_NEAR(peak, 40.0, 1e-9);
}

TEST(GenerateSyntheticEeg, BlinkPeakSitsOnCenterSample) {
    SyntheticEegParams p;
    p.duration_ms = 2000.0;
    p.sample_rate_hz = 250.0;
    p.noise_amplitude = 0.0;
    p.blink_times_ms = {1000.0};
    const auto trace = generate_synthetic_eeg(p);
    EXPECT_DOUBLE_EQ(trace.samples[250], 600.0);
    EXPECT_EQ(trace.samples[250 - 38], 0.0); // 152 ms before: outside the 300 ms support
}

TEST(GenerateSyntheticEeg, RejectsBadArguments) {
    SyntheticEegParams p;
    p.blink_times_ms = {500.0, 500.0};
    EXPECT_THROW(generate_synthetic_eeg(p), InvalidArgument);
    p.blink_times_ms = {900.0, 500.0};
    EXPECT_THROW(generate_synthetic_eeg(p), InvalidArgument);
    p.blink_times_ms = {};
    p.duration_ms = 0.0;
    EXPECT_THROW(generate_synthetic_eeg(p), InvalidArgument);
    p.duration_ms = 1000.0;
    p.blink_times_ms = {1000.0};
    EXPECT_THROW(generate_synthetic_eeg(p), InvalidArgument);
    p.blink_times_ms = {};
    p.blink_amplitude = 10.0;
    EXPECT_THROW(generate_synthetic_eeg(p), InvalidArgument);
}

TEST(FirstDifference, ForcedExamples) {
    EXPECT_EQ(first_difference(make_trace({5, 5, 5, 5})).samples, (std::vector<double>{0, 0, 0}));
    EXPECT_EQ(first_difference(make_trace({0, 150, 0})).samples, (std::vector<double>{150, -150}));
}

TEST(FirstDifference, MatchesIndependentLoop) {
    std::mt19937_64 gen(99);
    auto trace = random_trace(gen, 1000, 500.0);
    trace.start_time_ms = 17;
    const auto diff = first_difference(trace);
    ASSERT_EQ(diff.size(), 999u);
    for (std::size_t i = 0; i < diff.size(); ++i) EXPECT_EQ(diff.samples[i], trace.samples[i + 1] - trace.samples[i]);
    EXPECT_EQ(diff.sample_rate_hz, trace.sample_rate_hz);
    EXPECT_EQ(diff.start_time_ms, 17);
    EXPECT_EQ(diff.electrodes, trace.electrodes);
}

TEST(FirstDifference, ConstantTraceGivesZeros) {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> value(-1e6, 1e6);
    std::uniform_int_distribution<std::size_t> length(2, 300);
    for (int round = 0; round < 200; ++round) {
        const auto diff = first_difference(make_trace(std::vector<double>(length(gen), value(gen))));
        for (double v : diff.samples) ASSERT_EQ(v, 0.0);
    }
}

TEST(FirstDifference, RejectsShortTrace) {
    EXPECT_THROW(first_difference(make_trace({1.0})), InvalidArgument);
    EXPECT_THROW(first_difference(make_trace({})), InvalidArgument);
    EXPECT_THROW(first_difference(make_trace({1.0, 2.0}, 0.0)), InvalidArgument);
}

TEST(AmplitudeSmooth, ThresholdBoundaryIsKept) {
    EXPECT_EQ(amplitude_smooth(make_trace({149, 150, -151}), 150.0).samples, (std::vector<double>{0, 150, 151}));
}

TEST(AmplitudeSmooth, ZeroThresholdIsAbsoluteValue) {
    std::mt19937_64 gen(3);
    const auto trace = random_trace(gen, 200, 10.0);
    const auto out = amplitude_smooth(trace, 0.0);
    for (std::size_t i = 0; i < trace.size(); ++i) EXPECT_EQ(out.samples[i], std::abs(trace.samples[i]));
}

TEST(AmplitudeSmooth, MatchesIndependentFilterAndIsNonNegative) {
    std::mt19937_64 gen(11);
    for (int round = 0; round < 20; ++round) {
        const auto trace = random_trace(gen, 500, 400.0);
        const auto out = amplitude_smooth(trace, 150.0);
        ASSERT_EQ(out.size(), trace.size());
        for (std::size_t i = 0; i < trace.size(); ++i) {
            const double a = trace.samples[i] < 0 ? -trace.samples[i] : trace.samples[i];
            const double expected = (a < 150.0) ? 0.0 : a;
            ASSERT_EQ(out.samples[i], expected);
            ASSERT_GE(out.samples[i], 0.0);
        }
    }
}

TEST(AmplitudeSmooth, RejectsNegativeThreshold) {
    EXPECT_THROW(amplitude_smooth(make_trace({1, 2}), -1.0), InvalidArgument);
}

TEST(DetectBlinks, ConstantTraceHasNoEvents) {
    EXPECT_TRUE(detect_blinks(make_trace(std::vector<double>(100, 321.0))).empty());
}

TEST(DetectBlinks, SinglePulseMatchesAnalyticDifferencePeak) {
    constexpr double rate = 25.0, center = 1000.0, amp = 600.0;
    SyntheticEegParams p;
    p.duration_ms = 2000.0;
    p.sample_rate_hz = rate;
    p.noise_amplitude = 0.0;
    p.blink_amplitude = amp;
    p.blink_times_ms = {center};
    const auto events = detect_blinks(generate_synthetic_eeg(p));
    ASSERT_EQ(events.size(), 1u);

    // Analytic raised cosine sampled every 40 ms; the largest |difference| is
    // the expected peak (rising edge wins the exact tie with the falling edge).
    const double dt = 1000.0 / rate;
    auto pulse = [&](double t) {
        const double off = t - center;
        return std::abs(off) < 150.0 ? amp * 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * off / 300.0)) : 0.0;
    };
    double best = -1.0, best_t = 0.0;
    for (int i = 0; i < 49; ++i) {
        const double t = i * dt;
        const double d = std::abs(pulse(t + dt) - pulse(t));
        if (d > best) {
            best = d;
            best_t = t;
        }
    }
    EXPECT_GE(best, 150.0);
    EXPECT_DOUBLE_EQ(events[0].peak_magnitude, best);
    EXPECT_DOUBLE_EQ(events[0].peak_time_ms, best_t);
    EXPECT_GT(events[0].peak_time_ms, center - 150.0);
    EXPECT_LT(events[0].peak_time_ms, center + 150.0);
}

TEST(DetectBlinks, BenchmarkTraceFindsAtLeast17Of20) {
    const auto p = benchmark_params();
    const auto events = detect_blinks(generate_synthetic_eeg(p));
    const auto report = evaluate_detection(events, p.blink_times_ms, 250.0);
    EXPECT_GE(report.matched, 17u);
    EXPECT_GE(report.recall, 0.85);
}

TEST(DetectBlinks, ShiftEquivariance) {
    for (double rate : {25.0, 50.0, 125.0, 250.0}) {
        auto p = benchmark_params();
        p.sample_rate_hz = rate;
        p.blink_amplitude = 600.0 * rate / 25.0; // keeps per-sample edges above threshold
        p.noise_amplitude = 40.0;
        const auto base = generate_synthetic_eeg(p);
        const auto base_events = detect_blinks(base);
        ASSERT_FALSE(base_events.empty()) << rate;
        for (std::size_t k : {1u, 7u, 33u}) {
            auto shifted = base;
            shifted.samples.insert(shifted.samples.begin(), k, base.samples.front());
            const auto events = detect_blinks(shifted);
            ASSERT_EQ(events.size(), base_events.size());
            const double shift_ms = static_cast<double>(k) / rate * 1000.0;
            for (std::size_t i = 0; i < events.size(); ++i) {
                EXPECT_EQ(events[i].peak_time_ms, base_events[i].peak_time_ms + shift_ms);
                EXPECT_EQ(events[i].peak_magnitude, base_events[i].peak_magnitude);
            }
        }
    }
}

TEST(DetectBlinks, EventsRespectRefractoryPeriod) {
    std::mt19937_64 gen(21);
    const BlinkParams params;
    for (int round = 0; round < 50; ++round) {
        auto trace = random_trace(gen, 400, 300.0);
        trace.sample_rate_hz = 100.0;
        const auto events = detect_blinks(trace, params);
        for (std::size_t i = 1; i < events.size(); ++i) {
            ASSERT_GE(events[i].peak_time_ms - events[i - 1].peak_time_ms, params.refractory_ms);
            ASSERT_GE(events[i].peak_magnitude, params.threshold);
        }
    }
}

TEST(DetectBlinks, ScalingUpNeverLosesBlinksOnSyntheticTraces) {
    // Holds for traces whose artifacts are separated by more than the
    // refractory period; arbitrary noise can merge groups when scaled.
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto p = benchmark_params();
        p.seed = seed;
        p.blink_times_ms = benchmark_blink_times(20, p.duration_ms, seed);
        p.blink_amplitude = 300.0 + 20.0 * static_cast<double>(seed);
        const auto base = generate_synthetic_eeg(p);
        std::size_t previous = detect_blinks(base).size();
        for (double c : {1.0, 1.25, 1.5, 2.0, 3.0, 5.0}) {
            auto scaled = base;
            for (auto& v : scaled.samples) v *= c;
            const std::size_t count = detect_blinks(scaled).size();
            ASSERT_GE(count, previous) << "seed " << seed << " scale " << c;
            previous = count;
        }
    }
}

TEST(DetectBlinks, RejectsInvalidParams) {
    const auto trace = make_trace({0, 1, 2});
    EXPECT_THROW(detect_blinks(trace, {-1.0, 200.0, 300.0}), InvalidArgument);
    EXPECT_THROW(detect_blinks(trace, {150.0, 0.0, 300.0}), InvalidArgument);
    EXPECT_THROW(detect_blinks(trace, {150.0, 200.0, 100.0}), InvalidArgument);
    EXPECT_THROW(detect_blinks(make_trace({1.0}), {}), InvalidArgument);
}

TEST(EvaluateDetection, ExactMatch) {
    const auto r = evaluate_detection({{100, 200}, {500, 200}}, {100, 500}, 250.0);
    EXPECT_EQ(r.matched, 2u);
    EXPECT_EQ(r.recall, 1.0);
    EXPECT_EQ(r.precision, 1.0);
}

TEST(EvaluateDetection, SeventeenOfTwenty) {
    std::vector<double> truth;
    std::vector<BlinkEvent> events;
    for (int i = 0; i < 20; ++i) {
        truth.push_back(1000.0 * i + 500.0);
        if (i % 7 != 3) events.push_back({1000.0 * i + 520.0, 300.0});
    }
    ASSERT_EQ(events.size(), 17u);
    const auto r = evaluate_detection(events, truth, 250.0);
    EXPECT_EQ(r.matched, 17u);
    EXPECT_DOUBLE_EQ(r.recall, 0.85);
    EXPECT_DOUBLE_EQ(r.precision, 1.0);
}

TEST(EvaluateDetection, JitteredTruth) {
    constexpr double tol = 250.0;
    std::vector<BlinkEvent> events;
    std::vector<double> near, far;
    for (int i = 0; i < 10; ++i) {
        const double t = 2000.0 * i + 1000.0;
        events.push_back({t, 200.0});
        near.push_back(t + (i % 2 ? tol / 2 : -tol / 2));
        far.push_back(t + (i % 2 ? 2 * tol : -2 * tol));
    }
    EXPECT_EQ(evaluate_detection(events, near, tol).recall, 1.0);
    EXPECT_EQ(evaluate_detection(events, far, tol).recall, 0.0);
}

TEST(EvaluateDetection, EmptyCasesAreDefinedAsOne) {
    const auto r = evaluate_detection({}, {}, 250.0);
    EXPECT_EQ(r.recall, 1.0);
    EXPECT_EQ(r.precision, 1.0);
    const auto missed = evaluate_detection({}, {100.0}, 250.0);
    EXPECT_EQ(missed.recall, 0.0);
    EXPECT_EQ(missed.precision, 1.0);
}

TEST(EvaluateDetection, OneToOneInvariants) {
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> when(0.0, 10000.0);
    std::uniform_int_distribution<int> count(0, 30);
    for (int round = 0; round < 300; ++round) {
        std::vector<double> truth(count(gen));
        for (auto& t : truth) t = when(gen);
        std::sort(truth.begin(), truth.end());
        std::vector<BlinkEvent> events(count(gen));
        for (auto& e : events) e = {when(gen), 200.0};
        const auto r = evaluate_detection(events, truth, 250.0);
        ASSERT_LE(r.matched, std::min(r.true_blinks, r.detected));
        ASSERT_GE(r.recall, 0.0);
        ASSERT_LE(r.recall, 1.0);
        ASSERT_GE(r.precision, 0.0);
        ASSERT_LE(r.precision, 1.0);
    }
}

TEST(EvaluateDetection, RejectsBadInput) {
    EXPECT_THROW(evaluate_detection({}, {}, 0.0), InvalidArgument);
    EXPECT_THROW(evaluate_detection({}, {5.0, 1.0}, 250.0), InvalidArgument);
}

TEST(EegIo, CsvAndJsonPreserveTheTrace) {
    auto p = benchmark_params();
    auto trace = generate_synthetic_eeg(p);
    trace.start_time_ms = 120;
    const auto csv = trace_from_csv(trace_to_csv(trace));
    EXPECT_EQ(csv.samples, trace.samples);
    EXPECT_EQ(csv.sample_rate_hz, trace.sample_rate_hz);
    EXPECT_EQ(csv.start_time_ms, trace.start_time_ms);

    trace.electrodes = {"IN1P", "REF2", "BIAS1"};
    EXPECT_EQ(trace_from_json(to_json(trace)), trace);
}

TEST(EegIo, MalformedInputsAreFormatErrors) {
    EXPECT_THROW(trace_from_csv("t,a\n0,1\n"), FormatError);
    EXPECT_THROW(trace_from_csv("time_ms,amplitude\n0,abc\n"), FormatError);
    EXPECT_THROW(trace_from_json(nlohmann::json{{"samples", {1, 2}}}), FormatError);
}
