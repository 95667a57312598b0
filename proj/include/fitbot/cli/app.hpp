#pragma once

#include <algorithm>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fitbot/cli/config.hpp"
#include "fitbot/curation/io.hpp"
#include "fitbot/eeg/blink.hpp"
#include "fitbot/eeg/io.hpp"
#include "fitbot/emotion/io.hpp"
#include "fitbot/emotion/training.hpp"
#include "fitbot/protocol/io.hpp"

namespace fitbot::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitFloor = 3;

namespace detail {

namespace fs = std::filesystem;

using Override = std::function<void(RunConfig&)>;

// Adds a flag whose value, when given, replaces the config field selected by
// `field`.
template <class Field>
void override_option(CLI::App* app, std::vector<Override>& overrides, const std::string& flag, Field field,
                     const std::string& help) {
    using T = std::remove_cvref_t<decltype(field(std::declval<RunConfig&>()))>;
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(flag, *value, help);
    overrides.push_back([=](RunConfig& c) {
        if (opt->count() > 0) field(c) = *value;
    });
}

template <class Field>
void override_flag(CLI::App* app, std::vector<Override>& overrides, const std::string& flag, Field field,
                   const std::string& help) {
    CLI::Option* opt = app->add_flag(flag, help);
    overrides.push_back([=](RunConfig& c) {
        if (opt->count() > 0) field(c) = true;
    });
}

struct Context {
    RunConfig config;
    std::ostream& out;

    fs::path path(const std::string& given, const std::string& fallback) const {
        return given.empty() ? fs::path(config.out) / fallback : fs::path(given);
    }

    void write(const std::string& name, const std::string& contents) const {
        const fs::path p = fs::path(config.out) / name;
        text::write_file(p.string(), contents);
        out << "wrote " << p.string() << '\n';
    }

    void write_json(const std::string& name, const nlohmann::json& j) const { write(name, j.dump(2) + '\n'); }
};

inline nlohmann::json read_json(const fs::path& p) {
    const auto contents = text::read_file(p.string());
    try {
        return nlohmann::json::parse(contents);
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError("malformed JSON in " + p.string() + ": " + ex.what());
    }
}

// --- eeg ------------------------------------------------------------------

inline eeg::BlinkParams blink_params(const EegConfig& c) { return {c.threshold, c.merge_gap_ms, c.refractory_ms}; }

inline int eeg_gen(const Context& ctx) {
    const auto& c = ctx.config.eeg;
    eeg::SyntheticEegParams p;
    p.duration_ms = c.duration_ms;
    p.sample_rate_hz = c.sample_rate_hz;
    p.noise_amplitude = c.noise_amplitude;
    p.blink_amplitude = c.blink_amplitude;
    p.seed = ctx.config.seed;
    p.blink_times_ms = eeg::benchmark_blink_times(c.blinks, c.duration_ms, ctx.config.seed);
    const auto trace = eeg::generate_synthetic_eeg(p);
    ctx.write("trace.csv", eeg::trace_to_csv(trace));
    ctx.write_json("truth.json", {{"blink_times_ms", p.blink_times_ms}});
    ctx.out << trace.size() << " samples, " << p.blink_times_ms.size() << " blinks\n";
    return kExitOk;
}

inline eeg::EegTrace read_trace(const fs::path& p) {
    if (p.extension() == ".json") return eeg::trace_from_json(read_json(p));
    return eeg::trace_from_csv(text::read_file(p.string()));
}

inline int eeg_detect(const Context& ctx) {
    const auto trace = read_trace(ctx.path(ctx.config.eeg.trace, "trace.csv"));
    const auto events = eeg::detect_blinks(trace, blink_params(ctx.config.eeg));
    ctx.write_json("events.json", eeg::to_json(events));
    ctx.out << events.size() << " blink events\n";
    return kExitOk;
}

inline int eeg_eval(const Context& ctx) {
    const auto& c = ctx.config.eeg;
    const auto events = eeg::events_from_json(read_json(ctx.path(c.events, "events.json")));
    const auto truth_path = ctx.path(c.truth, "truth.json");
    std::vector<double> truth;
    try {
        truth = read_json(truth_path).at("blink_times_ms").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError("malformed truth file " + truth_path.string() + ": " + ex.what());
    }
    const auto report = eeg::evaluate_detection(events, truth, c.tolerance_ms);
    ctx.write_json("report.json", eeg::to_json(report));
    ctx.out << "recall " << text::format_double(report.recall) << " precision "
            << text::format_double(report.precision) << " (" << report.matched << "/" << report.true_blinks << ")\n";
    if (report.recall < c.recall_floor) {
        ctx.out << "recall below floor " << text::format_double(c.recall_floor) << '\n';
        return kExitFloor;
    }
    return kExitOk;
}

// --- emotion --------------------------------------------------------------

inline emotion::Dataset training_data(const Context& ctx) {
    const auto& c = ctx.config.emotion;
    if (!c.data_dir.empty()) return emotion::load_dataset(c.data_dir);
    emotion::ToyDatasetOptions o;
    o.count = c.toy_count;
    o.dim = c.toy_dim;
    o.min_length = c.toy_min_length;
    o.max_length = c.toy_max_length;
    o.noise = c.toy_noise;
    o.seed = ctx.config.seed;
    return emotion::make_toy_dataset(o);
}

inline int emotion_train(const Context& ctx) {
    const auto& c = ctx.config.emotion;
    if (c.log_every == 0) throw ConfigError("emotion.log_every must be positive");
    if (c.hidden_dim < 1) throw ConfigError("emotion.hidden_dim must be positive");
    const auto data = training_data(ctx);
    if (data.empty()) throw ConfigError("training dataset is empty");
    const auto dim = data.front().sequence.dim();

    std::string curve = "step,loss,train_accuracy\n";
    const emotion::TrainOptions options{c.learning_rate, c.steps, c.batch_size, ctx.config.seed};
    auto params = emotion::ModelParams::random(dim, c.hidden_dim, ctx.config.seed, c.init_scale);
    double final_accuracy = emotion::accuracy(params, data);
    params = emotion::train(std::move(params), data, options,
                            [&](std::size_t step, double batch_loss, const emotion::ModelParams& p) {
                                if (step % c.log_every != 0 && step != c.steps) return;
                                final_accuracy = emotion::accuracy(p, data);
                                curve += std::to_string(step) + ',' + text::format_double(batch_loss) + ',' +
                                         text::format_double(final_accuracy) + '\n';
                            });
    ctx.write_json("params.json", emotion::to_json(params));
    ctx.write("loss.csv", curve);
    ctx.out << "train accuracy " << text::format_double(final_accuracy) << " after " << c.steps << " steps\n";
    if (final_accuracy < c.accuracy_floor) {
        ctx.out << "accuracy below floor " << text::format_double(c.accuracy_floor) << '\n';
        return kExitFloor;
    }
    return kExitOk;
}

inline emotion::ModelParams read_params(const fs::path& p) { return emotion::params_from_json(read_json(p)); }

inline int emotion_classify(const Context& ctx) {
    const auto& c = ctx.config.emotion;
    if (c.input.empty()) throw ConfigError("emotion classify needs --input (a frame sequence JSON file)");
    const auto seq = emotion::sequence_from_json(read_json(c.input));
    const auto params =
        c.zero_params ? emotion::ModelParams::zeros(seq.dim(), c.hidden_dim) : read_params(ctx.path(c.params, "params.json"));
    const auto score = emotion::classify(params, seq);
    ctx.write_json("score.json", emotion::to_json(score));
    ctx.out << "argmax " << score.argmax.index() << " p=" << text::format_double(score.probabilities[score.argmax.index()])
            << '\n';
    return kExitOk;
}

inline int emotion_gradcheck(const Context& ctx) {
    const auto& c = ctx.config.emotion;
    if (c.gradcheck_instances == 0) throw ConfigError("emotion.gradcheck_instances must be positive");
    double worst = 0.0;
    std::string worst_tensor;
    auto per_instance = nlohmann::json::array();
    for (std::size_t i = 0; i < c.gradcheck_instances; ++i) {
        const auto inst = emotion::make_gradcheck_instance(ctx.config.seed + i, c.gradcheck_input_dim,
                                                           c.gradcheck_hidden_dim, c.gradcheck_length, c.gradcheck_batch);
        const auto r = emotion::gradient_check(inst.params, inst.batch, c.gradcheck_epsilon);
        per_instance.push_back({{"seed", ctx.config.seed + i},
                                {"max_relative_error", r.max_relative_error},
                                {"worst_tensor", r.worst_tensor},
                                {"entries_checked", r.entries_checked}});
        if (r.max_relative_error >= worst) {
            worst = r.max_relative_error;
            worst_tensor = r.worst_tensor;
        }
    }
    const bool pass = worst < c.gradcheck_tolerance;
    ctx.write_json("gradcheck.json", {{"epsilon", c.gradcheck_epsilon},
                                      {"tolerance", c.gradcheck_tolerance},
                                      {"max_relative_error", worst},
                                      {"worst_tensor", worst_tensor},
                                      {"pass", pass},
                                      {"instances", per_instance}});
    ctx.out << "max relative error " << text::format_double(worst) << " (" << worst_tensor << ")\n";
    return pass ? kExitOk : kExitFloor;
}

// --- sim ------------------------------------------------------------------

inline int sim_run(const Context& ctx) {
    const auto& c = ctx.config.sim;
    if (c.topology.empty()) throw ConfigError("sim run needs --topology (a topology JSON file)");
    const auto topology = protocol::topology_from_json(read_json(c.topology));
    const auto workload = c.workload.empty()
                              ? protocol::periodic_workload(c.requests, c.period_ms, protocol::quality_from_string(c.quality),
                                                            c.feature_dim, ctx.config.seed)
                              : protocol::workload_from_json(read_json(c.workload));

    const auto dim = workload.empty() ? c.feature_dim : workload.front().features.dim();
    if (c.hidden_dim < 1) throw ConfigError("sim.hidden_dim must be positive");
    const auto local = c.local_params.empty() ? emotion::ModelParams::random(dim, c.hidden_dim, ctx.config.seed + 1, 0.5)
                                              : read_params(c.local_params);
    const auto cloud = c.cloud_params.empty() ? emotion::ModelParams::random(dim, c.hidden_dim, ctx.config.seed + 2, 0.5)
                                              : read_params(c.cloud_params);
    for (const auto& item : workload)
        if (item.features.dim() != local.input_dim() || item.features.dim() != cloud.input_dim())
            throw ConfigError("workload feature dimension does not match the recognizer input dimension");
    const protocol::Classifiers classifiers{[&](const emotion::FrameSequence& s) { return emotion::classify(local, s); },
                                            [&](const emotion::FrameSequence& s) { return emotion::classify(cloud, s); }};

    const auto report =
        protocol::run_simulation(topology, workload, classifiers, {c.latency_budget_ms, c.histogram_bucket_ms, ctx.config.seed});
    ctx.write_json("report.json", protocol::to_json(report));
    ctx.write("events.csv", protocol::event_log_to_csv(report));

    std::vector<curation::CurationSample> annotations;
    for (const auto& a : report.edge_annotations) annotations.push_back({a.mean_features, a.soft_label, a.utterance_id});
    ctx.write("annotations.jsonl", curation::samples_to_jsonl(annotations));

    std::size_t completed = 0;
    for (const auto& o : report.requests) completed += o.completed() ? 1 : 0;
    ctx.out << completed << "/" << report.requests.size() << " requests completed, " << report.budget_violations
            << " over budget\n";
    return kExitOk;
}

// --- curate ---------------------------------------------------------------

inline int curate_run(const Context& ctx) {
    const auto& c = ctx.config.curate;
    curation::CurationDataset dataset;
    std::vector<curation::CurationSample> candidates;
    if (c.candidates.empty()) {
        curation::StreamOptions o;
        o.count = c.stream_count;
        o.dim = c.stream_dim;
        o.classes = c.stream_classes;
        o.seed_per_class = c.stream_seed_per_class;
        o.spread = c.stream_spread;
        o.ambiguous_rate = c.stream_ambiguous_rate;
        o.outlier_rate = c.stream_outlier_rate;
        o.seed = ctx.config.seed;
        auto stream = curation::make_candidate_stream(o);
        dataset = std::move(stream.seed);
        candidates = std::move(stream.candidates);
    } else {
        candidates = curation::samples_from_jsonl(text::read_file(c.candidates));
    }
    // An explicit starting dataset replaces the synthetic seed set.
    if (!c.dataset.empty()) dataset = curation::dataset_from_jsonl(text::read_file(c.dataset));
    const auto records = curation::curate(dataset, candidates, {c.tau_sim, c.epsilon});
    ctx.write("decisions.csv", curation::decisions_to_csv(records));
    ctx.write("dataset.jsonl", curation::dataset_to_jsonl(dataset));
    const auto admitted = std::count_if(records.begin(), records.end(), [](const auto& r) { return r.decision.admitted; });
    ctx.out << admitted << "/" << records.size() << " candidates admitted, dataset size " << dataset.size()
            << ", purity " << text::format_double(curation::purity(dataset)) << '\n';
    return kExitOk;
}

} // namespace detail

/// Runs one subcommand. Exit status: 0 success, 2 usage or configuration
/// error, 3 an acceptance floor was missed.
inline int run_cli(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    using namespace detail;
    CLI::App app{"Wearable affective computing toolkit: EEG blink detection, speech emotion recognition, "
                 "device/edge/cloud simulation and dataset curation."};
    app.name("fitbot");
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::vector<Override> overrides;
    app.add_option("--config", config_path, "JSON config file; flags override its values");
    override_option(&app, overrides, "--seed", [](RunConfig& c) -> auto& { return c.seed; }, "random seed");
    override_option(&app, overrides, "--out", [](RunConfig& c) -> auto& { return c.out; }, "output directory");

    auto* eeg_cmd = app.add_subcommand("eeg", "synthetic EEG and blink detection")->require_subcommand(1);
    auto* eeg_gen_cmd = eeg_cmd->add_subcommand("gen", "write a synthetic trace with injected blinks");
    auto* eeg_detect_cmd = eeg_cmd->add_subcommand("detect", "detect blinks in a trace");
    auto* eeg_eval_cmd = eeg_cmd->add_subcommand("eval", "score detected events against the injected blinks");
    override_option(eeg_gen_cmd, overrides, "--blinks", [](RunConfig& c) -> auto& { return c.eeg.blinks; }, "blink count");
    override_option(eeg_gen_cmd, overrides, "--duration-ms", [](RunConfig& c) -> auto& { return c.eeg.duration_ms; },
                    "trace length");
    override_option(eeg_gen_cmd, overrides, "--rate", [](RunConfig& c) -> auto& { return c.eeg.sample_rate_hz; },
                    "sample rate in Hz");
    override_option(eeg_gen_cmd, overrides, "--noise", [](RunConfig& c) -> auto& { return c.eeg.noise_amplitude; },
                    "noise amplitude");
    override_option(eeg_gen_cmd, overrides, "--blink-amplitude",
                    [](RunConfig& c) -> auto& { return c.eeg.blink_amplitude; }, "blink amplitude");
    override_option(eeg_detect_cmd, overrides, "--trace", [](RunConfig& c) -> auto& { return c.eeg.trace; },
                    "input trace (.csv or .json)");
    override_option(eeg_detect_cmd, overrides, "--threshold", [](RunConfig& c) -> auto& { return c.eeg.threshold; },
                    "difference threshold");
    override_option(eeg_detect_cmd, overrides, "--merge-gap-ms", [](RunConfig& c) -> auto& { return c.eeg.merge_gap_ms; },
                    "grouping gap");
    override_option(eeg_detect_cmd, overrides, "--refractory-ms",
                    [](RunConfig& c) -> auto& { return c.eeg.refractory_ms; }, "minimum event spacing");
    override_option(eeg_eval_cmd, overrides, "--events", [](RunConfig& c) -> auto& { return c.eeg.events; },
                    "detected events JSON");
    override_option(eeg_eval_cmd, overrides, "--truth", [](RunConfig& c) -> auto& { return c.eeg.truth; },
                    "injected blink times JSON");
    override_option(eeg_eval_cmd, overrides, "--tolerance-ms", [](RunConfig& c) -> auto& { return c.eeg.tolerance_ms; },
                    "matching tolerance");
    override_option(eeg_eval_cmd, overrides, "--recall-floor", [](RunConfig& c) -> auto& { return c.eeg.recall_floor; },
                    "exit 3 below this recall");

    auto* emo_cmd = app.add_subcommand("emotion", "speech emotion recognizer")->require_subcommand(1);
    auto* train_cmd = emo_cmd->add_subcommand("train", "train on a dataset directory or the toy set");
    auto* classify_cmd = emo_cmd->add_subcommand("classify", "classify one frame sequence");
    auto* gradcheck_cmd = emo_cmd->add_subcommand("gradcheck", "compare backprop with finite differences");
    override_option(train_cmd, overrides, "--data", [](RunConfig& c) -> auto& { return c.emotion.data_dir; },
                    "dataset directory");
    override_option(train_cmd, overrides, "--hidden", [](RunConfig& c) -> auto& { return c.emotion.hidden_dim; },
                    "hidden size");
    override_option(train_cmd, overrides, "--lr", [](RunConfig& c) -> auto& { return c.emotion.learning_rate; },
                    "learning rate");
    override_option(train_cmd, overrides, "--steps", [](RunConfig& c) -> auto& { return c.emotion.steps; },
                    "update steps");
    override_option(train_cmd, overrides, "--batch", [](RunConfig& c) -> auto& { return c.emotion.batch_size; },
                    "mini-batch size");
    override_option(train_cmd, overrides, "--accuracy-floor",
                    [](RunConfig& c) -> auto& { return c.emotion.accuracy_floor; }, "exit 3 below this accuracy");
    override_option(classify_cmd, overrides, "--params", [](RunConfig& c) -> auto& { return c.emotion.params; },
                    "parameter JSON");
    override_option(classify_cmd, overrides, "--input", [](RunConfig& c) -> auto& { return c.emotion.input; },
                    "frame sequence JSON");
    override_flag(classify_cmd, overrides, "--zero-params", [](RunConfig& c) -> auto& { return c.emotion.zero_params; },
                  "use an all-zero model");
    override_option(gradcheck_cmd, overrides, "--instances",
                    [](RunConfig& c) -> auto& { return c.emotion.gradcheck_instances; }, "random instances");
    override_option(gradcheck_cmd, overrides, "--epsilon",
                    [](RunConfig& c) -> auto& { return c.emotion.gradcheck_epsilon; }, "finite-difference step");

    auto* sim_cmd = app.add_subcommand("sim", "device/edge/cloud simulation")->require_subcommand(1);
    auto* sim_run_cmd = sim_cmd->add_subcommand("run", "run a topology and workload");
    override_option(sim_run_cmd, overrides, "--topology", [](RunConfig& c) -> auto& { return c.sim.topology; },
                    "topology JSON");
    override_option(sim_run_cmd, overrides, "--workload", [](RunConfig& c) -> auto& { return c.sim.workload; },
                    "workload JSON");
    override_option(sim_run_cmd, overrides, "--requests", [](RunConfig& c) -> auto& { return c.sim.requests; },
                    "generated request count");
    override_option(sim_run_cmd, overrides, "--period-ms", [](RunConfig& c) -> auto& { return c.sim.period_ms; },
                    "generated request spacing");
    override_option(sim_run_cmd, overrides, "--quality", [](RunConfig& c) -> auto& { return c.sim.quality; },
                    "STANDARD or HIGH");
    override_option(sim_run_cmd, overrides, "--budget-ms", [](RunConfig& c) -> auto& { return c.sim.latency_budget_ms; },
                    "latency budget");

    auto* curate_cmd = app.add_subcommand("curate", "dataset admission")->require_subcommand(1);
    auto* curate_run_cmd = curate_cmd->add_subcommand("run", "admit candidates into a dataset");
    override_option(curate_run_cmd, overrides, "--dataset", [](RunConfig& c) -> auto& { return c.curate.dataset; },
                    "starting dataset (JSON lines)");
    override_option(curate_run_cmd, overrides, "--candidates",
                    [](RunConfig& c) -> auto& { return c.curate.candidates; }, "candidates (JSON lines)");
    override_option(curate_run_cmd, overrides, "--tau", [](RunConfig& c) -> auto& { return c.curate.tau_sim; },
                    "similarity threshold");
    override_option(curate_run_cmd, overrides, "--epsilon", [](RunConfig& c) -> auto& { return c.curate.epsilon; },
                    "allowed purity drop");

    for (auto* sub : {eeg_cmd, emo_cmd, sim_cmd, curate_cmd}) {
        sub->fallthrough();
        for (auto* leaf : sub->get_subcommands({})) leaf->fallthrough();
    }

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        Context ctx{config_path.empty() ? RunConfig{} : load_config(config_path), out};
        for (const auto& apply : overrides) apply(ctx.config);
        std::filesystem::create_directories(ctx.config.out);

        if (eeg_gen_cmd->parsed()) return eeg_gen(ctx);
        if (eeg_detect_cmd->parsed()) return eeg_detect(ctx);
        if (eeg_eval_cmd->parsed()) return eeg_eval(ctx);
        if (train_cmd->parsed()) return emotion_train(ctx);
        if (classify_cmd->parsed()) return emotion_classify(ctx);
        if (gradcheck_cmd->parsed()) return emotion_gradcheck(ctx);
        if (sim_run_cmd->parsed()) return sim_run(ctx);
        if (curate_run_cmd->parsed()) return curate_run(ctx);
        err << "no subcommand given\n";
        return kExitConfig;
    } catch (const Diverged& e) {
        err << "error: " << e.what() << '\n';
        return kExitFloor;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }
}

inline int run_cli(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return run_cli(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

} // namespace fitbot::cli
