#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "fitbot/emotion/model.hpp"
#include "fitbot/emotion/training.hpp"
#include "fitbot/emotion/types.hpp"
#include "fitbot/text.hpp"

namespace fitbot::emotion {

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    auto rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        auto row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols,
                                        const std::string& what) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
        throw FormatError(what + ": expected " + std::to_string(rows) + " rows");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw FormatError(what + ": expected " + std::to_string(cols) + " columns in row " + std::to_string(r));
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j, Eigen::Index size, const std::string& what) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != size)
        throw FormatError(what + ": expected " + std::to_string(size) + " entries");
    Eigen::VectorXd v(size);
    for (Eigen::Index i = 0; i < size; ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
    return v;
}

} // namespace detail

inline constexpr const char* kParamsFormat = "fitbot-emotion-params";

/// {"format", "version", "dims": {input_dim, hidden_dim, class_count},
///  "tensors": {name: nested row-major arrays (vectors flat)}}
inline nlohmann::json to_json(const ModelParams& p) {
    nlohmann::json tensors = nlohmann::json::object();
    p.for_each([&](std::string_view name, const auto& t) {
        using T = std::decay_t<decltype(t)>;
        if constexpr (T::ColsAtCompileTime == 1) {
            tensors[std::string(name)] = std::vector<double>(t.data(), t.data() + t.size());
        } else {
            tensors[std::string(name)] = detail::matrix_to_json(t);
        }
    });
    return {{"format", kParamsFormat},
            {"version", 1},
            {"dims", {{"input_dim", p.input_dim()}, {"hidden_dim", p.hidden_dim()}, {"class_count", p.class_count()}}},
            {"tensors", tensors}};
}

inline ModelParams params_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != kParamsFormat) throw FormatError("not a model parameter file");
        if (j.at("version").get<int>() != 1) throw FormatError("unsupported parameter file version");
        const auto& dims = j.at("dims");
        const auto D = dims.at("input_dim").get<Eigen::Index>();
        const auto H = dims.at("hidden_dim").get<Eigen::Index>();
        if (dims.at("class_count").get<std::size_t>() != kClassCount)
            throw FormatError("class_count must be " + std::to_string(kClassCount));
        if (D < 1 || H < 1) throw FormatError("dimensions must be positive");

        ModelParams p = ModelParams::zeros(D, H);
        const auto& tensors = j.at("tensors");
        p.for_each([&](std::string_view name, auto& t) {
            using T = std::decay_t<decltype(t)>;
            const std::string key(name);
            if constexpr (T::ColsAtCompileTime == 1) {
                t = detail::vector_from_json(tensors.at(key), t.size(), key);
            } else {
                t = detail::matrix_from_json(tensors.at(key), t.rows(), t.cols(), key);
            }
        });
        p.validate();
        return p;
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(std::string("malformed parameter JSON: ") + ex.what());
    } catch (const InvalidState& ex) {
        throw FormatError(std::string("parameter file: ") + ex.what());
    }
}

inline nlohmann::json to_json(const FrameSequence& seq) {
    return {{"utterance_id", seq.utterance_id},
            {"frame_hop_ms", seq.frame_hop_ms},
            {"frames", detail::matrix_to_json(seq.frames)}};
}

inline FrameSequence sequence_from_json(const nlohmann::json& j) {
    try {
        FrameSequence seq;
        seq.utterance_id = j.at("utterance_id").get<std::string>();
        seq.frame_hop_ms = j.at("frame_hop_ms").get<double>();
        const auto& frames = j.at("frames");
        if (!frames.is_array() || frames.empty()) throw FormatError("frames must be a non-empty array");
        const auto T = static_cast<Eigen::Index>(frames.size());
        const auto D = static_cast<Eigen::Index>(frames.front().size());
        if (D < 1) throw FormatError("frame dimension must be at least 1");
        seq.frames = detail::matrix_from_json(frames, T, D, "frames");
        if (!(seq.frame_hop_ms > 0.0)) throw FormatError("frame_hop_ms must be positive");
        return seq;
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(std::string("malformed frame sequence JSON: ") + ex.what());
    }
}

inline nlohmann::json to_json(const EmotionScore& score, const LabelNames& names = {}) {
    return {{"probabilities", score.probabilities},
            {"argmax", score.argmax.index()},
            {"label", names[score.argmax]}};
}

/// Dataset directory: one FrameSequence JSON per utterance plus labels.csv
/// ("utterance_id,label_index"). Entries come back in labels.csv order.
inline Dataset load_dataset(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw ConfigError("dataset directory not found: " + dir.string());

    std::map<std::string, FrameSequence> by_id;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        auto seq = sequence_from_json(nlohmann::json::parse(text::read_file(path.string()), nullptr, true));
        by_id.emplace(seq.utterance_id, std::move(seq));
    }

    const auto rows = text::lines(text::read_file((dir / "labels.csv").string()));
    if (rows.empty() || rows.front() != "utterance_id,label_index")
        throw FormatError("labels.csv must start with header 'utterance_id,label_index'");
    Dataset data;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].empty()) continue;
        const auto fields = text::split(rows[r]);
        if (fields.size() != 2) throw FormatError("labels.csv row " + std::to_string(r + 1) + " needs 2 fields");
        const auto it = by_id.find(fields[0]);
        if (it == by_id.end()) throw FormatError("labels.csv references unknown utterance '" + fields[0] + "'");
        const double index = text::parse_double(fields[1], "label_index");
        if (index < 0 || index != std::floor(index)) throw FormatError("label_index must be a non-negative integer");
        data.push_back({it->second, EmotionLabel(static_cast<std::size_t>(index))});
    }
    return data;
}

inline void save_dataset(const std::filesystem::path& dir, const Dataset& data) {
    std::filesystem::create_directories(dir);
    std::string labels = "utterance_id,label_index\n";
    for (const auto& item : data) {
        const auto& id = item.sequence.utterance_id;
        if (id.empty() || id.find_first_of("/\\,\n") != std::string::npos)
            throw InvalidArgument("utterance id '" + id + "' cannot name a dataset file");
        text::write_file((dir / (id + ".json")).string(), to_json(item.sequence).dump());
        labels += id + "," + std::to_string(item.label.index()) + "\n";
    }
    text::write_file((dir / "labels.csv").string(), labels);
}

} // namespace fitbot::emotion
